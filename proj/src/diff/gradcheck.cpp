#include "numerate/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "numerate/rng.hpp"

namespace numerate::diff {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " checked=" << checked << " max_rel_error=" << max_rel_error;
  if (checked > 0) {
    os << " worst=" << worst.param << "[" << worst.index << "] analytic=" << worst.analytic
       << " numeric=" << worst.numeric;
  }
  return os.str();
}

GradCheckReport finite_diff_check(const LossBuilder& loss_fn, const std::vector<Parameter*>& params,
                                  const GradCheckOptions& opts) {
  if (!(opts.h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  for (Parameter* p : params) p->grad = Array::zeros_like(p->value);
  {
    Tape tape(Mode::Train);
    Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto eval = [&]() {
    Tape tape(Mode::Train, false);
    return loss_fn(tape).item();
  };

  GradCheckReport report;
  Rng rng(mix_seed(opts.seed, 0x6772616463686bULL));
  for (Parameter* p : params) {
    std::vector<std::size_t> idx(p->value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opts.max_per_param > 0 && idx.size() > opts.max_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opts.max_per_param);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const double x0 = p->value[i];
      p->value[i] = x0 + opts.h;
      const double fp = eval();
      p->value[i] = x0 - opts.h;
      const double fm = eval();
      p->value[i] = x0;
      const double numeric = (fp - fm) / (2.0 * opts.h);
      const double analytic = p->grad[i];
      const double denom = std::max({std::fabs(analytic), std::fabs(numeric), opts.floor});
      const double rel = std::fabs(analytic - numeric) / denom;
      GradCheckEntry e{p->name, i, analytic, numeric, rel};
      ++report.checked;
      if (!(rel <= opts.tol)) {
        report.passed = false;
        report.failures.push_back(e);
      }
      if (report.checked == 1 || !(rel <= report.max_rel_error)) {
        report.max_rel_error = rel;
        report.worst = e;
      }
    }
  }
  return report;
}

}  // namespace numerate::diff
