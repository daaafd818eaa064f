#include "numerate/heads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "numerate/errors.hpp"

namespace numerate::heads {

using namespace diff;

namespace {

const double kSoftplusInvOne = std::log(std::expm1(1.0));
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Var reciprocal(Var x) { return exp(neg(log(x))); }

// 0.1 + 9.9 sigmoid(x): the [0.1, 10] range map for flow parameters.
Var range_map(Var x) { return add_scalar(scale(sigmoid(x), 9.9), 0.1); }

double median_log(std::span<const double> pool) {
  std::vector<double> logs;
  logs.reserve(pool.size());
  for (double v : pool) {
    if (v > 0) logs.push_back(std::log(v));
  }
  if (logs.empty()) return 0.0;
  auto mid = logs.begin() + static_cast<std::ptrdiff_t>(logs.size() / 2);
  std::nth_element(logs.begin(), mid, logs.end());
  return *mid;
}

std::vector<double> row_values(const Var& v) {
  const auto d = v.value().data();
  return {d.begin(), d.end()};
}

}  // namespace

const char* head_name(HeadKind k) noexcept {
  switch (k) {
    case HeadKind::LogLP: return "loglp";
    case HeadKind::FlowLP: return "flowlp";
    case HeadKind::DExp: return "dexp";
    case HeadKind::Gmm: return "gmm";
    case HeadKind::Disc: return "disc";
  }
  return "?";
}

HeadKind parse_head(std::string_view s) {
  if (s == "loglp") return HeadKind::LogLP;
  if (s == "flowlp") return HeadKind::FlowLP;
  if (s == "dexp") return HeadKind::DExp;
  if (s == "gmm") return HeadKind::Gmm;
  if (s == "disc") return HeadKind::Disc;
  throw std::invalid_argument("unknown head: " + std::string(s));
}

std::size_t argmax_lowest(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

Var bce_with_logit(Var logit, double label) {
  // softplus(l) - label * l
  Var sp = softplus(logit);
  return label == 0.0 ? sp : sp - scale(logit, label);
}

// ---------------------------------------------------------------- EM

std::vector<double> fit_space(std::span<const double> values, bool log_space) {
  std::vector<double> xs(values.begin(), values.end());
  if (log_space) {
    for (double& x : xs) {
      if (!(x > 0)) throw std::invalid_argument("log-space EM needs positive values");
      x = std::log10(x);
    }
  }
  return xs;
}

double gmm_loglik(std::span<const double> xs, const GmmComponents& c) {
  const std::size_t K = c.k();
  std::vector<double> lw(K), ls(K);
  for (std::size_t k = 0; k < K; ++k) {
    lw[k] = std::log(c.weights[k]);
    ls[k] = std::log(c.sigmas[k]);
  }
  double total = 0.0;
  std::vector<double> t(K);
  for (double x : xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double u = (x - c.means[k]) / c.sigmas[k];
      t[k] = lw[k] - 0.5 * u * u - kHalfLog2Pi - ls[k];
      m = std::max(m, t[k]);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) acc += std::exp(t[k] - m);
    total += m + std::log(acc);
  }
  return total;
}

double em_step(std::span<const double> xs, GmmComponents& c, double var_floor) {
  const std::size_t K = c.k();
  std::vector<double> lw(K), ls(K), nk(K, 0.0), s1(K, 0.0), s2(K, 0.0), t(K);
  for (std::size_t k = 0; k < K; ++k) {
    lw[k] = std::log(c.weights[k]);
    ls[k] = std::log(c.sigmas[k]);
  }
  double total = 0.0;
  for (double x : xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double u = (x - c.means[k]) / c.sigmas[k];
      t[k] = lw[k] - 0.5 * u * u - kHalfLog2Pi - ls[k];
      m = std::max(m, t[k]);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      t[k] = std::exp(t[k] - m);
      acc += t[k];
    }
    total += m + std::log(acc);
    for (std::size_t k = 0; k < K; ++k) {
      const double r = t[k] / acc;
      const double d = x - c.means[k];  // shifted by the old mean for stability
      nk[k] += r;
      s1[k] += r * d;
      s2[k] += r * d * d;
    }
  }
  const auto n = static_cast<double>(xs.size());
  for (std::size_t k = 0; k < K; ++k) {
    c.weights[k] = nk[k] / n;
    if (nk[k] < 1e-12) continue;  // dead component keeps its shape
    const double shift = s1[k] / nk[k];
    const double var = std::max(s2[k] / nk[k] - shift * shift, var_floor);
    c.means[k] += shift;
    c.sigmas[k] = std::sqrt(var);
  }
  return total;
}

EmResult gmm_pretrain_em(std::span<const double> values, const EmConfig& cfg) {
  if (values.empty()) throw std::invalid_argument("EM needs at least one value");
  if (cfg.k == 0) throw std::invalid_argument("EM needs k >= 1");
  std::vector<double> xs = fit_space(values, cfg.log_space);
  if (xs.size() > cfg.max_points) {
    Rng rng(mix_seed(cfg.seed, 0xe3));
    for (std::size_t i = 0; i < cfg.max_points; ++i) std::swap(xs[i], xs[i + uniform_index(rng, xs.size() - i)]);
    xs.resize(cfg.max_points);
  }
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (cfg.k > distinct.size()) {
    throw std::invalid_argument("EM with k=" + std::to_string(cfg.k) + " needs at least as many distinct values, got " +
                                std::to_string(distinct.size()));
  }
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var = std::max(var / static_cast<double>(xs.size()), cfg.var_floor);

  EmResult res;
  GmmComponents& c = res.components;
  c.log_space = cfg.log_space;
  const std::size_t K = cfg.k;
  for (std::size_t k = 0; k < K; ++k) {
    // Evenly spaced ranks over the distinct values.
    const auto idx = static_cast<std::size_t>((static_cast<double>(k) + 0.5) * static_cast<double>(distinct.size()) /
                                              static_cast<double>(K));
    c.means.push_back(distinct[std::min(idx, distinct.size() - 1)]);
    c.sigmas.push_back(std::sqrt(var) / static_cast<double>(K));
    c.weights.push_back(1.0 / static_cast<double>(K));
  }
  for (double& s : c.sigmas) s = std::max(s, std::sqrt(cfg.var_floor));
  for (std::size_t it = 0; it < cfg.iters; ++it) res.loglik.push_back(em_step(xs, c, cfg.var_floor));
  res.loglik.push_back(gmm_loglik(xs, c));
  return res;
}

// ---------------------------------------------------------------- Head

Density Head::density(Tape&, Var) const {
  throw std::logic_error(std::string(head_name(kind())) + " head has no density");
}

void Head::prepare(std::span<const double>) {}

// ---------------------------------------------------------------- LogLP

LogLpHead::LogLpHead(ParameterStore& store, std::size_t in, Rng& rng)
    : mu_(store, "head.loglp.mu", in, 1, encoder::kHeadGroup, rng) {
  scale_ = &store.add("head.loglp.scale", Array::scalar(kSoftplusInvOne), encoder::kHeadGroup);
}

void LogLpHead::prepare(std::span<const double> pool) { mu_.bias->value[0] = median_log(pool); }

Var LogLpHead::loss(Tape& tape, Var h, double y, Rng&) const {
  if (!(y > 0)) throw RangeError("log-Laplace target must be positive");
  const double z = std::log(y);
  Var mu = mu_(tape, h);
  Var s = softplus(tape.param(*scale_));
  Var nll = log(scale(s, 2.0)) + abs(add_scalar(mu, -z)) * reciprocal(s);
  return add_scalar(nll, z);
}

Density LogLpHead::density(Tape& tape, Var h) const {
  LogLaplace d;
  d.mu = mu_(tape, h).item();
  d.s = softplus(tape.param(*scale_)).item();
  return Density(d);
}

// ---------------------------------------------------------------- FlowLP

FlowLpHead::FlowLpHead(ParameterStore& store, std::size_t in, Rng& rng)
    : mu_(store, "head.flow.mu", in, 1, encoder::kHeadGroup, rng),
      a_(store, "head.flow.a", in, 1, encoder::kHeadGroup, rng),
      b_(store, "head.flow.b", in, 1, encoder::kHeadGroup, rng),
      c_(store, "head.flow.c", in, 1, encoder::kHeadGroup, rng) {
  scale_ = &store.add("head.flow.scale", Array::scalar(kSoftplusInvOne), encoder::kHeadGroup);
}

void FlowLpHead::prepare(std::span<const double> pool) {
  // Start near the log-Laplace special case: a ~ 0, b = c = 1.
  mu_.bias->value[0] = median_log(pool);
  a_.bias->value[0] = -5.0;
  b_.bias->value[0] = -std::log(10.0);
  c_.bias->value[0] = -std::log(10.0);
}

FlowLpHead::Params FlowLpHead::params(Tape& tape, Var h) const {
  return {mu_(tape, h), softplus(tape.param(*scale_)), softplus(a_(tape, h)), range_map(b_(tape, h)),
          range_map(c_(tape, h))};
}

Var FlowLpHead::loss(Tape& tape, Var h, double y, Rng&) const {
  const Params p = params(tape, h);
  if (!(y + p.a.item() > 0)) throw RangeError("flow target below the support");
  Var lya = log(add_scalar(p.a, y));
  Var z = p.c * (log(p.b) + lya);
  Var nll = log(scale(p.s, 2.0)) + abs(z - p.mu) * reciprocal(p.s);
  return nll - log(p.c) + lya;
}

Density FlowLpHead::density(Tape& tape, Var h) const {
  const Params p = params(tape, h);
  FlowLaplace d;
  d.mu = p.mu.item();
  d.s = p.s.item();
  d.a = p.a.item();
  d.b = p.b.item();
  d.c = p.c.item();
  return Density(d);
}

// ---------------------------------------------------------------- DExp

DExpHead::DExpHead(ParameterStore& store, std::size_t in, std::size_t hidden, Rng& rng)
    : pi_(store, "head.dexp.pi", in, kDecades, encoder::kHeadGroup, rng),
      m1_(store, "head.dexp.m1", in, hidden, encoder::kHeadGroup, rng),
      m2_(store, "head.dexp.m2", hidden, kDecades, encoder::kHeadGroup, rng) {
  sigma_ = &store.add("head.dexp.sigma", Array::matrix(1, kDecades, 0.25), encoder::kHeadGroup);
}

void DExpHead::prepare(std::span<const double> pool) {
  // Exponent logits start at the smoothed training frequencies.
  std::array<double, kDecades> counts{};
  std::size_t n = 0;
  for (double v : pool) {
    if (v < text::kMinValue || v > text::kMaxValue) continue;
    counts[static_cast<std::size_t>(text::decompose(v).exponent - 1)] += 1.0;
    ++n;
  }
  for (std::size_t j = 0; j < kDecades; ++j) {
    pi_.bias->value[j] = std::log((counts[j] + 1.0) / (static_cast<double>(n) + kDecades));
  }
}

Var DExpHead::log_pi(Tape& tape, Var h) const { return log_softmax(pi_(tape, h)); }

Var DExpHead::mantissa_means(Tape& tape, Var h) const {
  return add_scalar(scale(sigmoid(m2_(tape, tanh(m1_(tape, h)))), 0.9), 0.1);
}

Var DExpHead::sigmas(Tape& tape) const { return clamp(tape.param(*sigma_), 0.01, 1.0); }

Var DExpHead::loss(Tape& tape, Var h, double y, Rng&) const {
  const auto [e, m] = text::decompose(y);
  const auto j = static_cast<std::size_t>(e - 1);
  Var lp = element(log_pi(tape, h), 0, j);
  Var mu = element(mantissa_means(tape, h), 0, j);
  Var sg = element(sigmas(tape), 0, j);
  Var inv = reciprocal(sg);
  Var u = add_scalar(neg(mu), m) * inv;
  Var log_phi = add_scalar(scale(square(u), -0.5), -kHalfLog2Pi) - log(sg);
  Var z = normal_cdf(add_scalar(neg(mu), 1.0) * inv) - normal_cdf(add_scalar(neg(mu), 0.1) * inv);
  return neg(lp + log_phi - log(z));
}

Density DExpHead::density(Tape& tape, Var h) const {
  DiscreteExponent d;
  const auto lp = row_values(log_pi(tape, h));
  const auto mu = row_values(mantissa_means(tape, h));
  const auto sg = row_values(sigmas(tape));
  std::copy(lp.begin(), lp.end(), d.log_pi.begin());
  std::copy(mu.begin(), mu.end(), d.mu_m.begin());
  std::copy(sg.begin(), sg.end(), d.sigma.begin());
  return Density(d);
}

// ---------------------------------------------------------------- GMM

GmmHead::GmmHead(ParameterStore& store, std::size_t in, EmConfig em, Rng& rng)
    : weights_(store, "head.gmm.weights", in, em.k, encoder::kHeadGroup, rng), em_(em) {}

void GmmHead::set_components(GmmComponents c) {
  if (c.k() != em_.k) {
    throw ShapeError("GMM head built for k=" + std::to_string(em_.k) + ", components have k=" +
                     std::to_string(c.k()));
  }
  components_ = std::move(c);
}

void GmmHead::prepare(std::span<const double> pool) {
  EmResult res = gmm_pretrain_em(pool, em_);
  trace_ = res.loglik;
  for (std::size_t k = 0; k < em_.k; ++k) {
    weights_.bias->value[k] = std::log(std::max(res.components.weights[k], 1e-8));
  }
  set_components(std::move(res.components));
}

Var GmmHead::loss(Tape& tape, Var h, double y, Rng&) const {
  if (!components_) throw std::logic_error("GMM components are not fitted");
  const auto& c = *components_;
  double t = y;
  double log_jac = 0.0;
  if (c.log_space) {
    if (!(y > 0)) throw RangeError("log-space GMM target must be positive");
    t = std::log10(y);
    log_jac = -std::log(y * kLn10);
  }
  Array comp = Array::matrix(1, c.k());
  for (std::size_t k = 0; k < c.k(); ++k) {
    const double u = (t - c.means[k]) / c.sigmas[k];
    comp[k] = -0.5 * u * u - kHalfLog2Pi - std::log(c.sigmas[k]);
  }
  Var joint = log_softmax(weights_(tape, h)) + tape.constant(std::move(comp));
  return add_scalar(neg(logsumexp(joint)), -log_jac);
}

Density GmmHead::density(Tape& tape, Var h) const {
  if (!components_) throw std::logic_error("GMM components are not fitted");
  GaussianMixture d;
  d.log_space = components_->log_space;
  d.log_w = row_values(log_softmax(weights_(tape, h)));
  d.means = components_->means;
  d.sigmas = components_->sigmas;
  return Density(d);
}

// ---------------------------------------------------------------- Disc

DiscHead::DiscHead(ParameterStore& store, std::size_t in, std::size_t hidden,
                   const encoder::InputEmbedder& embedder, Rng& rng)
    : l1_(store, "head.disc.l1", in + embedder.dim(), hidden, encoder::kHeadGroup, rng),
      l2_(store, "head.disc.l2", hidden, 1, encoder::kHeadGroup, rng),
      embedder_(&embedder) {
  if (embedder.mode() == encoder::NumericEmbedder::None) {
    throw std::invalid_argument("the discriminative head needs a numeric embedder");
  }
}

void DiscHead::prepare(std::span<const double> pool) { pool_.assign(pool.begin(), pool.end()); }

Var DiscHead::score_embedded(Tape& tape, Var h, Var candidate_embeddings) const {
  const std::size_t n = candidate_embeddings.rows();
  Var rep = matmul(tape.constant(Array::matrix(n, 1, 1.0)), h);
  return l2_(tape, tanh(l1_(tape, concat_cols(rep, candidate_embeddings))));
}

Var DiscHead::score(Tape& tape, Var h, std::span<const double> candidates) const {
  return score_embedded(tape, h, embedder_->numeric(tape, candidates));
}

Var DiscHead::loss(Tape& tape, Var h, double y, Rng& rng) const {
  if (pool_.empty()) throw std::logic_error("discriminative head has no negative pool");
  double neg_value = pool_[uniform_index(rng, pool_.size())];
  for (int tries = 0; tries < 10 && neg_value == y; ++tries) neg_value = pool_[uniform_index(rng, pool_.size())];
  const std::array<double, 2> cands = {y, neg_value};
  Var logits = score(tape, h, cands);
  return bce_with_logit(element(logits, 0, 0), 1.0) + bce_with_logit(element(logits, 1, 0), 0.0);
}

int DiscHead::predict_exponent(Tape& tape, Var h) const {
  if (embedder_->mode() != encoder::NumericEmbedder::Exponent) {
    throw std::logic_error("exponent prediction needs the exponent embedder");
  }
  const auto scores = row_values(score_embedded(tape, h, embedder_->exponent_table(tape)));
  return static_cast<int>(argmax_lowest(scores));
}

std::unique_ptr<Head> make_head(ParameterStore& store, const HeadConfig& cfg, std::size_t in,
                                const encoder::InputEmbedder& embedder, Rng& rng) {
  switch (cfg.kind) {
    case HeadKind::LogLP: return std::make_unique<LogLpHead>(store, in, rng);
    case HeadKind::FlowLP: return std::make_unique<FlowLpHead>(store, in, rng);
    case HeadKind::DExp: return std::make_unique<DExpHead>(store, in, cfg.mlp_hidden, rng);
    case HeadKind::Gmm: return std::make_unique<GmmHead>(store, in, cfg.em, rng);
    case HeadKind::Disc: return std::make_unique<DiscHead>(store, in, cfg.mlp_hidden, embedder, rng);
  }
  throw std::invalid_argument("unknown head kind");
}

}  // namespace numerate::heads
