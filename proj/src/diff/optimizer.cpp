#include "numerate/diff/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "numerate/errors.hpp"

namespace numerate::diff {

double global_grad_norm(const ParameterStore& store) {
  double s = 0.0;
  for (const Parameter* p : store.all())
    for (double g : p->grad.data()) s += g * g;
  return std::sqrt(s);
}

Optimizer::Optimizer(ParameterStore& store, OptimizerConfig cfg) : store_(&store), cfg_(std::move(cfg)) {
  if (cfg_.group_lr.empty()) throw std::invalid_argument("optimizer needs at least one learning rate");
  for (double lr : cfg_.group_lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  }
  for (const Parameter* p : store.all()) {
    if (p->group < 0 || static_cast<std::size_t>(p->group) >= cfg_.group_lr.size()) {
      throw std::invalid_argument("parameter " + p->name + " has no learning rate for group " +
                                  std::to_string(p->group));
    }
    m_.push_back(Array::zeros_like(p->value));
    v_.push_back(Array::zeros_like(p->value));
  }
}

double Optimizer::step() {
  auto params = store_->all();
  if (params.size() != m_.size()) throw std::logic_error("parameter store changed after optimizer creation");
  const double norm = global_grad_norm(*store_);
  if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
  const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    const double lr = cfg_.group_lr[static_cast<std::size_t>(p.group)];
    if (cfg_.kind == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * clip * p.grad[i];
    } else {
      Array& m = m_[k];
      Array& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = clip * p.grad[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        p.value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      }
    }
    p.grad.fill(0.0);
  }
  return norm;
}

}  // namespace numerate::diff
