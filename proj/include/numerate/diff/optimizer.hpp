#pragma once

#include <vector>

#include "numerate/diff/tape.hpp"

namespace numerate::diff {

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  // Learning rate per parameter group; group ids index this vector.
  std::vector<double> group_lr{1e-3};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global L2 norm; <= 0 disables clipping
};

class Optimizer {
 public:
  Optimizer(ParameterStore& store, OptimizerConfig cfg);

  // Clips, applies one update from the accumulated gradients and zeroes them.
  // Returns the gradient norm before clipping.
  double step();
  long steps() const noexcept { return t_; }

 private:
  ParameterStore* store_;
  OptimizerConfig cfg_;
  std::vector<Array> m_;
  std::vector<Array> v_;
  long t_ = 0;
};

double global_grad_norm(const ParameterStore& store);

}  // namespace numerate::diff
