#include "numerate/nn.hpp"

#include <cmath>

namespace numerate::nn {

Array uniform_array(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Array a = Array::matrix(rows, cols);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : a.data()) v = u(rng);
  return a;
}

Array normal_array(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Array a = Array::matrix(rows, cols);
  std::normal_distribution<double> n(0.0, stddev);
  for (double& v : a.data()) v = n(rng);
  return a;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, int group,
               Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = &store.add(name + ".W", uniform_array(in, out, bound, rng), group);
  bias = &store.add(name + ".b", uniform_array(1, out, bound, rng), group);
}

Var Linear::operator()(Tape& tape, Var x) const {
  return diff::add_row(diff::matmul(x, tape.param(*weight)), tape.param(*bias));
}

}  // namespace numerate::nn
