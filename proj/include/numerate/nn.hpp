#pragma once

#include <string>

#include "numerate/diff/ops.hpp"
#include "numerate/diff/tape.hpp"
#include "numerate/rng.hpp"

// Small building blocks shared by the encoders and heads.
namespace numerate::nn {

using diff::Array;
using diff::Parameter;
using diff::ParameterStore;
using diff::Tape;
using diff::Var;

Array uniform_array(std::size_t rows, std::size_t cols, double bound, Rng& rng);
Array normal_array(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

// y = x W + b, W: in x out, b: 1 x out. Default init U(-1/sqrt(in), 1/sqrt(in)).
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, int group, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  std::size_t in() const { return weight->value.rows(); }
  std::size_t out() const { return weight->value.cols(); }
};

}  // namespace numerate::nn
