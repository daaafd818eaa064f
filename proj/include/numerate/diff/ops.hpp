#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "numerate/diff/tape.hpp"
#include "numerate/rng.hpp"

// Differentiable primitives. Every op takes its operands by handle, checks
// shapes eagerly (ShapeError naming both shapes) and records a backward
// closure on the operands' tape.
namespace numerate::diff {

inline constexpr std::size_t kZeroRow = std::numeric_limits<std::size_t>::max();

// Linear algebra and elementwise arithmetic.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var add_row(Var a, Var row);  // row (1 x n) added to every row of a (m x n)
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
Var transpose(Var a);

// Pointwise nonlinearities.
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var gelu(Var a);  // tanh approximation
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var abs(Var a);  // subgradient sign(0) = 0
Var square(Var a);
Var clamp(Var a, double lo, double hi);  // zero gradient where clamped
Var normal_cdf(Var a);

// Row-wise reductions and normalisers.
Var softmax(Var a);
Var log_softmax(Var a);
Var logsumexp(Var a);  // (m x n) -> (m x 1)
Var sum(Var a);        // -> (1 x 1)
Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5);

// Indexing and assembly.
Var gather_rows(Var table, std::span<const std::size_t> ids);  // kZeroRow yields zeros
Var element(Var a, std::size_t r, std::size_t c);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var concat_cols(Var a, Var b);
Var concat_rows(std::span<const Var> parts);
// A (rows x cols) array that is zero except where `placed` puts 1 x cols rows.
Var place_rows(Tape& tape, std::size_t rows, std::size_t cols,
               const std::vector<std::pair<std::size_t, Var>>& placed);

// Inverted dropout; identity when the tape is in eval mode or keep_prob == 1.
Var dropout(Var a, double keep_prob, Rng& rng);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace numerate::diff
