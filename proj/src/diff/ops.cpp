#include "numerate/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "numerate/errors.hpp"

namespace numerate::diff {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Array& a, const Array& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands recorded on different tapes");
  return *a.tape;
}

Array like(const Array& a) { return Array::matrix(a.rows(), a.cols()); }

// C (m x n) += A (m x k) * B (k x n)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C (m x n) += A (m x k) * B^T, B is (n x k)
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// C (k x n) += A^T * B, A is (m x k), B is (m x n)
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

// Elementwise op whose local derivative is a function of (x, y).
template <class F, class D>
Var unary(Var a, F f, D dydx) {
  const Array& x = a.value();
  Array y = like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(y), {a}, [ia, dydx](Tape& t, std::uint32_t self, const Array& g) {
    if (!t.requires_grad(ia)) return;
    const Array& xv = t.value(ia);
    const Array& yv = t.value(self);
    Array& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dydx(xv[i], yv[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void require_same(const char* op, const Array& a, const Array& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_mismatch(op, a, b);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) shape_mismatch("matmul", av, bv);
  Array c = Array::matrix(m, n);
  gemm_nn(av.data().data(), bv.data().data(), c.data().data(), m, k, n);
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(c), {a, b}, [ia, ib, m, k, n](Tape& tp, std::uint32_t, const Array& g) {
    if (tp.requires_grad(ia)) {
      gemm_nt(g.data().data(), tp.value(ib).data().data(), tp.grad(ia).data().data(), m, n, k);
    }
    if (tp.requires_grad(ib)) {
      gemm_tn(tp.value(ia).data().data(), g.data().data(), tp.grad(ib).data().data(), m, k, n);
    }
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  if (bv.cols() != k) shape_mismatch("matmul_nt", av, bv);
  Array c = Array::matrix(m, n);
  gemm_nt(av.data().data(), bv.data().data(), c.data().data(), m, k, n);
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(c), {a, b}, [ia, ib, m, k, n](Tape& tp, std::uint32_t, const Array& g) {
    // C = A B^T: dA = G B, dB = G^T A
    if (tp.requires_grad(ia)) {
      gemm_nn(g.data().data(), tp.value(ib).data().data(), tp.grad(ia).data().data(), m, n, k);
    }
    if (tp.requires_grad(ib)) {
      gemm_tn(g.data().data(), tp.value(ia).data().data(), tp.grad(ib).data().data(), m, n, k);
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  require_same("add", av, bv);
  Array c = av;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(c), {a, b}, [ia, ib](Tape& tp, std::uint32_t, const Array& g) {
    if (tp.requires_grad(ia)) tp.grad(ia).accumulate(g);
    if (tp.requires_grad(ib)) tp.grad(ib).accumulate(g);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Array& av = a.value();
  const Array& rv = row.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (rv.rows() != 1 || rv.cols() != n) shape_mismatch("add_row", av, rv);
  Array c = like(av);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = av(i, j) + rv[j];
  const std::uint32_t ia = a.id, ir = row.id;
  return t.push(std::move(c), {a, row}, [ia, ir, m, n](Tape& tp, std::uint32_t, const Array& g) {
    if (tp.requires_grad(ia)) tp.grad(ia).accumulate(g);
    if (tp.requires_grad(ir)) {
      Array& gr = tp.grad(ir);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  require_same("sub", av, bv);
  Array c = like(av);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = av[i] - bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(c), {a, b}, [ia, ib](Tape& tp, std::uint32_t, const Array& g) {
    if (tp.requires_grad(ia)) tp.grad(ia).accumulate(g);
    if (tp.requires_grad(ib)) {
      Array& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  require_same("mul", av, bv);
  Array c = like(av);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = av[i] * bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(c), {a, b}, [ia, ib](Tape& tp, std::uint32_t, const Array& g) {
    if (tp.requires_grad(ia)) {
      const Array& bv2 = tp.value(ib);
      Array& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (tp.requires_grad(ib)) {
      const Array& av2 = tp.value(ia);
      Array& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var transpose(Var a) {
  const Array& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Array c = Array::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c(j, i) = av(i, j);
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(c), {a}, [ia, m, n](Tape& tp, std::uint32_t, const Array& g) {
    if (!tp.requires_grad(ia)) return;
    Array& ga = tp.grad(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x))); },
      [](double x, double) {
        const double u = c * (x + k * x * x * x);
        const double th = std::tanh(u);
        const double du = c * (1.0 + 3.0 * k * x * x);
        return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
      });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a) {
  return unary(a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Var abs(Var a) {
  return unary(a, [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var normal_cdf(Var a) {
  return unary(
      a, [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); },
      [](double x, double) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); });
}

Var softmax(Var a) {
  const Array& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Array y = like(av);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = av(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, av(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (y(i, j) = std::exp(av(i, j) - mx));
    for (std::size_t j = 0; j < n; ++j) y(i, j) /= z;
  }
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(y), {a}, [ia, m, n](Tape& tp, std::uint32_t self, const Array& g) {
    if (!tp.requires_grad(ia)) return;
    const Array& yv = tp.value(self);
    Array& ga = tp.grad(ia);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * yv[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += yv[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Var log_softmax(Var a) {
  const Array& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Array y = like(av);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = av(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, av(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(av(i, j) - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) y(i, j) = av(i, j) - lz;
  }
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(y), {a}, [ia, m, n](Tape& tp, std::uint32_t self, const Array& g) {
    if (!tp.requires_grad(ia)) return;
    const Array& yv = tp.value(self);
    Array& ga = tp.grad(ia);
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += g[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] - std::exp(yv[i * n + j]) * gs;
    }
  });
}

Var logsumexp(Var a) {
  const Array& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Array y = Array::matrix(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, av(i, j));
    if (!std::isfinite(mx)) {
      y[i] = mx;
      continue;
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(av(i, j) - mx);
    y[i] = mx + std::log(z);
  }
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(y), {a}, [ia, m, n](Tape& tp, std::uint32_t self, const Array& g) {
    if (!tp.requires_grad(ia)) return;
    const Array& xv = tp.value(ia);
    const Array& yv = tp.value(self);
    Array& ga = tp.grad(ia);
    for (std::size_t i = 0; i < m; ++i) {
      if (!std::isfinite(yv[i])) continue;
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i] * std::exp(xv[i * n + j] - yv[i]);
    }
  });
}

Var sum(Var a) {
  const Array& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v;
  const std::uint32_t ia = a.id;
  return a.tape->push(Array::scalar(s), {a}, [ia](Tape& tp, std::uint32_t, const Array& g) {
    if (!tp.requires_grad(ia)) return;
    Array& ga = tp.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var layer_norm(Var a, Var gamma, Var beta, double eps) {
  Tape& t = tape_of(a, gamma);
  tape_of(a, beta);
  const Array& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (gamma.value().size() != n) shape_mismatch("layer_norm", av, gamma.value());
  if (beta.value().size() != n) shape_mismatch("layer_norm", av, beta.value());
  // Normalised activations and per-row inverse std are kept for the backward pass.
  Array xhat = like(av);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += av(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (av(i, j) - mean) * (av(i, j) - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) xhat(i, j) = (av(i, j) - mean) * inv_std[i];
  }
  const Array& gv = gamma.value();
  const Array& bv = beta.value();
  Array y = like(av);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y(i, j) = xhat(i, j) * gv[j] + bv[j];
  const std::uint32_t ia = a.id, ig = gamma.id, ib = beta.id;
  return t.push(std::move(y), {a, gamma, beta},
                [ia, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Tape& tp, std::uint32_t, const Array& g) {
                  const Array& gv2 = tp.value(ig);
                  if (tp.requires_grad(ig)) {
                    Array& gg = tp.grad(ig);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
                  }
                  if (tp.requires_grad(ib)) {
                    Array& gb = tp.grad(ib);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                  }
                  if (tp.requires_grad(ia)) {
                    Array& ga = tp.grad(ia);
                    const double dn = static_cast<double>(n);
                    for (std::size_t i = 0; i < m; ++i) {
                      double s1 = 0.0, s2 = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double dxh = g[i * n + j] * gv2[j];
                        s1 += dxh;
                        s2 += dxh * xhat[i * n + j];
                      }
                      for (std::size_t j = 0; j < n; ++j) {
                        const double dxh = g[i * n + j] * gv2[j];
                        ga[i * n + j] += inv_std[i] * (dxh - s1 / dn - xhat[i * n + j] * s2 / dn);
                      }
                    }
                  }
                });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  const Array& tv = table.value();
  const std::size_t rows = tv.rows(), n = tv.cols();
  Array y = Array::matrix(ids.size(), n);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == kZeroRow) continue;
    if (ids[i] >= rows) {
      throw ShapeError("gather_rows: index " + std::to_string(ids[i]) + " out of range for table " +
                       tv.shape_string());
    }
    std::copy_n(tv.data().begin() + static_cast<std::ptrdiff_t>(ids[i] * n), n,
                y.data().begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  const std::uint32_t it = table.id;
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  return table.tape->push(std::move(y), {table},
                          [it, n, idv = std::move(idv)](Tape& tp, std::uint32_t, const Array& g) {
                            if (!tp.requires_grad(it)) return;
                            Array& gt = tp.grad(it);
                            for (std::size_t i = 0; i < idv.size(); ++i) {
                              if (idv[i] == kZeroRow) continue;
                              for (std::size_t j = 0; j < n; ++j) gt[idv[i] * n + j] += g[i * n + j];
                            }
                          });
}

Var element(Var a, std::size_t r, std::size_t c) {
  const Array& av = a.value();
  if (r >= av.rows() || c >= av.cols()) {
    throw ShapeError("element (" + std::to_string(r) + "," + std::to_string(c) +
                     ") out of range for " + av.shape_string());
  }
  const std::size_t n = av.cols();
  const std::uint32_t ia = a.id;
  return a.tape->push(Array::scalar(av(r, c)), {a}, [ia, r, c, n](Tape& tp, std::uint32_t, const Array& g) {
    if (tp.requires_grad(ia)) tp.grad(ia)[r * n + c] += g[0];
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  const Array& av = a.value();
  const std::size_t n = av.cols();
  if (start + count > av.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(start) + "," + std::to_string(start + count) +
                     ") out of range for " + av.shape_string());
  }
  Array y = Array::matrix(count, n);
  std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>(start * n), count * n, y.data().begin());
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(y), {a}, [ia, start, count, n](Tape& tp, std::uint32_t, const Array& g) {
    if (!tp.requires_grad(ia)) return;
    Array& ga = tp.grad(ia);
    for (std::size_t i = 0; i < count * n; ++i) ga[start * n + i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const Array& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (start + count > n) {
    throw ShapeError("slice_cols [" + std::to_string(start) + "," + std::to_string(start + count) +
                     ") out of range for " + av.shape_string());
  }
  Array y = Array::matrix(m, count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) y(i, j) = av(i, start + j);
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(y), {a}, [ia, start, count, m, n](Tape& tp, std::uint32_t, const Array& g) {
    if (!tp.requires_grad(ia)) return;
    Array& ga = tp.grad(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) ga[i * n + start + j] += g[i * count + j];
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  const std::size_t m = av.rows(), na = av.cols(), nb = bv.cols();
  if (bv.rows() != m) shape_mismatch("concat_cols", av, bv);
  Array y = Array::matrix(m, na + nb);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) y(i, j) = av(i, j);
    for (std::size_t j = 0; j < nb; ++j) y(i, na + j) = bv(i, j);
  }
  const std::uint32_t ia = a.id, ib = b.id;
  return t.push(std::move(y), {a, b}, [ia, ib, m, na, nb](Tape& tp, std::uint32_t, const Array& g) {
    const std::size_t n = na + nb;
    if (tp.requires_grad(ia)) {
      Array& ga = tp.grad(ia);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < na; ++j) ga[i * na + j] += g[i * n + j];
    }
    if (tp.requires_grad(ib)) {
      Array& gb = tp.grad(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nb; ++j) gb[i * nb + j] += g[i * n + na + j];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Tape& t = *parts[0].tape;
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (p.tape != &t) throw std::invalid_argument("operands recorded on different tapes");
    if (p.cols() != n) shape_mismatch("concat_rows", parts[0].value(), p.value());
    ids.push_back(p.id);
    offsets.push_back(m);
    m += p.rows();
  }
  Array y = Array::matrix(m, n);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Array& pv = parts[k].value();
    std::copy(pv.data().begin(), pv.data().end(),
              y.data().begin() + static_cast<std::ptrdiff_t>(offsets[k] * n));
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return t.push(std::move(y), parents,
                [ids = std::move(ids), offsets = std::move(offsets), n](Tape& tp, std::uint32_t,
                                                                        const Array& g) {
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (!tp.requires_grad(ids[k])) continue;
                    Array& gk = tp.grad(ids[k]);
                    for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[offsets[k] * n + i];
                  }
                });
}

Var place_rows(Tape& tape, std::size_t rows, std::size_t cols,
               const std::vector<std::pair<std::size_t, Var>>& placed) {
  Array y = Array::matrix(rows, cols);
  std::vector<Var> parents;
  std::vector<std::pair<std::size_t, std::uint32_t>> where;
  for (const auto& [r, v] : placed) {
    if (v.tape != &tape) throw std::invalid_argument("operands recorded on different tapes");
    if (r >= rows || v.rows() != 1 || v.cols() != cols) {
      throw ShapeError("place_rows: cannot place " + v.value().shape_string() + " at row " +
                       std::to_string(r) + " of (" + std::to_string(rows) + "x" +
                       std::to_string(cols) + ")");
    }
    const Array& vv = v.value();
    for (std::size_t j = 0; j < cols; ++j) y(r, j) += vv[j];
    parents.push_back(v);
    where.emplace_back(r, v.id);
  }
  return tape.push(std::move(y), parents,
                   [where = std::move(where), cols](Tape& tp, std::uint32_t, const Array& g) {
                     for (const auto& [r, id] : where) {
                       if (!tp.requires_grad(id)) continue;
                       Array& gv = tp.grad(id);
                       for (std::size_t j = 0; j < cols; ++j) gv[j] += g[r * cols + j];
                     }
                   });
}

Var dropout(Var a, double keep_prob, Rng& rng) {
  if (keep_prob <= 0.0 || keep_prob > 1.0) {
    throw std::invalid_argument("dropout keep probability must be in (0, 1]");
  }
  if (a.tape->mode() == Mode::Eval || keep_prob == 1.0) return a;
  const Array& av = a.value();
  Array mask = like(av);
  std::bernoulli_distribution keep(keep_prob);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? 1.0 / keep_prob : 0.0;
  Array y = like(av);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * mask[i];
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(y), {a}, [ia, mask = std::move(mask)](Tape& tp, std::uint32_t, const Array& g) {
    if (!tp.requires_grad(ia)) return;
    Array& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

}  // namespace numerate::diff
