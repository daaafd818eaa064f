#include "numerate/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace numerate::heads {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double laplace_log_density(double z, double mu, double s) { return -std::log(2.0 * s) - std::abs(z - mu) / s; }

double laplace_sample(double mu, double s, Rng& rng) {
  // Inverse CDF on u in (-1/2, 1/2).
  double u = uniform01(rng) - 0.5;
  while (std::abs(u) >= 0.5) u = uniform01(rng) - 0.5;
  return mu - s * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
}

double logsumexp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

// Exponent index (e - 1) and clipped mantissa for any positive y.
std::pair<int, double> clipped_decomposition(double y) {
  int e = static_cast<int>(std::floor(std::log10(y))) + 1;
  if (y >= text::kMinValue && y <= text::kMaxValue) e = text::exponent_row(y) + 1;
  e = std::clamp(e, 1, static_cast<int>(kDecades));
  const double m = std::clamp(y / text::pow10(e), 0.1, 1.0);
  return {e, m};
}

}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_std_normal_pdf(double x) { return -0.5 * x * x - kHalfLog2Pi; }

double laplace_cdf(double x, double mu, double s) {
  const double u = (x - mu) / s;
  return u < 0 ? 0.5 * std::exp(u) : 1.0 - 0.5 * std::exp(-u);
}

double truncnormal_log_density(double m, double mu, double sigma, double lo, double hi) {
  if (m < lo || m > hi) return kNegInf;
  const double z = std_normal_cdf((hi - mu) / sigma) - std_normal_cdf((lo - mu) / sigma);
  return log_std_normal_pdf((m - mu) / sigma) - std::log(sigma) - std::log(z);
}

double FlowLaplace::inverse(double y) const { return c * std::log(b * (y + a)); }

double FlowLaplace::forward(double z) const { return std::exp(z / c) / b - a; }

double clamp_value(double y) {
  if (std::isnan(y)) return text::kMinValue;
  return std::clamp(y, text::kMinValue, text::kMaxValue);
}

double Density::log_density(double y) const {
  return std::visit(
      [y](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, LogLaplace>) {
          if (!(y > 0)) return kNegInf;
          const double z = std::log(y);
          return laplace_log_density(z, d.mu, d.s) - z;
        } else if constexpr (std::is_same_v<T, FlowLaplace>) {
          if (!(y > -d.a)) return kNegInf;
          const double lya = std::log(y + d.a);
          const double z = d.c * (std::log(d.b) + lya);
          return laplace_log_density(z, d.mu, d.s) + std::log(d.c) - lya;
        } else if constexpr (std::is_same_v<T, DiscreteExponent>) {
          if (!(y > 0)) return kNegInf;
          const auto [e, m] = clipped_decomposition(y);
          const auto j = static_cast<std::size_t>(e - 1);
          return d.log_pi[j] + truncnormal_log_density(m, d.mu_m[j], d.sigma[j]) - e * kLn10;
        } else {
          double t = y;
          double jac = 0.0;
          if (d.log_space) {
            if (!(y > 0)) return kNegInf;
            t = std::log10(y);
            jac = -std::log(y * kLn10);
          }
          std::vector<double> terms(d.means.size());
          for (std::size_t k = 0; k < terms.size(); ++k) {
            terms[k] = d.log_w[k] + log_std_normal_pdf((t - d.means[k]) / d.sigmas[k]) - std::log(d.sigmas[k]);
          }
          return logsumexp(terms) + jac;
        }
      },
      v_);
}

double Density::cdf(double y) const {
  return std::visit(
      [y](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, LogLaplace>) {
          return y > 0 ? laplace_cdf(std::log(y), d.mu, d.s) : 0.0;
        } else if constexpr (std::is_same_v<T, FlowLaplace>) {
          return y > -d.a ? laplace_cdf(d.inverse(y), d.mu, d.s) : 0.0;
        } else if constexpr (std::is_same_v<T, DiscreteExponent>) {
          if (!(y > 1.0)) return 0.0;  // support is [1, 1e17)
          if (y >= 1e17) return 1.0;
          const int e = std::clamp(static_cast<int>(std::floor(std::log10(y))) + 1, 1, static_cast<int>(kDecades));
          double acc = 0.0;
          for (int k = 1; k < e; ++k) acc += std::exp(d.log_pi[static_cast<std::size_t>(k - 1)]);
          const auto j = static_cast<std::size_t>(e - 1);
          const double m = std::clamp(y / text::pow10(e), 0.1, 1.0);
          const double lo = std_normal_cdf((0.1 - d.mu_m[j]) / d.sigma[j]);
          const double hi = std_normal_cdf((1.0 - d.mu_m[j]) / d.sigma[j]);
          const double frac = (std_normal_cdf((m - d.mu_m[j]) / d.sigma[j]) - lo) / (hi - lo);
          return acc + std::exp(d.log_pi[j]) * frac;
        } else {
          double t = y;
          if (d.log_space) {
            if (!(y > 0)) return 0.0;
            t = std::log10(y);
          }
          double acc = 0.0;
          for (std::size_t k = 0; k < d.means.size(); ++k) {
            acc += std::exp(d.log_w[k]) * std_normal_cdf((t - d.means[k]) / d.sigmas[k]);
          }
          return acc;
        }
      },
      v_);
}

double Density::point_prediction() const {
  return std::visit(
      [this](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, LogLaplace>) {
          return clamp_value(std::exp(d.mu));
        } else if constexpr (std::is_same_v<T, FlowLaplace>) {
          return clamp_value(d.forward(d.mu));
        } else if constexpr (std::is_same_v<T, DiscreteExponent>) {
          const auto j = static_cast<std::size_t>(std::max_element(d.log_pi.begin(), d.log_pi.end()) - d.log_pi.begin());
          // Keep the prediction inside the argmax decade.
          const double m = std::clamp(d.mu_m[j], 0.1, 1.0 - 1e-12);
          return clamp_value(m * text::pow10(static_cast<int>(j) + 1));
        } else {
          // Mode of the density of log10 y: the y-space mode is dragged toward 1 by the 1/y Jacobian.
          return clamp_value(grid_argmax([this](double y) { return log_density(y) + std::log(y); }));
        }
      },
      v_);
}

double Density::sample(Rng& rng) const {
  return std::visit(
      [&rng](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, LogLaplace>) {
          return std::exp(laplace_sample(d.mu, d.s, rng));
        } else if constexpr (std::is_same_v<T, FlowLaplace>) {
          return d.forward(laplace_sample(d.mu, d.s, rng));
        } else if constexpr (std::is_same_v<T, DiscreteExponent>) {
          double u = uniform01(rng);
          std::size_t j = 0;
          for (; j + 1 < kDecades; ++j) {
            u -= std::exp(d.log_pi[j]);
            if (u < 0) break;
          }
          std::normal_distribution<double> n(d.mu_m[j], d.sigma[j]);
          double m = n(rng);
          while (m < 0.1 || m >= 1.0) m = n(rng);
          return m * text::pow10(static_cast<int>(j) + 1);
        } else {
          double u = uniform01(rng);
          std::size_t k = 0;
          for (; k + 1 < d.means.size(); ++k) {
            u -= std::exp(d.log_w[k]);
            if (u < 0) break;
          }
          const double t = std::normal_distribution<double>(d.means[k], d.sigmas[k])(rng);
          return d.log_space ? std::pow(10.0, t) : t;
        }
      },
      v_);
}

std::array<double, kDecades> Density::decade_probabilities() const {
  std::array<double, kDecades> out{};
  if (const auto* d = std::get_if<DiscreteExponent>(&v_)) {
    for (std::size_t j = 0; j < kDecades; ++j) out[j] = std::exp(d->log_pi[j]);
    return out;
  }
  double prev = cdf(1.0);
  for (std::size_t j = 0; j < kDecades; ++j) {
    const double next = cdf(text::pow10(static_cast<int>(j) + 1));
    out[j] = std::max(0.0, next - prev);
    prev = next;
  }
  return out;
}

double Density::support_lower() const {
  if (const auto* f = std::get_if<FlowLaplace>(&v_)) return -f->a;
  if (const auto* g = std::get_if<GaussianMixture>(&v_); g != nullptr && !g->log_space) {
    return -std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

std::string Density::family() const {
  switch (v_.index()) {
    case 0: return "loglp";
    case 1: return "flowlp";
    case 2: return "dexp";
    default: return "gmm";
  }
}

double grid_argmax(const std::function<double(double)>& logp, double lo, double hi, std::size_t points) {
  const double a = std::log10(lo), b = std::log10(hi);
  const double step = (b - a) / static_cast<double>(points - 1);
  auto f = [&](double x) { return logp(std::pow(10.0, x)); };
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points; ++i) {
    const double v = f(a + step * static_cast<double>(i));
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double l = a + step * static_cast<double>(best == 0 ? 0 : best - 1);
  double r = a + step * static_cast<double>(std::min(best + 1, points - 1));
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = r - phi * (r - l), x2 = l + phi * (r - l);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 80 && r - l > 1e-13; ++it) {
    if (f1 < f2) {
      l = x1;
      x1 = x2;
      f1 = f2;
      x2 = l + phi * (r - l);
      f2 = f(x2);
    } else {
      r = x2;
      x2 = x1;
      f2 = f1;
      x1 = r - phi * (r - l);
      f1 = f(x1);
    }
  }
  const double x = 0.5 * (l + r);
  const double xb = a + step * static_cast<double>(best);
  return f(x) >= best_val ? std::pow(10.0, x) : std::pow(10.0, xb);
}

}  // namespace numerate::heads
