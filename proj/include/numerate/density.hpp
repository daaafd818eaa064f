#pragma once

#include <array>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "numerate/numtext.hpp"
#include "numerate/rng.hpp"

// One-dimensional distributions over positive reals, as produced by the
// output heads for a single target.
namespace numerate::heads {

inline constexpr std::size_t kDecades = text::kNumExponents;
inline constexpr double kLn10 = 2.302585092994045684;

double std_normal_cdf(double x);
double log_std_normal_pdf(double x);
double laplace_cdf(double x, double mu, double s);
// Log density of N(mu, sigma) truncated to [lo, hi].
double truncnormal_log_density(double m, double mu, double sigma, double lo = 0.1, double hi = 1.0);

// ln y ~ Laplace(mu, s).
struct LogLaplace {
  double mu = 0.0;
  double s = 1.0;
};

// z = c ln(b (y + a)) ~ Laplace(mu, s); y = exp(z / c) / b - a.
struct FlowLaplace {
  double mu = 0.0;
  double s = 1.0;
  double a = 0.0;
  double b = 1.0;
  double c = 1.0;

  double inverse(double y) const;  // g^-1
  double forward(double z) const;  // g
};

// e ~ Categorical(pi) over exponents 1..17 (index e-1), mantissa
// m ~ TruncNormal(mu_m[e-1], sigma[e-1]; [0.1, 1]), y = m 10^e.
struct DiscreteExponent {
  std::array<double, kDecades> log_pi{};
  std::array<double, kDecades> mu_m{};
  std::array<double, kDecades> sigma{};
};

// Mixture of Gaussians on t(y) = log10 y (log space) or y (raw space).
struct GaussianMixture {
  bool log_space = true;
  std::vector<double> log_w;
  std::vector<double> means;
  std::vector<double> sigmas;
};

class Density {
 public:
  using Variant = std::variant<LogLaplace, FlowLaplace, DiscreteExponent, GaussianMixture>;

  explicit Density(Variant v) : v_(std::move(v)) {}

  // -inf outside the support.
  double log_density(double y) const;
  double cdf(double y) const;
  // Clamped to [1, 1e16]. Mixtures report the mode of the density of log10 y.
  double point_prediction() const;
  double sample(Rng& rng) const;
  // Mass of [10^j, 10^(j+1)) for j = 0..16.
  std::array<double, kDecades> decade_probabilities() const;
  // Lower end of the support (0 or -a).
  double support_lower() const;
  const Variant& params() const noexcept { return v_; }
  std::string family() const;

 private:
  Variant v_;
};

// Maximizer of logp over a log-spaced grid on [lo, hi], refined by a
// golden-section search between the best point's neighbours.
double grid_argmax(const std::function<double(double)>& logp, double lo = 1.0, double hi = 1e16,
                   std::size_t points = 1024);

double clamp_value(double y);  // to [1, 1e16], NaN -> 1

}  // namespace numerate::heads
