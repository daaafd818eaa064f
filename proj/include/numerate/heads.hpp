#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "numerate/density.hpp"
#include "numerate/encoder.hpp"
#include "numerate/nn.hpp"

namespace numerate::heads {

using diff::Var;
using nn::ParameterStore;
using nn::Tape;

enum class HeadKind { LogLP, FlowLP, DExp, Gmm, Disc };
const char* head_name(HeadKind k) noexcept;
HeadKind parse_head(std::string_view s);  // "loglp" | "flowlp" | "dexp" | "gmm" | "disc"

// ---------------------------------------------------------------- EM

struct GmmComponents {
  bool log_space = true;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sigmas;
  std::size_t k() const noexcept { return means.size(); }
};

struct EmConfig {
  std::size_t k = 31;
  std::size_t iters = 100;
  bool log_space = true;
  double var_floor = 1e-4;    // in fit-space units squared
  std::size_t max_points = 200000;  // larger pools are subsampled with `seed`
  std::uint64_t seed = 0;
};

struct EmResult {
  GmmComponents components;
  std::vector<double> loglik;  // total log-likelihood before each iteration, then the final value
};

// Fit-space transform of raw values (log10 or identity).
std::vector<double> fit_space(std::span<const double> values, bool log_space);
double gmm_loglik(std::span<const double> xs, const GmmComponents& c);
// One EM iteration on fit-space data. Returns the log-likelihood before the update.
double em_step(std::span<const double> xs, GmmComponents& c, double var_floor);
// Quantile-initialised EM. Throws std::invalid_argument when k exceeds the
// number of distinct values.
EmResult gmm_pretrain_em(std::span<const double> values, const EmConfig& cfg);

// ---------------------------------------------------------------- heads

struct HeadConfig {
  HeadKind kind = HeadKind::DExp;
  std::size_t mlp_hidden = 64;  // DExp mantissa MLP, discriminator hidden layer
  EmConfig em;
};

class Head {
 public:
  virtual ~Head() = default;
  virtual HeadKind kind() const noexcept = 0;
  // Training loss for one target (1 x 1): negative log-likelihood, or binary
  // cross-entropy over the positive and one sampled negative for Disc.
  virtual Var loss(Tape& tape, Var h, double y, Rng& rng) const = 0;
  // Generative heads only.
  virtual Density density(Tape& tape, Var h) const;
  // Hook run once before training with the training value pool.
  virtual void prepare(std::span<const double> pool);
};

class LogLpHead : public Head {
 public:
  LogLpHead(ParameterStore& store, std::size_t in, Rng& rng);
  HeadKind kind() const noexcept override { return HeadKind::LogLP; }
  Var loss(Tape& tape, Var h, double y, Rng& rng) const override;
  Density density(Tape& tape, Var h) const override;
  void prepare(std::span<const double> pool) override;

 private:
  nn::Linear mu_;
  nn::Parameter* scale_ = nullptr;  // softplus-parameterised Laplace scale
};

class FlowLpHead : public Head {
 public:
  FlowLpHead(ParameterStore& store, std::size_t in, Rng& rng);
  HeadKind kind() const noexcept override { return HeadKind::FlowLP; }
  Var loss(Tape& tape, Var h, double y, Rng& rng) const override;
  Density density(Tape& tape, Var h) const override;
  void prepare(std::span<const double> pool) override;

  struct Params {
    Var mu, s, a, b, c;
  };
  Params params(Tape& tape, Var h) const;

 private:
  nn::Linear mu_, a_, b_, c_;
  nn::Parameter* scale_ = nullptr;
};

class DExpHead : public Head {
 public:
  DExpHead(ParameterStore& store, std::size_t in, std::size_t hidden, Rng& rng);
  HeadKind kind() const noexcept override { return HeadKind::DExp; }
  Var loss(Tape& tape, Var h, double y, Rng& rng) const override;
  Density density(Tape& tape, Var h) const override;
  void prepare(std::span<const double> pool) override;

 private:
  Var log_pi(Tape& tape, Var h) const;
  Var mantissa_means(Tape& tape, Var h) const;
  Var sigmas(Tape& tape) const;
  nn::Linear pi_, m1_, m2_;
  nn::Parameter* sigma_ = nullptr;
};

class GmmHead : public Head {
 public:
  GmmHead(ParameterStore& store, std::size_t in, EmConfig em, Rng& rng);
  HeadKind kind() const noexcept override { return HeadKind::Gmm; }
  Var loss(Tape& tape, Var h, double y, Rng& rng) const override;
  Density density(Tape& tape, Var h) const override;
  // Runs EM on the pool and freezes the components.
  void prepare(std::span<const double> pool) override;

  const std::optional<GmmComponents>& components() const noexcept { return components_; }
  void set_components(GmmComponents c);
  const std::vector<double>& em_trace() const noexcept { return trace_; }

 private:
  nn::Linear weights_;
  EmConfig em_;
  std::optional<GmmComponents> components_;
  std::vector<double> trace_;
};

// Real-vs-fake scorer over [h; numeric embedding of the candidate].
class DiscHead : public Head {
 public:
  DiscHead(ParameterStore& store, std::size_t in, std::size_t hidden, const encoder::InputEmbedder& embedder,
           Rng& rng);
  HeadKind kind() const noexcept override { return HeadKind::Disc; }
  Var loss(Tape& tape, Var h, double y, Rng& rng) const override;
  // Stores the negative-sampling pool.
  void prepare(std::span<const double> pool) override;

  // Logits (n x 1) for n candidates against the same state h (1 x d).
  Var score(Tape& tape, Var h, std::span<const double> candidates) const;
  Var score_embedded(Tape& tape, Var h, Var candidate_embeddings) const;
  // Argmax row of the exponent table as candidate, ties to the lowest row.
  // Requires the EXPONENT embedder (std::logic_error otherwise).
  int predict_exponent(Tape& tape, Var h) const;

 private:
  nn::Linear l1_, l2_;
  const encoder::InputEmbedder* embedder_;
  std::vector<double> pool_;
};

std::unique_ptr<Head> make_head(ParameterStore& store, const HeadConfig& cfg, std::size_t in,
                                const encoder::InputEmbedder& embedder, Rng& rng);

// Binary cross-entropy of a logit against a 0/1 label (1 x 1).
Var bce_with_logit(Var logit, double label);

// Index of the largest score, ties to the lowest index.
std::size_t argmax_lowest(std::span<const double> scores);

}  // namespace numerate::heads
