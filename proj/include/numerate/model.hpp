#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "numerate/corpus.hpp"
#include "numerate/diff/optimizer.hpp"
#include "numerate/encoder.hpp"
#include "numerate/evalkit.hpp"
#include "numerate/heads.hpp"

namespace numerate::model {

struct RunConfig {
  encoder::EncoderConfig encoder;
  heads::HeadConfig head;
  corpus::MaskConfig mask;
  std::size_t batch = 32;
  std::size_t epochs = 10;
  std::size_t patience = 3;
  diff::OptimizerKind optimizer = diff::OptimizerKind::Adam;
  double lr = 2e-2;       // single-group runs (BiGRU)
  double body_lr = 1e-3;  // transformer body
  double head_lr = 1e-2;  // transformer embeddings and heads
  double clip_norm = 5.0;
  std::size_t vocab_size = 8000;
  std::uint64_t seed = 0;
  bool dollar_only = false;

  void validate() const;  // throws std::invalid_argument
  diff::OptimizerConfig optimizer_config() const;
};

std::string config_json(const RunConfig& c);
// Missing keys keep their defaults; unknown keys are a DataError.
RunConfig parse_config(std::string_view json, RunConfig base = {});

// Vocabulary, input embedder, encoder and head over one parameter store.
class Model {
 public:
  Model(RunConfig cfg, encoder::Vocab vocab);

  const RunConfig& config() const noexcept { return cfg_; }
  const encoder::Vocab& vocab() const noexcept { return vocab_; }
  diff::ParameterStore& store() noexcept { return store_; }
  const diff::ParameterStore& store() const noexcept { return store_; }
  heads::Head& head() noexcept { return *head_; }
  const heads::Head& head() const noexcept { return *head_; }
  const encoder::InputEmbedder& embedder() const noexcept { return *embedder_; }

  // Training values: masking substitutes, random anomalies, Disc negatives.
  const std::vector<double>& pool() const noexcept { return pool_; }
  // Stores the pool and runs the head's data-dependent initialisation.
  void prepare(std::vector<double> pool);

  // Per-token states H for a sentence under a mask plan.
  diff::Var states(diff::Tape& tape, const text::NormalizedSentence& s, const corpus::MaskPlan& plan,
                   Rng& rng) const;
  // Summed head loss over the plan's targets (1 x 1).
  diff::Var loss(diff::Tape& tape, const text::NormalizedSentence& s, const corpus::MaskPlan& plan, Rng& rng) const;

  void save(const std::filesystem::path& dir) const;
  static Model load(const std::filesystem::path& dir);

 private:
  RunConfig cfg_;
  encoder::Vocab vocab_;
  diff::ParameterStore store_;
  std::unique_ptr<encoder::InputEmbedder> embedder_;
  std::unique_ptr<encoder::Encoder> encoder_;
  std::unique_ptr<heads::Head> head_;
  std::vector<double> pool_;
};

// Evaluation adapter. Generative heads score with log-density; Disc scores
// with its logit and predicts the geometric centre of the argmax decade.
class ModelPredictor : public eval::Predictor {
 public:
  explicit ModelPredictor(const Model& m, std::string name = "");
  std::string name() const override { return name_; }
  eval::TargetPrediction predict(const text::NormalizedSentence& s, const corpus::MaskPlan& plan,
                                 std::size_t target) const override;

 private:
  const Model* model_;
  std::string name_;
};

// Patience-based stopping on a validation loss sequence.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Feeds the next epoch's loss; true once patience is exhausted.
  bool update(double loss);
  bool improved() const noexcept { return improved_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }  // 1-based, 0 before any update
  double best_loss() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t bad_ = 0;
  double best_ = 0.0;
  bool improved_ = false;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per scored target
  double valid_loss = 0.0;  // mean per sentence on STANDARD eval plans
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_valid = 0.0;
};

double validation_loss(const Model& m, const std::vector<text::NormalizedSentence>& valid);

// Trains in place and leaves the best-validation parameters in the model.
// Throws DataError on empty splits, NumericalError on a non-finite loss.
TrainResult train(Model& m, const std::vector<text::NormalizedSentence>& train_set,
                  const std::vector<text::NormalizedSentence>& valid_set, std::ostream* log = nullptr);

// Builds the vocabulary from the training set, prepares and trains.
Model fit(const RunConfig& cfg, const std::vector<text::NormalizedSentence>& train_set,
          const std::vector<text::NormalizedSentence>& valid_set, TrainResult* result = nullptr,
          std::ostream* log = nullptr);

std::vector<text::NormalizedSentence> dollar_filter(const std::vector<text::NormalizedSentence>& sentences);

}  // namespace numerate::model
