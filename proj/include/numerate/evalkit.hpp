#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "numerate/corpus.hpp"
#include "numerate/density.hpp"
#include "numerate/rng.hpp"

namespace numerate::eval {

enum class AnomalyKind { String, Random };
enum class StringOp { Add, Del, Swap };
const char* anomaly_name(AnomalyKind k) noexcept;
const char* op_name(StringOp op) noexcept;

struct Anomaly {
  AnomalyKind kind = AnomalyKind::Random;
  double value = 0.0;
  double score = 0.0;  // log-density (or discriminator logit) of the anomaly
};

struct EvalRecord {
  double y = 0.0;
  double pred = 0.0;
  std::optional<double> score_true;
  std::vector<Anomaly> anomalies;
  std::size_t sentence = 0;
  std::size_t target = 0;  // index into the sentence's numbers
};

// Both throw DataError on empty input.
double lmae(std::span<const EvalRecord> records);
double e_acc(std::span<const EvalRecord> records);
// floor(log10 v), exact at powers of ten.
int decade_of(double v);

// ---------------------------------------------------------------- anomalies

// Shortest round-trip fixed-notation rendering ("2016", "3.75").
std::string shortest_decimal(double v);
std::vector<StringOp> applicable_ops(double y);
// Deterministic op application; `position` indexes digits (the decimal point
// is not a digit), `digit` is used by Add. nullopt if the op does not apply.
std::optional<double> apply_string_op(double y, StringOp op, std::size_t position = 0, int digit = 0);

struct StringAnomaly {
  double value = 0.0;
  StringOp op = StringOp::Add;
  bool fallback = false;  // produced by anomaly_random after 10 failed edits
};
StringAnomaly anomaly_string(double y, Rng& rng, std::span<const double> fallback_pool);

// Uniform draw from the pool different from y (100 tries), else y shifted one decade.
double anomaly_random(std::span<const double> pool, double y, Rng& rng);

// ---------------------------------------------------------------- AUC

// Mann-Whitney AUC over pooled scores with midranks for ties.
double roc_auc(std::span<const double> positives, std::span<const double> negatives);
// Positives: score_true; negatives: anomalies of `kind`. DataError when none.
double roc_auc(std::span<const EvalRecord> records, AnomalyKind kind);

// ---------------------------------------------------------------- models

enum class BaselineKind { Mean, Median };
double baseline_constant(std::span<const double> train_values, BaselineKind kind);

struct TargetPrediction {
  double point = 1.0;
  std::function<double(double)> score;  // empty for predictors without a density
  std::optional<heads::Density> density;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  virtual TargetPrediction predict(const text::NormalizedSentence& s, const corpus::MaskPlan& plan,
                                   std::size_t target) const = 0;
};

class ConstantPredictor : public Predictor {
 public:
  ConstantPredictor(std::string name, double value) : name_(std::move(name)), value_(value) {}
  std::string name() const override { return name_; }
  TargetPrediction predict(const text::NormalizedSentence&, const corpus::MaskPlan&, std::size_t) const override {
    return {value_, {}, std::nullopt};
  }

 private:
  std::string name_;
  double value_;
};

struct MetricsReport {
  std::string model;
  std::string mode;
  std::size_t n = 0;
  double lmae = 0.0;
  double e_acc = 0.0;
  std::optional<double> r_auc;
  std::optional<double> s_auc;
};

struct EvalOptions {
  std::uint64_t seed = 0;
  std::vector<double> train_pool;  // random anomalies and string fallbacks
  bool anomalies = true;
};

// Builds the eval plan per sentence, scores one target, one anomaly per kind.
// Throws DataError when no sentence yields a target.
std::vector<EvalRecord> collect_records(const Predictor& model, const std::vector<text::NormalizedSentence>& sentences,
                                        corpus::EvalMode mode, const EvalOptions& opts);
MetricsReport summarize(const std::vector<EvalRecord>& records, const std::string& model, corpus::EvalMode mode);
MetricsReport evaluate(const Predictor& model, const std::vector<text::NormalizedSentence>& sentences,
                       corpus::EvalMode mode, const EvalOptions& opts);

std::string report_json(const MetricsReport& r);
std::string report_table(const std::vector<MetricsReport>& rows);
std::string records_jsonl(const std::vector<EvalRecord>& records);

}  // namespace numerate::eval
