#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "numerate/numtext.hpp"
#include "numerate/rng.hpp"

namespace numerate::corpus {

using text::NormalizedSentence;

enum class Role {
  Context,        // value visible, not scored
  TargetHidden,   // scored, numeric embedding zeroed
  TargetRandom,   // scored, embedding shows a substitute from the training pool
  TargetKept,     // scored, embedding shows the true value
  ContextHidden,  // not scored, value hidden (one-vs-all evaluation)
};

bool is_target(Role r) noexcept;
// Whether the numeric embedding sees any value at this position.
bool value_visible(Role r) noexcept;
const char* role_name(Role r) noexcept;

struct NumberPlan {
  Role role = Role::Context;
  double shown = 0.0;  // value fed to the numeric embedder when visible
};

// One entry per sentence.numbers element, in the same order.
struct MaskPlan {
  std::vector<NumberPlan> entries;
  std::vector<std::size_t> targets() const;
};

struct MaskConfig {
  double select = 0.5;
  double hidden = 0.8;
  double random = 0.1;
  double kept = 0.1;
  void validate() const;  // throws std::invalid_argument
};

// Each number is selected independently; selected numbers become hidden,
// random-substituted or kept. With nothing selected, one number is forced.
// An empty pool turns random substitutions into hidden ones.
MaskPlan plan_masks(const NormalizedSentence& s, Rng& rng, const MaskConfig& cfg, std::span<const double> pool);

enum class EvalMode { Standard, AllMasked };
const char* eval_mode_name(EvalMode m) noexcept;

// Single scored target. nullopt means "skip" (ALL_MASKED with fewer than two
// numbers, or a sentence with none).
std::optional<MaskPlan> sample_eval_target(const NormalizedSentence& s, Rng& rng, EvalMode mode);

// Stream seed derived from sentence content, so eval targets stay fixed
// across runs and orderings.
std::uint64_t sentence_seed(const NormalizedSentence& s, std::uint64_t seed);
std::optional<MaskPlan> eval_plan(const NormalizedSentence& s, std::uint64_t seed, EvalMode mode);

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

// Splits by document when any sentence carries a doc id; sentences without
// one are their own unit. Unit counts are rounded, test takes the remainder.
Splits build_splits(const std::vector<NormalizedSentence>& sentences, std::array<double, 3> ratios,
                    std::uint64_t seed);
std::vector<NormalizedSentence> select(const std::vector<NormalizedSentence>& sentences,
                                       const std::vector<std::size_t>& ids);
std::string splits_manifest(const Splits& s, std::uint64_t seed, std::array<double, 3> ratios);

std::vector<double> number_pool(const std::vector<NormalizedSentence>& sentences);

struct CorpusStats {
  std::size_t instances = 0;
  std::size_t tokens = 0;
  std::size_t numbers = 0;
  double mean_tokens = 0.0;
  double percent_numbers = 0.0;
  double min = 0.0, p50 = 0.0, p75 = 0.0, p90 = 0.0, max = 0.0;
};

// Nearest-rank quantile: element at rank ceil(p/100 * n), 1-based.
double nearest_rank(std::vector<double> sorted_values, double p);
CorpusStats compute_stats(const std::vector<NormalizedSentence>& sentences);
std::string stats_json(const CorpusStats& s);
std::string stats_table(const CorpusStats& s);

}  // namespace numerate::corpus
