#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "numerate/corpus.hpp"
#include "numerate/errors.hpp"

using namespace numerate;
using namespace numerate::corpus;

namespace {

NormalizedSentence sentence_with(std::vector<double> values, std::int64_t doc = -1) {
  NormalizedSentence s;
  s.doc = doc;
  for (double v : values) {
    s.tokens.push_back("w");
    s.numbers.push_back({s.tokens.size(), v});
    s.tokens.emplace_back(text::kNumberMask);
  }
  s.tokens.push_back(".");
  return s;
}

}  // namespace

TEST(BuildSplits, TenDocsRatios) {
  std::vector<NormalizedSentence> sents;
  for (int d = 0; d < 10; ++d) {
    for (int k = 0; k < 3; ++k) sents.push_back(sentence_with({1.0 + d * 10 + k}, d));
  }
  const auto sp = build_splits(sents, {0.8, 0.1, 0.1}, 7);
  auto docs = [&](const std::vector<std::size_t>& ids) {
    std::set<std::int64_t> out;
    for (auto i : ids) out.insert(sents[i].doc);
    return out;
  };
  EXPECT_EQ(docs(sp.train).size(), 8u);
  EXPECT_EQ(docs(sp.valid).size(), 1u);
  EXPECT_EQ(docs(sp.test).size(), 1u);
  EXPECT_EQ(sp.train.size(), 24u);
  // Documents never straddle splits.
  for (auto d : docs(sp.valid)) EXPECT_FALSE(docs(sp.train).contains(d));
  for (auto d : docs(sp.test)) EXPECT_FALSE(docs(sp.train).contains(d));
}

TEST(BuildSplits, DeterministicAndPartition) {
  std::vector<NormalizedSentence> sents;
  for (int i = 0; i < 137; ++i) sents.push_back(sentence_with({1.0 + i}));
  const auto a = build_splits(sents, {0.7, 0.2, 0.1}, 3);
  const auto b = build_splits(sents, {0.7, 0.2, 0.1}, 3);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.valid, b.valid);
  EXPECT_EQ(a.test, b.test);
  std::multiset<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.valid.begin(), a.valid.end());
  all.insert(a.test.begin(), a.test.end());
  ASSERT_EQ(all.size(), sents.size());
  std::size_t expect = 0;
  for (auto i : all) EXPECT_EQ(i, expect++);
  const auto c = build_splits(sents, {0.7, 0.2, 0.1}, 4);
  EXPECT_NE(a.train, c.train);
}

TEST(BuildSplits, Errors) {
  std::vector<NormalizedSentence> sents = {sentence_with({5})};
  EXPECT_THROW(build_splits(sents, {0.5, 0.5, 0.5}, 1), std::invalid_argument);
  EXPECT_THROW(build_splits({}, {0.8, 0.1, 0.1}, 1), DataError);
}

TEST(PlanMasks, MarginalFrequencies) {
  // Wide sentences make the force-select correction (0.5^20 per sentence) negligible.
  const auto s = sentence_with(std::vector<double>(20, 42.0));
  const std::vector<double> pool = {3, 30, 300};
  Rng rng(9);
  std::size_t total = 0, selected = 0, hidden = 0, random = 0, kept = 0;
  while (total < 100000) {
    const auto plan = plan_masks(s, rng, MaskConfig{}, pool);
    for (const auto& e : plan.entries) {
      ++total;
      if (!is_target(e.role)) continue;
      ++selected;
      hidden += e.role == Role::TargetHidden;
      random += e.role == Role::TargetRandom;
      kept += e.role == Role::TargetKept;
      if (e.role == Role::TargetRandom) EXPECT_TRUE(e.shown == 3 || e.shown == 30 || e.shown == 300);
      if (e.role == Role::TargetKept) EXPECT_EQ(e.shown, 42.0);
    }
  }
  const double n = static_cast<double>(selected);
  EXPECT_NEAR(static_cast<double>(selected) / static_cast<double>(total), 0.5, 0.01);
  EXPECT_NEAR(hidden / n, 0.8, 0.01);
  EXPECT_NEAR(random / n, 0.1, 0.01);
  EXPECT_NEAR(kept / n, 0.1, 0.01);
}

TEST(PlanMasks, DegenerateConfigAllHidden) {
  MaskConfig cfg;
  cfg.select = 1.0;
  cfg.hidden = 1.0;
  cfg.random = 0.0;
  cfg.kept = 0.0;
  Rng rng(1);
  const auto plan = plan_masks(sentence_with({1, 2, 3, 4}), rng, cfg, std::vector<double>{5});
  for (const auto& e : plan.entries) EXPECT_EQ(e.role, Role::TargetHidden);
}

TEST(PlanMasks, ForceSelectsOne) {
  MaskConfig cfg;
  cfg.select = 0.0;
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto plan = plan_masks(sentence_with({1, 2, 3}), rng, cfg, std::vector<double>{5});
    EXPECT_EQ(plan.targets().size(), 1u);
  }
}

TEST(PlanMasks, EmptyPoolFallsBackToHidden) {
  MaskConfig cfg;
  cfg.select = 1.0;
  cfg.hidden = 0.0;
  cfg.random = 1.0;
  cfg.kept = 0.0;
  Rng rng(2);
  const auto plan = plan_masks(sentence_with({1, 2}), rng, cfg, {});
  for (const auto& e : plan.entries) EXPECT_EQ(e.role, Role::TargetHidden);
}

TEST(MaskConfigValidate, RejectsBadProbabilities) {
  MaskConfig cfg;
  cfg.hidden = 0.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_NO_THROW(MaskConfig{}.validate());
}

TEST(EvalTarget, StandardHasExactlyOneTarget) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto plan = sample_eval_target(sentence_with({1, 20, 300}), rng, EvalMode::Standard);
    ASSERT_TRUE(plan.has_value());
    EXPECT_EQ(plan->targets().size(), 1u);
    for (const auto& e : plan->entries) {
      EXPECT_TRUE(e.role == Role::TargetHidden || e.role == Role::Context);
    }
  }
}

TEST(EvalTarget, AllMaskedSkipsSingleNumber) {
  Rng rng(4);
  EXPECT_FALSE(sample_eval_target(sentence_with({7}), rng, EvalMode::AllMasked).has_value());
  const auto plan = sample_eval_target(sentence_with({7, 8, 9}), rng, EvalMode::AllMasked);
  ASSERT_TRUE(plan.has_value());
  EXPECT_EQ(plan->targets().size(), 1u);
  for (const auto& e : plan->entries) EXPECT_FALSE(value_visible(e.role));
}

TEST(EvalTarget, FixedSeedReproducible) {
  const auto s = sentence_with({1, 2, 3, 4, 5, 6, 7});
  const auto a = eval_plan(s, 11, EvalMode::Standard);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(eval_plan(s, 11, EvalMode::Standard)->targets(), a->targets());
  std::set<std::size_t> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) seen.insert(eval_plan(s, seed, EvalMode::Standard)->targets()[0]);
  EXPECT_GT(seen.size(), 3u);
}

TEST(Stats, NearestRank) {
  EXPECT_EQ(nearest_rank({1, 10, 100}, 50), 10);
  EXPECT_EQ(nearest_rank({1, 10, 100}, 100), 100);
  EXPECT_EQ(nearest_rank({1, 10, 100}, 0), 1);
  EXPECT_EQ(nearest_rank({1, 2, 3, 4}, 50), 2);
  EXPECT_EQ(nearest_rank({1, 2, 3, 4}, 75), 3);
}

TEST(Stats, PercentNumbers) {
  NormalizedSentence s;
  s.tokens = std::vector<std::string>(20, "w");
  s.tokens[3] = s.tokens[9] = std::string(text::kNumberMask);
  s.numbers = {{3, 10}, {9, 100}};
  const auto st = compute_stats({s});
  EXPECT_DOUBLE_EQ(st.percent_numbers, 10.0);
  EXPECT_DOUBLE_EQ(st.mean_tokens, 20.0);
  EXPECT_EQ(st.min, 10);
  EXPECT_EQ(st.max, 100);
  EXPECT_LE(st.min, st.p50);
  EXPECT_LE(st.p50, st.p75);
  EXPECT_LE(st.p75, st.p90);
  EXPECT_LE(st.p90, st.max);
  EXPECT_THROW(compute_stats({}), DataError);
}

TEST(Stats, LogUniformMedian) {
  Rng rng(17);
  std::vector<NormalizedSentence> sents;
  for (int i = 0; i < 5000; ++i) sents.push_back(sentence_with({std::pow(10.0, 6.0 * uniform01(rng))}));
  const auto st = compute_stats(sents);
  EXPECT_GE(st.p50, std::pow(10.0, 2.8));
  EXPECT_LE(st.p50, std::pow(10.0, 3.2));
}
