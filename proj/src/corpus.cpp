#include "numerate/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>

#include "numerate/errors.hpp"

namespace numerate::corpus {

bool is_target(Role r) noexcept {
  return r == Role::TargetHidden || r == Role::TargetRandom || r == Role::TargetKept;
}

bool value_visible(Role r) noexcept { return r == Role::Context || r == Role::TargetRandom || r == Role::TargetKept; }

const char* role_name(Role r) noexcept {
  switch (r) {
    case Role::Context: return "context";
    case Role::TargetHidden: return "hidden";
    case Role::TargetRandom: return "random";
    case Role::TargetKept: return "kept";
    case Role::ContextHidden: return "context-hidden";
  }
  return "?";
}

const char* eval_mode_name(EvalMode m) noexcept { return m == EvalMode::Standard ? "standard" : "all-masked"; }

std::vector<std::size_t> MaskPlan::targets() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (is_target(entries[i].role)) out.push_back(i);
  }
  return out;
}

void MaskConfig::validate() const {
  for (double p : {select, hidden, random, kept}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mask probabilities must lie in [0, 1]");
  }
  if (std::abs(hidden + random + kept - 1.0) > 1e-9) {
    throw std::invalid_argument("hidden + random + kept must sum to 1");
  }
}

MaskPlan plan_masks(const NormalizedSentence& s, Rng& rng, const MaskConfig& cfg, std::span<const double> pool) {
  MaskPlan plan;
  plan.entries.resize(s.numbers.size());
  auto assign = [&](std::size_t i) {
    const double v = uniform01(rng);
    NumberPlan& p = plan.entries[i];
    if (v < cfg.hidden) {
      p.role = Role::TargetHidden;
    } else if (v < cfg.hidden + cfg.random) {
      if (pool.empty()) {
        p.role = Role::TargetHidden;
      } else {
        p.role = Role::TargetRandom;
        p.shown = pool[uniform_index(rng, pool.size())];
      }
    } else {
      p.role = Role::TargetKept;
    }
  };
  bool any = false;
  for (std::size_t i = 0; i < s.numbers.size(); ++i) {
    plan.entries[i] = {Role::Context, s.numbers[i].value};
    if (uniform01(rng) < cfg.select) {
      assign(i);
      any = true;
    }
  }
  if (!any && !s.numbers.empty()) assign(uniform_index(rng, s.numbers.size()));
  return plan;
}

std::optional<MaskPlan> sample_eval_target(const NormalizedSentence& s, Rng& rng, EvalMode mode) {
  const std::size_t n = s.numbers.size();
  if (n == 0 || (mode == EvalMode::AllMasked && n < 2)) return std::nullopt;
  const std::size_t k = uniform_index(rng, n);
  MaskPlan plan;
  plan.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Role other = mode == EvalMode::Standard ? Role::Context : Role::ContextHidden;
    plan.entries[i] = {i == k ? Role::TargetHidden : other, s.numbers[i].value};
  }
  return plan;
}

std::uint64_t sentence_seed(const NormalizedSentence& s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : s.tokens) {
    h = fnv1a(t, h);
    h = fnv1a(" ", h);
  }
  for (const auto& n : s.numbers) {
    char buf[64];
    const int len = std::snprintf(buf, sizeof buf, "%zu:%.17g;", n.token_index, n.value);
    h = fnv1a(std::string_view(buf, static_cast<std::size_t>(len)), h);
  }
  return mix_seed(h, seed);
}

std::optional<MaskPlan> eval_plan(const NormalizedSentence& s, std::uint64_t seed, EvalMode mode) {
  Rng rng(sentence_seed(s, seed));
  return sample_eval_target(s, rng, mode);
}

Splits build_splits(const std::vector<NormalizedSentence>& sentences, std::array<double, 3> ratios,
                    std::uint64_t seed) {
  if (sentences.empty()) throw DataError("cannot split an empty corpus");
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("split ratios must lie in [0, 1]");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  // Units: one per document id, plus one per sentence without an id.
  std::vector<std::vector<std::size_t>> units;
  std::map<std::int64_t, std::size_t> by_doc;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const std::int64_t doc = sentences[i].doc;
    if (doc < 0) {
      units.push_back({i});
      continue;
    }
    auto [it, fresh] = by_doc.try_emplace(doc, units.size());
    if (fresh) units.emplace_back();
    units[it->second].push_back(i);
  }
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5911));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  const std::size_t n = units.size();
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n))));
  const auto n_valid =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n))));
  Splits out;
  for (std::size_t r = 0; r < n; ++r) {
    auto& dst = r < n_train ? out.train : r < n_train + n_valid ? out.valid : out.test;
    const auto& unit = units[order[r]];
    dst.insert(dst.end(), unit.begin(), unit.end());
  }
  for (auto* v : {&out.train, &out.valid, &out.test}) std::sort(v->begin(), v->end());
  return out;
}

std::vector<NormalizedSentence> select(const std::vector<NormalizedSentence>& sentences,
                                       const std::vector<std::size_t>& ids) {
  std::vector<NormalizedSentence> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) out.push_back(sentences.at(i));
  return out;
}

std::string splits_manifest(const Splits& s, std::uint64_t seed, std::array<double, 3> ratios) {
  nlohmann::json j;
  j["seed"] = seed;
  j["ratios"] = ratios;
  j["train"] = s.train;
  j["valid"] = s.valid;
  j["test"] = s.test;
  return j.dump(2) + "\n";
}

std::vector<double> number_pool(const std::vector<NormalizedSentence>& sentences) {
  std::vector<double> pool;
  for (const auto& s : sentences) {
    for (const auto& n : s.numbers) pool.push_back(n.value);
  }
  return pool;
}

double nearest_rank(std::vector<double> sorted_values, double p) {
  if (sorted_values.empty()) throw DataError("quantile of an empty set");
  const auto n = static_cast<double>(sorted_values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted_values.size());
  return sorted_values[rank - 1];
}

CorpusStats compute_stats(const std::vector<NormalizedSentence>& sentences) {
  if (sentences.empty()) throw DataError("statistics of an empty corpus");
  CorpusStats st;
  st.instances = sentences.size();
  std::vector<double> values;
  for (const auto& s : sentences) {
    st.tokens += s.tokens.size();
    st.numbers += s.numbers.size();
    for (const auto& n : s.numbers) values.push_back(n.value);
  }
  st.mean_tokens = static_cast<double>(st.tokens) / static_cast<double>(st.instances);
  st.percent_numbers = st.tokens == 0 ? 0.0 : 100.0 * static_cast<double>(st.numbers) / static_cast<double>(st.tokens);
  if (!values.empty()) {
    std::sort(values.begin(), values.end());
    st.min = values.front();
    st.max = values.back();
    st.p50 = nearest_rank(values, 50);
    st.p75 = nearest_rank(values, 75);
    st.p90 = nearest_rank(values, 90);
  }
  return st;
}

std::string stats_json(const CorpusStats& s) {
  nlohmann::ordered_json j;
  j["instances"] = s.instances;
  j["tokens"] = s.tokens;
  j["numbers"] = s.numbers;
  j["mean_tokens"] = s.mean_tokens;
  j["percent_numbers"] = s.percent_numbers;
  j["quantiles"] = {{"min", s.min}, {"p50", s.p50}, {"p75", s.p75}, {"p90", s.p90}, {"max", s.max}};
  return j.dump(2) + "\n";
}

std::string stats_table(const CorpusStats& s) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "%-16s %14zu\n%-16s %14.2f\n%-16s %14.2f\n%-16s %14.6g\n%-16s %14.6g\n%-16s %14.6g\n%-16s %14.6g\n"
                "%-16s %14.6g\n",
                "#instances", s.instances, "avg tokens", s.mean_tokens, "%numbers", s.percent_numbers, "min", s.min,
                "median", s.p50, "75%", s.p75, "90%", s.p90, "max", s.max);
  return buf;
}

}  // namespace numerate::corpus
