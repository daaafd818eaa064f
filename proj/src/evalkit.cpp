#include "numerate/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "numerate/errors.hpp"

namespace numerate::eval {

const char* anomaly_name(AnomalyKind k) noexcept { return k == AnomalyKind::String ? "string" : "random"; }

const char* op_name(StringOp op) noexcept {
  switch (op) {
    case StringOp::Add: return "add";
    case StringOp::Del: return "del";
    case StringOp::Swap: return "swap";
  }
  return "?";
}

int decade_of(double v) {
  if (v >= text::kMinValue && v <= text::kMaxValue) return text::exponent_row(v);
  return static_cast<int>(std::floor(std::log10(v)));
}

double lmae(std::span<const EvalRecord> records) {
  if (records.empty()) throw DataError("LMAE of an empty record set");
  double acc = 0.0;
  for (const auto& r : records) acc += std::abs(std::log10(r.y) - std::log10(r.pred));
  return acc / static_cast<double>(records.size());
}

double e_acc(std::span<const EvalRecord> records) {
  if (records.empty()) throw DataError("E-Acc of an empty record set");
  std::size_t hits = 0;
  for (const auto& r : records) hits += decade_of(r.y) == decade_of(r.pred);
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

// ---------------------------------------------------------------- anomalies

std::string shortest_decimal(double v) {
  char buf[512];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

namespace {

struct Digits {
  std::string digits;   // without the decimal point
  std::size_t int_len;  // digits before the point
  bool has_point;
};

Digits split_digits(double y) {
  const std::string s = shortest_decimal(y);
  Digits d{"", 0, false};
  for (char c : s) {
    if (c == '.') {
      d.has_point = true;
      continue;
    }
    d.digits.push_back(c);
    if (!d.has_point) ++d.int_len;
  }
  return d;
}

double join_digits(const Digits& d) {
  std::string s = d.digits.substr(0, d.int_len);
  if (s.empty()) s = "0";
  if (d.has_point && d.int_len < d.digits.size()) s += "." + d.digits.substr(d.int_len);
  double v = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

bool in_range(double v) { return v >= text::kMinValue && v <= text::kMaxValue; }

}  // namespace

std::vector<StringOp> applicable_ops(double y) {
  const Digits d = split_digits(y);
  std::vector<StringOp> ops = {StringOp::Add};
  if (d.digits.size() >= 2) {
    ops.push_back(StringOp::Del);
    if (d.digits[0] != d.digits[1]) ops.push_back(StringOp::Swap);
  }
  return ops;
}

std::optional<double> apply_string_op(double y, StringOp op, std::size_t position, int digit) {
  Digits d = split_digits(y);
  switch (op) {
    case StringOp::Add:
      if (position > d.digits.size() || digit < 0 || digit > 9) return std::nullopt;
      d.digits.insert(d.digits.begin() + static_cast<std::ptrdiff_t>(position), static_cast<char>('0' + digit));
      if (position <= d.int_len) ++d.int_len;
      break;
    case StringOp::Del:
      if (d.digits.size() < 2 || position >= d.digits.size()) return std::nullopt;
      d.digits.erase(d.digits.begin() + static_cast<std::ptrdiff_t>(position));
      if (position < d.int_len) --d.int_len;
      break;
    case StringOp::Swap:
      if (d.digits.size() < 2 || d.digits[0] == d.digits[1]) return std::nullopt;
      std::swap(d.digits[0], d.digits[1]);
      break;
  }
  return join_digits(d);
}

StringAnomaly anomaly_string(double y, Rng& rng, std::span<const double> fallback_pool) {
  const auto ops = applicable_ops(y);
  const std::size_t n_digits = split_digits(y).digits.size();
  // The op is drawn once; retries redraw position and digit only, so a
  // range failure in one op does not shift mass onto the others.
  const StringOp op = ops[uniform_index(rng, ops.size())];
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::optional<double> v;
    if (op == StringOp::Add) {
      const std::size_t pos = uniform_index(rng, n_digits + 1);
      const int digit = static_cast<int>(uniform_index(rng, 10));
      v = apply_string_op(y, op, pos, digit);
    } else if (op == StringOp::Del) {
      v = apply_string_op(y, op, uniform_index(rng, n_digits));
    } else {
      v = apply_string_op(y, op);
    }
    if (v && *v != y && in_range(*v)) return {*v, op, false};
  }
  return {anomaly_random(fallback_pool, y, rng), StringOp::Add, true};
}

double anomaly_random(std::span<const double> pool, double y, Rng& rng) {
  if (!pool.empty()) {
    for (int tries = 0; tries < 100; ++tries) {
      const double v = pool[uniform_index(rng, pool.size())];
      if (v != y) return v;
    }
  }
  return y * 10.0 <= text::kMaxValue ? y * 10.0 : y / 10.0;
}

// ---------------------------------------------------------------- AUC

double roc_auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw DataError("AUC needs positive and negative scores");
  struct Item {
    double score;
    bool pos;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  auto clean = [](double s) { return std::isnan(s) ? -std::numeric_limits<double>::infinity() : s; };
  for (double s : positives) items.push_back({clean(s), true});
  for (double s : negatives) items.push_back({clean(s), false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].pos) rank_sum += midrank;
    }
    i = j;
  }
  const auto np = static_cast<double>(positives.size());
  const auto nn = static_cast<double>(negatives.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double roc_auc(std::span<const EvalRecord> records, AnomalyKind kind) {
  std::vector<double> pos, neg;
  for (const auto& r : records) {
    bool any = false;
    for (const auto& a : r.anomalies) {
      if (a.kind != kind) continue;
      neg.push_back(a.score);
      any = true;
    }
    if (any && r.score_true) pos.push_back(*r.score_true);
  }
  if (pos.empty() || neg.empty()) throw DataError(std::string("no scored records with ") + anomaly_name(kind) + " anomalies");
  return roc_auc(pos, neg);
}

// ---------------------------------------------------------------- models

double baseline_constant(std::span<const double> train_values, BaselineKind kind) {
  if (train_values.empty()) throw DataError("baseline needs training values");
  if (kind == BaselineKind::Mean) {
    return std::accumulate(train_values.begin(), train_values.end(), 0.0) / static_cast<double>(train_values.size());
  }
  std::vector<double> v(train_values.begin(), train_values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<EvalRecord> collect_records(const Predictor& model, const std::vector<text::NormalizedSentence>& sentences,
                                        corpus::EvalMode mode, const EvalOptions& opts) {
  std::vector<EvalRecord> records;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    const auto plan = corpus::eval_plan(s, opts.seed, mode);
    if (!plan) continue;
    const std::size_t k = plan->targets().front();
    const TargetPrediction p = model.predict(s, *plan, k);
    EvalRecord r;
    r.sentence = i;
    r.target = k;
    r.y = s.numbers[k].value;
    r.pred = heads::clamp_value(p.point);
    if (p.score) {
      r.score_true = p.score(r.y);
      if (opts.anomalies) {
        Rng rng(mix_seed(corpus::sentence_seed(s, opts.seed), 0xa11));
        const double sv = anomaly_string(r.y, rng, opts.train_pool).value;
        const double rv = anomaly_random(opts.train_pool, r.y, rng);
        r.anomalies.push_back({AnomalyKind::String, sv, p.score(sv)});
        r.anomalies.push_back({AnomalyKind::Random, rv, p.score(rv)});
      }
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) {
    throw DataError(std::string("no evaluable sentences for mode ") + corpus::eval_mode_name(mode) +
                    (mode == corpus::EvalMode::AllMasked ? " (needs at least 2 numbers per sentence)" : ""));
  }
  return records;
}

MetricsReport summarize(const std::vector<EvalRecord>& records, const std::string& model, corpus::EvalMode mode) {
  MetricsReport m;
  m.model = model;
  m.mode = corpus::eval_mode_name(mode);
  m.n = records.size();
  m.lmae = lmae(records);
  m.e_acc = e_acc(records);
  const bool scored = std::any_of(records.begin(), records.end(), [](const EvalRecord& r) { return !r.anomalies.empty(); });
  if (scored) {
    m.r_auc = roc_auc(records, AnomalyKind::Random);
    m.s_auc = roc_auc(records, AnomalyKind::String);
  }
  return m;
}

MetricsReport evaluate(const Predictor& model, const std::vector<text::NormalizedSentence>& sentences,
                       corpus::EvalMode mode, const EvalOptions& opts) {
  if (sentences.empty()) throw DataError("empty evaluation set");
  return summarize(collect_records(model, sentences, mode, opts), model.name(), mode);
}

std::string report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["mode"] = r.mode;
  j["n"] = r.n;
  j["lmae"] = r.lmae;
  j["e_acc"] = r.e_acc;
  j["r_auc"] = r.r_auc ? nlohmann::ordered_json(*r.r_auc) : nlohmann::ordered_json(nullptr);
  j["s_auc"] = r.s_auc ? nlohmann::ordered_json(*r.s_auc) : nlohmann::ordered_json(nullptr);
  return j.dump(2) + "\n";
}

std::string report_table(const std::vector<MetricsReport>& rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.model.size());
  auto fmt_auc = [](const std::optional<double>& v) {
    char b[32];
    if (!v) return std::string("-");
    std::snprintf(b, sizeof b, "%.3f", *v);
    return std::string(b);
  };
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %-10s %6s %7s %7s %7s %7s\n", static_cast<int>(width), "Model", "Mode", "n",
                "LMAE", "E-Acc", "r-AUC", "s-AUC");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-*s  %-10s %6zu %7.3f %7.1f %7s %7s\n", static_cast<int>(width),
                  r.model.c_str(), r.mode.c_str(), r.n, r.lmae, 100.0 * r.e_acc, fmt_auc(r.r_auc).c_str(),
                  fmt_auc(r.s_auc).c_str());
    out += line;
  }
  return out;
}

std::string records_jsonl(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["sentence"] = r.sentence;
    j["target"] = r.target;
    j["y"] = r.y;
    j["pred"] = r.pred;
    j["log_p_true"] = r.score_true ? nlohmann::ordered_json(*r.score_true) : nlohmann::ordered_json(nullptr);
    auto arr = nlohmann::ordered_json::array();
    for (const auto& a : r.anomalies) {
      arr.push_back({{"kind", anomaly_name(a.kind)}, {"value", a.value}, {"score", a.score}});
    }
    j["anomalies"] = std::move(arr);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace numerate::eval
