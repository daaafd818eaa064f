// Acceptance suite: one PASS/FAIL line per criterion. `--only N` runs one.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "numerate/diff/gradcheck.hpp"
#include "numerate/evalkit.hpp"
#include "numerate/model.hpp"
#include "numerate/numtext.hpp"
#include "numerate/synth.hpp"
#include "support/quadrature.hpp"

using namespace numerate;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const double kLn10 = std::log(10.0);

// ---------------------------------------------------------------- shared rigs

struct HeadRig {
  diff::ParameterStore store;
  std::unique_ptr<encoder::InputEmbedder> embedder;
  std::unique_ptr<heads::Head> head;
  diff::Parameter* h = nullptr;

  HeadRig(heads::HeadKind kind, std::uint64_t seed) {
    Rng rng(seed);
    encoder::EncoderConfig ec;
    ec.dim = 8;
    embedder = std::make_unique<encoder::InputEmbedder>(store, ec, 10, rng);
    heads::HeadConfig hc;
    hc.kind = kind;
    hc.mlp_hidden = 8;
    hc.em.iters = 30;
    hc.em.seed = seed;
    head = heads::make_head(store, hc, 12, *embedder, rng);
    h = &store.add("probe.h", nn::normal_array(1, 12, 1.5, rng));
    std::vector<double> pool;
    for (int i = 0; i < 2000; ++i) pool.push_back(std::pow(10.0, 16.0 * uniform01(rng) * uniform01(rng)));
    head->prepare(pool);
  }
};

double mass(const heads::Density& d) {
  std::vector<double> breaks;
  for (int e = 0; e <= 17; ++e) breaks.push_back(e * kLn10);
  auto lp = [&](double y) { return d.log_density(y); };
  if (d.family() == "dexp") return oracle::log_space_mass(lp, 0.0, 0.0, 17 * kLn10, breaks);
  if (const auto* l = std::get_if<heads::LogLaplace>(&d.params())) breaks.push_back(l->mu);
  return oracle::log_space_mass(lp, d.support_lower(), -150.0, 150.0, breaks);
}

struct Split3 {
  std::vector<text::NormalizedSentence> train, valid, test;
};

// 5000 / 500 / 500 by document.
Split3 synthetic(const std::string& preset, std::uint64_t seed) {
  const auto all = synth::normalize(synth::generate(synth::preset(preset), 6000, seed));
  const auto sp = corpus::build_splits(all, {5000.0 / 6000, 500.0 / 6000, 500.0 / 6000}, seed);
  return {corpus::select(all, sp.train), corpus::select(all, sp.valid), corpus::select(all, sp.test)};
}

model::RunConfig bigru(heads::HeadKind head, std::uint64_t seed) {
  model::RunConfig c;
  c.head.kind = head;
  c.seed = seed;
  c.head.em.seed = seed;
  return c;
}

eval::MetricsReport evaluate(const model::Model& m, const std::vector<text::NormalizedSentence>& test,
                             corpus::EvalMode mode = corpus::EvalMode::Standard) {
  eval::EvalOptions o;
  o.seed = 2024;
  o.train_pool = m.pool();
  return eval::evaluate(model::ModelPredictor(m), test, mode, o);
}

// The contextual run shared by criteria 7 and 10.
struct Contextual {
  Split3 data;
  std::optional<model::Model> model;
  double seconds = 0;
};

Contextual& contextual() {
  static Contextual c;
  if (!c.model) {
    const auto t0 = std::chrono::steady_clock::now();
    c.data = synthetic("contextual8", 7);
    auto cfg = bigru(heads::HeadKind::DExp, 7);
    cfg.lr = 5e-2;
    c.model.emplace(model::fit(cfg, c.data.train, c.data.valid));
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return c;
}

// ---------------------------------------------------------------- criteria

Outcome density_normalization() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  for (auto kind : {heads::HeadKind::LogLP, heads::HeadKind::FlowLP, heads::HeadKind::DExp, heads::HeadKind::Gmm}) {
    for (std::uint64_t draw = 0; draw < 20; ++draw) {
      HeadRig rig(kind, 1000 + draw);
      diff::Tape tape(diff::Mode::Eval, false);
      const double err = std::abs(mass(rig.head->density(tape, tape.param(*rig.h))) - 1.0);
      if (err > worst) {
        worst = err;
        where = fmt("%s draw %d", heads::head_name(kind), static_cast<int>(draw));
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-2 && secs < 60,
          fmt("80 draws, worst |mass-1| = %.2e at %s (limit 1e-2), %.1fs (limit 60s)", worst, where.c_str(), secs)};
}

Outcome flow_correctness() {
  Rng rng(42);
  double worst_inv = 0.0, worst_red = 0.0;
  for (int t = 0; t < 50; ++t) {
    heads::FlowLaplace f{uniform01(rng) * 30, 0.1 + 2 * uniform01(rng), 5 * uniform01(rng), 0.1 + 9.9 * uniform01(rng),
                         0.1 + 9.9 * uniform01(rng)};
    const heads::Density flow(heads::FlowLaplace{f.mu, f.s, 0.0, 1.0, 1.0});
    const heads::Density log(heads::LogLaplace{f.mu, f.s});
    for (int i = 0; i < 100; ++i) {
      const double y = std::pow(10.0, 16.0 * i / 99.0);
      worst_inv = std::max(worst_inv, std::abs(f.forward(f.inverse(y)) - y) / y);
      worst_red = std::max(worst_red, std::abs(flow.log_density(y) - log.log_density(y)));
    }
  }
  return {worst_inv < 1e-9 && worst_red <= 1e-9,
          fmt("max rel |g(g^-1(y))-y| = %.2e (limit 1e-9), max |flowlp(0,1,1)-loglp| = %.2e (limit 1e-9)", worst_inv,
              worst_red)};
}

Outcome gradient_fidelity() {
  text::NormalizedSentence s;
  s.tokens = {"in", "[#MASK]", "the", "firm", "sold", "[#MASK]", "units", "for", "$", "[#MASK]", "each", "."};
  s.numbers = {{1, 2016}, {5, 4.5e4}, {9, 12.5}};
  corpus::MaskPlan plan;
  plan.entries = {{corpus::Role::Context, 2016}, {corpus::Role::TargetHidden, 4.5e4}, {corpus::Role::TargetKept, 12.5}};
  int passed = 0, total = 0;
  double worst = 0.0;
  std::string failures;
  for (auto enc : {encoder::EncoderKind::BiGru, encoder::EncoderKind::Transformer}) {
    for (auto kind : {heads::HeadKind::LogLP, heads::HeadKind::FlowLP, heads::HeadKind::DExp, heads::HeadKind::Gmm,
                      heads::HeadKind::Disc}) {
      model::RunConfig c;
      c.encoder.kind = enc;
      c.encoder.dim = 8;
      c.encoder.gru_hidden = 4;
      c.encoder.tf_layers = 2;
      c.encoder.tf_heads = 2;
      c.encoder.tf_ff = 12;
      c.head.kind = kind;
      c.head.mlp_hidden = 5;
      c.head.em.k = 4;
      c.head.em.iters = 20;
      c.seed = 3;
      model::Model m(c, encoder::Vocab::build({s}));
      Rng prng(5);
      std::vector<double> pool;
      for (int i = 0; i < 300; ++i) pool.push_back(std::pow(10.0, 1 + 10 * uniform01(prng)));
      m.prepare(pool);
      auto loss = [&](diff::Tape& tape) {
        Rng r(77);
        return m.loss(tape, s, plan, r);
      };
      diff::GradCheckOptions opts;
      opts.h = 1e-4;
      opts.tol = 1e-4;
      opts.max_per_param = 8;
      opts.seed = 11;
      const auto rep = diff::finite_diff_check(loss, m.store().all(), opts);
      ++total;
      worst = std::max(worst, rep.max_rel_error);
      if (rep.passed) {
        ++passed;
      } else {
        failures += fmt(" %s-%s", encoder::kind_name(enc), heads::head_name(kind));
      }
    }
  }
  return {passed == total, fmt("%d/%d encoder x loss combinations pass (h=1e-4, tol=1e-4), worst rel err %.2e%s",
                               passed, total, worst, failures.empty() ? "" : (", failing:" + failures).c_str())};
}

Outcome em_behaviour() {
  const auto t0 = std::chrono::steady_clock::now();
  // Monotonicity on a skewed pool with many components.
  Rng rng(8);
  std::vector<double> values;
  for (int i = 0; i < 5000; ++i) values.push_back(std::pow(10.0, 16 * uniform01(rng) * uniform01(rng)));
  heads::EmConfig cfg;
  cfg.k = 31;
  cfg.iters = 50;
  const auto mono = heads::gmm_pretrain_em(values, cfg);
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < mono.loglik.size(); ++i) {
    worst_drop = std::max(worst_drop, (mono.loglik[i - 1] - mono.loglik[i]) / std::abs(mono.loglik[i - 1]));
  }
  // Generate-and-recover, components aligned by sorting their means.
  const std::vector<double> truth = {2.0, 6.0, 11.0};
  std::vector<double> err(3, 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng r(500 + seed);
    std::vector<double> xs;
    for (int i = 0; i < 3000; ++i) {
      xs.push_back(std::pow(10.0, truth[static_cast<std::size_t>(i % 3)] + 0.5 * std::normal_distribution<double>()(r)));
    }
    heads::EmConfig c3;
    c3.k = 3;
    c3.iters = 50;
    c3.seed = seed;
    auto means = heads::gmm_pretrain_em(xs, c3).components.means;
    std::sort(means.begin(), means.end());
    for (std::size_t k = 0; k < 3; ++k) err[k] += std::abs(means[k] - truth[k]) / 5.0;
  }
  const double max_err = *std::max_element(err.begin(), err.end());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst_drop <= 1e-12 && max_err < 0.1 && secs < 60,
          fmt("50-iter loglik max relative drop %.1e (must be <= 1e-12), seed-averaged mean error %.3f (limit 0.1), "
              "%.1fs",
              worst_drop, max_err, secs)};
}

Outcome masking_statistics() {
  text::NormalizedSentence s;
  for (int i = 0; i < 20; ++i) {
    s.tokens.push_back("w");
    s.numbers.push_back({s.tokens.size(), 42.0});
    s.tokens.emplace_back(text::kNumberMask);
  }
  const std::vector<double> pool = {3, 30, 300};
  Rng rng(99);
  std::size_t total = 0, sel = 0, hid = 0, ran = 0, kep = 0;
  while (total < 100000) {
    for (const auto& e : corpus::plan_masks(s, rng, {}, pool).entries) {
      ++total;
      if (!corpus::is_target(e.role)) continue;
      ++sel;
      hid += e.role == corpus::Role::TargetHidden;
      ran += e.role == corpus::Role::TargetRandom;
      kep += e.role == corpus::Role::TargetKept;
    }
  }
  const double r_sel = static_cast<double>(sel) / static_cast<double>(total);
  const double n = static_cast<double>(sel);
  const double h = hid / n, r = ran / n, k = kep / n;
  const bool ok = std::abs(r_sel - 0.5) <= 0.01 && std::abs(h - 0.8) <= 0.01 && std::abs(r - 0.1) <= 0.01 &&
                  std::abs(k - 0.1) <= 0.01;
  return {ok, fmt("%zu numbers: select %.4f, hidden %.4f, random %.4f, kept %.4f (targets .5/.8/.1/.1 +- .01)", total,
                  r_sel, h, r, k)};
}

Outcome metric_oracles() {
  Rng rng(6);
  std::vector<eval::EvalRecord> recs;
  for (int i = 0; i < 1000; ++i) {
    eval::EvalRecord r;
    r.y = std::pow(10.0, 16 * uniform01(rng));
    r.pred = i % 10 == 0 ? text::pow10(static_cast<int>(uniform_index(rng, 17))) : std::pow(10.0, 16 * uniform01(rng));
    recs.push_back(r);
  }
  // Brute force: decade by repeated comparison against exact powers of ten.
  auto decade = [](double v) {
    int e = 0;
    while (e < 16 && text::pow10(e + 1) <= v) ++e;
    return e;
  };
  long double lm = 0;
  int hits = 0;
  for (const auto& r : recs) {
    lm += std::fabs(std::log10(static_cast<long double>(r.y)) - std::log10(static_cast<long double>(r.pred)));
    hits += decade(r.y) == decade(r.pred);
  }
  const double lmae_err = std::abs(static_cast<double>(lm / 1000) - eval::lmae(recs));
  const double eacc_err = std::abs(hits / 1000.0 - eval::e_acc(recs));

  std::vector<double> pos(10000), neg(10000);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    pos[i] = 5.0 + uniform01(rng);
    neg[i] = uniform01(rng);
  }
  const double perfect = eval::roc_auc(pos, neg);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    pos[i] = std::normal_distribution<double>()(rng);
    neg[i] = std::normal_distribution<double>()(rng);
  }
  const double iid = eval::roc_auc(pos, neg);
  const bool ok = lmae_err <= 1e-12 && eacc_err <= 1e-12 && perfect == 1.0 && std::abs(iid - 0.5) <= 0.02;
  return {ok, fmt("|LMAE-oracle| %.1e, |E-Acc-oracle| %.1e (limit 1e-12); perfect AUC %.3f; iid AUC %.4f (0.5 +- 0.02)",
                  lmae_err, eacc_err, perfect, iid)};
}

Outcome contextual_learning() {
  auto& c = contextual();
  const auto rep = evaluate(*c.model, c.data.test);
  eval::EvalOptions o;
  o.seed = 2024;
  o.train_pool = c.model->pool();
  const auto median = eval::evaluate(
      eval::ConstantPredictor("median", eval::baseline_constant(corpus::number_pool(c.data.train),
                                                                eval::BaselineKind::Median)),
      c.data.test, corpus::EvalMode::Standard, o);
  return {rep.e_acc >= 0.9 && median.e_acc <= 0.3 && c.seconds < 600,
          fmt("BiGRU-DExp test E-Acc %.3f (>= 0.90), Train-Median E-Acc %.3f (<= 0.30), %zu/%zu/%zu split, %.0fs "
              "(limit 600s)",
              rep.e_acc, median.e_acc, c.data.train.size(), c.data.valid.size(), c.data.test.size(), c.seconds)};
}

Outcome multimodality() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = synthetic("bimodal", 8);
  const auto dexp = model::fit(bigru(heads::HeadKind::DExp, 8), data.train, data.valid);
  const auto loglp = model::fit(bigru(heads::HeadKind::LogLP, 8), data.train, data.valid);
  const double l_dexp = evaluate(dexp, data.test).lmae;
  const double l_log = evaluate(loglp, data.test).lmae;
  // Best any context-free predictor can do: constant at the median of log10 y.
  std::vector<double> logs;
  for (const auto& s : data.test) {
    for (const auto& n : s.numbers) logs.push_back(std::log10(n.value));
  }
  std::sort(logs.begin(), logs.end());
  const double med = logs[logs.size() / 2];
  double floor = 0;
  for (double l : logs) floor += std::abs(l - med) / static_cast<double>(logs.size());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {l_log - l_dexp >= 1.0 && secs < 600,
          fmt("LMAE DExp %.3f vs LogLP %.3f, margin %.3f (needs >= 1.0); constant-predictor floor %.3f, %.0fs", l_dexp,
              l_log, l_log - l_dexp, floor, secs)};
}

Outcome one_vs_all() {
  const auto data = synthetic("linked", 9);
  const auto m = model::fit(bigru(heads::HeadKind::DExp, 9), data.train, data.valid);
  const double std_acc = evaluate(m, data.test).e_acc;
  const double all_acc = evaluate(m, data.test, corpus::EvalMode::AllMasked).e_acc;
  return {std_acc - all_acc >= 0.1,
          fmt("E-Acc STANDARD %.3f vs ALL_MASKED %.3f, drop %.3f (needs >= 0.1)", std_acc, all_acc, std_acc - all_acc)};
}

Outcome anomaly_machinery() {
  Rng rng(31);
  std::vector<double> pool;
  for (int i = 0; i < 50; ++i) pool.push_back(std::floor(std::pow(10.0, 8 * uniform01(rng))) + 1);
  pool.push_back(7);
  std::size_t same = 0;
  for (int i = 0; i < 100000; ++i) {
    const double y = i % 7 == 0 ? 7.0 : pool[uniform_index(rng, pool.size())];
    same += eval::anomaly_string(y, rng, pool).value == y;
    same += eval::anomaly_random(pool, y, rng) == y;
  }
  double worst_dev = 0.0;
  for (double y : {5.0, 11.0, 2016.0, 3.75}) {
    const auto ops = eval::applicable_ops(y);
    std::map<eval::StringOp, int> n;
    for (int i = 0; i < 10000; ++i) ++n[eval::anomaly_string(y, rng, pool).op];
    for (auto op : ops) worst_dev = std::max(worst_dev, std::abs(n[op] / 10000.0 - 1.0 / static_cast<double>(ops.size())));
  }
  auto& c = contextual();
  const auto rep = evaluate(*c.model, c.data.test);
  const double r_auc = rep.r_auc.value_or(0.0);
  return {same == 0 && worst_dev <= 0.02 && r_auc >= 0.85,
          fmt("%zu of 200000 anomalies equal y; worst op-frequency deviation %.4f (<= 0.02); r-AUC %.3f (>= 0.85), "
              "s-AUC %.3f",
              same, worst_dev, r_auc, rep.s_auc.value_or(0.0))};
}

Outcome parser_goldens() {
  const std::vector<std::pair<std::string, double>> table = {
      {"$32 million", 3.2e7}, {"sixty thousand", 6e4}, {"thirty million", 3e7}, {"2 trillion", 2e12},
      {"third", 3},           {"1,250,000", 1250000},  {"twenty-five", 25},     {"one hundred and five", 105},
      {"$12bn", 1.2e10},      {"1.5 billion", 1.5e9},  {"40k", 4e4},            {"the 3rd quarter", 3}};
  int ok = 0;
  std::string bad;
  for (const auto& [phrase, want] : table) {
    const auto got = text::extract_numbers(phrase);
    if (got.size() == 1 && got[0].value == want) {
      ++ok;
    } else {
      bad += " '" + phrase + "'";
    }
  }
  return {ok == static_cast<int>(table.size()),
          fmt("%d/%zu phrases exact%s", ok, table.size(), bad.empty() ? "" : (", wrong:" + bad).c_str())};
}

Outcome determinism() {
  const auto all = synth::normalize(synth::generate(synth::preset("linked"), 600, 12));
  const auto sp = corpus::build_splits(all, {0.8, 0.1, 0.1}, 12);
  const auto tr = corpus::select(all, sp.train), va = corpus::select(all, sp.valid), te = corpus::select(all, sp.test);
  auto cfg = bigru(heads::HeadKind::DExp, 12);
  cfg.encoder.dim = 32;
  cfg.encoder.gru_hidden = 16;
  cfg.epochs = 3;
  const auto a = model::fit(cfg, tr, va);
  const auto b = model::fit(cfg, tr, va);
  const auto ra = eval::report_json(evaluate(a, te)), rb = eval::report_json(evaluate(b, te));
  const auto dir = std::filesystem::temp_directory_path() / "numerate_acceptance_ckpt";
  std::filesystem::remove_all(dir);
  a.save(dir);
  const auto loaded = model::Model::load(dir);
  const auto rl = eval::report_json(evaluate(loaded, te));
  std::filesystem::remove_all(dir);
  return {ra == rb && ra == rl, fmt("same-seed reports %s; reloaded checkpoint report %s",
                                    ra == rb ? "byte-identical" : "DIFFER", ra == rl ? "identical" : "DIFFERS")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") only = std::atoi(argv[i + 1]);
  }
  const std::vector<Criterion> all = {
      {1, "density normalization", density_normalization},
      {2, "flow correctness", flow_correctness},
      {3, "gradient fidelity", gradient_fidelity},
      {4, "EM", em_behaviour},
      {5, "masking statistics", masking_statistics},
      {6, "metric oracles", metric_oracles},
      {7, "contextual learning", contextual_learning},
      {8, "multimodality ordering", multimodality},
      {9, "one-vs-all ablation", one_vs_all},
      {10, "anomaly machinery", anomaly_machinery},
      {11, "parser goldens", parser_goldens},
      {12, "determinism and persistence", determinism},
  };
  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
