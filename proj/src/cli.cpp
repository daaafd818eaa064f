#include "numerate/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "numerate/errors.hpp"
#include "numerate/io.hpp"
#include "numerate/model.hpp"
#include "numerate/synth.hpp"

namespace numerate::cli {

namespace fs = std::filesystem;

namespace {

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    io::write_file(path, text);
  }
}

corpus::EvalMode parse_mode(const std::string& s) {
  if (s == "standard") return corpus::EvalMode::Standard;
  if (s == "all-masked") return corpus::EvalMode::AllMasked;
  throw std::invalid_argument("unknown eval mode '" + s + "'");
}

struct EvalArgs {
  std::string model_dir;
  std::string baseline;
  std::string train_file;
  std::string data;
  std::string mode = "standard";
  std::string format = "json";
  std::string records;
  std::uint64_t seed = 0;
};

void add_eval_options(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("--model", a.model_dir, "Checkpoint directory");
  cmd->add_option("--baseline", a.baseline, "Constant baseline instead of a model")
      ->check(CLI::IsMember({"mean", "median"}));
  cmd->add_option("--train", a.train_file, "Training sentences for the baseline value and anomaly pool");
  cmd->add_option("--data", a.data, "Evaluation sentences (JSONL)")->required();
  cmd->add_option("--mode", a.mode, "standard | all-masked")->check(CLI::IsMember({"standard", "all-masked"}));
  cmd->add_option("--format", a.format, "json | table")->check(CLI::IsMember({"json", "table"}));
  cmd->add_option("--records", a.records, "Write per-record JSONL here");
}

// Model or baseline plus the anomaly pool, per the eval flags.
struct Evaluated {
  std::optional<model::Model> model;
  std::unique_ptr<eval::Predictor> predictor;
  std::vector<double> pool;
};

Evaluated make_predictor(const EvalArgs& a) {
  Evaluated e;
  if (!a.train_file.empty()) e.pool = corpus::number_pool(io::read_sentences(a.train_file));
  if (!a.model_dir.empty()) {
    e.model.emplace(model::Model::load(a.model_dir));
    if (e.pool.empty()) e.pool = e.model->pool();
  }
  if (!a.baseline.empty()) {
    if (e.pool.empty()) throw DataError("--baseline needs --train or --model for the training values");
    const auto kind = a.baseline == "mean" ? eval::BaselineKind::Mean : eval::BaselineKind::Median;
    e.predictor = std::make_unique<eval::ConstantPredictor>("train-" + a.baseline, eval::baseline_constant(e.pool, kind));
  } else if (e.model) {
    e.predictor = std::make_unique<model::ModelPredictor>(*e.model);
  } else {
    throw std::invalid_argument("eval needs --model or --baseline");
  }
  return e;
}

// Literal mask tokens in user text become scored positions with no value.
std::pair<text::NormalizedSentence, corpus::MaskPlan> predict_input(const std::string& sentence, long target) {
  text::NormalizedSentence s = text::tokenize_sentence(sentence);
  std::vector<bool> is_number(s.tokens.size(), false);
  for (const auto& n : s.numbers) is_number[n.token_index] = true;
  std::vector<std::size_t> literal;
  for (std::size_t t = 0; t < s.tokens.size(); ++t) {
    if (s.tokens[t] == text::kNumberMask && !is_number[t]) literal.push_back(t);
  }
  for (std::size_t t : literal) s.numbers.push_back({t, 1.0});
  std::sort(s.numbers.begin(), s.numbers.end(),
            [](const auto& a, const auto& b) { return a.token_index < b.token_index; });
  if (s.numbers.empty()) throw DataError("sentence has no number or " + std::string(text::kNumberMask) + " to predict");

  std::size_t k = 0;
  if (target >= 0) {
    k = static_cast<std::size_t>(target);
    if (k >= s.numbers.size()) {
      throw std::invalid_argument("--target " + std::to_string(target) + " but the sentence has " +
                                  std::to_string(s.numbers.size()) + " numbers");
    }
  } else if (!literal.empty()) {
    for (k = 0; s.numbers[k].token_index != literal.front(); ++k) {
    }
  }
  corpus::MaskPlan plan;
  for (std::size_t i = 0; i < s.numbers.size(); ++i) {
    const bool lit = std::find(literal.begin(), literal.end(), s.numbers[i].token_index) != literal.end();
    corpus::Role r = corpus::Role::Context;
    if (i == k) r = corpus::Role::TargetHidden;
    else if (lit) r = corpus::Role::ContextHidden;
    plan.entries.push_back({r, s.numbers[i].value});
  }
  return {std::move(s), std::move(plan)};
}

std::string decade_table(const heads::Density& d, double point) {
  const auto p = d.decade_probabilities();
  std::string out = "decade  range                    probability\n";
  char line[128];
  double total = 0.0;
  for (std::size_t e = 0; e < p.size(); ++e) {
    std::snprintf(line, sizeof line, "%6zu  [1e%02zu, 1e%02zu)%12s %.6f\n", e, e, e + 1, "", p[e]);
    out += line;
    total += p[e];
  }
  std::snprintf(line, sizeof line, "sum %.12f\nprediction %.6g\n", total, point);
  return out + line;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Masked number prediction and numeric anomaly detection"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Normalise raw text or JSONL documents into sentence JSONL");
  std::vector<std::string> pre_in;
  std::string pre_out;
  text::FilterConfig filt;
  pre->add_option("inputs", pre_in, "Text or JSONL files")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, "Output JSONL (stdout by default)");
  pre->add_option("--min-words", filt.min_words)->capture_default_str();
  pre->add_option("--max-words", filt.max_words)->capture_default_str();
  pre->add_option("--max-tokens", filt.max_tokens)->capture_default_str();
  pre->add_flag("--dollar-only", filt.dollar_only, "Keep sentences with a $-prefixed number");

  // stats
  auto* st = app.add_subcommand("stats", "Corpus statistics");
  std::string st_in, st_out, st_format = "json";
  st->add_option("input", st_in, "Sentence JSONL")->required();
  st->add_option("--format", st_format)->check(CLI::IsMember({"json", "table"}));
  st->add_option("--out", st_out);

  // split
  auto* sp = app.add_subcommand("split", "Document-level train/valid/test split");
  std::string sp_in, sp_dir;
  std::vector<double> ratios = {0.8, 0.1, 0.1};
  sp->add_option("input", sp_in, "Sentence JSONL")->required();
  sp->add_option("--out-dir", sp_dir)->required();
  sp->add_option("--ratios", ratios)->expected(3)->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string tr_train, tr_valid, tr_config, tr_out, tr_encoder, tr_head, tr_numeric, tr_opt;
  std::optional<std::size_t> tr_epochs, tr_batch, tr_patience;
  std::optional<double> tr_lr, tr_body_lr, tr_head_lr;
  bool tr_dollar = false, tr_dump = false;
  tr->add_option("--train", tr_train)->required();
  tr->add_option("--valid", tr_valid)->required();
  tr->add_option("--config", tr_config, "JSON run configuration");
  tr->add_option("--out", tr_out, "Checkpoint directory")->required();
  tr->add_option("--encoder", tr_encoder)->check(CLI::IsMember({"bigru", "transformer"}));
  tr->add_option("--head", tr_head)->check(CLI::IsMember({"loglp", "flowlp", "dexp", "gmm", "disc"}));
  tr->add_option("--numeric", tr_numeric)->check(CLI::IsMember({"exponent", "digit-rnn", "both", "none"}));
  tr->add_option("--optimizer", tr_opt)->check(CLI::IsMember({"adam", "sgd"}));
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--batch", tr_batch);
  tr->add_option("--patience", tr_patience);
  tr->add_option("--lr", tr_lr);
  tr->add_option("--body-lr", tr_body_lr);
  tr->add_option("--head-lr", tr_head_lr);
  tr->add_flag("--dollar-only", tr_dollar);
  tr->add_flag("--print-config", tr_dump, "Print the effective configuration");

  // eval / anomaly
  EvalArgs ev, an;
  auto* evc = app.add_subcommand("eval", "LMAE, E-Acc and AUC metrics");
  add_eval_options(evc, ev);
  auto* anc = app.add_subcommand("anomaly", "Anomaly detection AUCs only");
  add_eval_options(anc, an);
  std::string ev_out, an_out;
  evc->add_option("--out", ev_out);
  anc->add_option("--out", an_out);

  // predict
  auto* pr = app.add_subcommand("predict", "Per-decade prediction for one sentence");
  std::string pr_model, pr_text;
  long pr_target = -1;
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--text", pr_text, "Sentence; use [#MASK] or --target to pick the number")->required();
  pr->add_option("--target", pr_target, "Index of the number to predict");

  // synth
  auto* sy = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string sy_preset, sy_spec, sy_out;
  std::size_t sy_n = 1000;
  bool sy_norm = false;
  auto* sy_p = sy->add_option("--preset", sy_preset, "contextual8 | bimodal | linked");
  sy->add_option("--spec", sy_spec, "JSON template spec")->excludes(sy_p);
  sy->add_option("-n,--count", sy_n)->capture_default_str();
  sy->add_option("--out", sy_out);
  sy->add_flag("--normalized", sy_norm, "Write normalised sentences instead of raw documents");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (pre->parsed()) {
      std::vector<text::NormalizedSentence> all;
      std::int64_t doc = 0;
      for (const auto& f : pre_in) {
        for (const auto& d : io::read_documents(f)) {
          auto ss = text::normalize_document(d, filt, doc++);
          all.insert(all.end(), ss.begin(), ss.end());
        }
      }
      std::ostringstream buf;
      io::write_sentences(buf, all);
      emit(buf.str(), pre_out, out);
      err << "wrote " << all.size() << " sentences from " << doc << " documents\n";
    } else if (st->parsed()) {
      const auto s = corpus::compute_stats(io::read_sentences(st_in));
      emit(st_format == "json" ? corpus::stats_json(s) : corpus::stats_table(s), st_out, out);
    } else if (sp->parsed()) {
      const auto all = io::read_sentences(sp_in);
      const std::array<double, 3> r = {ratios[0], ratios[1], ratios[2]};
      const auto splits = corpus::build_splits(all, r, seed);
      fs::create_directories(sp_dir);
      io::write_sentences(fs::path(sp_dir) / "train.jsonl", corpus::select(all, splits.train));
      io::write_sentences(fs::path(sp_dir) / "valid.jsonl", corpus::select(all, splits.valid));
      io::write_sentences(fs::path(sp_dir) / "test.jsonl", corpus::select(all, splits.test));
      io::write_file(fs::path(sp_dir) / "splits.json", corpus::splits_manifest(splits, seed, r));
      out << "train " << splits.train.size() << "  valid " << splits.valid.size() << "  test " << splits.test.size()
          << "\n";
    } else if (tr->parsed()) {
      model::RunConfig cfg;
      if (!tr_config.empty()) cfg = model::parse_config(io::read_file(tr_config));
      if (app.get_option("--seed")->count() > 0) cfg.seed = seed;
      if (!tr_encoder.empty()) cfg.encoder.kind = encoder::parse_kind(tr_encoder);
      if (!tr_head.empty()) cfg.head.kind = heads::parse_head(tr_head);
      if (!tr_numeric.empty()) cfg.encoder.numeric = encoder::parse_numeric(tr_numeric);
      if (!tr_opt.empty()) cfg.optimizer = tr_opt == "sgd" ? diff::OptimizerKind::Sgd : diff::OptimizerKind::Adam;
      if (tr_epochs) cfg.epochs = *tr_epochs;
      if (tr_batch) cfg.batch = *tr_batch;
      if (tr_patience) cfg.patience = *tr_patience;
      if (tr_lr) cfg.lr = *tr_lr;
      if (tr_body_lr) cfg.body_lr = *tr_body_lr;
      if (tr_head_lr) cfg.head_lr = *tr_head_lr;
      if (tr_dollar) cfg.dollar_only = true;
      cfg.head.em.seed = cfg.seed;
      cfg.validate();
      if (tr_dump) err << model::config_json(cfg);
      model::TrainResult res;
      const auto m = model::fit(cfg, io::read_sentences(tr_train), io::read_sentences(tr_valid), &res, &err);
      m.save(tr_out);
      out << "best epoch " << res.best_epoch << "  valid loss " << res.best_valid << "  -> " << tr_out << "\n";
    } else if (evc->parsed() || anc->parsed()) {
      const bool anomaly = anc->parsed();
      const EvalArgs& a = anomaly ? an : ev;
      const Evaluated e = make_predictor(a);
      const auto data = io::read_sentences(a.data);
      if (data.empty()) throw DataError(a.data + ": empty evaluation set");
      eval::EvalOptions opts;
      opts.seed = seed;
      opts.train_pool = e.pool;
      const auto mode = parse_mode(a.mode);
      const auto records = eval::collect_records(*e.predictor, data, mode, opts);
      const auto report = eval::summarize(records, e.predictor->name(), mode);
      if (!a.records.empty()) io::write_file(a.records, eval::records_jsonl(records));
      std::string text;
      if (anomaly) {
        if (!report.r_auc) throw DataError(report.model + " has no density to score anomalies with");
        if (a.format == "json") {
          nlohmann::ordered_json j;
          j["model"] = report.model;
          j["mode"] = report.mode;
          j["n"] = report.n;
          j["r_auc"] = *report.r_auc;
          j["s_auc"] = *report.s_auc;
          text = j.dump(2) + "\n";
        } else {
          char line[256];
          std::snprintf(line, sizeof line, "%-20s %7s %7s\n%-20s %7.3f %7.3f\n", "Model", "r-AUC", "s-AUC",
                        report.model.c_str(), *report.r_auc, *report.s_auc);
          text = line;
        }
      } else {
        text = a.format == "json" ? eval::report_json(report) : eval::report_table({report});
      }
      emit(text, anomaly ? an_out : ev_out, out);
    } else if (pr->parsed()) {
      const auto m = model::Model::load(pr_model);
      auto [s, plan] = predict_input(pr_text, pr_target);
      const std::size_t k = plan.targets().front();
      model::ModelPredictor p(m);
      const auto tp = p.predict(s, plan, k);
      if (tp.density) {
        out << decade_table(*tp.density, tp.point);
      } else {
        out << "decade  score\n";
        char line[64];
        for (int d = 0; d < text::kNumExponents - 1; ++d) {
          std::snprintf(line, sizeof line, "%6d  %.6f\n", d, tp.score(std::pow(10.0, d + 0.5)));
          out << line;
        }
        std::snprintf(line, sizeof line, "prediction %.6g\n", tp.point);
        out << line;
      }
    } else if (sy->parsed()) {
      if (sy_preset.empty() == sy_spec.empty()) throw std::invalid_argument("synth needs exactly one of --preset, --spec");
      const auto spec = sy_spec.empty() ? synth::preset(sy_preset) : synth::parse_spec(io::read_file(sy_spec));
      const auto docs = synth::generate(spec, sy_n, seed);
      if (sy_norm) {
        std::ostringstream buf;
        io::write_sentences(buf, synth::normalize(docs));
        emit(buf.str(), sy_out, out);
      } else {
        emit(synth::documents_jsonl(docs), sy_out, out);
      }
    }
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

}  // namespace numerate::cli
