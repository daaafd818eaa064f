#include "numerate/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <sstream>

#include "numerate/errors.hpp"
#include "numerate/io.hpp"

namespace numerate::model {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;
constexpr char kParamMagic[8] = {'N', 'M', 'R', 'T', 'P', 'R', 'M', '1'};

const char* optimizer_name(diff::OptimizerKind k) { return k == diff::OptimizerKind::Adam ? "adam" : "sgd"; }

diff::OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return diff::OptimizerKind::Adam;
  if (s == "sgd") return diff::OptimizerKind::Sgd;
  throw DataError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

// Copies known keys of `j` into the setters, complaining about the rest.
template <typename F>
void read_object(const nlohmann::json& j, const std::string& where, std::initializer_list<std::string> keys, F&& set) {
  if (!j.is_object()) throw DataError("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      throw DataError("config: unknown key '" + where + "." + it.key() + "'");
    }
    set(it.key(), it.value());
  }
}

}  // namespace

// ---------------------------------------------------------------- config

void RunConfig::validate() const {
  encoder.validate();
  mask.validate();
  if (batch < 1) throw std::invalid_argument("batch size must be at least 1");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(lr > 0) || !(body_lr > 0) || !(head_lr > 0)) throw std::invalid_argument("learning rates must be positive");
  if (vocab_size < 2) throw std::invalid_argument("vocab size must be at least 2");
  if (head.kind == heads::HeadKind::Disc && encoder.numeric == encoder::NumericEmbedder::None) {
    throw std::invalid_argument("the discriminative head needs a numeric embedder");
  }
}

diff::OptimizerConfig RunConfig::optimizer_config() const {
  diff::OptimizerConfig o;
  o.kind = optimizer;
  o.clip_norm = clip_norm;
  if (encoder.kind == encoder::EncoderKind::Transformer) {
    o.group_lr = {body_lr, head_lr};
  } else {
    o.group_lr = {lr, lr};
  }
  return o;
}

std::string config_json(const RunConfig& c) {
  ordered_json j;
  const auto& e = c.encoder;
  j["encoder"] = {{"kind", encoder::kind_name(e.kind)},
                  {"numeric", encoder::numeric_name(e.numeric)},
                  {"dim", e.dim},
                  {"gru_layers", e.gru_layers},
                  {"gru_hidden", e.gru_hidden},
                  {"gru_dropout", e.gru_dropout},
                  {"tf_layers", e.tf_layers},
                  {"tf_heads", e.tf_heads},
                  {"tf_ff", e.tf_ff},
                  {"tf_dropout", e.tf_dropout},
                  {"digit_char_dim", e.digit_char_dim},
                  {"digit_hidden", e.digit_hidden}};
  j["head"] = {{"kind", heads::head_name(c.head.kind)},
               {"mlp_hidden", c.head.mlp_hidden},
               {"gmm_k", c.head.em.k},
               {"gmm_iters", c.head.em.iters},
               {"gmm_log_space", c.head.em.log_space},
               {"gmm_var_floor", c.head.em.var_floor}};
  j["mask"] = {{"select", c.mask.select}, {"hidden", c.mask.hidden}, {"random", c.mask.random}, {"kept", c.mask.kept}};
  j["train"] = {{"batch", c.batch},
                {"epochs", c.epochs},
                {"patience", c.patience},
                {"optimizer", optimizer_name(c.optimizer)},
                {"lr", c.lr},
                {"body_lr", c.body_lr},
                {"head_lr", c.head_lr},
                {"clip_norm", c.clip_norm}};
  j["vocab_size"] = c.vocab_size;
  j["seed"] = c.seed;
  j["dollar_only"] = c.dollar_only;
  return j.dump(2) + "\n";
}

RunConfig parse_config(std::string_view text, RunConfig c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  try {
    read_object(j, "", {"encoder", "head", "mask", "train", "vocab_size", "seed", "dollar_only"},
                [&](const std::string& k, const nlohmann::json& v) {
                  if (k == "encoder") {
                    auto& e = c.encoder;
                    read_object(v, "encoder",
                                {"kind", "numeric", "dim", "gru_layers", "gru_hidden", "gru_dropout", "tf_layers",
                                 "tf_heads", "tf_ff", "tf_dropout", "digit_char_dim", "digit_hidden"},
                                [&](const std::string& f, const nlohmann::json& x) {
                                  if (f == "kind") e.kind = encoder::parse_kind(x.get<std::string>());
                                  else if (f == "numeric") e.numeric = encoder::parse_numeric(x.get<std::string>());
                                  else if (f == "dim") e.dim = x.get<std::size_t>();
                                  else if (f == "gru_layers") e.gru_layers = x.get<std::size_t>();
                                  else if (f == "gru_hidden") e.gru_hidden = x.get<std::size_t>();
                                  else if (f == "gru_dropout") e.gru_dropout = x.get<double>();
                                  else if (f == "tf_layers") e.tf_layers = x.get<std::size_t>();
                                  else if (f == "tf_heads") e.tf_heads = x.get<std::size_t>();
                                  else if (f == "tf_ff") e.tf_ff = x.get<std::size_t>();
                                  else if (f == "tf_dropout") e.tf_dropout = x.get<double>();
                                  else if (f == "digit_char_dim") e.digit_char_dim = x.get<std::size_t>();
                                  else if (f == "digit_hidden") e.digit_hidden = x.get<std::size_t>();
                                });
                  } else if (k == "head") {
                    read_object(v, "head", {"kind", "mlp_hidden", "gmm_k", "gmm_iters", "gmm_log_space", "gmm_var_floor"},
                                [&](const std::string& f, const nlohmann::json& x) {
                                  if (f == "kind") c.head.kind = heads::parse_head(x.get<std::string>());
                                  else if (f == "mlp_hidden") c.head.mlp_hidden = x.get<std::size_t>();
                                  else if (f == "gmm_k") c.head.em.k = x.get<std::size_t>();
                                  else if (f == "gmm_iters") c.head.em.iters = x.get<std::size_t>();
                                  else if (f == "gmm_log_space") c.head.em.log_space = x.get<bool>();
                                  else if (f == "gmm_var_floor") c.head.em.var_floor = x.get<double>();
                                });
                  } else if (k == "mask") {
                    read_object(v, "mask", {"select", "hidden", "random", "kept"},
                                [&](const std::string& f, const nlohmann::json& x) {
                                  const double d = x.get<double>();
                                  if (f == "select") c.mask.select = d;
                                  else if (f == "hidden") c.mask.hidden = d;
                                  else if (f == "random") c.mask.random = d;
                                  else c.mask.kept = d;
                                });
                  } else if (k == "train") {
                    read_object(v, "train",
                                {"batch", "epochs", "patience", "optimizer", "lr", "body_lr", "head_lr", "clip_norm"},
                                [&](const std::string& f, const nlohmann::json& x) {
                                  if (f == "batch") c.batch = x.get<std::size_t>();
                                  else if (f == "epochs") c.epochs = x.get<std::size_t>();
                                  else if (f == "patience") c.patience = x.get<std::size_t>();
                                  else if (f == "optimizer") c.optimizer = parse_optimizer(x.get<std::string>());
                                  else if (f == "lr") c.lr = x.get<double>();
                                  else if (f == "body_lr") c.body_lr = x.get<double>();
                                  else if (f == "head_lr") c.head_lr = x.get<double>();
                                  else if (f == "clip_norm") c.clip_norm = x.get<double>();
                                });
                  } else if (k == "vocab_size") {
                    c.vocab_size = v.get<std::size_t>();
                  } else if (k == "seed") {
                    c.seed = v.get<std::uint64_t>();
                  } else if (k == "dollar_only") {
                    c.dollar_only = v.get<bool>();
                  }
                });
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------- model

Model::Model(RunConfig cfg, encoder::Vocab vocab) : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
  cfg_.validate();
  Rng rng(mix_seed(cfg_.seed, 0x1417));
  embedder_ = std::make_unique<encoder::InputEmbedder>(store_, cfg_.encoder, vocab_.size(), rng);
  encoder_ = encoder::make_encoder(store_, cfg_.encoder, rng);
  head_ = heads::make_head(store_, cfg_.head, encoder_->output_dim(), *embedder_, rng);
}

void Model::prepare(std::vector<double> pool) {
  if (pool.empty()) throw DataError("training set has no numbers");
  pool_ = std::move(pool);
  head_->prepare(pool_);
}

diff::Var Model::states(diff::Tape& tape, const text::NormalizedSentence& s, const corpus::MaskPlan& plan,
                        Rng& rng) const {
  return encoder_->encode(tape, embedder_->embed(tape, vocab_, s, plan), rng);
}

diff::Var Model::loss(diff::Tape& tape, const text::NormalizedSentence& s, const corpus::MaskPlan& plan,
                      Rng& rng) const {
  diff::Var h = states(tape, s, plan, rng);
  std::optional<diff::Var> total;
  for (std::size_t k : plan.targets()) {
    diff::Var l = head_->loss(tape, encoder::target_state(h, s.numbers[k].token_index), s.numbers[k].value, rng);
    total = total ? *total + l : l;
  }
  if (!total) throw std::logic_error("mask plan has no targets");
  return *total;
}

void Model::save(const fs::path& dir) const {
  fs::create_directories(dir);
  ordered_json manifest;
  manifest["format"] = "numerate-checkpoint";
  manifest["version"] = kFormatVersion;
  manifest["config"] = ordered_json::parse(config_json(cfg_));
  manifest["vocab"] = "vocab.txt";
  manifest["params"] = "params.bin";
  manifest["parameter_count"] = store_.count();
  manifest["pool_size"] = pool_.size();
  if (const auto* g = dynamic_cast<const heads::GmmHead*>(head_.get()); g && g->components()) {
    const auto& c = *g->components();
    manifest["gmm"] = {{"log_space", c.log_space}, {"weights", c.weights}, {"means", c.means}, {"sigmas", c.sigmas}};
  }
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  vocab_.save(dir / "vocab.txt");

  std::ofstream out(dir / "params.bin", std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / "params.bin").string());
  auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  auto put_doubles = [&](std::span<const double> d) {
    out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
  };
  out.write(kParamMagic, sizeof kParamMagic);
  const auto params = store_.all();
  put_u64(params.size());
  for (const auto* p : params) {
    put_u64(p->name.size());
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u64(p->value.shape().size());
    for (auto d : p->value.shape()) put_u64(d);
    put_doubles(p->value.data());
  }
  put_u64(pool_.size());
  put_doubles(pool_);
  if (!out) throw DataError("failed writing " + (dir / "params.bin").string());
}

Model Model::load(const fs::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "numerate-checkpoint") throw DataError(dir.string() + " is not a checkpoint");
  if (manifest.value("version", 0) != kFormatVersion) throw DataError("unsupported checkpoint version");
  RunConfig cfg = parse_config(manifest.at("config").dump());
  Model m(cfg, encoder::Vocab::load(dir / manifest.value("vocab", std::string("vocab.txt"))));

  const fs::path ppath = dir / manifest.value("params", std::string("params.bin"));
  std::ifstream in(ppath, std::ios::binary);
  if (!in) throw DataError("cannot read " + ppath.string());
  auto fail = [&](const std::string& why) { return DataError(ppath.string() + ": " + why); };
  auto get_u64 = [&] {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw fail("truncated");
    return v;
  };
  auto get_doubles = [&](std::span<double> d) {
    if (!in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)))) {
      throw fail("truncated");
    }
  };
  char magic[sizeof kParamMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kParamMagic, sizeof magic) != 0) throw fail("bad header");
  auto params = m.store_.all();
  if (get_u64() != params.size()) throw fail("parameter count does not match the configuration");
  for (auto* p : params) {
    std::string name(get_u64(), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw fail("truncated");
    if (name != p->name) throw fail("expected parameter " + p->name + ", found " + name);
    std::vector<std::size_t> shape(get_u64());
    for (auto& d : shape) d = get_u64();
    if (shape != p->value.shape()) throw fail("shape mismatch for " + name);
    get_doubles(p->value.data());
  }
  m.pool_.resize(get_u64());
  get_doubles(m.pool_);

  if (auto* g = dynamic_cast<heads::GmmHead*>(m.head_.get())) {
    if (!manifest.contains("gmm")) throw DataError("checkpoint lacks GMM components");
    const auto& j = manifest["gmm"];
    heads::GmmComponents c;
    c.log_space = j.at("log_space").get<bool>();
    c.weights = j.at("weights").get<std::vector<double>>();
    c.means = j.at("means").get<std::vector<double>>();
    c.sigmas = j.at("sigmas").get<std::vector<double>>();
    g->set_components(std::move(c));
  } else if (m.head_->kind() == heads::HeadKind::Disc) {
    m.head_->prepare(m.pool_);  // only stores the negative pool
  }
  return m;
}

// ---------------------------------------------------------------- predictor

ModelPredictor::ModelPredictor(const Model& m, std::string name) : model_(&m), name_(std::move(name)) {
  if (name_.empty()) {
    const auto& c = m.config();
    name_ = std::string(encoder::kind_name(c.encoder.kind)) + "-" + heads::head_name(c.head.kind);
  }
}

eval::TargetPrediction ModelPredictor::predict(const text::NormalizedSentence& s, const corpus::MaskPlan& plan,
                                               std::size_t target) const {
  diff::Tape tape(diff::Mode::Eval, false);
  Rng unused(0);
  diff::Var h = encoder::target_state(model_->states(tape, s, plan, unused), s.numbers.at(target).token_index);
  const auto& head = model_->head();
  if (head.kind() != heads::HeadKind::Disc) {
    heads::Density d = head.density(tape, h);
    eval::TargetPrediction p;
    p.point = d.point_prediction();
    p.score = [d](double v) { return d.log_density(v); };
    p.density = std::move(d);
    return p;
  }
  const auto& disc = static_cast<const heads::DiscHead&>(head);
  const diff::Array hv = h.value();
  eval::TargetPrediction p;
  if (model_->embedder().mode() == encoder::NumericEmbedder::Exponent) {
    p.point = heads::clamp_value(std::pow(10.0, disc.predict_exponent(tape, h) + 0.5));
  } else {
    // No exponent table to rank: score the decade centres directly.
    std::vector<double> centres;
    for (int e = 0; e < text::kNumExponents - 1; ++e) centres.push_back(std::pow(10.0, e + 0.5));
    const diff::Var logits = disc.score(tape, h, centres);
    std::vector<double> sc(logits.value().data().begin(), logits.value().data().end());
    p.point = centres[heads::argmax_lowest(sc)];
  }
  p.score = [&disc, hv](double v) {
    diff::Tape t(diff::Mode::Eval, false);
    const double c[1] = {v};
    return disc.score(t, t.constant(hv), c).item();
  };
  return p;
}

// ---------------------------------------------------------------- training

bool EarlyStopping::update(double loss) {
  ++epoch_;
  improved_ = best_epoch_ == 0 || loss < best_;
  if (improved_) {
    best_ = loss;
    best_epoch_ = epoch_;
    bad_ = 0;
  } else {
    ++bad_;
  }
  return bad_ >= patience_;
}

std::vector<text::NormalizedSentence> dollar_filter(const std::vector<text::NormalizedSentence>& sentences) {
  std::vector<text::NormalizedSentence> out;
  for (const auto& s : sentences) {
    for (std::size_t k = 0; k < s.numbers.size(); ++k) {
      if (text::preceded_by_currency(s, k)) {
        out.push_back(s);
        break;
      }
    }
  }
  return out;
}

double validation_loss(const Model& m, const std::vector<text::NormalizedSentence>& valid) {
  double total = 0.0;
  std::size_t n = 0;
  Rng rng(mix_seed(m.config().seed, 0x5a1d));  // Disc negatives only
  for (const auto& s : valid) {
    const auto plan = corpus::eval_plan(s, m.config().seed, corpus::EvalMode::Standard);
    if (!plan) continue;
    diff::Tape tape(diff::Mode::Eval, false);
    total += m.loss(tape, s, *plan, rng).item();
    ++n;
  }
  if (n == 0) throw DataError("validation set has no scorable sentences");
  return total / static_cast<double>(n);
}

TrainResult train(Model& m, const std::vector<text::NormalizedSentence>& train_in,
                  const std::vector<text::NormalizedSentence>& valid_in, std::ostream* log) {
  const RunConfig& cfg = m.config();
  const auto train_set = cfg.dollar_only ? dollar_filter(train_in) : train_in;
  const auto valid_set = cfg.dollar_only ? dollar_filter(valid_in) : valid_in;
  if (train_set.empty()) throw DataError("empty training set");
  if (valid_set.empty()) throw DataError("empty validation set");
  if (m.pool().empty()) m.prepare(corpus::number_pool(train_set));

  diff::Optimizer opt(m.store(), cfg.optimizer_config());
  EarlyStopping stop(cfg.patience);
  TrainResult result;
  std::vector<diff::Array> best = m.store().snapshot();
  Rng rng(mix_seed(cfg.seed, 0x7a11));
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5eed0000 + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t targets = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      bool any = false;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = train_set[order[i]];
        if (s.numbers.empty()) continue;
        const auto plan = corpus::plan_masks(s, rng, cfg.mask, m.pool());
        diff::Tape tape(diff::Mode::Train);
        diff::Var l = m.loss(tape, s, plan, rng);
        const double v = l.item();
        if (!std::isfinite(v)) {
          throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", sentence " +
                               std::to_string(order[i]) + " (" + std::to_string(plan.targets().size()) +
                               " targets); try a lower learning rate");
        }
        loss_sum += v;
        targets += plan.targets().size();
        tape.backward(l);
        any = true;
      }
      if (any) opt.step();
    }

    const double vloss = validation_loss(m, valid_set);
    if (!std::isfinite(vloss)) {
      throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    const bool done = stop.update(vloss);
    if (stop.improved()) best = m.store().snapshot();
    EpochLog e;
    e.epoch = epoch;
    e.train_loss = targets ? loss_sum / static_cast<double>(targets) : 0.0;
    e.valid_loss = vloss;
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(e);
    if (log) {
      *log << "epoch " << epoch << "  train " << e.train_loss << "  valid " << vloss << (stop.improved() ? " *" : "")
           << "  (" << e.seconds << "s)\n";
    }
    if (done) break;
  }
  m.store().restore(best);
  result.best_epoch = stop.best_epoch();
  result.best_valid = stop.best_loss();
  return result;
}

Model fit(const RunConfig& cfg, const std::vector<text::NormalizedSentence>& train_set,
          const std::vector<text::NormalizedSentence>& valid_set, TrainResult* result, std::ostream* log) {
  const auto source = cfg.dollar_only ? dollar_filter(train_set) : train_set;
  Model m(cfg, encoder::Vocab::build(source, cfg.vocab_size));
  m.prepare(corpus::number_pool(source));
  TrainResult r = train(m, train_set, valid_set, log);
  if (result) *result = std::move(r);
  return m;
}

}  // namespace numerate::model
