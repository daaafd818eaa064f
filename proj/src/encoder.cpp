#include "numerate/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>

#include "numerate/errors.hpp"

namespace numerate::encoder {

using namespace diff;

const char* kind_name(EncoderKind k) noexcept { return k == EncoderKind::BiGru ? "bigru" : "transformer"; }

const char* numeric_name(NumericEmbedder n) noexcept {
  switch (n) {
    case NumericEmbedder::Exponent: return "exponent";
    case NumericEmbedder::DigitRnn: return "digit-rnn";
    case NumericEmbedder::Both: return "both";
    case NumericEmbedder::None: return "none";
  }
  return "?";
}

EncoderKind parse_kind(std::string_view s) {
  if (s == "bigru") return EncoderKind::BiGru;
  if (s == "transformer") return EncoderKind::Transformer;
  throw std::invalid_argument("unknown encoder kind: " + std::string(s));
}

NumericEmbedder parse_numeric(std::string_view s) {
  if (s == "exponent") return NumericEmbedder::Exponent;
  if (s == "digit-rnn") return NumericEmbedder::DigitRnn;
  if (s == "both") return NumericEmbedder::Both;
  if (s == "none") return NumericEmbedder::None;
  throw std::invalid_argument("unknown numeric embedder: " + std::string(s));
}

void EncoderConfig::validate() const {
  if (dim == 0 || gru_hidden == 0 || gru_layers == 0 || tf_layers == 0 || tf_heads == 0 || tf_ff == 0 ||
      digit_char_dim == 0 || digit_hidden == 0) {
    throw std::invalid_argument("encoder dimensions must be positive");
  }
  if (!(gru_dropout >= 0.0 && gru_dropout < 1.0) || !(tf_dropout >= 0.0 && tf_dropout < 1.0)) {
    throw std::invalid_argument("dropout must lie in [0, 1)");
  }
  if (kind == EncoderKind::Transformer && dim % tf_heads != 0) {
    throw std::invalid_argument("transformer width must be divisible by the head count");
  }
}

// ---------------------------------------------------------------- Vocab

Vocab::Vocab() {
  add(std::string(kUnknown));
  add(std::string(text::kNumberMask));
}

void Vocab::add(std::string token) {
  if (index_.contains(token)) return;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
}

Vocab Vocab::build(const std::vector<text::NormalizedSentence>& sentences, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // Descending frequency, ties alphabetical (map order is already sorted).
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (auto& [tok, _] : ranked) {
    if (v.size() >= max_size) break;
    v.add(tok);
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  Vocab v;
  v.tokens_.clear();
  v.index_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    v.add(line);
  }
  if (v.size() < 2 || v.tokens_[0] != kUnknown || v.tokens_[1] != text::kNumberMask) {
    throw DataError(path.string() + ": vocabulary must start with " + std::string(kUnknown) + " and " +
                    std::string(text::kNumberMask));
  }
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

std::size_t Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------- digits

std::vector<std::size_t> digit_chars(double value) {
  const std::string s = text::to_scientific_string(value);
  std::vector<std::size_t> ids;
  ids.reserve(s.size());
  for (char c : s) {
    if (c >= '0' && c <= '9') {
      ids.push_back(static_cast<std::size_t>(c - '0'));
    } else if (c == '.') {
      ids.push_back(10);
    } else if (c == 'E') {
      ids.push_back(11);
    } else {
      ids.push_back(12);
    }
  }
  return ids;
}

// ---------------------------------------------------------------- GRU

Gru::Gru(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, int group, Rng& rng)
    : hidden_(hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  wi_ = &store.add(name + ".Wi", nn::uniform_array(in, 3 * hidden, bound, rng), group);
  bi_ = &store.add(name + ".bi", nn::uniform_array(1, 3 * hidden, bound, rng), group);
  wh_ = &store.add(name + ".Wh", nn::uniform_array(hidden, 3 * hidden, bound, rng), group);
  bh_ = &store.add(name + ".bh", nn::uniform_array(1, 3 * hidden, bound, rng), group);
}

Var Gru::cell(Var xw, Var h, Var wh, Var bh) const {
  const std::size_t H = hidden_;
  Var hw = add_row(matmul(h, wh), bh);
  Var r = sigmoid(slice_cols(xw, 0, H) + slice_cols(hw, 0, H));
  Var z = sigmoid(slice_cols(xw, H, H) + slice_cols(hw, H, H));
  Var n = tanh(slice_cols(xw, 2 * H, H) + r * slice_cols(hw, 2 * H, H));
  // h' = (1 - z) n + z h = n + z (h - n)
  return n + z * (h - n);
}

Var Gru::run(Tape& tape, Var x, bool reverse) const {
  const std::size_t T = x.rows();
  Var xw = add_row(matmul(x, tape.param(*wi_)), tape.param(*bi_));
  Var wh = tape.param(*wh_);
  Var bh = tape.param(*bh_);
  Var h = tape.constant(Array::matrix(1, hidden_));
  std::vector<Var> states(T);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    h = cell(slice_rows(xw, t, 1), h, wh, bh);
    states[t] = h;
  }
  return concat_rows(states);
}

Var Gru::last_state(Tape& tape, const std::vector<Var>& steps) const {
  if (steps.empty()) throw ShapeError("GRU scan needs at least one step");
  Var wi = tape.param(*wi_);
  Var bi = tape.param(*bi_);
  Var wh = tape.param(*wh_);
  Var bh = tape.param(*bh_);
  Var h = tape.constant(Array::matrix(steps.front().rows(), hidden_));
  for (const Var& x : steps) h = cell(add_row(matmul(x, wi), bi), h, wh, bh);
  return h;
}

// ---------------------------------------------------------------- embedder

InputEmbedder::InputEmbedder(ParameterStore& store, const EncoderConfig& cfg, std::size_t vocab_size, Rng& rng)
    : mode_(cfg.numeric), dim_(cfg.dim) {
  const double sd = 0.1;
  token_ = &store.add("embed.token", nn::normal_array(vocab_size, dim_, sd, rng), kHeadGroup);
  position_ = &store.add("embed.position", nn::normal_array(kMaxPositions, dim_, sd, rng), kHeadGroup);
  if (mode_ == NumericEmbedder::Exponent || mode_ == NumericEmbedder::Both) {
    exponent_ =
        &store.add("embed.exponent", nn::normal_array(text::kNumExponents, dim_, sd, rng), kHeadGroup);
  }
  if (mode_ == NumericEmbedder::DigitRnn || mode_ == NumericEmbedder::Both) {
    chars_ = &store.add("embed.digit.chars", nn::normal_array(kDigitAlphabet, cfg.digit_char_dim, sd, rng),
                        kHeadGroup);
    digit_gru_ = Gru(store, "embed.digit.gru", cfg.digit_char_dim, cfg.digit_hidden, kHeadGroup, rng);
    digit_proj_ = nn::Linear(store, "embed.digit.proj", cfg.digit_hidden, dim_, kHeadGroup, rng);
  }
}

Var InputEmbedder::exponent_table(Tape& tape) const {
  if (exponent_ == nullptr) throw std::logic_error("numeric embedder has no exponent table");
  return tape.param(*exponent_);
}

Var InputEmbedder::digit_rnn(Tape& tape, std::span<const double> values) const {
  std::vector<std::vector<std::size_t>> chars;
  chars.reserve(values.size());
  for (double v : values) chars.push_back(digit_chars(v));
  Var table = tape.param(*chars_);
  std::vector<Var> steps;
  steps.reserve(kDigitLength);
  std::vector<std::size_t> ids(values.size());
  for (std::size_t t = 0; t < kDigitLength; ++t) {
    for (std::size_t i = 0; i < values.size(); ++i) ids[i] = chars[i][t];
    steps.push_back(gather_rows(table, ids));
  }
  return digit_proj_(tape, digit_gru_.last_state(tape, steps));
}

Var InputEmbedder::numeric(Tape& tape, std::span<const double> values) const {
  if (values.empty()) throw ShapeError("numeric embedding of an empty value list");
  if (mode_ == NumericEmbedder::None) return tape.constant(Array::matrix(values.size(), dim_));
  std::optional<Var> out;
  if (exponent_ != nullptr) {
    std::vector<std::size_t> rows;
    rows.reserve(values.size());
    for (double v : values) rows.push_back(static_cast<std::size_t>(text::exponent_row(v)));
    out = gather_rows(tape.param(*exponent_), rows);
  }
  if (chars_ != nullptr) {
    Var d = digit_rnn(tape, values);
    out = out ? *out + d : d;
  }
  return *out;
}

Var InputEmbedder::embed(Tape& tape, const Vocab& vocab, const text::NormalizedSentence& s,
                         const corpus::MaskPlan& plan) const {
  const std::size_t T = s.tokens.size();
  if (T == 0) throw ShapeError("cannot embed an empty sentence");
  if (T > kMaxPositions) {
    throw ShapeError("sentence has " + std::to_string(T) + " tokens, limit is " + std::to_string(kMaxPositions));
  }
  if (plan.entries.size() != s.numbers.size()) {
    throw ShapeError("mask plan has " + std::to_string(plan.entries.size()) + " entries for " +
                     std::to_string(s.numbers.size()) + " numbers");
  }
  std::vector<std::size_t> tok(T), pos(T);
  for (std::size_t t = 0; t < T; ++t) {
    tok[t] = vocab.id(s.tokens[t]);
    pos[t] = t;
  }
  for (const auto& n : s.numbers) {
    if (n.token_index >= T) throw ShapeError("number index beyond sentence length");
    tok[n.token_index] = vocab.mask_id();
  }
  Var x = gather_rows(tape.param(*token_), tok) + gather_rows(tape.param(*position_), pos);
  if (mode_ == NumericEmbedder::None) return x;

  std::vector<double> shown;
  std::vector<std::size_t> rows(T, kZeroRow);
  for (std::size_t i = 0; i < s.numbers.size(); ++i) {
    if (!corpus::value_visible(plan.entries[i].role)) continue;
    rows[s.numbers[i].token_index] = shown.size();
    shown.push_back(plan.entries[i].role == corpus::Role::TargetRandom ? plan.entries[i].shown
                                                                       : s.numbers[i].value);
  }
  if (shown.empty()) return x;
  return x + gather_rows(numeric(tape, shown), rows);
}

// ---------------------------------------------------------------- encoders

BiGruEncoder::BiGruEncoder(ParameterStore& store, const EncoderConfig& cfg, Rng& rng)
    : hidden_(cfg.gru_hidden), dropout_(cfg.gru_dropout) {
  std::size_t in = cfg.dim;
  for (std::size_t l = 0; l < cfg.gru_layers; ++l) {
    const std::string base = "encoder.gru" + std::to_string(l);
    Gru fwd(store, base + ".fwd", in, hidden_, kBodyGroup, rng);
    Gru bwd(store, base + ".bwd", in, hidden_, kBodyGroup, rng);
    layers_.emplace_back(fwd, bwd);
    in = 2 * hidden_;
  }
}

Var BiGruEncoder::encode(Tape& tape, Var x, Rng& rng) const {
  Var h = x;
  for (const auto& [fwd, bwd] : layers_) h = concat_cols(fwd.run(tape, h, false), bwd.run(tape, h, true));
  return dropout(h, 1.0 - dropout_, rng);
}

TransformerEncoder::TransformerEncoder(ParameterStore& store, const EncoderConfig& cfg, Rng& rng)
    : dim_(cfg.dim), heads_(cfg.tf_heads), dropout_(cfg.tf_dropout) {
  for (std::size_t l = 0; l < cfg.tf_layers; ++l) {
    const std::string base = "encoder.tf" + std::to_string(l);
    Layer L;
    L.q = nn::Linear(store, base + ".q", dim_, dim_, kBodyGroup, rng);
    L.k = nn::Linear(store, base + ".k", dim_, dim_, kBodyGroup, rng);
    L.v = nn::Linear(store, base + ".v", dim_, dim_, kBodyGroup, rng);
    L.o = nn::Linear(store, base + ".o", dim_, dim_, kBodyGroup, rng);
    L.ff1 = nn::Linear(store, base + ".ff1", dim_, cfg.tf_ff, kBodyGroup, rng);
    L.ff2 = nn::Linear(store, base + ".ff2", cfg.tf_ff, dim_, kBodyGroup, rng);
    L.ln1_g = &store.add(base + ".ln1.g", Array::matrix(1, dim_, 1.0), kBodyGroup);
    L.ln1_b = &store.add(base + ".ln1.b", Array::matrix(1, dim_, 0.0), kBodyGroup);
    L.ln2_g = &store.add(base + ".ln2.g", Array::matrix(1, dim_, 1.0), kBodyGroup);
    L.ln2_b = &store.add(base + ".ln2.b", Array::matrix(1, dim_, 0.0), kBodyGroup);
    layers_.push_back(L);
  }
}

Var TransformerEncoder::encode(Tape& tape, Var x, Rng& rng) const {
  const std::size_t dh = dim_ / heads_;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  const double keep = 1.0 - dropout_;
  Var h = x;
  for (const Layer& L : layers_) {
    Var q = L.q(tape, h);
    Var k = L.k(tape, h);
    Var v = L.v(tape, h);
    std::optional<Var> heads;
    for (std::size_t j = 0; j < heads_; ++j) {
      Var a = softmax(scale(matmul_nt(slice_cols(q, j * dh, dh), slice_cols(k, j * dh, dh)), inv));
      Var o = matmul(dropout(a, keep, rng), slice_cols(v, j * dh, dh));
      heads = heads ? concat_cols(*heads, o) : o;
    }
    h = layer_norm(h + dropout(L.o(tape, *heads), keep, rng), tape.param(*L.ln1_g), tape.param(*L.ln1_b));
    Var f = L.ff2(tape, gelu(L.ff1(tape, h)));
    h = layer_norm(h + dropout(f, keep, rng), tape.param(*L.ln2_g), tape.param(*L.ln2_b));
  }
  return h;
}

std::unique_ptr<Encoder> make_encoder(ParameterStore& store, const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.kind == EncoderKind::BiGru) return std::make_unique<BiGruEncoder>(store, cfg, rng);
  return std::make_unique<TransformerEncoder>(store, cfg, rng);
}

Var target_state(Var h, std::size_t k) {
  if (k >= h.rows()) {
    throw RangeError("target position " + std::to_string(k) + " outside " + std::to_string(h.rows()) + " rows");
  }
  return slice_rows(h, k, 1);
}

}  // namespace numerate::encoder
