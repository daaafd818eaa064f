#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "numerate/corpus.hpp"
#include "numerate/nn.hpp"

namespace numerate::encoder {

using diff::Var;
using nn::ParameterStore;
using nn::Tape;

inline constexpr std::size_t kMaxPositions = 128;
inline constexpr std::string_view kUnknown = "[UNK]";

enum class EncoderKind { BiGru, Transformer };
enum class NumericEmbedder { Exponent, DigitRnn, Both, None };

const char* kind_name(EncoderKind k) noexcept;
const char* numeric_name(NumericEmbedder n) noexcept;
EncoderKind parse_kind(std::string_view s);          // "bigru" | "transformer"
NumericEmbedder parse_numeric(std::string_view s);   // "exponent" | "digit-rnn" | "both" | "none"

// Parameter groups: embeddings and heads train at the head rate, the
// encoder body at the body rate.
inline constexpr int kBodyGroup = 0;
inline constexpr int kHeadGroup = 1;

struct EncoderConfig {
  EncoderKind kind = EncoderKind::BiGru;
  NumericEmbedder numeric = NumericEmbedder::Exponent;
  std::size_t dim = 128;  // embedding size H; also the transformer model width
  // BiGRU
  std::size_t gru_layers = 1;
  std::size_t gru_hidden = 64;
  double gru_dropout = 0.3;
  // Transformer
  std::size_t tf_layers = 4;
  std::size_t tf_heads = 4;
  std::size_t tf_ff = 512;
  double tf_dropout = 0.1;
  // Digit RNN
  std::size_t digit_char_dim = 16;
  std::size_t digit_hidden = 32;

  void validate() const;  // throws std::invalid_argument
  std::size_t output_dim() const { return kind == EncoderKind::BiGru ? 2 * gru_hidden : dim; }
};

// Frequency-ranked token table. Id 0 is [UNK], id 1 the number mask.
class Vocab {
 public:
  Vocab();
  static Vocab build(const std::vector<text::NormalizedSentence>& sentences, std::size_t max_size = 8000);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t mask_id() const noexcept { return 1; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  void add(std::string token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Character ids of to_scientific_string(v) over the alphabet 0-9 . E +.
std::vector<std::size_t> digit_chars(double value);
inline constexpr std::size_t kDigitAlphabet = 13;
inline constexpr std::size_t kDigitLength = 11;

// PyTorch-convention GRU: r, z, n gates stacked as [r | z | n] columns.
class Gru {
 public:
  Gru() = default;
  Gru(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, int group, Rng& rng);

  // States for every row of x (T x in), returned in input order. `reverse`
  // scans from the last row. Initial state is zero.
  Var run(Tape& tape, Var x, bool reverse) const;
  // Batched scan over steps[t] (N x in each); returns the final N x hidden state.
  Var last_state(Tape& tape, const std::vector<Var>& steps) const;
  std::size_t hidden() const noexcept { return hidden_; }

 private:
  Var cell(Var xw, Var h, Var wh, Var bh) const;
  nn::Parameter* wi_ = nullptr;
  nn::Parameter* bi_ = nullptr;
  nn::Parameter* wh_ = nullptr;
  nn::Parameter* bh_ = nullptr;
  std::size_t hidden_ = 0;
};

// token + position + numeric embeddings.
class InputEmbedder {
 public:
  InputEmbedder(ParameterStore& store, const EncoderConfig& cfg, std::size_t vocab_size, Rng& rng);

  // (tokens x dim). Numeric rows are zero except at numbers whose plan role
  // exposes a value. Throws ShapeError beyond kMaxPositions tokens.
  Var embed(Tape& tape, const Vocab& vocab, const text::NormalizedSentence& s, const corpus::MaskPlan& plan) const;
  // (values.size() x dim) numeric embeddings; zero rows under NONE.
  Var numeric(Tape& tape, std::span<const double> values) const;
  // The 17 x dim exponent table. Throws std::logic_error without one.
  Var exponent_table(Tape& tape) const;
  NumericEmbedder mode() const noexcept { return mode_; }
  std::size_t dim() const noexcept { return dim_; }

 private:
  Var digit_rnn(Tape& tape, std::span<const double> values) const;
  NumericEmbedder mode_;
  std::size_t dim_;
  nn::Parameter* token_ = nullptr;
  nn::Parameter* position_ = nullptr;
  nn::Parameter* exponent_ = nullptr;
  nn::Parameter* chars_ = nullptr;
  Gru digit_gru_;
  nn::Linear digit_proj_;
};

class Encoder {
 public:
  virtual ~Encoder() = default;
  // x: (tokens x dim) -> H: (tokens x output_dim). Dropout draws from `rng`
  // in train mode only.
  virtual Var encode(Tape& tape, Var x, Rng& rng) const = 0;
  virtual std::size_t output_dim() const = 0;
};

class BiGruEncoder : public Encoder {
 public:
  BiGruEncoder(ParameterStore& store, const EncoderConfig& cfg, Rng& rng);
  Var encode(Tape& tape, Var x, Rng& rng) const override;
  std::size_t output_dim() const override { return 2 * hidden_; }

 private:
  std::vector<std::pair<Gru, Gru>> layers_;
  std::size_t hidden_;
  double dropout_;
};

// Post-LN self-attention stack with GELU feed-forward blocks.
class TransformerEncoder : public Encoder {
 public:
  TransformerEncoder(ParameterStore& store, const EncoderConfig& cfg, Rng& rng);
  Var encode(Tape& tape, Var x, Rng& rng) const override;
  std::size_t output_dim() const override { return dim_; }

 private:
  struct Layer {
    nn::Linear q, k, v, o, ff1, ff2;
    nn::Parameter* ln1_g = nullptr;
    nn::Parameter* ln1_b = nullptr;
    nn::Parameter* ln2_g = nullptr;
    nn::Parameter* ln2_b = nullptr;
  };
  std::vector<Layer> layers_;
  std::size_t dim_;
  std::size_t heads_;
  double dropout_;
};

std::unique_ptr<Encoder> make_encoder(ParameterStore& store, const EncoderConfig& cfg, Rng& rng);

// Row k of H (1 x d). Throws RangeError when k is out of range.
Var target_state(Var h, std::size_t k);

}  // namespace numerate::encoder
