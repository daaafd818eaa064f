#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

// Extraction and normalisation of numeric quantities in running English text.
namespace numerate::text {

// Replaces every numeric surface form in a normalised token stream.
inline constexpr std::string_view kNumberMask = "[#MASK]";
inline constexpr double kMinValue = 1.0;
inline constexpr double kMaxValue = 1e16;
inline constexpr int kNumExponents = 17;

struct CharRange {
  std::size_t begin = 0;  // half-open
  std::size_t end = 0;
};

// A numeric phrase found in raw text. `value` is the magnitude with any sign
// dropped; range filtering is the caller's business (see normalize_document).
struct NumberToken {
  std::string surface;
  double value = 0.0;
  CharRange range;
};

struct NumberEntry {
  std::size_t token_index = 0;
  double value = 0.0;
  bool operator==(const NumberEntry&) const = default;
};

struct NormalizedSentence {
  std::vector<std::string> tokens;
  std::vector<NumberEntry> numbers;
  std::int64_t doc = -1;  // source document id, -1 when unknown

  bool operator==(const NormalizedSentence&) const = default;
};

struct ExponentMantissa {
  int exponent = 1;        // 1..17
  double mantissa = 0.1;   // [0.1, 1)
};

struct FilterConfig {
  std::size_t min_words = 8;
  std::size_t max_words = 50;
  std::size_t max_tokens = 128;
  double min_value = kMinValue;
  double max_value = kMaxValue;
  // Keep only sentences with at least one number preceded by a '$' token.
  bool dollar_only = false;
};

// Word tables driving cardinal/ordinal/magnitude recognition. Lookups are on
// lowercased words; callers may extend a copy of english().
struct NumberLexicon {
  std::map<std::string, double, std::less<>> units;       // zero..nine
  std::map<std::string, double, std::less<>> teens;       // ten..nineteen
  std::map<std::string, double, std::less<>> tens;        // twenty..ninety
  std::map<std::string, double, std::less<>> magnitudes;  // hundred, thousand, ...
  std::map<std::string, double, std::less<>> ordinals;    // first.., hundredth..
  std::map<std::string, double, std::less<>> suffixes;    // k, m, bn, ... after numerals

  static const NumberLexicon& english();
};

// Numerals (with thousands separators and decimals), cardinal word phrases,
// numeral + magnitude compounds ("2 trillion", "$32m") and ordinals, as
// non-overlapping spans in text order. Unparseable candidates are skipped.
std::vector<NumberToken> extract_numbers(std::string_view text,
                                         const NumberLexicon& lex = NumberLexicon::english());

// Rule-based splitter on terminal punctuation with an abbreviation guard list.
std::vector<std::string> split_sentences(std::string_view text);

// Splits, lowercases and filters a document, replacing numbers in the token
// stream with kNumberMask and recording values side-band.
std::vector<NormalizedSentence> normalize_document(std::string_view text, const FilterConfig& cfg = {},
                                                   std::int64_t doc = -1,
                                                   const NumberLexicon& lex = NumberLexicon::english());

// Lowercased token stream of a text fragment with number spans collapsed.
NormalizedSentence tokenize_sentence(std::string_view sentence,
                                     const NumberLexicon& lex = NumberLexicon::english());

// `d.dddddE+dd`, six significant digits, ties to even on the shortest decimal
// rendering of the value. Throws RangeError outside [1, 1e16].
std::string to_scientific_string(double value);

// floor(log10 value), exact at powers of ten. Throws RangeError outside [1, 1e16].
int exponent_row(double value);

// value = mantissa * 10^exponent with exponent = floor(log10 value) + 1.
ExponentMantissa decompose(double value);

double pow10(int e);

// True when the token before number `k` is a '$'.
bool preceded_by_currency(const NormalizedSentence& s, std::size_t k);

// Number of tokens that count as words (alphanumeric or number mask).
std::size_t word_count(const std::vector<std::string>& tokens);

}  // namespace numerate::text
