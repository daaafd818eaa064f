#include "numerate/numtext.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <set>

#include "numerate/errors.hpp"

namespace numerate::text {

namespace {

bool is_alpha(unsigned char c) { return std::isalpha(c) != 0 || c >= 0x80; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

enum class LexKind { Numeral, Word, Symbol };

struct Lexeme {
  LexKind kind = LexKind::Symbol;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string text;  // lowercased
  double value = 0.0;
  bool ordinal = false;
};

bool ordinal_suffix(std::string_view s) { return s == "st" || s == "nd" || s == "rd" || s == "th"; }

std::vector<Lexeme> lex(std::string_view text, const NumberLexicon& lexicon) {
  std::vector<Lexeme> out;
  const std::size_t n = text.size();
  auto at = [&](std::size_t i) -> unsigned char { return i < n ? static_cast<unsigned char>(text[i]) : 0; };
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = at(i);
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (text.substr(i, kNumberMask.size()) == kNumberMask) {
      Lexeme lx;
      lx.kind = LexKind::Word;
      lx.begin = i;
      lx.end = i + kNumberMask.size();
      lx.text = std::string(kNumberMask);
      out.push_back(std::move(lx));
      i = out.back().end;
      continue;
    }
    if (is_digit(c)) {
      std::size_t j = i;
      while (is_digit(at(j))) ++j;
      // Thousands groups: ",ddd" not followed by a further digit.
      while (at(j) == ',' && is_digit(at(j + 1)) && is_digit(at(j + 2)) && is_digit(at(j + 3)) &&
             !is_digit(at(j + 4))) {
        j += 4;
      }
      if (at(j) == '.' && is_digit(at(j + 1))) {
        ++j;
        while (is_digit(at(j))) ++j;
      }
      std::size_t k = j;
      while (is_alpha(at(k))) ++k;
      std::string numeral;
      for (std::size_t p = i; p < j; ++p) {
        if (text[p] != ',') numeral.push_back(text[p]);
      }
      Lexeme lx;
      lx.begin = i;
      lx.value = std::strtod(numeral.c_str(), nullptr);
      if (k == j) {
        lx.kind = LexKind::Numeral;
        lx.end = j;
      } else {
        const std::string suffix = lower(text.substr(j, k - j));
        const bool integral = numeral.find('.') == std::string::npos;
        if (ordinal_suffix(suffix) && integral) {
          lx.kind = LexKind::Numeral;
          lx.ordinal = true;
        } else if (auto it = lexicon.suffixes.find(suffix); it != lexicon.suffixes.end()) {
          lx.kind = LexKind::Numeral;
          lx.value *= it->second;
        } else {
          // Alphanumeric token such as "3d" or "4g": a word, not a quantity.
          while (is_alpha(at(k)) || is_digit(at(k))) ++k;
          lx.kind = LexKind::Word;
        }
        lx.end = k;
      }
      lx.text = lower(text.substr(lx.begin, lx.end - lx.begin));
      out.push_back(std::move(lx));
      i = out.back().end;
      continue;
    }
    if (is_alpha(c)) {
      std::size_t j = i;
      while (true) {
        while (is_alpha(at(j)) || is_digit(at(j))) ++j;
        if ((at(j) == '-' || at(j) == '\'') && is_alpha(at(j + 1))) {
          ++j;
          continue;
        }
        break;
      }
      Lexeme lx;
      lx.kind = LexKind::Word;
      lx.begin = i;
      lx.end = j;
      lx.text = lower(text.substr(i, j - i));
      out.push_back(std::move(lx));
      i = j;
      continue;
    }
    Lexeme lx;
    lx.kind = LexKind::Symbol;
    lx.begin = i;
    lx.end = i + 1;
    lx.text = std::string(1, static_cast<char>(c));
    out.push_back(std::move(lx));
    ++i;
  }
  return out;
}

// Grammar classes for cardinal word phrases.
enum class Cls { None, Unit, Teen, Tens, Hundred, Magnitude };

struct Part {
  Cls cls = Cls::None;
  double value = 0.0;
  bool ordinal = false;
};

Part classify(std::string_view w, const NumberLexicon& lx) {
  if (auto it = lx.units.find(w); it != lx.units.end()) return {Cls::Unit, it->second, false};
  if (auto it = lx.teens.find(w); it != lx.teens.end()) return {Cls::Teen, it->second, false};
  if (auto it = lx.tens.find(w); it != lx.tens.end()) return {Cls::Tens, it->second, false};
  if (auto it = lx.magnitudes.find(w); it != lx.magnitudes.end()) {
    return {it->second < 1000.0 ? Cls::Hundred : Cls::Magnitude, it->second, false};
  }
  if (auto it = lx.ordinals.find(w); it != lx.ordinals.end()) {
    const double v = it->second;
    Cls c = v < 10 ? Cls::Unit : v < 20 ? Cls::Teen : v < 100 ? Cls::Tens : v < 1000 ? Cls::Hundred : Cls::Magnitude;
    return {c, v, true};
  }
  return {};
}

bool allowed(Cls prev, const Part& p) {
  const bool small = p.cls == Cls::Unit || p.cls == Cls::Teen || p.cls == Cls::Tens;
  switch (prev) {
    case Cls::None:
      return small;
    case Cls::Unit:
    case Cls::Teen:
      return p.cls == Cls::Hundred || p.cls == Cls::Magnitude;
    case Cls::Tens:
      return (p.cls == Cls::Unit && p.value > 0) || p.cls == Cls::Magnitude;
    case Cls::Hundred:
    case Cls::Magnitude:
      return small || (prev == Cls::Hundred && p.cls == Cls::Magnitude);
  }
  return false;
}

std::vector<Part> split_parts(std::string_view word, const NumberLexicon& lx) {
  std::vector<Part> parts;
  std::size_t start = 0;
  while (start <= word.size()) {
    std::size_t dash = word.find('-', start);
    if (dash == std::string_view::npos) dash = word.size();
    const Part p = classify(word.substr(start, dash - start), lx);
    if (p.cls == Cls::None) return {};
    parts.push_back(p);
    start = dash + 1;
  }
  return parts;
}

struct Phrase {
  double value = 0.0;
  std::size_t next = 0;  // first lexeme after the phrase
};

// Cardinal/ordinal word phrase starting at lexeme i.
std::optional<Phrase> parse_cardinal(const std::vector<Lexeme>& lexemes, std::size_t i, const NumberLexicon& lx) {
  double total = 0.0;
  double current = 0.0;
  Cls prev = Cls::None;
  std::size_t j = i;
  std::size_t consumed_until = i;
  bool done = false;
  while (j < lexemes.size() && !done) {
    const Lexeme& lexeme = lexemes[j];
    if (lexeme.kind != LexKind::Word) break;
    if (lexeme.text == "and") {
      if (prev != Cls::Hundred && prev != Cls::Magnitude) break;
      if (j + 1 >= lexemes.size() || lexemes[j + 1].kind != LexKind::Word) break;
      const auto next_parts = split_parts(lexemes[j + 1].text, lx);
      if (next_parts.empty() || !allowed(prev, next_parts.front()) ||
          next_parts.front().cls == Cls::Hundred || next_parts.front().cls == Cls::Magnitude) {
        break;
      }
      ++j;
      continue;
    }
    const auto parts = split_parts(lexeme.text, lx);
    if (parts.empty()) break;
    // Validate the whole lexeme before consuming it.
    Cls p = prev;
    bool ok = true;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!allowed(p, parts[k]) || (parts[k].ordinal && k + 1 != parts.size())) {
        ok = false;
        break;
      }
      p = parts[k].cls;
    }
    if (!ok) break;
    for (const Part& part : parts) {
      switch (part.cls) {
        case Cls::Unit:
        case Cls::Teen:
        case Cls::Tens:
          current += part.value;
          break;
        case Cls::Hundred:
          current = (current == 0.0 ? 1.0 : current) * part.value;
          break;
        case Cls::Magnitude:
          total += (current == 0.0 ? 1.0 : current) * part.value;
          current = 0.0;
          break;
        case Cls::None:
          break;
      }
      prev = part.cls;
      if (part.ordinal) done = true;
    }
    ++j;
    consumed_until = j;
  }
  if (consumed_until == i) return std::nullopt;
  return Phrase{total + current, consumed_until};
}

struct Found {
  std::size_t first = 0;  // lexeme range [first, last)
  std::size_t last = 0;
  double value = 0.0;
};

std::vector<Found> find_numbers(const std::vector<Lexeme>& lexemes, const NumberLexicon& lx) {
  std::vector<Found> out;
  std::size_t i = 0;
  while (i < lexemes.size()) {
    const Lexeme& l = lexemes[i];
    if (l.kind == LexKind::Numeral) {
      double value = l.value;
      std::size_t j = i + 1;
      if (!l.ordinal) {
        while (j < lexemes.size() && lexemes[j].kind == LexKind::Word) {
          auto it = lx.magnitudes.find(lexemes[j].text);
          if (it == lx.magnitudes.end()) break;
          value *= it->second;
          ++j;
        }
      }
      out.push_back({i, j, value});
      i = j;
      continue;
    }
    if (l.kind == LexKind::Word) {
      if (auto phrase = parse_cardinal(lexemes, i, lx)) {
        out.push_back({i, phrase->next, phrase->value});
        i = phrase->next;
        continue;
      }
    }
    ++i;
  }
  return out;
}

const std::set<std::string, std::less<>>& abbreviations() {
  static const std::set<std::string, std::less<>> abbr = {
      "mr",   "mrs",  "ms",   "dr",  "prof", "sr",  "jr",  "st",   "inc",  "corp", "co",  "ltd",
      "llc",  "vs",   "e.g",  "i.e", "u.s",  "u.k", "u.n", "no",   "fig",  "jan",  "feb", "mar",
      "apr",  "jun",  "jul",  "aug", "sep",  "sept", "oct", "nov", "dec",  "mt",   "gen", "gov",
      "sen",  "rep",  "dept", "est", "approx", "al", "cf",  "ph.d", "a.m", "p.m", "n.y", "d.c"};
  return abbr;
}

bool closing(unsigned char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

}  // namespace

const NumberLexicon& NumberLexicon::english() {
  static const NumberLexicon lex = [] {
    NumberLexicon l;
    const std::array<const char*, 10> units = {"zero", "one", "two",   "three", "four",
                                               "five", "six", "seven", "eight", "nine"};
    for (std::size_t i = 0; i < units.size(); ++i) l.units[units[i]] = static_cast<double>(i);
    const std::array<const char*, 10> teens = {"ten",     "eleven",  "twelve",    "thirteen", "fourteen",
                                               "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
    for (std::size_t i = 0; i < teens.size(); ++i) l.teens[teens[i]] = static_cast<double>(10 + i);
    const std::array<const char*, 8> tens = {"twenty", "thirty",  "forty",  "fifty",
                                             "sixty",  "seventy", "eighty", "ninety"};
    for (std::size_t i = 0; i < tens.size(); ++i) l.tens[tens[i]] = static_cast<double>(20 + 10 * i);
    l.magnitudes = {{"hundred", 1e2},  {"thousand", 1e3}, {"million", 1e6},
                    {"billion", 1e9},  {"trillion", 1e12}, {"quadrillion", 1e15}};
    const std::array<const char*, 19> ord = {
        "first",   "second",   "third",      "fourth",     "fifth",     "sixth",     "seventh",
        "eighth",  "ninth",    "tenth",      "eleventh",   "twelfth",   "thirteenth", "fourteenth",
        "fifteenth", "sixteenth", "seventeenth", "eighteenth", "nineteenth"};
    for (std::size_t i = 0; i < ord.size(); ++i) l.ordinals[ord[i]] = static_cast<double>(i + 1);
    const std::array<const char*, 8> tens_ord = {"twentieth", "thirtieth",  "fortieth",  "fiftieth",
                                                 "sixtieth",  "seventieth", "eightieth", "ninetieth"};
    for (std::size_t i = 0; i < tens_ord.size(); ++i) l.ordinals[tens_ord[i]] = static_cast<double>(20 + 10 * i);
    l.ordinals["hundredth"] = 1e2;
    l.ordinals["thousandth"] = 1e3;
    l.ordinals["millionth"] = 1e6;
    l.ordinals["billionth"] = 1e9;
    l.suffixes = {{"k", 1e3}, {"m", 1e6}, {"bn", 1e9}, {"b", 1e9}, {"tn", 1e12}, {"t", 1e12}};
    return l;
  }();
  return lex;
}

std::vector<NumberToken> extract_numbers(std::string_view text, const NumberLexicon& lex_table) {
  const auto lexemes = lex(text, lex_table);
  std::vector<NumberToken> out;
  for (const Found& f : find_numbers(lexemes, lex_table)) {
    NumberToken t;
    t.range = {lexemes[f.first].begin, lexemes[f.last - 1].end};
    t.surface = std::string(text.substr(t.range.begin, t.range.end - t.range.begin));
    t.value = f.value;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  auto at = [&](std::size_t i) -> unsigned char { return i < n ? static_cast<unsigned char>(text[i]) : 0; };
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    std::size_t b = start, e = end;
    while (b < e && is_space(at(b))) ++b;
    while (e > b && is_space(at(e - 1))) --e;
    if (e > b) out.emplace_back(text.substr(b, e - b));
    start = end;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char c = at(i);
    if (c == '\n' && at(i + 1) == '\n') {
      emit(i);
      continue;
    }
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    while (at(j) == '.' || at(j) == '!' || at(j) == '?' || closing(at(j))) ++j;
    if (j < n && !is_space(at(j))) continue;
    if (c == '.') {
      // Word immediately before the period, including internal dots ("u.s").
      std::size_t b = i;
      while (b > start && (is_alpha(at(b - 1)) || at(b - 1) == '.')) --b;
      const std::string word = lower(text.substr(b, i - b));
      if (word.size() == 1 && is_alpha(static_cast<unsigned char>(word[0]))) continue;  // initial
      if (abbreviations().contains(word)) continue;
    }
    emit(j);
    i = j - 1;
  }
  emit(n);
  return out;
}

std::size_t word_count(const std::vector<std::string>& tokens) {
  std::size_t n = 0;
  for (const auto& t : tokens) {
    if (t == kNumberMask ||
        std::any_of(t.begin(), t.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; })) {
      ++n;
    }
  }
  return n;
}

NormalizedSentence tokenize_sentence(std::string_view sentence, const NumberLexicon& lex_table) {
  const auto lexemes = lex(sentence, lex_table);
  const auto found = find_numbers(lexemes, lex_table);
  NormalizedSentence s;
  std::size_t f = 0;
  for (std::size_t i = 0; i < lexemes.size();) {
    if (f < found.size() && found[f].first == i) {
      s.numbers.push_back({s.tokens.size(), found[f].value});
      s.tokens.emplace_back(kNumberMask);
      i = found[f].last;
      ++f;
      continue;
    }
    s.tokens.push_back(lexemes[i].text);
    ++i;
  }
  return s;
}

std::vector<NormalizedSentence> normalize_document(std::string_view text, const FilterConfig& cfg,
                                                   std::int64_t doc, const NumberLexicon& lex_table) {
  std::vector<NormalizedSentence> out;
  for (const std::string& raw : split_sentences(text)) {
    const NormalizedSentence whole = tokenize_sentence(raw, lex_table);
    // Break long sentences into chunks of at most max_words words.
    std::vector<NormalizedSentence> chunks(1);
    std::size_t words = 0;
    std::size_t next_number = 0;
    for (std::size_t i = 0; i < whole.tokens.size(); ++i) {
      const std::string& tok = whole.tokens[i];
      const bool is_word = word_count({tok}) == 1;
      if (is_word && words == cfg.max_words) {
        chunks.emplace_back();
        words = 0;
      }
      NormalizedSentence& cur = chunks.back();
      if (next_number < whole.numbers.size() && whole.numbers[next_number].token_index == i) {
        cur.numbers.push_back({cur.tokens.size(), whole.numbers[next_number].value});
        ++next_number;
      }
      cur.tokens.push_back(tok);
      if (is_word) ++words;
    }
    for (NormalizedSentence& s : chunks) {
      if (s.numbers.empty() || word_count(s.tokens) < cfg.min_words) continue;
      const bool in_range = std::all_of(s.numbers.begin(), s.numbers.end(), [&](const NumberEntry& e) {
        return e.value >= cfg.min_value && e.value <= cfg.max_value;
      });
      if (!in_range) continue;
      if (s.tokens.size() > cfg.max_tokens) {
        s.tokens.resize(cfg.max_tokens);
        std::erase_if(s.numbers, [&](const NumberEntry& e) { return e.token_index >= cfg.max_tokens; });
        if (s.numbers.empty()) continue;
      }
      if (cfg.dollar_only) {
        bool any = false;
        for (std::size_t k = 0; k < s.numbers.size(); ++k) any = any || preceded_by_currency(s, k);
        if (!any) continue;
      }
      s.doc = doc;
      out.push_back(std::move(s));
    }
  }
  return out;
}

bool preceded_by_currency(const NormalizedSentence& s, std::size_t k) {
  const std::size_t idx = s.numbers.at(k).token_index;
  return idx > 0 && s.tokens[idx - 1] == "$";
}

double pow10(int e) {
  static const std::array<double, 23> table = [] {
    std::array<double, 23> t{};
    double v = 1.0;
    for (auto& x : t) {
      x = v;
      v *= 10.0;
    }
    return t;
  }();
  if (e >= 0 && e < static_cast<int>(table.size())) return table[static_cast<std::size_t>(e)];
  return std::pow(10.0, e);
}

int exponent_row(double value) {
  if (!(value >= kMinValue && value <= kMaxValue)) {
    throw RangeError("value " + std::to_string(value) + " outside [1, 1e16]");
  }
  int e = static_cast<int>(std::floor(std::log10(value)));
  while (e < 16 && pow10(e + 1) <= value) ++e;
  while (e > 0 && pow10(e) > value) --e;
  return e;
}

ExponentMantissa decompose(double value) {
  const int e = exponent_row(value) + 1;
  double m = value / pow10(e);
  if (m >= 1.0) m = std::nextafter(1.0, 0.0);
  return {e, m};
}

std::string to_scientific_string(double value) {
  if (!(value >= kMinValue && value <= kMaxValue)) {
    throw RangeError("value " + std::to_string(value) + " outside [1, 1e16]");
  }
  // Shortest round-trip digits, then decimal rounding to six significant digits.
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::scientific);
  const std::string sci(buf, res.ptr);
  const auto epos = sci.find('e');
  std::string digits;
  for (std::size_t i = 0; i < epos; ++i) {
    if (sci[i] != '.') digits.push_back(sci[i]);
  }
  int exp10 = std::atoi(sci.c_str() + epos + 1);
  if (digits.size() > 6) {
    const std::string kept = digits.substr(0, 6);
    const std::string rest = digits.substr(6);
    bool round_up = false;
    if (rest[0] > '5') {
      round_up = true;
    } else if (rest[0] == '5') {
      const bool beyond = rest.find_first_not_of('0', 1) != std::string::npos;
      round_up = beyond || ((kept.back() - '0') % 2 == 1);
    }
    digits = kept;
    if (round_up) {
      int k = 5;
      while (k >= 0 && digits[static_cast<std::size_t>(k)] == '9') {
        digits[static_cast<std::size_t>(k)] = '0';
        --k;
      }
      if (k < 0) {
        digits = "100000";
        ++exp10;
      } else {
        ++digits[static_cast<std::size_t>(k)];
      }
    }
  }
  digits.resize(6, '0');
  char out[32];
  std::snprintf(out, sizeof out, "%c.%sE+%02d", digits[0], digits.substr(1).c_str(), exp10);
  return out;
}

}  // namespace numerate::text
