#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "numerate/errors.hpp"
#include "numerate/io.hpp"
#include "numerate/numtext.hpp"

using namespace numerate;
using namespace numerate::text;

namespace {

double only_value(std::string_view text) {
  const auto found = extract_numbers(text);
  EXPECT_EQ(found.size(), 1u) << text;
  return found.empty() ? -1.0 : found.front().value;
}

}  // namespace

struct PhraseCase {
  const char* text;
  double value;
};

class PhraseTable : public ::testing::TestWithParam<PhraseCase> {};

TEST_P(PhraseTable, ResolvesExactly) {
  const auto& c = GetParam();
  EXPECT_EQ(only_value(c.text), c.value) << c.text;
}

INSTANTIATE_TEST_SUITE_P(Goldens, PhraseTable,
                         ::testing::Values(PhraseCase{"$32 million", 3.2e7}, PhraseCase{"sixty thousand trucks", 6e4},
                                           PhraseCase{"thirty million", 3e7}, PhraseCase{"2 trillion", 2e12},
                                           PhraseCase{"five", 5}, PhraseCase{"third", 3},
                                           PhraseCase{"1,250,000 shares", 1250000}, PhraseCase{"3.75 percent", 3.75},
                                           PhraseCase{"twenty-five", 25}, PhraseCase{"twenty-first", 21},
                                           PhraseCase{"one hundred and five", 105},
                                           PhraseCase{"two hundred thousand", 2e5},
                                           PhraseCase{"three million five hundred thousand", 3.5e6},
                                           PhraseCase{"$12bn", 1.2e10}, PhraseCase{"40k", 4e4},
                                           PhraseCase{"the 3rd quarter", 3}, PhraseCase{"-42 degrees", 42},
                                           PhraseCase{"1.5 billion", 1.5e9}, PhraseCase{"nineteen", 19},
                                           PhraseCase{"in 2016 ,", 2016}));

TEST(ExtractNumbers, SpansAreOrderedAndNonOverlapping) {
  const std::string text = "Sales hit $32 million in 2016, up five percent from the third year.";
  const auto found = extract_numbers(text);
  ASSERT_EQ(found.size(), 4u);
  EXPECT_EQ(found[0].value, 3.2e7);
  EXPECT_EQ(found[0].surface, "32 million");
  EXPECT_EQ(found[1].value, 2016);
  EXPECT_EQ(found[2].value, 5);
  EXPECT_EQ(found[3].value, 3);
  for (std::size_t i = 0; i < found.size(); ++i) {
    EXPECT_LT(found[i].range.begin, found[i].range.end);
    EXPECT_LE(found[i].range.end, text.size());
    EXPECT_EQ(text.substr(found[i].range.begin, found[i].range.end - found[i].range.begin), found[i].surface);
    if (i > 0) EXPECT_LE(found[i - 1].range.end, found[i].range.begin);
  }
}

TEST(ExtractNumbers, SkipsNonNumbers) {
  EXPECT_TRUE(extract_numbers("a hundred reasons and a million thanks").empty());
  EXPECT_TRUE(extract_numbers("the mp3 player in 3d").empty());
  EXPECT_TRUE(extract_numbers("").empty());
  EXPECT_TRUE(extract_numbers("someone said anyone").empty());
}

TEST(ExtractNumbers, SeparateAdjacentCardinals) {
  const auto found = extract_numbers("five six");
  ASSERT_EQ(found.size(), 2u);
  EXPECT_EQ(found[0].value, 5);
  EXPECT_EQ(found[1].value, 6);
}

TEST(ExtractNumbers, IdempotentOnNormalizedText) {
  const auto sentences = normalize_document(
      "The company said revenue rose to $32 million in 2016 , up from twenty-five million a year earlier .");
  ASSERT_EQ(sentences.size(), 1u);
  std::string joined;
  for (const auto& t : sentences[0].tokens) joined += t + " ";
  EXPECT_TRUE(extract_numbers(joined).empty()) << joined;
  const auto again = tokenize_sentence(joined);
  EXPECT_EQ(again.tokens, sentences[0].tokens);
  EXPECT_TRUE(again.numbers.empty());
}

TEST(ExtractNumbers, LexiconIsExtensible) {
  NumberLexicon lex = NumberLexicon::english();
  lex.magnitudes["dozen"] = 12;
  const auto found = extract_numbers("3 dozen eggs", lex);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].value, 36);
}

TEST(SplitSentences, TerminalPunctuationWithAbbreviations) {
  const auto s = split_sentences("Mr. Smith paid $5 million. Shares rose 3% on Jan. 4! Did they? Yes.");
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0], "Mr. Smith paid $5 million.");
  EXPECT_EQ(s[1], "Shares rose 3% on Jan. 4!");
  EXPECT_EQ(s[2], "Did they?");
  EXPECT_EQ(s[3], "Yes.");
}

TEST(SplitSentences, DecimalsAndInitialsDoNotSplit) {
  const auto s = split_sentences("J. K. Rowling sold 3.5 million copies. Then more.");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], "J. K. Rowling sold 3.5 million copies.");
}

TEST(NormalizeDocument, PinnedGolden) {
  const auto out = normalize_document("Revenue rose to $32 million in 2016 as planned.");
  ASSERT_EQ(out.size(), 1u);
  const std::vector<std::string> tokens = {"revenue", "rose", "to", "$", "[#MASK]", "in", "[#MASK]", "as", "planned", "."};
  EXPECT_EQ(out[0].tokens, tokens);
  const std::vector<NumberEntry> numbers = {{4, 3.2e7}, {6, 2016}};
  EXPECT_EQ(out[0].numbers, numbers);
  EXPECT_TRUE(preceded_by_currency(out[0], 0));
  EXPECT_FALSE(preceded_by_currency(out[0], 1));
}

TEST(NormalizeDocument, ShortSentenceDropped) {
  EXPECT_TRUE(normalize_document("Profits rose 5 percent last year.").empty());
}

TEST(NormalizeDocument, SentenceWithoutNumbersDropped) {
  EXPECT_TRUE(normalize_document("The board met on a rainy day to discuss the plans for growth.").empty());
}

TEST(NormalizeDocument, OutOfRangeValueDropsSentence) {
  EXPECT_TRUE(normalize_document("The estimate was 100000000000000000 grains of sand on that beach.").empty());
  EXPECT_TRUE(normalize_document("The estimate was 0.5 grains of sand on that beach today.").empty());
  FilterConfig wide;
  wide.max_value = 1e18;
  EXPECT_EQ(normalize_document("The estimate was 100000000000000000 grains of sand on that beach.", wide).size(), 1u);
}

TEST(NormalizeDocument, LongSentencesAreChunked) {
  std::string text;
  for (int i = 0; i < 60; ++i) text += (i == 5 || i == 55) ? "7 " : "word ";
  text += ".";
  const auto out = normalize_document(text);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(word_count(out[0].tokens), 50u);
  EXPECT_EQ(out[0].numbers.size(), 1u);
  EXPECT_EQ(out[1].numbers.size(), 1u);
  EXPECT_EQ(out[1].numbers[0].token_index, 5u);
}

TEST(NormalizeDocument, TruncatesToTokenLimit) {
  FilterConfig cfg;
  cfg.max_tokens = 12;
  const auto out = normalize_document("a costs 5 , b , c , d , e , f , g , h and j costs 900 .", cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].tokens.size(), 12u);
  const std::vector<NumberEntry> numbers = {{2, 5}};
  EXPECT_EQ(out[0].numbers, numbers);
}

TEST(NormalizeDocument, DollarOnlyFilter) {
  FilterConfig cfg;
  cfg.dollar_only = true;
  EXPECT_EQ(normalize_document("The firm raised $ 40 million from investors last week .", cfg).size(), 1u);
  EXPECT_TRUE(normalize_document("The firm hired 40 engineers from rivals last week .", cfg).empty());
}

TEST(NormalizeDocument, InvariantsOnRandomText) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> vocab = {"the",   "firm", "sold", "five", "million", "2016", "3,400", "$",
                                          "units", "and",  ".",    "rose", "twenty",  "1e20", "0",     "third",
                                          "k",     "12bn", ",",    "of",   "hundred", "99999999999999999"};
  FilterConfig cfg;
  cfg.max_tokens = 40;
  for (int trial = 0; trial < 300; ++trial) {
    std::string doc;
    const int n = 5 + static_cast<int>(rng() % 90);
    for (int i = 0; i < n; ++i) doc += vocab[rng() % vocab.size()] + " ";
    for (const auto& s : normalize_document(doc, cfg)) {
      EXPECT_LE(s.tokens.size(), 40u);
      EXPECT_FALSE(s.numbers.empty());
      for (const auto& e : s.numbers) {
        ASSERT_LT(e.token_index, s.tokens.size());
        EXPECT_EQ(s.tokens[e.token_index], kNumberMask);
        EXPECT_GE(e.value, cfg.min_value);
        EXPECT_LE(e.value, cfg.max_value);
      }
    }
  }
}

struct SciCase {
  double value;
  const char* expected;
};

class ScientificString : public ::testing::TestWithParam<SciCase> {};

// Expected strings produced by a decimal ROUND_HALF_EVEN quantization of the
// shortest repr of each value.
TEST_P(ScientificString, MatchesHalfEvenOracle) {
  EXPECT_EQ(to_scientific_string(GetParam().value), GetParam().expected);
}

INSTANTIATE_TEST_SUITE_P(Oracle, ScientificString,
                         ::testing::Values(SciCase{2.5e6, "2.50000E+06"}, SciCase{1.0, "1.00000E+00"},
                                           SciCase{9999995.0, "1.00000E+07"}, SciCase{1234565.0, "1.23456E+06"},
                                           SciCase{1234575.0, "1.23458E+06"}, SciCase{123456.5, "1.23456E+05"},
                                           SciCase{1e16, "1.00000E+16"}, SciCase{999999.5, "1.00000E+06"},
                                           SciCase{3.14159265, "3.14159E+00"}, SciCase{1.0000005, "1.00000E+00"},
                                           SciCase{2016.0, "2.01600E+03"}, SciCase{12345650.0, "1.23456E+07"}));

TEST(ScientificStringProps, RangeErrors) {
  EXPECT_THROW(to_scientific_string(0.5), RangeError);
  EXPECT_THROW(to_scientific_string(2e16), RangeError);
  EXPECT_THROW(to_scientific_string(std::nan("")), RangeError);
}

TEST(ScientificStringProps, RoundTripsWithinSixDigits) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 16.0);
  for (int i = 0; i < 20000; ++i) {
    const double v = std::min(1e16, std::pow(10.0, u(rng)));
    const std::string s = to_scientific_string(v);
    ASSERT_EQ(s.size(), 11u);
    const double back = std::stod(s);
    EXPECT_LE(std::abs(back - v) / v, 5e-6) << s;
  }
}

TEST(Decompose, Examples) {
  auto d = decompose(2e12);
  EXPECT_EQ(d.exponent, 13);
  EXPECT_NEAR(d.mantissa, 0.2, 1e-15);
  d = decompose(1);
  EXPECT_EQ(d.exponent, 1);
  EXPECT_DOUBLE_EQ(d.mantissa, 0.1);
  d = decompose(3.7e5);
  EXPECT_EQ(d.exponent, 6);
  EXPECT_NEAR(d.mantissa, 0.37, 1e-15);
  d = decompose(1e16);
  EXPECT_EQ(d.exponent, 17);
  EXPECT_DOUBLE_EQ(d.mantissa, 0.1);
  EXPECT_THROW(decompose(0.99), RangeError);
  EXPECT_THROW(decompose(1.1e16), RangeError);
}

TEST(Decompose, ReconstructsOnLogGrid) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 16.0);
  std::vector<double> values;
  for (int e = 0; e <= 16; ++e) {
    values.push_back(pow10(e));
    values.push_back(std::nextafter(pow10(e), 0.0));
  }
  for (int i = 0; i < 20000; ++i) values.push_back(std::pow(10.0, u(rng)));
  for (double v : values) {
    if (v < 1.0 || v > 1e16) continue;
    const auto d = decompose(v);
    ASSERT_GE(d.mantissa, 0.1) << v;
    ASSERT_LT(d.mantissa, 1.0) << v;
    ASSERT_GE(d.exponent, 1);
    ASSERT_LE(d.exponent, 17);
    EXPECT_LE(std::abs(d.mantissa * pow10(d.exponent) - v) / v, 1e-12) << v;
    EXPECT_EQ(d.exponent, exponent_row(v) + 1);
  }
}

TEST(ExponentRow, Boundaries) {
  EXPECT_EQ(exponent_row(2016), 3);
  EXPECT_EQ(exponent_row(1), 0);
  EXPECT_EQ(exponent_row(1e16), 16);
  EXPECT_EQ(exponent_row(999.9999999), 2);
  EXPECT_EQ(exponent_row(1000), 3);
}

TEST(SentenceJson, RoundTripAndErrors) {
  NormalizedSentence s;
  s.tokens = {"a", "[#MASK]", "b"};
  s.numbers = {{1, 0.1 + 0.2 + 1234.5}};
  s.doc = 4;
  const auto back = io::parse_sentence(io::format_sentence(s));
  EXPECT_EQ(back, s);
  EXPECT_THROW(io::parse_sentence("{\"tokens\": [\"a\"], \"numbers\": [[3, 5]]}", 7), DataError);
  try {
    std::istringstream in("{\"tokens\": [\"a\"], \"numbers\": [[0, 5]]}\n{oops\n");
    io::read_sentences(in, "x.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}
