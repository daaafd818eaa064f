#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "numerate/numtext.hpp"

// Template-driven synthetic corpora with known value distributions.
namespace numerate::synth {

struct ValueDist {
  enum class Kind { LogUniform, DecadeMixture, DecadeShift };
  Kind kind = Kind::LogUniform;
  double lo = 1.0, hi = 10.0;   // LogUniform
  std::vector<int> decades;     // DecadeMixture, equal weights
  std::string of;               // DecadeShift: decade(of) + shift
  int shift = 1;
};

struct Template {
  std::string name;
  std::string text;  // placeholders as {name}
  double weight = 1.0;
  std::vector<std::pair<std::string, ValueDist>> values;  // sampled in this order
};

struct Spec {
  std::vector<Template> templates;
};

std::vector<std::string> preset_names();
// Throws DataError for an unknown name.
Spec preset(std::string_view name);
// {"templates": [{"name", "text", "weight"?, "values": {"x": {"dist": ...}}}]}
Spec parse_spec(std::string_view json);

struct Document {
  std::string text;
  std::string template_name;
  std::vector<double> values;  // in text order
};

// Values are truncated to three significant digits so the rendered numeral
// parses back exactly and never leaves its decade.
std::vector<Document> generate(const Spec& spec, std::size_t n, std::uint64_t seed);
std::string documents_jsonl(const std::vector<Document>& docs);
// Normalised sentences, one per document, doc id = document index.
std::vector<text::NormalizedSentence> normalize(const std::vector<Document>& docs);

}  // namespace numerate::synth
