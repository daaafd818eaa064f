#include "numerate/io.hpp"

#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "numerate/errors.hpp"

namespace numerate::io {

using nlohmann::json;

namespace {

std::string where(std::size_t line_no) {
  return line_no > 0 ? "line " + std::to_string(line_no) + ": " : std::string();
}

}  // namespace

text::NormalizedSentence parse_sentence(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(where(line_no) + "malformed JSON (" + e.what() + ")");
  }
  text::NormalizedSentence s;
  try {
    if (!j.is_object() || !j.contains("tokens") || !j.contains("numbers")) {
      throw DataError(where(line_no) + "expected an object with \"tokens\" and \"numbers\"");
    }
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& pair : j.at("numbers")) {
      if (!pair.is_array() || pair.size() != 2) throw DataError(where(line_no) + "number entry must be [index, value]");
      const auto idx = pair[0].get<std::int64_t>();
      const double value = pair[1].get<double>();
      if (idx < 0 || static_cast<std::size_t>(idx) >= s.tokens.size()) {
        throw DataError(where(line_no) + "token index " + std::to_string(idx) + " out of range");
      }
      s.numbers.push_back({static_cast<std::size_t>(idx), value});
    }
    if (j.contains("doc")) s.doc = j.at("doc").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw DataError(where(line_no) + "bad field (" + e.what() + ")");
  }
  return s;
}

std::string format_sentence(const text::NormalizedSentence& s) {
  json j;
  j["tokens"] = s.tokens;
  json nums = json::array();
  for (const auto& n : s.numbers) nums.push_back(json::array({n.token_index, n.value}));
  j["numbers"] = std::move(nums);
  if (s.doc >= 0) j["doc"] = s.doc;
  return j.dump();
}

std::vector<text::NormalizedSentence> read_sentences(std::istream& in, const std::string& source) {
  std::vector<text::NormalizedSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_sentence(line, line_no));
    } catch (const DataError& e) {
      throw DataError(source + ": " + e.what());
    }
  }
  return out;
}

std::vector<text::NormalizedSentence> read_sentences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_sentences(in, path.string());
}

void write_sentences(std::ostream& out, const std::vector<text::NormalizedSentence>& sentences) {
  for (const auto& s : sentences) out << format_sentence(s) << '\n';
}

void write_sentences(const std::filesystem::path& path, const std::vector<text::NormalizedSentence>& sentences) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_sentences(out, sentences);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

std::vector<std::string> read_documents(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  const auto ext = path.extension().string();
  if (ext != ".jsonl" && ext != ".ndjson") return {content};
  std::vector<std::string> docs;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
        throw DataError("expected an object with a string \"text\" field");
      }
      docs.push_back(j["text"].get<std::string>());
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    } catch (const DataError& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

}  // namespace numerate::io
