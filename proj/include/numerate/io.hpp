#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "numerate/numtext.hpp"

namespace numerate::io {

// {"tokens": [...], "numbers": [[idx, value], ...], "doc": id?}. Throws DataError
// naming `line_no` on malformed input or an out-of-range token index.
text::NormalizedSentence parse_sentence(std::string_view line, std::size_t line_no = 0);
std::string format_sentence(const text::NormalizedSentence& s);

std::vector<text::NormalizedSentence> read_sentences(const std::filesystem::path& path);
std::vector<text::NormalizedSentence> read_sentences(std::istream& in, const std::string& source = "<stream>");
void write_sentences(const std::filesystem::path& path, const std::vector<text::NormalizedSentence>& sentences);
void write_sentences(std::ostream& out, const std::vector<text::NormalizedSentence>& sentences);

// Raw documents: plain text (the whole file is one document) or JSONL whose
// lines carry a "text" field (one document per line).
std::vector<std::string> read_documents(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace numerate::io
