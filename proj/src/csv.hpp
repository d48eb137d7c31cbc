// csv.hpp
// Minimal reader for the comma-separated tables this project ingests. Fields
// are unquoted; surrounding whitespace is trimmed.
#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "kep/error.hpp"

namespace kep::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Iterates data rows after checking the header matches `expected`.
/// `fn(line_number, fields)` is called for each non-blank row.
template <typename Fn>
void for_each_row(std::istream& in, const std::vector<std::string>& expected, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!header_seen) {
      if (fields != expected) {
        std::string want;
        for (const auto& f : expected) want += (want.empty() ? "" : ",") + f;
        throw ParseError("line " + std::to_string(line_no) + ": expected header '" + want + "'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != expected.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(expected.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    fn(line_no, fields);
  }
  if (!header_seen) throw ParseError("missing header row");
}

}  // namespace kep::csv
