#include "gpdv/csv.hpp"

#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <istream>

namespace gpdv::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          current.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(was_quoted ? current : std::string(trim(current)));
      current.clear();
      was_quoted = false;
    } else {
      current.push_back(ch);
    }
  }
  fields.push_back(was_quoted ? current : std::string(trim(current)));
  return fields;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  return fmt::format("{}", value);
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text == "nan" || text == "NaN") {
    out = std::nan("");
    return true;
  }
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, out);
  return result.ec == std::errc() && result.ptr == end;
}

bool next_record(std::istream& in, std::string& line, long long& line_number) {
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) return true;
  }
  return false;
}

}  // namespace gpdv::csv
