#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace gpdv::csv {

/// Splits one record on commas; double-quoted fields may contain commas and
/// "" escapes. Surrounding whitespace is trimmed from unquoted fields.
std::vector<std::string> split_line(std::string_view line);

/// Shortest text that parses back to the same double ("nan" for NaN).
std::string format_double(double value);

/// Whole-string numeric parse; accepts "nan". Returns false on trailing junk.
bool parse_double(std::string_view text, double& out);

/// Reads the next non-empty line (CR stripped). Returns false at EOF.
bool next_record(std::istream& in, std::string& line, long long& line_number);

}  // namespace gpdv::csv
