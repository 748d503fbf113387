#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cpindoor/error.hpp"

// Minimal comma-separated reader/writer shared by the dataset, prediction,
// path and report formats. No quoting: none of the schemas need it.
namespace cpindoor::csv {

/// Splits text into lines, accepting LF or CRLF, dropping a UTF-8 BOM and
/// trailing blank lines.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (line.ends_with('\r')) line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string_view::npos) {
    lines.pop_back();
  }
  return lines;
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

/// Parses a finite decimal number. `row`/`column` are 1-based for messages.
inline double parse_double(std::string_view cell, std::size_t row, std::size_t column) {
  if (cell.starts_with('+')) cell.remove_prefix(1);
  double value = 0.0;
  const auto* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), last, value);
  if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw ParseError(row, column, "not a number: '" + std::string(cell) + "'");
  }
  return value;
}

/// Parses an integer cell; accepts integral decimals such as "2.0".
inline std::int64_t parse_int(std::string_view cell, std::size_t row, std::size_t column) {
  const double value = parse_double(cell, row, column);
  if (value != std::floor(value) || std::fabs(value) > 9.0e15) {
    throw ParseError(row, column, "not an integer: '" + std::string(cell) + "'");
  }
  return static_cast<std::int64_t>(value);
}

/// Shortest representation that parses back to the same double.
inline std::string format_exact(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

/// Fixed notation with six decimals; infinities as "inf" / "-inf".
inline std::string format_fixed6(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[512];
  const auto [ptr, ec] =
      std::to_chars(buffer, buffer + sizeof(buffer), value, std::chars_format::fixed, 6);
  std::string out(buffer, ptr);
  if (out == "-0.000000") out = "0.000000";
  return out;
}

}  // namespace cpindoor::csv
