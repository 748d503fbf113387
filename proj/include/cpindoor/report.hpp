#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cpindoor/csv.hpp"
#include "cpindoor/error.hpp"

namespace cpindoor {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Column-ordered report rows.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw ContractError("report row has the wrong number of cells");
    rows.push_back(std::move(row));
  }
};

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ConfigError("unknown report format '" + std::string(name) + "'");
}

inline std::string_view extension(ReportFormat format) { return format == ReportFormat::csv ? ".csv" : ".json"; }

namespace detail {

inline std::string format_cell(const Cell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) return csv::format_fixed6(*d);
  return std::get<std::string>(cell);
}

inline std::string json_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buffer[8];
          std::snprintf(buffer, sizeof(buffer), "\\u%04x", c);
          out += buffer;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

inline std::string json_cell(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) {
    // JSON has no infinities; those become strings.
    if (!std::isfinite(*d)) return json_string(csv::format_fixed6(*d));
    return csv::format_fixed6(*d);
  }
  if (const auto* s = std::get_if<std::string>(&cell)) return json_string(*s);
  return format_cell(cell);
}

}  // namespace detail

/// Header line plus one line per row; doubles with six decimals; LF endings.
inline std::string render_csv(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c > 0) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += ',';
      out += detail::format_cell(row[c]);
    }
    out += '\n';
  }
  return out;
}

/// A JSON array of objects whose keys follow the column order.
inline std::string render_json(const Table& table) {
  std::string out = "[\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out += "  {";
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c > 0) out += ", ";
      out += detail::json_string(table.columns[c]) + ": " + detail::json_cell(table.rows[r][c]);
    }
    out += r + 1 < table.rows.size() ? "},\n" : "}\n";
  }
  out += "]\n";
  return out;
}

inline std::string render(const Table& table, ReportFormat format) {
  return format == ReportFormat::csv ? render_csv(table) : render_json(table);
}

/// Writes `contents` to a sibling temporary file and renames it over
/// `destination`, so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& destination, std::string_view contents) {
  std::filesystem::path tmp = destination;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, destination, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move report into place at " + destination.string());
  }
}

inline void emit_report(const Table& table, ReportFormat format, const std::filesystem::path& destination) {
  if (table.rows.empty()) throw ContractError("emit_report: no rows");
  write_file_atomic(destination, render(table, format));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return contents;
}

}  // namespace cpindoor
