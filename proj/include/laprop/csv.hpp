#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "laprop/errors.hpp"

namespace laprop {

/// 17 significant digits: enough for binary64 values to round-trip exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw FormatError("csv column not found: " + name);
  }
};

inline void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
  if (!out) throw FormatError(path + ": cannot open for writing");
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = s.find(',', start);
      if (pos == std::string::npos) {
        cells.push_back(s.substr(start));
        break;
      }
      cells.push_back(s.substr(start, pos - start));
      start = pos + 1;
    }
    return cells;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw FormatError(path + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw FormatError(path + ": missing header row");
  return table;
}

}  // namespace laprop
