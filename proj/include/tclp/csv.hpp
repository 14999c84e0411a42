#pragma once

// Deterministic CSV: header row, ',' delimiter, 17 significant digits.

#include <fmt/format.h>

#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "tclp/errors.hpp"

namespace tclp {

inline std::string format_number(double x) { return fmt::format("{:.17g}", x); }

class CsvTable {
 public:
  using Cell = std::variant<double, std::string>;

  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<Cell> row) {
    if (row.size() != header_.size()) throw Error("CsvTable: row width differs from header");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::string out = join(header_);
    for (const auto& row : rows_) {
      std::vector<std::string> cells;
      for (const auto& c : row)
        cells.push_back(std::holds_alternative<double>(c) ? format_number(std::get<double>(c)) : std::get<std::string>(c));
      out += join(cells);
    }
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("CsvTable: cannot open " + path);
    f << str();
  }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    return line + '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace tclp
