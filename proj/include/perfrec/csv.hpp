#pragma once
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "perfrec/graph.hpp"  // detail::split_csv_line

namespace perfrec {

// Shortest round-trip decimal representation; byte-identical across runs.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Comma-delimited UTF-8 table with a `#schema=<name>/v1` comment first line
// and a header row. Cells never contain commas or newlines by construction.
class CsvWriter {
 public:
  CsvWriter(std::string schema, std::vector<std::string> columns)
      : schema_(std::move(schema)), columns_(std::move(columns)) {}

  void add_row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size())
      throw std::invalid_argument("CsvWriter: row has " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(columns_.size()));
    rows_.push_back(std::move(cells));
  }

  std::string str() const {
    std::string out = "#schema=" + schema_ + "/v1\n";
    out += join(columns_);
    for (const auto& r : rows_) out += join(r);
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("CsvWriter: cannot open " + path);
    f << str();
  }

  std::size_t row_count() const { return rows_.size(); }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    line += '\n';
    return line;
  }
  std::string schema_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

struct CsvTable {
  std::string schema;  // name without the /v1 suffix
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw std::runtime_error("CSV: missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("#schema=", 0) != 0)
    throw std::runtime_error("read_csv: " + path + " missing #schema=<name>/v1 first line");
  std::string tag = line.substr(8);
  auto slash = tag.rfind("/v1");
  if (slash == std::string::npos || slash + 3 != tag.size())
    throw std::runtime_error("read_csv: unsupported schema version in '" + tag + "'");
  t.schema = tag.substr(0, slash);
  if (!std::getline(in, line))
    throw std::runtime_error("read_csv: " + path + " missing header row");
  t.columns = detail::split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != t.columns.size())
      throw std::runtime_error("read_csv: row with " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(t.columns.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline double cell_double(const std::string& s) {
  std::size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::runtime_error("CSV: non-numeric cell '" + s + "'");
  return v;
}

}  // namespace perfrec
