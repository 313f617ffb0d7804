#include "polyprobe/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "polyprobe/errors.hpp"

namespace polyprobe {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, end);
}

std::string CsvTable::to_string() const {
  std::string s = corner;
  for (const auto& c : columns) s += "," + c;
  s += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s += rows[i];
    for (std::size_t j = 0; j < columns.size(); ++j) s += "," + format_number(values(i, j));
    s += "\n";
  }
  return s;
}

CsvTable parse_csv_table(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> data;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      t.corner = cells.front();
      t.columns.assign(cells.begin() + 1, cells.end());
      have_header = true;
      continue;
    }
    if (cells.size() != t.columns.size() + 1) {
      throw ParseError("expected " + std::to_string(t.columns.size() + 1) + " cells, got " +
                           std::to_string(cells.size()),
                       lineno);
    }
    t.rows.push_back(cells.front());
    for (std::size_t j = 1; j < cells.size(); ++j) {
      const auto& c = cells[j];
      double v = 0.0;
      auto [end, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || end != c.data() + c.size()) {
        throw ParseError("not a number: '" + c + "'", lineno);
      }
      data.push_back(v);
    }
  }
  if (!have_header) throw ParseError("empty CSV", 0);
  t.values = Matrix(t.rows.size(), t.columns.size(), std::move(data));
  return t;
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_csv_table(in);
}

}  // namespace polyprobe
