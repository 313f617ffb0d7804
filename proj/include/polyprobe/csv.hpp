#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "polyprobe/probe.hpp"

namespace polyprobe {

// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

// A labeled numeric grid: first header cell names the row-label column, the
// rest name the columns. No quoting; labels must not contain commas.
struct CsvTable {
  std::string corner = "label";
  std::vector<std::string> columns;
  std::vector<std::string> rows;
  Matrix values;

  std::string to_string() const;
};

CsvTable parse_csv_table(std::istream& in);
CsvTable read_csv_table(const std::string& path);

}  // namespace polyprobe
