#pragma once

#include <string>
#include <vector>

namespace scfl::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Reads a comma-separated table of decimal reals with one header row.
// Malformed cells are reported with 1-based row/column coordinates.
Table read(const std::string& path);

// Writes with enough digits that doubles round-trip bit-exactly.
void write(const std::string& path, const Table& table);

std::string format_double(double v);

}  // namespace scfl::csv
