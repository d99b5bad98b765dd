#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace conveyor::csv {

struct Table
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Index of a header column; throws ConfigError if absent.
  std::size_t column(std::string_view name) const;
};

// Comma-separated numeric table with a required header line.
// Blank lines and lines starting with '#' are skipped.
Table read(std::istream &in);

// Shortest round-trip representation of a double.
std::string format(double value);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view line, char sep = ',');

} // namespace conveyor::csv
