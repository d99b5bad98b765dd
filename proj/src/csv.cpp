#include "conveyor/csv.hpp"

#include "conveyor/errors.hpp"

#include <charconv>
#include <istream>

namespace conveyor::csv {

std::size_t Table::column(std::string_view name) const
{
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) { return i; }
  }
  throw ConfigError("missing CSV column '" + std::string(name) + "'");
}

std::string trim(std::string_view s)
{
  auto const b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) { return {}; }
  auto const e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line, char sep)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto const pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) { break; }
    start = pos + 1;
  }
  return out;
}

Table read(std::istream &in)
{
  Table table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto const t = trim(line);
    if (t.empty() || t.front() == '#') { continue; }
    auto fields = split(t);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ConfigError("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(table.header.size()) +
                        " fields");
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto const &f : fields) {
      double v = 0.0;
      auto const [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw ConfigError("CSV line " + std::to_string(lineno) + ": bad number '" + f + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) { throw ConfigError("CSV header missing"); }
  return table;
}

std::string format(double value)
{
  char buf[64];
  auto const [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

} // namespace conveyor::csv
