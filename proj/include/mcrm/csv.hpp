#pragma once

// Minimal RFC 4180 reader/writer: comma separator, double-quote quoting with
// doubled quotes inside quoted fields, CRLF or LF line endings.

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mcrm::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based line number of each row in the source (header is line 1).
  std::vector<std::size_t> lines;

  /// Column index by name, or -1.
  int column(std::string_view name) const;
};

Table read(std::istream& in);
Table read_file(const std::string& path);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal text that reads back to the same double ('.' separator).
std::string format_double(double v);
/// Fixed-point text with `digits` decimals.
std::string format_fixed(double v, int digits);

double parse_double(const std::string& s, const std::string& what);
long parse_int(const std::string& s, const std::string& what);

}  // namespace mcrm::csv
