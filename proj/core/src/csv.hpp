#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace adlens::detail {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and
// newlines. Line numbers refer to the physical line where the row starts.
std::vector<CsvRow> read_csv(std::istream& in);

std::string csv_quote(std::string_view s);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace adlens::detail
