#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ivpricing::csv {

/// A header plus string cells. Quoting is not supported; numeric files only.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::ptrdiff_t column(std::string_view name) const;
};

std::vector<std::string> split_line(std::string_view line);
Table read(std::istream& in);

/// Strict decimal parse; throws DataError naming `what` on failure or non-finite values.
double parse_double(std::string_view cell, std::string_view what);

}  // namespace ivpricing::csv
