#include "ivpricing/core.hpp"
#include "ivpricing/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>

namespace ivpricing {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return {buf.data(), ptr};
}

namespace csv {

std::ptrdiff_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
    cells.emplace_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

Table read(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: empty input");
  t.header = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw DataError("csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double parse_double(std::string_view cell, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v))
    throw DataError("csv: cannot parse '" + std::string(cell) + "' as " + std::string(what));
  return v;
}

}  // namespace csv
}  // namespace ivpricing
