#pragma once

#include "ivpricing/core.hpp"

#include <json.hpp>

#include <set>
#include <string>

namespace ivpricing::jsonu {

using nlohmann::json;

inline json vec(const Eigen::Ref<const Vector>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json mat(const Eigen::Ref<const Matrix>& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
  return a;
}

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + ": expected a number");
  return j.get<double>();
}

inline Vector to_vector(const json& j, const std::string& what, Eigen::Index expected = -1) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  if (expected >= 0 && v.size() != expected)
    throw ConfigError(what + ": expected " + std::to_string(expected) + " entries");
  return v;
}

inline Matrix to_matrix(const json& j, const std::string& what, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ConfigError(what + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = to_vector(j[static_cast<std::size_t>(r)], what, cols);
  return m;
}

/// Rejects keys outside `allowed`.
inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.contains(k)) throw ConfigError(what + ": unknown key '" + k + "'");
}

json read_file(const std::string& path);
void write_file(const std::string& path, const json& j);

}  // namespace ivpricing::jsonu
