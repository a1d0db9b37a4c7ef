#include "ivpricing/dataset.hpp"
#include "ivpricing/csv.hpp"

#include <cctype>
#include <fstream>
#include <ostream>

namespace ivpricing {

Dataset::Dataset(Vector y, Matrix x, Vector g, Vector p, std::uint64_t seed,
                 std::string params_fingerprint, std::optional<HiddenColumns> hidden)
    : y_(std::move(y)),
      x_(std::move(x)),
      g_(std::move(g)),
      p_(std::move(p)),
      seed_(seed),
      fingerprint_(std::move(params_fingerprint)),
      hidden_(std::move(hidden)) {
  const auto n = y_.size();
  if (x_.rows() != n || g_.size() != n || p_.size() != n)
    throw DataError("Dataset: column lengths disagree");
  if (!y_.allFinite() || !x_.allFinite() || !g_.allFinite() || !p_.allFinite())
    throw DataError("Dataset: non-finite value");
}

Sample Dataset::sample(std::size_t i) const {
  const auto r = static_cast<Eigen::Index>(i);
  return Sample{y_(r), x_.row(r).transpose(), g_(r), p_(r)};
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Vector y(m), g(m), p(m);
  Matrix x(m, x_.cols());
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]);
    y(k) = y_(r);
    g(k) = g_(r);
    p(k) = p_(r);
    x.row(k) = x_.row(r);
  }
  return {std::move(y), std::move(x), std::move(g), std::move(p), seed_, fingerprint_};
}

Dataset Dataset::rescaled(double y_scale, double p_scale, double g_scale) const {
  return {y_ * y_scale, x_, g_ * g_scale, p_ * p_scale, seed_, fingerprint_};
}

void write_dataset_csv(std::ostream& out, const Dataset& data, bool with_hidden) {
  const bool hidden = with_hidden && data.hidden().has_value();
  out << "y";
  for (std::size_t j = 0; j < data.covariate_dim(); ++j) out << ",x" << (j + 1);
  out << ",g,p";
  if (hidden) out << ",u1,u2,eps_y,eps_p";
  out << '\n';
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.size()); ++i) {
    out << format_double(data.y()(i));
    for (Eigen::Index j = 0; j < data.x().cols(); ++j) out << ',' << format_double(data.x()(i, j));
    out << ',' << format_double(data.g()(i)) << ',' << format_double(data.p()(i));
    if (hidden) {
      const auto& h = *data.hidden();
      out << ',' << format_double(h.u1(i)) << ',' << format_double(h.u2(i)) << ','
          << format_double(h.eps_y(i)) << ',' << format_double(h.eps_p(i));
    }
    out << '\n';
  }
}

void write_dataset_csv(const std::string& path, const Dataset& data, bool with_hidden) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_dataset_csv(out, data, with_hidden);
}

namespace {

bool is_covariate_column(const std::string& name) {
  if (name.size() < 2 || name[0] != 'x') return false;
  for (std::size_t i = 1; i < name.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
  return true;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  const auto table = csv::read(in);
  const auto cy = table.column("y"), cg = table.column("g"), cp = table.column("p");
  if (cy < 0 || cg < 0 || cp < 0) throw DataError("dataset csv: header must contain y, g, p");
  std::vector<std::ptrdiff_t> cx;
  for (std::size_t d = 1;; ++d) {
    const auto c = table.column("x" + std::to_string(d));
    if (c < 0) break;
    cx.push_back(c);
  }
  for (const auto& h : table.header)
    if (is_covariate_column(h) && table.column(h) >= 0 &&
        std::stoul(h.substr(1)) > cx.size())
      throw DataError("dataset csv: covariate columns must be x1..xd without gaps");
  if (cx.empty()) throw DataError("dataset csv: no covariate columns");
  if (table.rows.empty()) throw DataError("dataset csv: no rows");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Vector y(n), g(n), p(n);
  Matrix x(n, static_cast<Eigen::Index>(cx.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    y(i) = csv::parse_double(row[static_cast<std::size_t>(cy)], "y");
    g(i) = csv::parse_double(row[static_cast<std::size_t>(cg)], "g");
    p(i) = csv::parse_double(row[static_cast<std::size_t>(cp)], "p");
    for (std::size_t j = 0; j < cx.size(); ++j)
      x(i, static_cast<Eigen::Index>(j)) = csv::parse_double(row[static_cast<std::size_t>(cx[j])], "x");
  }
  return {std::move(y), std::move(x), std::move(g), std::move(p)};
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_dataset_csv(in);
}

}  // namespace ivpricing
