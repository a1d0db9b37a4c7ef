#include "ivpricing/baselines.hpp"
#include "ivpricing/json_util.hpp"
#include "ivpricing/kernels.hpp"
#include "ivpricing/minimax.hpp"
#include "ivpricing/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ivpricing {

double RegressionFit::predict(ConstVectorRef x, double g, double p) const {
  Vector xg(x.size() + 1);
  xg << x, g;
  return beta1_reg.eval(x) * p + beta2_reg.eval(x) * p * p + beta_g_reg.eval(xg);
}

PricingPolicy RegressionFit::policy(double p1, double p2, double floor_c) const {
  return PricingPolicy::quadratic({beta1_reg.map, beta1_reg.weights, 0.0}, {beta2_reg.map, beta2_reg.weights, 0.0},
                                  p1, p2, floor_c);
}

RegressionFit fit_regression_baseline(const Dataset& data, const FeatureMapPtr& x_map, const FeatureMapPtr& xg_map,
                                      double ridge) {
  if (data.size() == 0) throw DataError("regression: empty dataset");
  if (!(ridge >= 0.0)) throw ConfigError("regression: ridge must be nonnegative");
  const Matrix phi = x_map->feature_matrix(data.x());
  const Matrix psi = xg_map->feature_matrix(xg_inputs(data));
  const Eigen::Index d = phi.cols(), e = psi.cols();
  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix Z(n, 2 * d + e);
  Z.leftCols(d) = phi.array().colwise() * data.p().array();
  Z.middleCols(d, d) = phi.array().colwise() * data.p().array().square();
  Z.rightCols(e) = psi;
  Matrix A = Z.transpose() * Z / static_cast<double>(n);
  // A tiny relative floor keeps the normal equations solvable at ridge = 0.
  const double floor = 1e-14 * std::max(1.0, A.diagonal().maxCoeff());
  A.diagonal().array() += std::max(ridge, floor);
  const Vector w = A.ldlt().solve(Z.transpose() * data.y() / static_cast<double>(n));
  if (!w.allFinite()) throw NumericalFailure("regression: solve failed");
  return {{x_map, w.head(d)}, {x_map, w.segment(d, d)}, {xg_map, w.tail(e)}, ridge};
}

void to_json(nlohmann::json& j, const RegressionConfig& c) {
  j = {{"D", c.D}, {"ridge", c.ridge}, {"standardize", c.standardize}, {"seed", c.seed}};
  j["bandwidth"] = c.bandwidth ? nlohmann::json(*c.bandwidth) : nlohmann::json("median");
}

void from_json(const nlohmann::json& j, RegressionConfig& c) {
  jsonu::check_keys(j, {"D", "bandwidth", "ridge", "standardize", "seed"}, "regression config");
  try {
    c.D = j.value("D", c.D);
    c.ridge = j.value("ridge", c.ridge);
    c.standardize = j.value("standardize", c.standardize);
    c.seed = j.value("seed", c.seed);
    if (j.contains("bandwidth")) {
      const auto& b = j.at("bandwidth");
      c.bandwidth = b.is_string() ? std::nullopt : std::optional<double>(jsonu::number(b, "bandwidth"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("regression config: ") + e.what());
  }
  if (c.D == 0 || !(c.ridge >= 0.0)) throw ConfigError("regression config: need D >= 1 and ridge >= 0");
}

RegressionFit fit_regression(const Dataset& data, const RegressionConfig& config) {
  if (data.size() == 0) throw DataError("regression: empty dataset");
  const DataScales s = config.standardize ? robust_scales(data) : DataScales{};
  const Dataset sd = config.standardize ? data.rescaled(1.0 / s.y, 1.0 / s.p, 1.0 / s.g) : data;
  MinimaxConfig mc;
  mc.D = config.D;
  mc.bandwidth = config.bandwidth;
  mc.seed = config.seed;
  const FeatureMaps maps = make_feature_maps(sd, mc);
  RegressionFit fit = fit_regression_baseline(sd, maps.x_map, maps.xg_map, config.ridge);
  fit.beta1_reg.weights *= s.y / s.p;
  fit.beta2_reg.weights *= s.y / (s.p * s.p);
  fit.beta_g_reg.weights *= s.y;
  fit.beta_g_reg.map = std::make_shared<FeatureMap>(maps.xg_map->with_rescaled_input(data.covariate_dim(), s.g));
  return fit;
}

void KernelIPSConfig::validate() const {
  if (h && !(*h > 0.0)) throw ConfigError("kernel_ips: h must be positive");
  if (kde_bandwidths && !(kde_bandwidths->array() > 0.0).all())
    throw ConfigError("kernel_ips: KDE bandwidths must be positive");
  if (q_floor && !(*q_floor > 0.0)) throw ConfigError("kernel_ips: q_floor must be positive");
  if (!(p1 < p2)) throw ConfigError("kernel_ips: need p1 < p2");
  if (grid_points < 3 || refine_rounds < 0) throw ConfigError("kernel_ips: need grid_points >= 3, refine_rounds >= 0");
}

void to_json(nlohmann::json& j, const KernelIPSConfig& c) {
  j = {{"optimizer", c.optimizer == IpsOptimizer::kGrid ? "grid" : "gradient"},
       {"p1", c.p1},
       {"p2", c.p2},
       {"grid_points", c.grid_points},
       {"refine_rounds", c.refine_rounds},
       {"seed_regression", c.seed_regression}};
  j["h"] = c.h ? nlohmann::json(*c.h) : nlohmann::json("silverman");
  j["kde_bandwidths"] = c.kde_bandwidths ? jsonu::vec(*c.kde_bandwidths) : nlohmann::json("silverman");
  j["q_floor"] = c.q_floor ? nlohmann::json(*c.q_floor) : nlohmann::json("auto");
}

void from_json(const nlohmann::json& j, KernelIPSConfig& c) {
  jsonu::check_keys(j, {"h", "kde_bandwidths", "q_floor", "optimizer", "p1", "p2", "grid_points", "refine_rounds",
                        "seed_regression"},
                    "kernel_ips config");
  try {
    if (j.contains("h") && !j.at("h").is_string()) c.h = jsonu::number(j.at("h"), "h");
    if (j.contains("kde_bandwidths") && !j.at("kde_bandwidths").is_string())
      c.kde_bandwidths = jsonu::to_vector(j.at("kde_bandwidths"), "kde_bandwidths");
    if (j.contains("q_floor") && !j.at("q_floor").is_string()) c.q_floor = jsonu::number(j.at("q_floor"), "q_floor");
    if (j.contains("optimizer")) {
      const auto o = j.at("optimizer").get<std::string>();
      if (o == "grid") c.optimizer = IpsOptimizer::kGrid;
      else if (o == "gradient") c.optimizer = IpsOptimizer::kGradient;
      else throw ConfigError("kernel_ips: unknown optimizer '" + o + "'");
    }
    c.p1 = j.value("p1", c.p1);
    c.p2 = j.value("p2", c.p2);
    c.grid_points = j.value("grid_points", c.grid_points);
    c.refine_rounds = j.value("refine_rounds", c.refine_rounds);
    if (j.contains("seed_regression")) c.seed_regression = j.at("seed_regression").get<RegressionConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("kernel_ips config: ") + e.what());
  }
  c.validate();
}

Vector silverman_bandwidths(const Matrix& x) {
  const auto n = static_cast<double>(x.rows());
  const auto d = static_cast<double>(x.cols());
  const double factor = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
  return column_scales(x) * factor;
}

GPSModel::GPSModel(Matrix pxg, Vector bandwidths, double q_floor)
    : pxg_(std::move(pxg)), bw_(std::move(bandwidths)), q_floor_(q_floor),
      hits_(std::make_shared<std::atomic<std::size_t>>(0)) {
  if (pxg_.rows() == 0 || pxg_.cols() < 2) throw ConfigError("gps: need samples of (p, x, g)");
  if (bw_.size() != pxg_.cols() || !(bw_.array() > 0.0).all()) throw ConfigError("gps: bad bandwidths");
  if (!(q_floor_ > 0.0)) throw ConfigError("gps: q_floor must be positive");
  xg_ = pxg_.rightCols(pxg_.cols() - 1);
  bw_xg_ = bw_.tail(bw_.size() - 1);
}

Vector GPSModel::raw_at_rows(const Matrix& pxg) const {
  const Vector num = kernels::gaussian_kde(pxg_, pxg, bw_);
  const Vector den = kernels::gaussian_kde(xg_, pxg.rightCols(pxg.cols() - 1), bw_xg_);
  Vector out(pxg.rows());
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = den(i) > 0.0 ? num(i) / den(i) : 0.0;
  return out;
}

Vector GPSModel::at_rows(const Matrix& pxg) const {
  Vector q = raw_at_rows(pxg);
  std::size_t hits = 0;
  for (auto& v : q)
    if (!(v >= q_floor_)) {
      v = q_floor_;
      ++hits;
    }
  hits_->fetch_add(hits);
  return q;
}

namespace {

Matrix one_row(double p, ConstVectorRef x, double g) {
  Matrix r(1, x.size() + 2);
  r(0, 0) = p;
  r.block(0, 1, 1, x.size()) = x.transpose();
  r(0, x.size() + 1) = g;
  return r;
}

}  // namespace

double GPSModel::raw(double p, ConstVectorRef x, double g) const { return raw_at_rows(one_row(p, x, g))(0); }

double GPSModel::operator()(double p, ConstVectorRef x, double g) const { return at_rows(one_row(p, x, g))(0); }

Matrix pxg_matrix(const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto d = static_cast<Eigen::Index>(data.covariate_dim());
  Matrix m(n, d + 2);
  m.col(0) = data.p();
  m.middleCols(1, d) = data.x();
  m.col(d + 1) = data.g();
  return m;
}

GPSModel estimate_gps(const Dataset& data, const KernelIPSConfig& config) {
  if (data.size() == 0) throw DataError("gps: empty dataset");
  const Matrix pxg = pxg_matrix(data);
  Vector bw = config.kde_bandwidths ? *config.kde_bandwidths : silverman_bandwidths(pxg);
  if (bw.size() != pxg.cols()) throw ConfigError("gps: kde_bandwidths needs one entry per (p, x, g) column");
  double floor = config.q_floor.value_or(0.0);
  if (!config.q_floor) {
    GPSModel probe(pxg, bw, std::numeric_limits<double>::min());
    Vector q = probe.raw_at_rows(pxg);
    auto mid = q.begin() + q.size() / 2;
    std::nth_element(q.begin(), mid, q.end());
    floor = *mid > 0.0 ? 1e-3 * *mid : std::numeric_limits<double>::min();
  }
  return {pxg, bw, floor};
}

double ips_value(const Vector& y, const Vector& p, const Vector& pi, const Vector& q, double h) {
  if (y.size() != p.size() || y.size() != pi.size() || y.size() != q.size())
    throw ConfigError("ips_value: length mismatch");
  if (!(h > 0.0)) throw ConfigError("ips_value: h must be positive");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double z = (p(i) - pi(i)) / h;
    const double w = std::exp(-0.5 * z * z) / q(i);
    num += w * y(i);
    den += w;
  }
  if (!(den > 0.0) || !std::isfinite(den)) throw ConfigError("ips_value: all kernel weights vanish (bandwidth too small)");
  return num / den;
}

namespace {

struct IpsProblem {
  const Matrix& x;
  const Vector& y;
  const Vector& p;
  Vector q;
  double h, p1, p2;

  [[nodiscard]] double value(const Vector& theta) const {  // theta = (w, b)
    const Eigen::Index d = x.cols();
    Vector pi = (x * theta.head(d)).array() + theta(d);
    pi = pi.unaryExpr([&](double v) { return clip(v, p1, p2); });
    try {
      return ips_value(y, p, pi, q, h);
    } catch (const ConfigError&) {
      return -std::numeric_limits<double>::infinity();
    }
  }
};

Vector seed_theta(const Dataset& data, const KernelIPSConfig& config) {
  const Eigen::Index d = static_cast<Eigen::Index>(data.covariate_dim());
  Vector prices(static_cast<Eigen::Index>(data.size()));
  try {
    const PricingPolicy reg = fit_regression(data, config.seed_regression).policy(config.p1, config.p2);
    for (Eigen::Index i = 0; i < prices.size(); ++i) prices(i) = reg.price_for(data.x().row(i).transpose());
  } catch (const NumericalFailure&) {
    prices.setConstant(0.5 * (config.p1 + config.p2));
  }
  Matrix A(prices.size(), d + 1);
  A << data.x(), Vector::Ones(prices.size());
  Matrix N = A.transpose() * A;
  N.diagonal().array() += 1e-10 * std::max(1.0, N.diagonal().maxCoeff());
  return N.ldlt().solve(A.transpose() * prices);
}

}  // namespace

PricingPolicy fit_kernel_ips(const Dataset& data, const KernelIPSConfig& config) {
  config.validate();
  if (data.size() == 0) throw DataError("kernel_ips: empty dataset");
  const GPSModel gps = estimate_gps(data, config);
  const double h = config.h ? *config.h : silverman_bandwidths(Matrix(data.p()))(0);
  IpsProblem prob{data.x(), data.y(), data.p(), gps.at_rows(pxg_matrix(data)), h, config.p1, config.p2};
  const Eigen::Index d = data.x().cols();

  Vector theta = seed_theta(data, config);
  double best = prob.value(theta);
  const Vector sx = column_scales(data.x());
  Vector span(d + 1);
  span.head(d) = (config.p2 - config.p1) / (2.0 * sx.array());
  span(d) = config.p2 - config.p1;

  if (config.optimizer == IpsOptimizer::kGrid) {
    for (int round = 0; round <= config.refine_rounds; ++round) {
      for (Eigen::Index c = 0; c <= d; ++c) {
        const double center = theta(c);
        for (int k = 0; k < config.grid_points; ++k) {
          Vector cand = theta;
          cand(c) = center - span(c) + 2.0 * span(c) * k / (config.grid_points - 1);
          const double v = prob.value(cand);
          if (v > best) {
            best = v;
            theta = cand;
          }
        }
      }
      span *= 0.5;
    }
  } else {
    // Finite-difference ascent with backtracking; step sizes scale with the spans.
    const Vector eps = span * 1e-4;
    for (int it = 0; it < 50 * (config.refine_rounds + 1) && std::isfinite(best); ++it) {
      Vector grad(d + 1);
      for (Eigen::Index c = 0; c <= d; ++c) {
        Vector a = theta, b = theta;
        a(c) += eps(c);
        b(c) -= eps(c);
        grad(c) = (prob.value(a) - prob.value(b)) / (2.0 * eps(c)) * span(c) * span(c);
      }
      if (!grad.allFinite() || grad.norm() == 0.0) break;
      double t = 1.0 / std::max(1e-12, grad.cwiseQuotient(span).norm());
      bool moved = false;
      for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
        const Vector cand = theta + t * grad;
        const double v = prob.value(cand);
        if (v > best) {
          best = v;
          theta = cand;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
  }
  if (!std::isfinite(best)) throw ConfigError("kernel_ips: all kernel weights vanish for every candidate policy");
  return PricingPolicy::linear(theta.head(d), theta(d), config.p1, config.p2);
}

}  // namespace ivpricing
