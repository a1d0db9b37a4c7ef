#include "ivpricing/features.hpp"
#include "ivpricing/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ivpricing {

FeatureMap::FeatureMap(std::size_t input_dim, std::size_t n_features, double bandwidth, std::uint64_t seed,
                       Vector input_scale, bool intercept)
    : input_dim_(input_dim),
      n_features_(n_features),
      bandwidth_(bandwidth),
      seed_(seed),
      input_scale_(input_scale.size() == 0 ? Vector::Ones(static_cast<Eigen::Index>(input_dim))
                                           : std::move(input_scale)),
      intercept_(intercept) {
  if (input_dim == 0) throw ConfigError("FeatureMap: input_dim must be at least 1");
  if (n_features == 0) throw ConfigError("FeatureMap: need at least one feature");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ConfigError("FeatureMap: bandwidth must be positive");
  if (input_scale_.size() != static_cast<Eigen::Index>(input_dim) || !(input_scale_.array() > 0.0).all())
    throw ConfigError("FeatureMap: input_scale must be positive, one entry per input");

  const auto D = static_cast<Eigen::Index>(n_features);
  const auto d = static_cast<Eigen::Index>(input_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  freq_.resize(D, d);
  phase_.resize(D);
  for (Eigen::Index j = 0; j < D; ++j) {
    for (Eigen::Index k = 0; k < d; ++k) freq_(j, k) = normal(rng) / (bandwidth * input_scale_(k));
    phase_(j) = uniform(rng);
  }
}

Vector FeatureMap::features(ConstVectorRef x) const {
  if (x.size() != static_cast<Eigen::Index>(input_dim_)) throw ConfigError("FeatureMap: input dimension mismatch");
  const double amp = std::sqrt(2.0 / static_cast<double>(n_features_));
  if (!intercept_) return amp * (freq_ * x + phase_).array().cos().matrix();
  Vector out(static_cast<Eigen::Index>(size()));
  out(0) = 1.0;
  out.tail(static_cast<Eigen::Index>(n_features_)) = amp * (freq_ * x + phase_).array().cos().matrix();
  return out;
}

Matrix FeatureMap::feature_matrix(const Matrix& x) const {
  if (x.cols() != static_cast<Eigen::Index>(input_dim_)) throw ConfigError("FeatureMap: input dimension mismatch");
  const double amp = std::sqrt(2.0 / static_cast<double>(n_features_));
  Matrix z = x * freq_.transpose();
  z.rowwise() += phase_.transpose();
  if (!intercept_) return amp * z.array().cos().matrix();
  Matrix out(x.rows(), static_cast<Eigen::Index>(size()));
  out.col(0).setOnes();
  out.rightCols(static_cast<Eigen::Index>(n_features_)) = amp * z.array().cos().matrix();
  return out;
}

FeatureMap FeatureMap::with_rescaled_input(std::size_t dim, double factor) const {
  Vector scale = input_scale_;
  scale(static_cast<Eigen::Index>(dim)) *= factor;
  return {input_dim_, n_features_, bandwidth_, seed_, std::move(scale), intercept_};
}

nlohmann::json FeatureMap::to_json() const {
  return {{"input_dim", input_dim_},
          {"D", n_features_},
          {"bandwidth", bandwidth_},
          {"seed", seed_},
          {"input_scale", jsonu::vec(input_scale_)},
          {"intercept", intercept_}};
}

FeatureMap FeatureMap::from_json(const nlohmann::json& j) {
  jsonu::check_keys(j, {"input_dim", "D", "bandwidth", "seed", "input_scale", "intercept"}, "feature map");
  const auto d = j.at("input_dim").get<std::size_t>();
  Vector scale;
  if (j.contains("input_scale")) scale = jsonu::to_vector(j.at("input_scale"), "input_scale", static_cast<Eigen::Index>(d));
  return {d, j.at("D").get<std::size_t>(), j.at("bandwidth").get<double>(), j.at("seed").get<std::uint64_t>(),
          std::move(scale), j.value("intercept", false)};
}

ScalarFunction::ScalarFunction(FeatureMapPtr m, Vector w) : map(std::move(m)), weights(std::move(w)) {
  if (weights.size() != static_cast<Eigen::Index>(map->size()))
    throw ConfigError("ScalarFunction: weight count differs from feature count");
}

ScalarFunction::ScalarFunction(FeatureMapPtr m)
    : map(std::move(m)), weights(Vector::Zero(static_cast<Eigen::Index>(map->size()))) {}

VectorAdversary::VectorAdversary(FeatureMapPtr m, FeatureMapPtr xg)
    : VectorAdversary(m, xg, Matrix::Zero(static_cast<Eigen::Index>(m->size()), kResidualDim)) {}

VectorAdversary::VectorAdversary(FeatureMapPtr m, FeatureMapPtr xg, Matrix w)
    : map(std::move(m)), xg_map(std::move(xg)), weights(std::move(w)) {
  if (weights.rows() != static_cast<Eigen::Index>(map->size()) || weights.cols() != kResidualDim)
    throw ConfigError("VectorAdversary: weights must be size x 8");
  if (xg_map && (xg_map->size() != map->size() || xg_map->input_dim() != map->input_dim() + 1))
    throw ConfigError("VectorAdversary: the (x, g) map must match the x map's size and take one more input");
}

ResidualVector VectorAdversary::eval(ConstVectorRef x, double g) const {
  ResidualVector out = (weights.transpose() * map->features(x)).eval();
  if (xg_map) {
    Vector xg(x.size() + 1);
    xg << x, g;
    out(1) = weights.col(1).dot(xg_map->features(xg));
  }
  return out;
}

Matrix VectorAdversary::eval_features(const Matrix& phi_x, const Matrix& phi_xg) const {
  Matrix F = phi_x * weights;
  if (xg_map) F.col(1) = phi_xg * weights.col(1);
  return F;
}

double median_heuristic_bandwidth(const Matrix& x, const Vector& input_scale, std::size_t max_points,
                                  std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n > max_points) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < max_points; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(max_points);
  }
  Matrix pts(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) pts.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(idx[k]));
  if (input_scale.size() == x.cols()) pts = pts.array().rowwise() / input_scale.transpose().array();

  std::vector<double> dists;
  dists.reserve(idx.size() * (idx.size() - 1) / 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j) dists.push_back((pts.row(i) - pts.row(j)).norm());
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid > 0.0 ? *mid : 1.0;
}

Vector column_scales(const Matrix& x) {
  Vector s(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    const double var = x.rows() > 1 ? (x.col(j).array() - mean).square().sum() / static_cast<double>(x.rows() - 1) : 0.0;
    s(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

}  // namespace ivpricing
