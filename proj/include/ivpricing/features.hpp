#pragma once

#include "ivpricing/core.hpp"
#include "ivpricing/residuals.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>

namespace ivpricing {

/// Random Fourier features for the Gaussian kernel exp(-|x - x'|^2 / (2 bandwidth^2)),
/// with inputs optionally divided coordinate-wise by `input_scale` first:
///   phi_j(x) = sqrt(2/D) cos(omega_j . x + b_j).
/// Frequencies are regenerated from the seed; they are never stored.
/// With `intercept`, a constant 1 is prepended, so size() is D + 1.
class FeatureMap {
 public:
  FeatureMap(std::size_t input_dim, std::size_t n_features, double bandwidth, std::uint64_t seed,
             Vector input_scale = {}, bool intercept = false);

  [[nodiscard]] std::size_t input_dim() const { return input_dim_; }
  [[nodiscard]] std::size_t size() const { return n_features_ + (intercept_ ? 1 : 0); }
  [[nodiscard]] std::size_t n_random() const { return n_features_; }
  [[nodiscard]] bool intercept() const { return intercept_; }
  [[nodiscard]] double bandwidth() const { return bandwidth_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const Vector& input_scale() const { return input_scale_; }

  /// Effective frequencies (D x input_dim), scale and bandwidth folded in.
  [[nodiscard]] const Matrix& frequencies() const { return freq_; }
  [[nodiscard]] const Vector& phases() const { return phase_; }

  [[nodiscard]] Vector features(ConstVectorRef x) const;
  /// Row i holds phi(x.row(i)).
  [[nodiscard]] Matrix feature_matrix(const Matrix& x) const;

  /// Same frequencies with coordinate `dim` of the input scale multiplied by `factor`.
  [[nodiscard]] FeatureMap with_rescaled_input(std::size_t dim, double factor) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static FeatureMap from_json(const nlohmann::json& j);

 private:
  std::size_t input_dim_;
  std::size_t n_features_;
  double bandwidth_;
  std::uint64_t seed_;
  Vector input_scale_;
  bool intercept_ = false;
  Matrix freq_;
  Vector phase_;
};

using FeatureMapPtr = std::shared_ptr<const FeatureMap>;

/// f(x) = weights . phi(x); its squared norm stands in for the RKHS norm.
struct ScalarFunction {
  FeatureMapPtr map;
  Vector weights;

  ScalarFunction() = default;
  ScalarFunction(FeatureMapPtr m, Vector w);
  explicit ScalarFunction(FeatureMapPtr m);  // zero function

  [[nodiscard]] double eval(ConstVectorRef x) const { return weights.dot(map->features(x)); }
  [[nodiscard]] double norm2() const { return weights.squaredNorm(); }
};

/// f = (f_1, ..., f_8); column k of `weights` holds f_k. Every component reads x through `map`
/// except f_2, the test function paired with P - h2(X, G), which reads (x, g) through `xg_map`
/// when one is set. Both maps must have the same size.
struct VectorAdversary {
  FeatureMapPtr map;
  FeatureMapPtr xg_map;
  Matrix weights;  // size x 8

  VectorAdversary() = default;
  explicit VectorAdversary(FeatureMapPtr m, FeatureMapPtr xg = nullptr);  // zero adversary
  VectorAdversary(FeatureMapPtr m, FeatureMapPtr xg, Matrix w);

  [[nodiscard]] const FeatureMapPtr& map_for(int k) const { return k == 1 && xg_map ? xg_map : map; }
  [[nodiscard]] ResidualVector eval(ConstVectorRef x, double g = 0.0) const;
  /// n x 8 matrix of f(x_i, g_i)^T given precomputed features of x and (x, g).
  [[nodiscard]] Matrix eval_features(const Matrix& phi_x, const Matrix& phi_xg) const;
  [[nodiscard]] ScalarFunction component(int k) const { return {map_for(k), weights.col(k)}; }
  [[nodiscard]] double norm2() const { return weights.squaredNorm(); }
};

/// Median pairwise distance of the (scaled) rows on a seeded subsample of at most
/// `max_points` rows. Falls back to 1 when all points coincide.
double median_heuristic_bandwidth(const Matrix& x, const Vector& input_scale = {}, std::size_t max_points = 500,
                                  std::uint64_t seed = 0);

/// Sample standard deviation per column (1 where a column is constant).
Vector column_scales(const Matrix& x);

}  // namespace ivpricing
