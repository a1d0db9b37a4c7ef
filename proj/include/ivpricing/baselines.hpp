#pragma once

#include "ivpricing/dataset.hpp"
#include "ivpricing/features.hpp"
#include "ivpricing/policy.hpp"

#include <json.hpp>

#include <atomic>
#include <memory>
#include <optional>

namespace ivpricing {

/// Y ~ beta1(x) P + beta2(x) P^2 + beta_g(x, g), no instrument correction.
struct RegressionFit {
  ScalarFunction beta1_reg, beta2_reg;  // on x
  ScalarFunction beta_g_reg;            // on (x, g)
  double ridge = 0.0;

  [[nodiscard]] double predict(ConstVectorRef x, double g, double p) const;
  [[nodiscard]] PricingPolicy policy(double p1, double p2, double floor_c = 1e-3) const;
};

/// Ridge least squares of Y on [phi(x) P, phi(x) P^2, psi(x, g)]:
/// minimizes |y - Z w|^2 / n + ridge |w|^2.
RegressionFit fit_regression_baseline(const Dataset& data, const FeatureMapPtr& x_map, const FeatureMapPtr& xg_map,
                                      double ridge);

struct RegressionConfig {
  std::size_t D = 10;
  std::optional<double> bandwidth;  // on standardized inputs; default median heuristic
  double ridge = 1e-3;
  bool standardize = true;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const RegressionConfig& c);
void from_json(const nlohmann::json& j, RegressionConfig& c);

/// Builds maps the same way as the min-max estimator, fits on robustly rescaled (y, p, g)
/// and maps the coefficients back to the original units.
RegressionFit fit_regression(const Dataset& data, const RegressionConfig& config);

enum class IpsOptimizer { kGrid, kGradient };

struct KernelIPSConfig {
  std::optional<double> h;               // policy kernel bandwidth; default Silverman on P
  std::optional<Vector> kde_bandwidths;  // (p, x_1..x_d, g); default Silverman per dimension
  std::optional<double> q_floor;         // default 1e-3 * median of Q-hat at the samples
  IpsOptimizer optimizer = IpsOptimizer::kGrid;
  double p1 = 0.0, p2 = 10.0;
  int grid_points = 21;
  int refine_rounds = 8;
  RegressionConfig seed_regression;

  void validate() const;
};

void to_json(nlohmann::json& j, const KernelIPSConfig& c);
void from_json(const nlohmann::json& j, KernelIPSConfig& c);

/// Silverman's rule, sigma_k (4 / ((d + 2) n))^(1 / (d + 4)), per column.
Vector silverman_bandwidths(const Matrix& x);

/// Q(p | x, g) = f_PXG(p, x, g) / f_XG(x, g) from product-Gaussian KDEs that share the
/// (x, g) bandwidths, so Q integrates to one in p. Returns max(ratio, q_floor).
class GPSModel {
 public:
  GPSModel(Matrix pxg, Vector bandwidths, double q_floor);

  [[nodiscard]] double raw(double p, ConstVectorRef x, double g) const;
  [[nodiscard]] double operator()(double p, ConstVectorRef x, double g) const;
  /// Clipped Q at every row of a (p, x, g) matrix.
  [[nodiscard]] Vector at_rows(const Matrix& pxg) const;
  [[nodiscard]] Vector raw_at_rows(const Matrix& pxg) const;

  [[nodiscard]] const Vector& bandwidths() const { return bw_; }
  [[nodiscard]] double q_floor() const { return q_floor_; }
  [[nodiscard]] std::size_t floor_hits() const { return hits_->load(); }

 private:
  Matrix pxg_, xg_;
  Vector bw_, bw_xg_;
  double q_floor_;
  std::shared_ptr<std::atomic<std::size_t>> hits_;
};

/// Rows (P_i, X_i, G_i).
Matrix pxg_matrix(const Dataset& data);

GPSModel estimate_gps(const Dataset& data, const KernelIPSConfig& config);

/// Self-normalized kernel-weighted value sum Y K((P - pi)/h) / Q / sum K((P - pi)/h) / Q.
/// Throws ConfigError when every weight underflows.
double ips_value(const Vector& y, const Vector& p, const Vector& pi, const Vector& q, double h);

/// Linear policy clip(w.x + b, p1, p2) maximizing ips_value.
PricingPolicy fit_kernel_ips(const Dataset& data, const KernelIPSConfig& config);

}  // namespace ivpricing
