#pragma once

#include "ivpricing/core.hpp"
#include "ivpricing/dataset.hpp"
#include "ivpricing/features.hpp"
#include "ivpricing/nuisance.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace ivpricing {

enum class FitMode { kAlternating, kStochastic };
enum class AnchorMode { kRefresh, kFixed };

struct MinimaxConfig {
  std::optional<double> lambda;  // adversary penalty; default n^(-1/2)
  std::optional<double> mu;      // learner penalty; default 1 / n
  std::optional<int> K;          // outer iterations; default 50 (alternating) or 2000 (stochastic)
  double tol = 1e-6;
  FitMode mode = FitMode::kAlternating;
  std::size_t batch_size = 256;
  double step_alpha = 0.05;
  double step_f = 0.05;
  std::uint64_t seed = 0;
  AnchorMode anchor = AnchorMode::kRefresh;
  std::size_t D = 10;                // random features per map (an intercept is added)
  std::optional<double> bandwidth;   // on standardized inputs; default median heuristic
  bool standardize = true;
  double init_ridge = 1e-3;
  int inner_steps = 200;             // alpha-step iterations per outer round (alternating)

  void validate() const;
  [[nodiscard]] double lambda_for(std::size_t n) const;
  [[nodiscard]] double mu_for(std::size_t n) const;
  [[nodiscard]] int iterations() const;
};

void to_json(nlohmann::json& j, const MinimaxConfig& c);
void from_json(const nlohmann::json& j, MinimaxConfig& c);

/// Feature maps of the adversary class: x for every test function except the one paired with
/// P - h2(X, G), which reads (x, g).
struct AdversaryMaps {
  FeatureMapPtr x_map;
  FeatureMapPtr xg_map;

  [[nodiscard]] VectorAdversary zero() const { return VectorAdversary(x_map, xg_map); }
};

struct FitResult {
  NuisanceAlpha alpha_hat;
  AdversaryMaps adversary;
  std::vector<double> objective_trace;
  std::vector<double> inner_values;
  bool converged = false;
  int iterations_used = 0;
  // Multiplicative scales applied to (y, p, g) before fitting; alpha_hat is in original units.
  double y_scale = 1.0, p_scale = 1.0, g_scale = 1.0;

  [[nodiscard]] nlohmann::json to_json() const;
  static FitResult from_json(const nlohmann::json& j);
};

/// (1/n) sum_i W(Z_i; alpha) . f(X_i).
double psi_n(const Dataset& data, const NuisanceAlpha& alpha, const VectorAdversary& f);

/// (1/n) sum_i (f(X_i) . W(Z_i; alpha_tilde))^2.
double weighted_norm_n(const Dataset& data, const VectorAdversary& f, const NuisanceAlpha& alpha_tilde);

struct InnerMax {
  VectorAdversary f_star;
  double value = 0.0;
};

/// Closed-form sup over f = theta . phi of psi_n(alpha, f) - |f|^2_{alpha_tilde,n} - lambda |f|^2.
InnerMax inner_max(const Dataset& data, const NuisanceAlpha& alpha, const NuisanceAlpha& alpha_tilde,
                   double lambda, const AdversaryMaps& adversary);

/// inner_max value + mu |alpha|^2.
double objective(const Dataset& data, const NuisanceAlpha& alpha, const NuisanceAlpha& alpha_tilde, double lambda,
                 double mu, const AdversaryMaps& adversary);

/// Gradient of psi_n(alpha, f) + mu |alpha|^2 with respect to alpha.flat().
Vector grad_alpha(const Dataset& data, const NuisanceAlpha& alpha, const VectorAdversary& f, double mu);

/// Staged ridge fits: h1, h3 on x, h2 on (x, g), h4..h6 on plug-in targets, then beta from the
/// smoothed moment systems by ridge least squares.
NuisanceAlpha init_two_stage(const Dataset& data, const FeatureMapPtr& x_map, const FeatureMapPtr& xg_map,
                             double ridge);

/// Algorithm 1 on already prepared (standardized) data. alpha_hat stays in the data's units.
FitResult fit_alternating(const Dataset& data, const MinimaxConfig& config, const NuisanceAlpha& alpha_init,
                          const AdversaryMaps& adversary);

/// Algorithm 2: one stochastic ascent step on f and one descent step on alpha per mini-batch.
FitResult fit_sgd(const Dataset& data, const MinimaxConfig& config, const NuisanceAlpha& alpha_init,
                  const AdversaryMaps& adversary);

struct FeatureMaps {
  FeatureMapPtr x_map, xg_map;
  AdversaryMaps adversary;
};

/// Maps for a dataset: inputs divided by column scales, median-heuristic bandwidth unless set.
FeatureMaps make_feature_maps(const Dataset& data, const MinimaxConfig& config);

/// Robust per-column scales (y, p, g) used for standardization.
struct DataScales {
  double y = 1.0, p = 1.0, g = 1.0;
};
DataScales robust_scales(const Dataset& data);

/// Full estimator: standardize, build maps, initialize, run the configured solver, map back.
FitResult fit_minimax(const Dataset& data, const MinimaxConfig& config);

}  // namespace ivpricing
