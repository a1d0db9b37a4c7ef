#pragma once

#include "ivpricing/core.hpp"
#include "ivpricing/dataset.hpp"

#include <json.hpp>

#include <functional>
#include <string>

namespace ivpricing {

/// Maps a covariate vector to a price.
using PriceFn = std::function<double(ConstVectorRef)>;

/// Parameters of the confounded pricing simulator. Defaults reproduce the published
/// simulation table with a mild exclusion violation (c4 = 1) and a strong instrument (c7 = 5).
struct SimParams {
  Vector2 mu_x{0.25, 0.25};
  Eigen::Matrix2d sigma_x = Eigen::Matrix2d::Identity();
  double mu_g = 2.0;
  double mu_u1 = 0.5;
  double mu_u2 = 0.3;
  Vector2 c_g{0.25, 0.25};
  Vector2 c_u1{0.3, 0.4};
  Vector2 c_u2{0.2, 0.2};
  double sigma2_g = 1.0;
  double sigma2_u1 = 3.0;
  double sigma2_u2 = 1.0;
  Vector2 c1{0.3, 0.2};
  Vector2 c2{0.1, -0.3};
  Vector2 c3{0.2, -0.1};
  double c4 = 1.0;  // exclusion-violation strength
  Vector2 c5{0.4, 0.1};
  Vector2 c6{1.2, 0.4};
  double c7 = 5.0;  // instrument strength
  double p1 = 0.0;
  double p2 = 10.0;
  double noise_half_width = 1.0;

  /// Throws ConfigError on non-positive variances, a non-PD covariance, or a bad price range.
  void validate() const;
};

void to_json(nlohmann::json& j, const SimParams& p);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SimParams& p);

SimParams load_sim_params(const std::string& path);

/// Stable 64-bit hex digest of the canonical JSON form.
std::string params_fingerprint(const SimParams& params);

/// Draws n i.i.d. samples. Same (params, n, seed) gives the same bytes.
Dataset generate_dataset(const SimParams& params, std::size_t n, std::uint64_t seed,
                         bool keep_hidden = false);

struct BetaPair {
  double beta1 = 0.0;
  double beta2 = 0.0;
};

/// Conditional means E[beta_p1(U,X)|X=x] and E[beta_p2(U,X)|X=x] in closed form.
BetaPair oracle_beta(const SimParams& params, const Vector2& x);

/// Revenue-maximizing clipped price for covariates x.
double oracle_policy(const SimParams& params, const Vector2& x);

struct ValueEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Noise-free expected revenue of a policy, averaged over n_mc fresh covariate draws.
double policy_value(const SimParams& params, const PriceFn& policy, std::size_t n_mc, std::uint64_t seed);
ValueEstimate policy_value_estimate(const SimParams& params, const PriceFn& policy, std::size_t n_mc,
                                    std::uint64_t seed);

/// V(oracle) - V(policy) evaluated on the same covariate draws.
double regret(const SimParams& params, const PriceFn& policy, std::size_t n_mc, std::uint64_t seed);
ValueEstimate regret_estimate(const SimParams& params, const PriceFn& policy, std::size_t n_mc,
                              std::uint64_t seed);

/// Covariate draws used by the value functions, exposed for tests and plots.
Matrix draw_covariates(const SimParams& params, std::size_t n, std::uint64_t seed);

}  // namespace ivpricing
