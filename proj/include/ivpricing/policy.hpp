#pragma once

#include "ivpricing/core.hpp"
#include "ivpricing/features.hpp"
#include "ivpricing/nuisance.hpp"

#include <json.hpp>

#include <atomic>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace ivpricing {

enum class PolicyKind { kQuadratic, kConstant, kLinear, kTabulated };

std::string_view policy_kind_name(PolicyKind k);

/// beta(x) = offset + weights . phi(x); a null map means the constant `offset`.
struct BetaFunction {
  FeatureMapPtr map;
  Vector weights;
  double offset = 0.0;

  [[nodiscard]] double eval(ConstVectorRef x) const { return offset + (map ? weights.dot(map->features(x)) : 0.0); }
};

/// A covariate-to-price map whose output always lies in [p1, p2].
class PricingPolicy {
 public:
  /// clip(-beta1(x) / (2 min(beta2(x), -floor_c)), p1, p2).
  static PricingPolicy quadratic(BetaFunction beta1, BetaFunction beta2, double p1, double p2, double floor_c = 1e-3);
  static PricingPolicy constant(double price, double p1, double p2);
  /// clip(w . x + b, p1, p2).
  static PricingPolicy linear(Vector w, double b, double p1, double p2);
  /// Price of the nearest tabulated covariate row (Euclidean), clipped.
  static PricingPolicy tabulated(Matrix xs, Vector prices, double p1, double p2);

  [[nodiscard]] PolicyKind kind() const { return kind_; }
  [[nodiscard]] double p1() const { return p1_; }
  [[nodiscard]] double p2() const { return p2_; }
  [[nodiscard]] double floor_c() const { return floor_c_; }
  [[nodiscard]] const BetaFunction& beta1() const { return beta1_; }
  [[nodiscard]] const BetaFunction& beta2() const { return beta2_; }
  [[nodiscard]] const Vector& linear_weights() const { return w_; }
  [[nodiscard]] double linear_intercept() const { return b_; }

  [[nodiscard]] double price_for(ConstVectorRef x) const;
  [[nodiscard]] double operator()(ConstVectorRef x) const { return price_for(x); }

  /// Quadratic evaluations where beta2 was raised to -floor_c, counted since construction.
  [[nodiscard]] std::size_t floored_count() const { return floored_ ? floored_->load() : 0; }

  [[nodiscard]] nlohmann::json to_json() const;
  static PricingPolicy from_json(const nlohmann::json& j);

 private:
  PricingPolicy(PolicyKind kind, double p1, double p2);

  PolicyKind kind_ = PolicyKind::kConstant;
  double p1_ = 0.0, p2_ = 0.0;
  double floor_c_ = 1e-3;
  BetaFunction beta1_, beta2_;
  double constant_ = 0.0;
  Vector w_;
  double b_ = 0.0;
  Matrix table_x_;
  Vector table_p_;
  std::shared_ptr<std::atomic<std::size_t>> floored_;
};

/// Quadratic-argmax policy from the beta blocks of a fitted nuisance.
PricingPolicy extract_policy(const NuisanceAlpha& alpha_hat, double p1, double p2, double floor_c = 1e-3);

/// Reads a policy file, or the "policy" member of a fit output.
PricingPolicy load_policy(const std::string& path);

/// CSV `x1,...,xd,price`, one row per covariate row.
void write_price_table(std::ostream& out, const PricingPolicy& policy, const Matrix& xs);

}  // namespace ivpricing
