#include "ivpricing/policy.hpp"
#include "ivpricing/json_util.hpp"

#include <ostream>

namespace ivpricing {

std::string_view policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::kQuadratic: return "quadratic";
    case PolicyKind::kConstant: return "constant";
    case PolicyKind::kLinear: return "linear";
    case PolicyKind::kTabulated: return "tabulated";
  }
  return "unknown";
}

PricingPolicy::PricingPolicy(PolicyKind kind, double p1, double p2)
    : kind_(kind), p1_(p1), p2_(p2), floored_(std::make_shared<std::atomic<std::size_t>>(0)) {
  if (!(p1 < p2) || !std::isfinite(p1) || !std::isfinite(p2)) throw ConfigError("policy: need finite p1 < p2");
}

PricingPolicy PricingPolicy::quadratic(BetaFunction beta1, BetaFunction beta2, double p1, double p2, double floor_c) {
  if (!(floor_c > 0.0)) throw ConfigError("policy: floor_c must be positive");
  PricingPolicy p(PolicyKind::kQuadratic, p1, p2);
  p.beta1_ = std::move(beta1);
  p.beta2_ = std::move(beta2);
  p.floor_c_ = floor_c;
  return p;
}

PricingPolicy PricingPolicy::constant(double price, double p1, double p2) {
  PricingPolicy p(PolicyKind::kConstant, p1, p2);
  p.constant_ = price;
  return p;
}

PricingPolicy PricingPolicy::linear(Vector w, double b, double p1, double p2) {
  PricingPolicy p(PolicyKind::kLinear, p1, p2);
  p.w_ = std::move(w);
  p.b_ = b;
  return p;
}

PricingPolicy PricingPolicy::tabulated(Matrix xs, Vector prices, double p1, double p2) {
  if (xs.rows() == 0 || xs.rows() != prices.size()) throw ConfigError("policy: table needs one price per row");
  PricingPolicy p(PolicyKind::kTabulated, p1, p2);
  p.table_x_ = std::move(xs);
  p.table_p_ = std::move(prices);
  return p;
}

double PricingPolicy::price_for(ConstVectorRef x) const {
  switch (kind_) {
    case PolicyKind::kQuadratic: {
      double b2 = beta2_.eval(x);
      if (!(b2 <= -floor_c_)) {
        b2 = -floor_c_;
        floored_->fetch_add(1, std::memory_order_relaxed);
      }
      return clip(-beta1_.eval(x) / (2.0 * b2), p1_, p2_);
    }
    case PolicyKind::kConstant: return clip(constant_, p1_, p2_);
    case PolicyKind::kLinear:
      if (x.size() != w_.size()) throw ConfigError("policy: covariate dimension mismatch");
      return clip(w_.dot(x) + b_, p1_, p2_);
    case PolicyKind::kTabulated: {
      if (x.size() != table_x_.cols()) throw ConfigError("policy: covariate dimension mismatch");
      Eigen::Index best = 0;
      (table_x_.rowwise() - x.transpose()).rowwise().squaredNorm().minCoeff(&best);
      return clip(table_p_(best), p1_, p2_);
    }
  }
  return p1_;
}

namespace {

nlohmann::json beta_json(const BetaFunction& b) {
  nlohmann::json j = {{"offset", b.offset}};
  if (b.map) {
    j["map"] = b.map->to_json();
    j["weights"] = jsonu::vec(b.weights);
  }
  return j;
}

BetaFunction beta_from(const nlohmann::json& j) {
  jsonu::check_keys(j, {"offset", "map", "weights"}, "policy beta");
  BetaFunction b;
  b.offset = j.value("offset", 0.0);
  if (j.contains("map")) {
    b.map = std::make_shared<FeatureMap>(FeatureMap::from_json(j.at("map")));
    b.weights = jsonu::to_vector(j.at("weights"), "weights", static_cast<Eigen::Index>(b.map->size()));
  }
  return b;
}

}  // namespace

nlohmann::json PricingPolicy::to_json() const {
  nlohmann::json j = {{"kind", std::string(policy_kind_name(kind_))}, {"p1", p1_}, {"p2", p2_}};
  switch (kind_) {
    case PolicyKind::kQuadratic:
      j["floor_c"] = floor_c_;
      j["beta1"] = beta_json(beta1_);
      j["beta2"] = beta_json(beta2_);
      break;
    case PolicyKind::kConstant: j["price"] = constant_; break;
    case PolicyKind::kLinear:
      j["w"] = jsonu::vec(w_);
      j["b"] = b_;
      break;
    case PolicyKind::kTabulated:
      j["x"] = jsonu::mat(table_x_);
      j["price"] = jsonu::vec(table_p_);
      break;
  }
  return j;
}

PricingPolicy PricingPolicy::from_json(const nlohmann::json& j) {
  jsonu::check_keys(j, {"kind", "p1", "p2", "floor_c", "beta1", "beta2", "price", "w", "b", "x"}, "policy");
  try {
    const auto kind = j.at("kind").get<std::string>();
    const double p1 = jsonu::number(j.at("p1"), "p1");
    const double p2 = jsonu::number(j.at("p2"), "p2");
    if (kind == "quadratic")
      return quadratic(beta_from(j.at("beta1")), beta_from(j.at("beta2")), p1, p2, j.value("floor_c", 1e-3));
    if (kind == "constant") return constant(jsonu::number(j.at("price"), "price"), p1, p2);
    if (kind == "linear") return linear(jsonu::to_vector(j.at("w"), "w"), jsonu::number(j.at("b"), "b"), p1, p2);
    if (kind == "tabulated") {
      const Vector prices = jsonu::to_vector(j.at("price"), "price");
      const auto& rows = j.at("x");
      if (!rows.is_array() || rows.empty()) throw ConfigError("policy: table rows missing");
      const auto d = static_cast<Eigen::Index>(rows[0].size());
      return tabulated(jsonu::to_matrix(rows, "x", prices.size(), d), prices, p1, p2);
    }
    throw ConfigError("policy: unknown kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
}

PricingPolicy extract_policy(const NuisanceAlpha& alpha_hat, double p1, double p2, double floor_c) {
  return PricingPolicy::quadratic({alpha_hat.x_map(), alpha_hat.block(kBeta1), 0.0},
                                  {alpha_hat.x_map(), alpha_hat.block(kBeta2), 0.0}, p1, p2, floor_c);
}

PricingPolicy load_policy(const std::string& path) {
  const nlohmann::json j = jsonu::read_file(path);
  // Fit outputs wrap the policy next to the fit details.
  return PricingPolicy::from_json(j.contains("policy") ? j.at("policy") : j);
}

void write_price_table(std::ostream& out, const PricingPolicy& policy, const Matrix& xs) {
  for (Eigen::Index k = 0; k < xs.cols(); ++k) out << 'x' << (k + 1) << ',';
  out << "price\n";
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    for (Eigen::Index k = 0; k < xs.cols(); ++k) out << format_double(xs(i, k)) << ',';
    out << format_double(policy.price_for(xs.row(i).transpose())) << '\n';
  }
}

}  // namespace ivpricing
