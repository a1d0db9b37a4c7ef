#include "ivpricing/scm.hpp"
#include "ivpricing/json_util.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace ivpricing {

namespace jsonu {

json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

void write_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace jsonu

void SimParams::validate() const {
  if (!(sigma2_g > 0.0) || !(sigma2_u1 > 0.0) || !(sigma2_u2 > 0.0))
    throw ConfigError("SimParams: variances must be positive");
  Eigen::LLT<Eigen::Matrix2d> llt(sigma_x);
  if (llt.info() != Eigen::Success || !sigma_x.isApprox(sigma_x.transpose()))
    throw ConfigError("SimParams: sigma_x must be symmetric positive definite");
  if (!(p1 >= 0.0) || !(p1 < p2)) throw ConfigError("SimParams: need 0 <= p1 < p2");
  if (!(noise_half_width > 0.0)) throw ConfigError("SimParams: noise_half_width must be positive");
}

void to_json(nlohmann::json& j, const SimParams& p) {
  using jsonu::vec;
  j = nlohmann::json{{"mu_x", vec(p.mu_x)},
                     {"sigma_x", jsonu::mat(p.sigma_x)},
                     {"mu_g", p.mu_g},
                     {"mu_u1", p.mu_u1},
                     {"mu_u2", p.mu_u2},
                     {"c_g", vec(p.c_g)},
                     {"c_u1", vec(p.c_u1)},
                     {"c_u2", vec(p.c_u2)},
                     {"sigma2_g", p.sigma2_g},
                     {"sigma2_u1", p.sigma2_u1},
                     {"sigma2_u2", p.sigma2_u2},
                     {"c1", vec(p.c1)},
                     {"c2", vec(p.c2)},
                     {"c3", vec(p.c3)},
                     {"c4", p.c4},
                     {"c5", vec(p.c5)},
                     {"c6", vec(p.c6)},
                     {"c7", p.c7},
                     {"price_range", {p.p1, p.p2}},
                     {"noise_half_width", p.noise_half_width}};
}

void from_json(const nlohmann::json& j, SimParams& p) {
  jsonu::check_keys(j,
                    {"mu_x", "sigma_x", "mu_g", "mu_u1", "mu_u2", "c_g", "c_u1", "c_u2", "sigma2_g",
                     "sigma2_u1", "sigma2_u2", "c1", "c2", "c3", "c4", "c5", "c6", "c7", "price_range",
                     "noise_half_width"},
                    "sim params");
  auto v2 = [&](const char* key, Vector2& out) {
    if (j.contains(key)) out = jsonu::to_vector(j.at(key), key, 2);
  };
  auto num = [&](const char* key, double& out) {
    if (j.contains(key)) out = jsonu::number(j.at(key), key);
  };
  v2("mu_x", p.mu_x);
  if (j.contains("sigma_x")) p.sigma_x = jsonu::to_matrix(j.at("sigma_x"), "sigma_x", 2, 2);
  num("mu_g", p.mu_g);
  num("mu_u1", p.mu_u1);
  num("mu_u2", p.mu_u2);
  v2("c_g", p.c_g);
  v2("c_u1", p.c_u1);
  v2("c_u2", p.c_u2);
  num("sigma2_g", p.sigma2_g);
  num("sigma2_u1", p.sigma2_u1);
  num("sigma2_u2", p.sigma2_u2);
  v2("c1", p.c1);
  v2("c2", p.c2);
  v2("c3", p.c3);
  num("c4", p.c4);
  v2("c5", p.c5);
  v2("c6", p.c6);
  num("c7", p.c7);
  if (j.contains("price_range")) {
    const auto r = jsonu::to_vector(j.at("price_range"), "price_range", 2);
    p.p1 = r(0);
    p.p2 = r(1);
  }
  num("noise_half_width", p.noise_half_width);
}

SimParams load_sim_params(const std::string& path) {
  SimParams p;
  try {
    p = jsonu::read_file(path).get<SimParams>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sim params: ") + e.what());
  }
  p.validate();
  return p;
}

std::string params_fingerprint(const SimParams& params) {
  const std::string text = nlohmann::json(params).dump();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

Dataset generate_dataset(const SimParams& params, std::size_t n, std::uint64_t seed, bool keep_hidden) {
  if (n == 0) throw ConfigError("generate_dataset: n must be at least 1");
  params.validate();
  const Eigen::Matrix2d chol = params.sigma_x.llt().matrixL();
  const double sd_g = std::sqrt(params.sigma2_g);
  const double sd_u1 = std::sqrt(params.sigma2_u1);
  const double sd_u2 = std::sqrt(params.sigma2_u2);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> noise(-params.noise_half_width, params.noise_half_width);

  const auto m = static_cast<Eigen::Index>(n);
  Vector y(m), g(m), p(m);
  Matrix x(m, 2);
  HiddenColumns hidden{Vector(m), Vector(m), Vector(m), Vector(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const Vector2 xi = params.mu_x + chol * Vector2(z1, z2);
    const double gi = params.mu_g + params.c_g.dot(xi) + sd_g * normal(rng);
    const double u1 = params.mu_u1 + params.c_u1.dot(xi) + sd_u1 * normal(rng);
    const double u2 = params.mu_u2 + params.c_u2.dot(xi) + sd_u2 * normal(rng);
    const double eps_p = noise(rng);
    const double eps_y = noise(rng);

    const double alpha_g = (u2 * u2 + params.c6.dot(xi)) * gi + params.c7 * gi;
    const double alpha_ux = std::cos(u2);
    const double pi = alpha_g + alpha_ux + eps_p;

    const double beta_p1 = u1 * u1 - params.c1.dot(xi);
    const double beta_p2 = -std::exp(u1 + params.c2.dot(xi));
    const double beta_g = (u1 * u1 + params.c3.dot(xi)) * gi + params.c4 * gi;
    const double beta_ux = std::cos(u1 * u2 + params.c5.dot(xi));
    y(i) = beta_p1 * pi + beta_p2 * pi * pi + beta_g + beta_ux + eps_y;

    x.row(i) = xi.transpose();
    g(i) = gi;
    p(i) = pi;
    hidden.u1(i) = u1;
    hidden.u2(i) = u2;
    hidden.eps_y(i) = eps_y;
    hidden.eps_p(i) = eps_p;
  }
  std::optional<HiddenColumns> kept;
  if (keep_hidden) kept = std::move(hidden);
  return {std::move(y), std::move(x), std::move(g), std::move(p), seed, params_fingerprint(params),
          std::move(kept)};
}

BetaPair oracle_beta(const SimParams& params, const Vector2& x) {
  const double mean_u1 = params.mu_u1 + params.c_u1.dot(x);
  return {-params.c1.dot(x) + mean_u1 * mean_u1 + params.sigma2_u1,
          -std::exp(params.mu_u1 + 0.5 * params.sigma2_u1 + (params.c2 + params.c_u1).dot(x))};
}

double oracle_policy(const SimParams& params, const Vector2& x) {
  const auto [b1, b2] = oracle_beta(params, x);
  return clip(-b1 / (2.0 * b2), params.p1, params.p2);
}

Matrix draw_covariates(const SimParams& params, std::size_t n, std::uint64_t seed) {
  params.validate();
  const Eigen::Matrix2d chol = params.sigma_x.llt().matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    x.row(i) = (params.mu_x + chol * Vector2(z1, z2)).transpose();
  }
  return x;
}

namespace {

ValueEstimate mean_and_se(const Vector& v) {
  const double n = static_cast<double>(v.size());
  const double mean = v.mean();
  const double var = v.size() > 1 ? (v.array() - mean).square().sum() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

Vector pointwise_revenue(const SimParams& params, const Matrix& x, const PriceFn& policy) {
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector2 xi = x.row(i).transpose();
    const auto [b1, b2] = oracle_beta(params, xi);
    const double price = policy(Vector(xi));
    out(i) = b1 * price + b2 * price * price;
  }
  return out;
}

}  // namespace

ValueEstimate policy_value_estimate(const SimParams& params, const PriceFn& policy, std::size_t n_mc,
                                    std::uint64_t seed) {
  if (n_mc == 0) throw ConfigError("policy_value: n_mc must be at least 1");
  return mean_and_se(pointwise_revenue(params, draw_covariates(params, n_mc, seed), policy));
}

double policy_value(const SimParams& params, const PriceFn& policy, std::size_t n_mc, std::uint64_t seed) {
  return policy_value_estimate(params, policy, n_mc, seed).value;
}

ValueEstimate regret_estimate(const SimParams& params, const PriceFn& policy, std::size_t n_mc,
                              std::uint64_t seed) {
  if (n_mc == 0) throw ConfigError("regret: n_mc must be at least 1");
  const Matrix x = draw_covariates(params, n_mc, seed);
  const PriceFn oracle = [&](ConstVectorRef xi) { return oracle_policy(params, Vector2(xi(0), xi(1))); };
  return mean_and_se(pointwise_revenue(params, x, oracle) - pointwise_revenue(params, x, policy));
}

double regret(const SimParams& params, const PriceFn& policy, std::size_t n_mc, std::uint64_t seed) {
  return regret_estimate(params, policy, n_mc, seed).value;
}

}  // namespace ivpricing
