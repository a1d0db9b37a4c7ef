#include "ivpricing/minimax.hpp"
#include "ivpricing/json_util.hpp"
#include "ivpricing/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ivpricing {

void MinimaxConfig::validate() const {
  if (lambda && !(*lambda > 0.0)) throw ConfigError("minimax: lambda must be positive");
  if (mu && !(*mu >= 0.0)) throw ConfigError("minimax: mu must be nonnegative");
  if (K && *K < 0) throw ConfigError("minimax: K must be nonnegative");
  if (!(tol > 0.0)) throw ConfigError("minimax: tol must be positive");
  if (batch_size == 0) throw ConfigError("minimax: batch_size must be at least 1");
  if (!(step_alpha >= 0.0) || !(step_f >= 0.0)) throw ConfigError("minimax: step sizes must be nonnegative");
  if (D == 0) throw ConfigError("minimax: features.D must be at least 1");
  if (bandwidth && !(*bandwidth > 0.0)) throw ConfigError("minimax: bandwidth must be positive");
  if (!(init_ridge > 0.0)) throw ConfigError("minimax: init_ridge must be positive");
  if (inner_steps < 1) throw ConfigError("minimax: inner_steps must be at least 1");
}

double MinimaxConfig::lambda_for(std::size_t n) const {
  return lambda ? *lambda : 1.0 / std::sqrt(static_cast<double>(n));
}
double MinimaxConfig::mu_for(std::size_t n) const { return mu ? *mu : 1.0 / static_cast<double>(n); }
int MinimaxConfig::iterations() const { return K ? *K : (mode == FitMode::kAlternating ? 50 : 2000); }

void to_json(nlohmann::json& j, const MinimaxConfig& c) {
  j = nlohmann::json{{"tol", c.tol},
                     {"mode", c.mode == FitMode::kAlternating ? "alternating" : "stochastic"},
                     {"batch_size", c.batch_size},
                     {"step_alpha", c.step_alpha},
                     {"step_f", c.step_f},
                     {"seed", c.seed},
                     {"anchor", c.anchor == AnchorMode::kRefresh ? "refresh" : "fixed"},
                     {"standardize", c.standardize},
                     {"init_ridge", c.init_ridge},
                     {"inner_steps", c.inner_steps}};
  j["lambda"] = c.lambda ? nlohmann::json(*c.lambda) : nlohmann::json("auto");
  j["mu"] = c.mu ? nlohmann::json(*c.mu) : nlohmann::json("auto");
  j["K"] = c.K ? nlohmann::json(*c.K) : nlohmann::json("auto");
  j["features"] = {{"D", c.D}, {"bandwidth", c.bandwidth ? nlohmann::json(*c.bandwidth) : nlohmann::json("median")}};
}

namespace {

std::optional<double> auto_or_number(const nlohmann::json& j, const std::string& what, const std::string& word) {
  if (j.is_string()) {
    if (j.get<std::string>() != word) throw ConfigError(what + ": expected a number or \"" + word + "\"");
    return std::nullopt;
  }
  return jsonu::number(j, what);
}

}  // namespace

void from_json(const nlohmann::json& j, MinimaxConfig& c) {
  jsonu::check_keys(j,
                    {"lambda", "mu", "K", "tol", "mode", "batch_size", "step_alpha", "step_f", "seed", "anchor",
                     "features", "standardize", "init_ridge", "inner_steps"},
                    "fit config");
  try {
    if (j.contains("lambda")) c.lambda = auto_or_number(j["lambda"], "lambda", "auto");
    if (j.contains("mu")) c.mu = auto_or_number(j["mu"], "mu", "auto");
    if (j.contains("K")) {
      const auto k = auto_or_number(j["K"], "K", "auto");
      c.K = k ? std::optional<int>(static_cast<int>(*k)) : std::nullopt;
    }
    if (j.contains("tol")) c.tol = jsonu::number(j["tol"], "tol");
    if (j.contains("mode")) {
      const auto m = j["mode"].get<std::string>();
      if (m == "alternating") c.mode = FitMode::kAlternating;
      else if (m == "stochastic") c.mode = FitMode::kStochastic;
      else throw ConfigError("fit config: mode must be \"alternating\" or \"stochastic\"");
    }
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("step_alpha")) c.step_alpha = jsonu::number(j["step_alpha"], "step_alpha");
    if (j.contains("step_f")) c.step_f = jsonu::number(j["step_f"], "step_f");
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("anchor")) {
      const auto a = j["anchor"].get<std::string>();
      if (a == "refresh") c.anchor = AnchorMode::kRefresh;
      else if (a == "fixed") c.anchor = AnchorMode::kFixed;
      else throw ConfigError("fit config: anchor must be \"refresh\" or \"fixed\"");
    }
    if (j.contains("features")) {
      const auto& f = j["features"];
      jsonu::check_keys(f, {"D", "bandwidth"}, "fit config features");
      if (f.contains("D")) c.D = f["D"].get<std::size_t>();
      if (f.contains("bandwidth")) c.bandwidth = auto_or_number(f["bandwidth"], "bandwidth", "median");
    }
    if (j.contains("standardize")) c.standardize = j["standardize"].get<bool>();
    if (j.contains("init_ridge")) c.init_ridge = jsonu::number(j["init_ridge"], "init_ridge");
    if (j.contains("inner_steps")) c.inner_steps = j["inner_steps"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("fit config: ") + e.what());
  }
  c.validate();
}

nlohmann::json FitResult::to_json() const {
  return {{"alpha", alpha_hat.to_json()},
          {"adversary_x_map", adversary.x_map->to_json()},
          {"adversary_xg_map", adversary.xg_map->to_json()},
          {"objective_trace", objective_trace},
          {"inner_values", inner_values},
          {"converged", converged},
          {"iterations_used", iterations_used},
          {"scales", {{"y", y_scale}, {"p", p_scale}, {"g", g_scale}}}};
}

FitResult FitResult::from_json(const nlohmann::json& j) {
  jsonu::check_keys(j, {"alpha", "adversary_x_map", "adversary_xg_map", "objective_trace", "inner_values", "converged", "iterations_used", "scales"},
                    "fit result");
  FitResult r;
  r.alpha_hat = NuisanceAlpha::from_json(j.at("alpha"));
  r.adversary.x_map = std::make_shared<FeatureMap>(FeatureMap::from_json(j.at("adversary_x_map")));
  r.adversary.xg_map = std::make_shared<FeatureMap>(FeatureMap::from_json(j.at("adversary_xg_map")));
  r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
  r.inner_values = j.at("inner_values").get<std::vector<double>>();
  r.converged = j.at("converged").get<bool>();
  r.iterations_used = j.at("iterations_used").get<int>();
  const auto& s = j.at("scales");
  r.y_scale = s.at("y").get<double>();
  r.p_scale = s.at("p").get<double>();
  r.g_scale = s.at("g").get<double>();
  return r;
}

namespace {

kernels::FeatureBlocks adversary_blocks(const Matrix& phi_f, const Matrix& phi_fg) {
  auto b = kernels::same_features(phi_f);
  b[1] = &phi_fg;
  return b;
}

std::vector<ResidualJacobian> jacobians_at(const Dataset& data, const NuisanceAlpha& a, const DesignCache& design) {
  const Matrix v = alpha_values(a, design);
  std::vector<ResidualJacobian> jac(static_cast<std::size_t>(v.rows()));
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const Observation z{data.y()(i), data.g()(i), data.p()(i)};
    jac[static_cast<std::size_t>(i)] = eval_W_jacobian(z, v.row(i).transpose());
  }
  return jac;
}

// Per-dataset features shared by every iteration of a fit.
struct Workspace {
  const Dataset* data;
  DesignCache design;
  Matrix phi_f;   // adversary features of x
  Matrix phi_fg;  // adversary features of (x, g)

  Workspace(const Dataset& d, const NuisanceAlpha& alpha, const AdversaryMaps& adversary)
      : data(&d),
        design(d, alpha),
        phi_f(adversary.x_map->feature_matrix(d.x())),
        phi_fg(adversary.xg_map->feature_matrix(xg_inputs(d))) {}

  [[nodiscard]] kernels::FeatureBlocks blocks() const { return adversary_blocks(phi_f, phi_fg); }

  [[nodiscard]] Matrix residuals(const NuisanceAlpha& a) const { return residual_matrix(*data, a, design); }

  [[nodiscard]] std::vector<ResidualJacobian> jacobians(const NuisanceAlpha& a) const {
    return jacobians_at(*data, a, design);
  }

  [[nodiscard]] kernels::AlphaDesign alpha_design(const std::vector<ResidualJacobian>& jac) const {
    kernels::AlphaDesign d;
    for (int c = 0; c < kAlphaDim; ++c) d.psi[static_cast<std::size_t>(c)] = &design.for_component(c);
    d.jac = &jac;
    return d;
  }
};

Eigen::LLT<Matrix> anchor_factor(const kernels::FeatureBlocks& phi_f, const Matrix& W_anchor, double lambda) {
  Matrix A = kernels::second_moment(phi_f, W_anchor);
  A.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw NumericalFailure("inner_max: weighting matrix is not positive definite");
  return llt;
}

double sup_value(const Eigen::LLT<Matrix>& llt, const Vector& a) { return 0.25 * a.dot(llt.solve(a)); }

VectorAdversary adversary_from(const AdversaryMaps& maps, const Vector& theta) {
  const auto D = static_cast<Eigen::Index>(maps.x_map->size());
  return {maps.x_map, maps.xg_map, Eigen::Map<const Matrix>(theta.data(), D, kResidualDim)};
}

void check_adversary(const AdversaryMaps& m) {
  if (!m.x_map || !m.xg_map || m.x_map->size() != m.xg_map->size())
    throw ConfigError("adversary: x and (x, g) maps of equal size are required");
}

void check_nonempty(const Dataset& data) {
  if (data.size() == 0) throw DataError("empty dataset");
}

Matrix residuals_for(const Dataset& data, const NuisanceAlpha& alpha) {
  return residual_matrix(data, alpha, DesignCache(data, alpha));
}

Matrix adversary_values(const Dataset& data, const VectorAdversary& f) {
  const Matrix phi_x = f.map->feature_matrix(data.x());
  return f.eval_features(phi_x, f.xg_map ? f.xg_map->feature_matrix(xg_inputs(data)) : phi_x);
}

}  // namespace

double psi_n(const Dataset& data, const NuisanceAlpha& alpha, const VectorAdversary& f) {
  check_nonempty(data);
  const Matrix W = residuals_for(data, alpha);
  const Matrix F = adversary_values(data, f);
  return (W.array() * F.array()).sum() / static_cast<double>(data.size());
}

double weighted_norm_n(const Dataset& data, const VectorAdversary& f, const NuisanceAlpha& alpha_tilde) {
  check_nonempty(data);
  const Matrix W = residuals_for(data, alpha_tilde);
  const Matrix F = adversary_values(data, f);
  return (W.array() * F.array()).rowwise().sum().square().sum() / static_cast<double>(data.size());
}

InnerMax inner_max(const Dataset& data, const NuisanceAlpha& alpha, const NuisanceAlpha& alpha_tilde, double lambda,
                   const AdversaryMaps& adversary) {
  check_nonempty(data);
  check_adversary(adversary);
  if (!(lambda > 0.0)) throw ConfigError("inner_max: lambda must be positive");
  const Matrix phi = adversary.x_map->feature_matrix(data.x());
  const Matrix phi_g = adversary.xg_map->feature_matrix(xg_inputs(data));
  const auto blocks = adversary_blocks(phi, phi_g);
  const Vector a = kernels::moment_vector(blocks, residuals_for(data, alpha));
  const auto llt = anchor_factor(blocks, residuals_for(data, alpha_tilde), lambda);
  const Vector u = llt.solve(a);
  return {adversary_from(adversary, 0.5 * u), 0.25 * a.dot(u)};
}

double objective(const Dataset& data, const NuisanceAlpha& alpha, const NuisanceAlpha& alpha_tilde, double lambda,
                 double mu, const AdversaryMaps& adversary) {
  return inner_max(data, alpha, alpha_tilde, lambda, adversary).value + mu * alpha.norm2();
}

Vector grad_alpha(const Dataset& data, const NuisanceAlpha& alpha, const VectorAdversary& f, double mu) {
  check_nonempty(data);
  const DesignCache dc(data, alpha);
  const auto jac = jacobians_at(data, alpha, dc);
  kernels::AlphaDesign design;
  for (int c = 0; c < kAlphaDim; ++c) design.psi[static_cast<std::size_t>(c)] = &dc.for_component(c);
  design.jac = &jac;
  return kernels::pairing_gradient(adversary_values(data, f), design) + 2.0 * mu * alpha.flat();
}

namespace {

Vector ridge_solve(const Matrix& X, const Vector& y, double ridge) {
  const double n = static_cast<double>(X.rows());
  Matrix A = X.transpose() * X / n;
  A.diagonal().array() += ridge;
  return A.ldlt().solve(X.transpose() * y / n);
}

}  // namespace

NuisanceAlpha init_two_stage(const Dataset& data, const FeatureMapPtr& x_map, const FeatureMapPtr& xg_map,
                             double ridge) {
  check_nonempty(data);
  if (!(ridge > 0.0)) throw ConfigError("init_two_stage: ridge must be positive");
  NuisanceAlpha alpha(x_map, xg_map);
  const DesignCache dc(data, alpha);
  const Matrix& X = dc.phi_x;
  const Vector& G = data.g();
  const Vector& P = data.p();
  const Vector& Y = data.y();

  alpha.set_block(kH1, ridge_solve(X, G, ridge));
  alpha.set_block(kH3, ridge_solve(X, G.array().square().matrix(), ridge));
  alpha.set_block(kH2, ridge_solve(dc.phi_xg, P, ridge));
  const Vector h1 = X * alpha.block(kH1);
  const Vector e1 = G - h1;
  const Vector e2 = P - dc.phi_xg * alpha.block(kH2);

  const std::array<Vector, 3> R = {Y, P, P.array().square().matrix()};
  std::array<Vector, 3> omega, upsilon;
  const Vector v = X * alpha.block(kH3) - h1.array().square().matrix();  // E[G (G - h1) | x]
  for (int k = 0; k < 3; ++k) {
    const Vector e2r = e2.array() * R[static_cast<std::size_t>(k)].array();
    alpha.set_block(kH4 + k, ridge_solve(X, e2r, ridge));
    const Vector q = X * alpha.block(kH4 + k);
    omega[static_cast<std::size_t>(k)] = X * ridge_solve(X, (e1.array() * e2r.array()).matrix(), ridge);
    upsilon[static_cast<std::size_t>(k)] =
        X * ridge_solve(X, (G.array() * e1.array() * e2r.array()).matrix(), ridge) - (v.array() * q.array()).matrix();
  }

  // Omega_1 = Omega_2 b1 + Omega_3 b2 and the Upsilon analogue, stacked over samples, each system
  // normalized by its RMS coefficient size.
  const auto n = X.rows();
  const auto Pc = X.cols();
  auto rms = [](const std::array<Vector, 3>& s) {
    const double m = (s[0].squaredNorm() + s[1].squaredNorm() + s[2].squaredNorm()) / (3.0 * static_cast<double>(s[0].size()));
    return m > 0.0 ? std::sqrt(m) : 1.0;
  };
  const double so = rms(omega), su = rms(upsilon);
  Matrix Z(2 * n, 2 * Pc);
  Vector t(2 * n);
  Z.topLeftCorner(n, Pc) = X.array().colwise() * (omega[1] / so).array();
  Z.topRightCorner(n, Pc) = X.array().colwise() * (omega[2] / so).array();
  Z.bottomLeftCorner(n, Pc) = X.array().colwise() * (upsilon[1] / su).array();
  Z.bottomRightCorner(n, Pc) = X.array().colwise() * (upsilon[2] / su).array();
  t << omega[0] / so, upsilon[0] / su;
  const Vector w = ridge_solve(Z, t, ridge);
  alpha.set_block(kBeta1, w.head(Pc));
  alpha.set_block(kBeta2, w.tail(Pc));
  return alpha;
}

FitResult fit_alternating(const Dataset& data, const MinimaxConfig& config, const NuisanceAlpha& alpha_init,
                          const AdversaryMaps& adversary) {
  config.validate();
  check_nonempty(data);
  check_adversary(adversary);
  const std::size_t n = data.size();
  const double lambda = config.lambda_for(n);
  const double mu = config.mu_for(n);
  const int K = config.iterations();

  const Workspace ws(data, alpha_init, adversary);
  const auto blocks = ws.blocks();
  NuisanceAlpha alpha = alpha_init;
  auto llt = anchor_factor(blocks, ws.residuals(alpha_init), lambda);

  auto value_at = [&](const NuisanceAlpha& a, double* inner) {
    const double v = sup_value(llt, kernels::moment_vector(blocks, ws.residuals(a)));
    if (inner) *inner = v;
    return v + mu * a.norm2();
  };

  FitResult r;
  r.adversary = adversary;
  double inner = 0.0;
  double prev = value_at(alpha, &inner);
  if (!std::isfinite(prev)) throw NumericalFailure("fit_alternating: initial objective is not finite");
  r.objective_trace.push_back(prev);
  r.inner_values.push_back(inner);

  for (int k = 1; k <= K; ++k) {
    // alpha step: Gauss-Newton on the sup objective with the weighting matrix held fixed.
    for (int t = 0; t < config.inner_steps; ++t) {
      const Vector theta = alpha.flat();
      const Vector a = kernels::moment_vector(blocks, ws.residuals(alpha));
      const Vector u = llt.solve(a);
      const double val = 0.25 * a.dot(u) + mu * theta.squaredNorm();
      const auto jac = ws.jacobians(alpha);
      const Matrix J = kernels::moment_jacobian(blocks, ws.alpha_design(jac));
      const Vector grad = 0.5 * J.transpose() * u + 2.0 * mu * theta;
      if (grad.norm() < config.tol * std::max(val, 1e-300)) break;
      Matrix H = 0.5 * J.transpose() * llt.solve(J);
      H.diagonal().array() += 2.0 * mu + 1e-12;
      const Vector step = -H.ldlt().solve(grad);
      const double slope = grad.dot(step);
      if (!(slope < 0.0)) break;

      NuisanceAlpha trial = alpha;
      double s = 1.0, val_new = val;
      bool accepted = false;
      for (int tries = 0; tries < 40; ++tries, s *= 0.5) {
        trial.set_flat(theta + s * step);
        val_new = value_at(trial, nullptr);
        if (std::isfinite(val_new) && val_new <= val + 1e-4 * s * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      alpha = trial;
      if (val - val_new < config.tol * val) break;
    }

    if (config.anchor == AnchorMode::kRefresh) llt = anchor_factor(blocks, ws.residuals(alpha), lambda);
    const double cur = value_at(alpha, &inner);
    if (!std::isfinite(cur)) throw NumericalFailure("fit_alternating: objective became non-finite");
    r.objective_trace.push_back(cur);
    r.inner_values.push_back(inner);
    r.iterations_used = k;
    if (std::abs(cur - prev) <= config.tol * std::abs(prev)) {
      r.converged = true;
      break;
    }
    prev = cur;
  }
  r.alpha_hat = alpha;
  return r;
}

namespace {

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

}  // namespace

FitResult fit_sgd(const Dataset& data, const MinimaxConfig& config, const NuisanceAlpha& alpha_init,
                  const AdversaryMaps& adversary) {
  config.validate();
  check_nonempty(data);
  check_adversary(adversary);
  const std::size_t n = data.size();
  if (config.batch_size > n) throw ConfigError("fit_sgd: batch_size exceeds the sample count");
  const double lambda = config.lambda_for(n);
  const double mu = config.mu_for(n);
  const int K = config.iterations();
  const auto B = static_cast<Eigen::Index>(config.batch_size);
  const int trace_every = std::max(1, K / 50);

  const Workspace ws(data, alpha_init, adversary);
  const auto blocks = ws.blocks();
  const Eigen::Index Df = ws.phi_f.cols();
  const Matrix W_fixed = ws.residuals(alpha_init);

  NuisanceAlpha alpha = alpha_init;
  Matrix theta_f = Matrix::Zero(Df, kResidualDim);
  std::mt19937_64 rng(config.seed);
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});

  FitResult r;
  r.adversary = adversary;
  auto record = [&]() {
    const Matrix anchor_w = config.anchor == AnchorMode::kRefresh ? ws.residuals(alpha) : W_fixed;
    const auto llt = anchor_factor(blocks, anchor_w, lambda);
    const double v = sup_value(llt, kernels::moment_vector(blocks, ws.residuals(alpha)));
    const double cur = v + mu * alpha.norm2();
    if (!std::isfinite(cur)) throw NumericalFailure("fit_sgd: objective became non-finite");
    r.objective_trace.push_back(cur);
    r.inner_values.push_back(v);
  };
  record();

  for (int t = 1; t <= K; ++t) {
    for (Eigen::Index i = 0; i < B; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), n - 1);
      std::swap(perm[static_cast<std::size_t>(i)], perm[pick(rng)]);
    }
    const std::vector<Eigen::Index> idx(perm.begin(), perm.begin() + B);
    const Matrix phi_f = take_rows(ws.phi_f, idx);
    const Matrix phi_fg = take_rows(ws.phi_fg, idx);
    const Matrix phi_x = take_rows(ws.design.phi_x, idx);
    const Matrix phi_xg = take_rows(ws.design.phi_xg, idx);

    Matrix V(B, kAlphaDim);
    for (int c = 0; c < kAlphaDim; ++c) V.col(c) = (c == kH2 ? phi_xg : phi_x) * alpha.block(c);
    Matrix W(B, kResidualDim);
    std::vector<ResidualJacobian> jac(static_cast<std::size_t>(B));
    for (Eigen::Index i = 0; i < B; ++i) {
      const auto row = idx[static_cast<std::size_t>(i)];
      const Observation z{data.y()(row), data.g()(row), data.p()(row)};
      W.row(i) = eval_W(z, V.row(i).transpose()).transpose();
      jac[static_cast<std::size_t>(i)] = eval_W_jacobian(z, V.row(i).transpose());
    }
    const Matrix Wt = config.anchor == AnchorMode::kRefresh ? W : take_rows(W_fixed, idx);

    // Ascent on a'theta - theta'(M + lambda I) theta over the batch.
    auto values = [&](const Matrix& th) {
      Matrix F = phi_f * th;
      F.col(1) = phi_fg * th.col(1);
      return F;
    };
    const Vector s = values(theta_f).cwiseProduct(Wt).rowwise().sum();
    const Matrix U = W - 2.0 * (Wt.array().colwise() * s.array()).matrix();
    Matrix grad_f = phi_f.transpose() * U;
    grad_f.col(1) = phi_fg.transpose() * U.col(1);
    grad_f = grad_f / static_cast<double>(B) - 2.0 * lambda * theta_f;
    // Preconditioned by the batch curvature 2 (M_B + lambda I): step_f = 1 lands on the batch maximizer.
    const auto batch_blocks = adversary_blocks(phi_f, phi_fg);
    Matrix Mb = kernels::second_moment(batch_blocks, Wt);
    Mb.diagonal().array() += lambda;
    const Eigen::LLT<Matrix> llt_b(Mb);
    if (llt_b.info() != Eigen::Success) throw NumericalFailure("fit_sgd: batch weighting matrix is not positive definite");
    const Vector step = llt_b.solve(Eigen::Map<const Vector>(grad_f.data(), grad_f.size())) / 2.0;
    theta_f += config.step_f * Eigen::Map<const Matrix>(step.data(), Df, kResidualDim);

    kernels::AlphaDesign design;
    for (int c = 0; c < kAlphaDim; ++c) design.psi[static_cast<std::size_t>(c)] = c == kH2 ? &phi_xg : &phi_x;
    design.jac = &jac;
    const Vector grad_a = kernels::pairing_gradient(values(theta_f), design) + 2.0 * mu * alpha.flat();
    // Norm-clipped at 1, so no step moves alpha by more than step_alpha.
    alpha.set_flat(alpha.flat() - config.step_alpha / std::max(1.0, grad_a.norm()) * grad_a);

    if (t % trace_every == 0 || t == K) record();
    r.iterations_used = t;
  }
  const auto m = r.objective_trace.size();
  r.converged = m >= 2 && std::abs(r.objective_trace[m - 1] - r.objective_trace[m - 2]) <
                              config.tol * std::abs(r.objective_trace[m - 2]);
  r.alpha_hat = alpha;
  return r;
}

FeatureMaps make_feature_maps(const Dataset& data, const MinimaxConfig& config) {
  check_nonempty(data);
  const Vector sx = column_scales(data.x());
  const Matrix xg = xg_inputs(data);
  const Vector sxg = column_scales(xg);
  const double bx = config.bandwidth ? *config.bandwidth
                                     : median_heuristic_bandwidth(data.x(), sx, 500, derive_seed(config.seed, 11));
  const double bxg = config.bandwidth ? *config.bandwidth
                                      : median_heuristic_bandwidth(xg, sxg, 500, derive_seed(config.seed, 12));
  const auto d = data.covariate_dim();
  FeatureMaps m;
  m.x_map = std::make_shared<FeatureMap>(d, config.D, bx, derive_seed(config.seed, 1), sx, true);
  m.xg_map = std::make_shared<FeatureMap>(d + 1, config.D, bxg, derive_seed(config.seed, 2), sxg, true);
  m.adversary.x_map = std::make_shared<FeatureMap>(d, config.D, bx, derive_seed(config.seed, 3), sx, true);
  m.adversary.xg_map = std::make_shared<FeatureMap>(d + 1, config.D, bxg, derive_seed(config.seed, 4), sxg, true);
  return m;
}

namespace {

double robust_scale(const Vector& v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  auto median = [](std::vector<double>& a) {
    auto mid = a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2);
    std::nth_element(a.begin(), mid, a.end());
    return *mid;
  };
  const double med = median(s);
  for (auto& e : s) e = std::abs(e - med);
  double mad = 1.4826 * median(s);
  if (mad > 0.0) return mad;
  const double sd = std::sqrt((v.array() - v.mean()).square().mean());
  return sd > 0.0 ? sd : 1.0;
}

}  // namespace

DataScales robust_scales(const Dataset& data) {
  check_nonempty(data);
  return {robust_scale(data.y()), robust_scale(data.p()), robust_scale(data.g())};
}

FitResult fit_minimax(const Dataset& data, const MinimaxConfig& config) {
  config.validate();
  check_nonempty(data);
  const DataScales s = config.standardize ? robust_scales(data) : DataScales{};
  const Dataset sd = config.standardize ? data.rescaled(1.0 / s.y, 1.0 / s.p, 1.0 / s.g) : data;
  const FeatureMaps maps = make_feature_maps(sd, config);
  const NuisanceAlpha init = init_two_stage(sd, maps.x_map, maps.xg_map, config.init_ridge);
  FitResult r = config.mode == FitMode::kAlternating ? fit_alternating(sd, config, init, maps.adversary)
                                                     : fit_sgd(sd, config, init, maps.adversary);
  AlphaValues factors;
  factors << s.y / s.p, s.y / (s.p * s.p), s.g, s.p, s.g * s.g, s.p * s.y, s.p * s.p, s.p * s.p * s.p;
  r.alpha_hat = r.alpha_hat.rescaled(factors, s.g);
  r.adversary.xg_map = std::make_shared<FeatureMap>(r.adversary.xg_map->with_rescaled_input(data.covariate_dim(), s.g));
  r.y_scale = s.y;
  r.p_scale = s.p;
  r.g_scale = s.g;
  return r;
}

}  // namespace ivpricing
