#include "fixtures.hpp"
#include "ivpricing/identification.hpp"
#include "ivpricing/minimax.hpp"
#include "ivpricing/scm.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace ivpricing;

namespace {

struct Setup {
  FeatureMapPtr x_map, xg_map;
  AdversaryMaps adv;
};

Setup maps(std::size_t d, std::size_t D, std::uint64_t seed = 1) {
  Setup s;
  s.x_map = std::make_shared<FeatureMap>(d, D, 1.0, seed, Vector{}, true);
  s.xg_map = std::make_shared<FeatureMap>(d + 1, D, 1.0, seed + 1, Vector{}, true);
  s.adv = {s.x_map, s.xg_map};
  return s;
}

// Standardized as fit_minimax prepares it; the solver entry points expect this scale.
Dataset small_data(std::size_t n, std::uint64_t seed) {
  const Dataset raw = generate_dataset(SimParams{}, n, seed);
  const DataScales sc = robust_scales(raw);
  return raw.rescaled(1.0 / sc.y, 1.0 / sc.p, 1.0 / sc.g);
}

Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> N(0, sd);
  Vector v(n);
  for (auto& e : v) e = N(rng);
  return v;
}

NuisanceAlpha random_alpha(const Setup& s, std::mt19937_64& rng, double sd) {
  NuisanceAlpha a(s.x_map, s.xg_map);
  a.set_flat(random_vector(a.num_params(), rng, sd));
  return a;
}

VectorAdversary random_adversary(const Setup& s, std::mt19937_64& rng, double sd) {
  const auto D = static_cast<Eigen::Index>(s.x_map->size());
  Matrix w(D, kResidualDim);
  for (int k = 0; k < kResidualDim; ++k) w.col(k) = random_vector(D, rng, sd);
  return {s.x_map, s.xg_map, w};
}

double inner_objective(const Dataset& d, const NuisanceAlpha& a, const NuisanceAlpha& at, double lambda,
                       const VectorAdversary& f) {
  return psi_n(d, a, f) - weighted_norm_n(d, f, at) - lambda * f.norm2();
}

}  // namespace

TEST_CASE("psi_n and weighted_norm_n: single-sample examples") {
  // y = 0, p = 0, g = 1 and alpha = 0 give W = (1, 0, 1, 0, 0, 0, 0, 0).
  const Dataset d(Vector::Zero(1), Matrix::Zero(1, 2), Vector::Ones(1), Vector::Zero(1));
  const Setup s = maps(2, 4);
  const NuisanceAlpha zero(s.x_map, s.xg_map);
  CHECK(psi_n(d, zero, s.adv.zero()) == 0.0);
  CHECK(weighted_norm_n(d, s.adv.zero(), zero) == 0.0);
  Matrix w = Matrix::Zero(5, 8);
  w(0, 0) = 0.5;  // intercept weight: f_1 = 0.5
  CHECK(psi_n(d, zero, VectorAdversary(s.x_map, s.xg_map, w)) == doctest::Approx(0.5));
  w(0, 0) = 2.0;
  CHECK(weighted_norm_n(d, VectorAdversary(s.x_map, s.xg_map, w), zero) == doctest::Approx(4.0));
  CHECK(weighted_norm_n(d, VectorAdversary(s.x_map, s.xg_map, 3.0 * w), zero) == doctest::Approx(36.0));
}

TEST_CASE("psi_n is bilinear in f; weighted_norm_n matches an independent recomputation") {
  const Dataset d = small_data(300, 4);
  const Setup s = maps(2, 6);
  std::mt19937_64 rng(5);
  const NuisanceAlpha a = random_alpha(s, rng, 0.3), at = random_alpha(s, rng, 0.3);
  const VectorAdversary f = random_adversary(s, rng, 1.0), g = random_adversary(s, rng, 1.0);
  const VectorAdversary fg(s.x_map, s.xg_map, f.weights + g.weights);
  CHECK(psi_n(d, a, fg) == doctest::Approx(psi_n(d, a, f) + psi_n(d, a, g)).epsilon(1e-10));

  double direct = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Sample z = d.sample(i);
    const ResidualVector W = eval_W({z.y, z.g, z.p}, at.values(z.x, z.g));
    const double pair = f.eval(z.x, z.g).dot(W);
    direct += pair * pair;
  }
  direct /= static_cast<double>(d.size());
  CHECK(std::abs(weighted_norm_n(d, f, at) - direct) <= 1e-12 * std::max(1.0, direct));
}

TEST_CASE("inner_max: closed form is the supremum") {
  const Dataset d = small_data(200, 6);
  const Setup s = maps(2, 4);
  std::mt19937_64 rng(8);
  const NuisanceAlpha a = random_alpha(s, rng, 0.2), at = random_alpha(s, rng, 0.2);
  const double lambda = 0.05;
  const InnerMax im = inner_max(d, a, at, lambda, s.adv);
  const double at_star = inner_objective(d, a, at, lambda, im.f_star);
  CHECK(im.value == doctest::Approx(at_star).epsilon(1e-9));
  for (int r = 0; r < 100; ++r) {
    const VectorAdversary f = random_adversary(s, rng, 0.05 * (1 + r % 5));
    CHECK(im.value >= inner_objective(d, a, at, lambda, f) - 1e-12);
  }
  // Perturbations around f* never improve the quadratic.
  for (int r = 0; r < 20; ++r) {
    const VectorAdversary dv = random_adversary(s, rng, 1e-3);
    CHECK(inner_objective(d, a, at, lambda, VectorAdversary(s.x_map, s.xg_map, im.f_star.weights + dv.weights)) <=
          im.value + 1e-12);
  }
  // At the optimum J(theta*) = a . theta* / 2, with a read off psi_n on unit adversaries.
  double a_dot = 0.0;
  for (Eigen::Index r = 0; r < im.f_star.weights.rows(); ++r)
    for (Eigen::Index k = 0; k < kResidualDim; ++k) {
      Matrix e = Matrix::Zero(im.f_star.weights.rows(), kResidualDim);
      e(r, k) = 1.0;
      a_dot += psi_n(d, a, VectorAdversary(s.x_map, s.xg_map, e)) * im.f_star.weights(r, k);
    }
  CHECK(im.value == doctest::Approx(0.5 * a_dot).epsilon(1e-8));
}

TEST_CASE("inner_max: zero linear term and the objective floor") {
  // W = 0 at every sample: g = h1, p = h2 with every other target zero.
  Matrix x(3, 1);
  x << -1, 0, 1;
  const Dataset d(Vector::Zero(3), x, Vector::Zero(3), Vector::Zero(3));
  const Setup s = maps(1, 3);
  NuisanceAlpha a(s.x_map, s.xg_map);
  Vector b = Vector::Zero(4);
  b(0) = 0.7;  // beta1 = 0.7 is invisible when P = 0
  a.set_block(kBeta1, b);
  const InnerMax im = inner_max(d, a, a, 0.1, s.adv);
  CHECK(im.value == 0.0);
  CHECK(im.f_star.norm2() == 0.0);
  CHECK(objective(d, a, a, 0.1, 0.3, s.adv) == doctest::Approx(0.3 * a.norm2()));

  const Dataset sim = small_data(150, 2);
  const Setup s2 = maps(2, 4);
  std::mt19937_64 rng(1);
  for (int r = 0; r < 5; ++r) {
    const NuisanceAlpha al = random_alpha(s2, rng, 0.5);
    CHECK(objective(sim, al, al, 0.1, 0.2, s2.adv) >= 0.2 * al.norm2());
  }
}

TEST_CASE("grad_alpha: finite differences, zero adversary and beta1 sparsity") {
  const Dataset d = small_data(100, 11);
  const Setup s = maps(2, 4);
  std::mt19937_64 rng(12);
  const double mu = 0.01;
  for (int probe = 0; probe < 10; ++probe) {
    NuisanceAlpha a = random_alpha(s, rng, 0.3);
    const VectorAdversary f = random_adversary(s, rng, 0.5);
    const Vector v = random_vector(a.num_params(), rng);
    const Vector theta = a.flat();
    auto value = [&](const Vector& t) {
      NuisanceAlpha b = a;
      b.set_flat(t);
      return psi_n(d, b, f) + mu * b.norm2();
    };
    const double fd = (value(theta + 1e-5 * v) - value(theta - 1e-5 * v)) / 2e-5;
    const double an = grad_alpha(d, a, f, mu).dot(v);
    CHECK(std::abs(fd - an) <= 1e-4 * std::max(1.0, std::abs(an)));
  }
  const NuisanceAlpha a = random_alpha(s, rng, 0.3);
  CHECK(grad_alpha(d, a, s.adv.zero(), 0.0).isZero());
  VectorAdversary f = random_adversary(s, rng, 1.0);
  f.weights.col(6).setZero();
  f.weights.col(7).setZero();
  const Vector g = grad_alpha(d, a, f, 0.0);
  CHECK(g.segment(a.offset(kBeta1), a.offset(kBeta2) - a.offset(kBeta1)).isZero());
  CHECK(g.segment(a.offset(kBeta2), a.offset(kH1) - a.offset(kBeta2)).isZero());
}

TEST_CASE("init_two_stage: instrument mean, ridge limit, beta2 against the zero function") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> N(0, 1);
  const std::size_t n = 2000;
  Vector y(n), g(n), p(n);
  Matrix x(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = N(rng);
    x(i, 1) = N(rng);
    g(i) = 2 + N(rng);
    p(i) = 5 + g(i) + N(rng);
    y(i) = p(i) * (1 - 0.1 * p(i)) + N(rng);
  }
  const Dataset d(y, x, g, p);
  MinimaxConfig cfg;
  const FeatureMaps fm = make_feature_maps(d, cfg);
  const NuisanceAlpha init = init_two_stage(d, fm.x_map, fm.xg_map, 1e-3);
  const Vector x0 = Vector::Zero(2);
  CHECK(std::abs(init.component(kH1, x0, 0.0) - 2.0) <= 3.0 * 3.0 / std::sqrt(double(n)));

  const NuisanceAlpha big = init_two_stage(d, fm.x_map, fm.xg_map, 1e12);
  CHECK(big.flat().norm() < 1e-6);

  const SimParams params;
  const Dataset sim = generate_dataset(params, 4000, 31);
  const FeatureMaps sm = make_feature_maps(sim, cfg);
  const NuisanceAlpha s_init = init_two_stage(sim, sm.x_map, sm.xg_map, 1e-3);
  const Matrix grid = draw_covariates(params, 500, 999);
  double err = 0.0, zero = 0.0;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    const Vector2 xi = grid.row(i).transpose();
    const double b2 = oracle_beta(params, xi).beta2;
    err += std::pow(s_init.component(kBeta2, xi, 0.0) - b2, 2);
    zero += b2 * b2;
  }
  CHECK(err < zero);
}

TEST_CASE("fit_alternating: K = 0 and trace bookkeeping") {
  const Dataset d = small_data(500, 41);
  MinimaxConfig cfg;
  const FeatureMaps fm = make_feature_maps(d, cfg);
  const NuisanceAlpha init = init_two_stage(d, fm.x_map, fm.xg_map, cfg.init_ridge);
  cfg.K = 0;
  const FitResult r0 = fit_alternating(d, cfg, init, fm.adversary);
  CHECK(r0.alpha_hat.flat() == init.flat());
  cfg.K = 10;
  const FitResult r = fit_alternating(d, cfg, init, fm.adversary);
  REQUIRE(!r.objective_trace.empty());
  double running = r.objective_trace.front();
  for (double v : r.objective_trace) {
    CHECK(std::isfinite(v));
    running = std::min(running, v);
  }
  CHECK(running <= r.objective_trace.front());
  CHECK(r.alpha_hat.norm2() <= 10 * init.norm2() + 10);
  const FitResult back = FitResult::from_json(r.to_json());
  CHECK(back.alpha_hat.flat() == r.alpha_hat.flat());
  CHECK(back.objective_trace == r.objective_trace);
}

TEST_CASE("fit_alternating: objective decreases on simulated data") {
  int decreased = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset d = generate_dataset(SimParams{}, 2000, 500 + seed);
    MinimaxConfig cfg;
    cfg.seed = seed;
    const FitResult r = fit_minimax(d, cfg);
    REQUIRE(!r.objective_trace.empty());
    for (double v : r.objective_trace) REQUIRE(std::isfinite(v));
    if (r.objective_trace.back() < r.objective_trace.front()) ++decreased;
  }
  CHECK(decreased >= 16);
}

TEST_CASE("fit_minimax recovers enumerated coefficients on a discrete design") {
  const DiscreteSCM scm = fixtures::well_conditioned();
  const TabulatedAlpha truth = true_nuisances(scm);
  MinimaxConfig cfg;
  cfg.D = 30;
  cfg.mu = 2e-8;
  std::vector<std::vector<double>> errs(scm.support().size());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const FitResult r = fit_minimax(sample_discrete_dataset(scm, 5000, 100 + seed), cfg);
    for (std::size_t i = 0; i < errs.size(); ++i) {
      const AlphaValues v = r.alpha_hat.values(scm.support()[i].x, 1.0);
      errs[i].push_back(std::max(std::abs(v(kBeta1) - truth.rows[i](kBeta1)),
                                 std::abs(v(kBeta2) - truth.rows[i](kBeta2))));
    }
  }
  for (auto& e : errs) {
    std::sort(e.begin(), e.end());
    CHECK(0.5 * (e[4] + e[5]) <= 0.15);
  }
}

TEST_CASE("fit_sgd: determinism and zero steps") {
  const Dataset d = small_data(400, 51);
  MinimaxConfig cfg;
  cfg.mode = FitMode::kStochastic;
  cfg.K = 50;
  cfg.batch_size = 64;
  cfg.seed = 3;
  const FeatureMaps fm = make_feature_maps(d, cfg);
  const NuisanceAlpha init = init_two_stage(d, fm.x_map, fm.xg_map, cfg.init_ridge);
  const FitResult a = fit_sgd(d, cfg, init, fm.adversary);
  const FitResult b = fit_sgd(d, cfg, init, fm.adversary);
  CHECK(a.alpha_hat.flat() == b.alpha_hat.flat());
  CHECK(a.objective_trace == b.objective_trace);
  cfg.step_alpha = 0.0;
  cfg.step_f = 0.0;
  CHECK(fit_sgd(d, cfg, init, fm.adversary).alpha_hat.flat() == init.flat());
}

TEST_CASE("MinimaxConfig: defaults, validation and JSON") {
  MinimaxConfig c;
  CHECK(c.mu_for(400) == doctest::Approx(1.0 / 400));
  CHECK(c.lambda_for(400) == doctest::Approx(0.05));
  CHECK(c.iterations() == 50);
  c.mode = FitMode::kStochastic;
  CHECK(c.iterations() == 2000);
  c.lambda = 0.3;
  c.anchor = AnchorMode::kFixed;
  nlohmann::json j = c;
  const MinimaxConfig back = j.get<MinimaxConfig>();
  CHECK(back.lambda.value() == 0.3);
  CHECK(back.anchor == AnchorMode::kFixed);
  CHECK(back.mode == FitMode::kStochastic);
  j["bogus"] = 1;
  CHECK_THROWS_AS(j.get<MinimaxConfig>(), ConfigError);
  MinimaxConfig bad;
  bad.lambda = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = MinimaxConfig{};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
