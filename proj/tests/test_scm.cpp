#include "fixtures.hpp"
#include "ivpricing/discrete_scm.hpp"
#include "ivpricing/scm.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace ivpricing;

TEST_CASE("generate_dataset: mean of G matches the Table-2 design") {
  const SimParams p;
  const Dataset d = generate_dataset(p, 2000, 7);
  REQUIRE(d.size() == 2000);
  const double var = p.sigma2_g + p.c_g.dot(p.sigma_x * p.c_g);
  CHECK(std::abs(d.g().mean() - (p.mu_g + p.c_g.dot(p.mu_x))) <= 4.0 * std::sqrt(var / 2000.0));
}

TEST_CASE("generate_dataset: G mean with covariate effects switched off") {
  SimParams p;
  p.c_g.setZero();
  p.c_u1.setZero();
  p.c_u2.setZero();
  const std::size_t n = 100000;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = generate_dataset(p, n, seed);
    CHECK(std::abs(d.g().mean() - 2.0) <= 4.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("generate_dataset: rejects n = 0 and bad parameters") {
  CHECK_THROWS_AS(generate_dataset(SimParams{}, 0, 1), ConfigError);
  SimParams p;
  p.sigma2_u1 = -1.0;
  CHECK_THROWS_AS(generate_dataset(p, 10, 1), ConfigError);
  p = SimParams{};
  p.p2 = p.p1;
  CHECK_THROWS_AS(generate_dataset(p, 10, 1), ConfigError);
}

TEST_CASE("generate_dataset: identical inputs give identical bytes") {
  std::ostringstream a, b;
  write_dataset_csv(a, generate_dataset(SimParams{}, 300, 11));
  write_dataset_csv(b, generate_dataset(SimParams{}, 300, 11));
  CHECK(a.str() == b.str());
  std::ostringstream c;
  write_dataset_csv(c, generate_dataset(SimParams{}, 300, 12));
  CHECK(a.str() != c.str());
}

TEST_CASE("dataset CSV round trip") {
  const Dataset d = generate_dataset(SimParams{}, 50, 3, true);
  std::stringstream s;
  write_dataset_csv(s, d, true);
  const Dataset back = read_dataset_csv(s);
  CHECK(back.y() == d.y());
  CHECK(back.x() == d.x());
  CHECK(back.g() == d.g());
  CHECK(back.p() == d.p());
}

TEST_CASE("SimParams JSON round trip and unknown keys") {
  SimParams p;
  p.c4 = 5.0;
  p.c7 = 1.0;
  const SimParams back = nlohmann::json(p).get<SimParams>();
  CHECK(nlohmann::json(back) == nlohmann::json(p));
  CHECK_THROWS_AS(nlohmann::json({{"c8", 1.0}}).get<SimParams>(), ConfigError);
}

TEST_CASE("oracle_beta at x = 0 agrees with a Monte Carlo average over U1") {
  const SimParams p;
  const auto [b1, b2] = oracle_beta(p, Vector2(0, 0));
  CHECK(b1 == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(b2 == doctest::Approx(-std::exp(2.0)).epsilon(1e-12));

  std::mt19937_64 rng(2024);
  std::normal_distribution<double> u1(p.mu_u1, std::sqrt(p.sigma2_u1));
  const int n = 1000000;
  double s1 = 0, s1sq = 0, s2 = 0, s2sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = u1(rng);
    const double a = u * u, b = -std::exp(u);
    s1 += a;
    s1sq += a * a;
    s2 += b;
    s2sq += b * b;
  }
  const double m1 = s1 / n, m2 = s2 / n;
  const double se1 = std::sqrt((s1sq / n - m1 * m1) / n), se2 = std::sqrt((s2sq / n - m2 * m2) / n);
  CHECK(std::abs(m1 - b1) <= 3 * se1);
  CHECK(std::abs(m2 - b2) <= 3 * se2);
}

TEST_CASE("oracle_beta: degenerate lognormal and sign") {
  SimParams p;
  p.sigma2_u1 = 1e-300;  // validation needs a positive variance
  p.mu_u1 = 0.0;
  p.c1.setZero();
  p.c2.setZero();
  p.c_u1.setZero();
  const auto [b1, b2] = oracle_beta(p, Vector2(0, 0));
  CHECK(b1 == doctest::Approx(0.0));
  CHECK(b2 == doctest::Approx(-1.0));
  const Matrix xs = draw_covariates(SimParams{}, 200, 4);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) CHECK(oracle_beta(SimParams{}, xs.row(i).transpose()).beta2 < 0.0);
}

TEST_CASE("oracle_policy: interior optimum, clipping") {
  const SimParams p;
  // Grid argmax of 3.25 p - 7.389056 p^2 on [0, 10] at step 1e-6.
  const double b1 = 3.25, b2 = -std::exp(2.0);
  double best = 0.0, best_v = -1e300;
  for (long k = 0; k <= 1000000; ++k) {  // the optimum is inside [0, 1]
    const double q = k * 1e-6;
    const double v = b1 * q + b2 * q * q;
    if (v > best_v) {
      best_v = v;
      best = q;
    }
  }
  CHECK(std::abs(oracle_policy(p, Vector2(0, 0)) - best) <= 1e-6);
  CHECK(oracle_policy(p, Vector2(0, 0)) == doctest::Approx(0.219919).epsilon(1e-5));

  SimParams q = p;
  q.p1 = 1.0;  // ratio 0.22 is below p1
  CHECK(oracle_policy(q, Vector2(0, 0)) == 1.0);
  q = p;
  q.p2 = 0.1;
  CHECK(oracle_policy(q, Vector2(0, 0)) == 0.1);
}

TEST_CASE("policy_value and regret") {
  const SimParams p;
  const PriceFn zero = [](ConstVectorRef) { return 0.0; };
  const PriceFn oracle = [&](ConstVectorRef x) { return oracle_policy(p, Vector2(x(0), x(1))); };
  CHECK(policy_value(p, zero, 1000, 1) == 0.0);
  CHECK(regret(p, oracle, 1000, 1) == 0.0);
  const PriceFn top = [](ConstVectorRef) { return 10.0; };
  CHECK(regret(p, top, 1000, 1) > 0.0);

  // Pointwise grid maximization on the same draws cannot beat the oracle.
  const Matrix xs = draw_covariates(p, 2000, 9);
  double grid_value = 0.0;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const auto [b1, b2] = oracle_beta(p, xs.row(i).transpose());
    double best = -1e300;
    for (int k = 0; k <= 10000; ++k) best = std::max(best, b1 * k * 1e-3 + b2 * k * k * 1e-6);
    grid_value += best;
  }
  grid_value /= static_cast<double>(xs.rows());
  const ValueEstimate v = policy_value_estimate(p, oracle, 2000, 9);
  CHECK(v.value >= grid_value - 1e-12);
  CHECK(v.value - grid_value <= 3 * v.std_error);

  // Widening a non-binding clip does not change the policy.
  SimParams wide = p;
  wide.p2 = 100.0;
  const PriceFn oracle_wide = [&](ConstVectorRef x) { return oracle_policy(wide, Vector2(x(0), x(1))); };
  CHECK(std::abs(regret(p, oracle_wide, 2000, 3)) <= 1e-12);

  // Any policy is dominated up to Monte Carlo error.
  const PriceFn half = [](ConstVectorRef) { return 0.5; };
  const ValueEstimate r = regret_estimate(p, half, 2000, 5);
  CHECK(r.value >= -3 * r.std_error);
}

namespace {

DiscreteSCMSpec tiny_spec() {
  DiscreteSCMSpec s;
  for (double u1 : {-1.0, 1.0})
    for (double u2 : {-1.0, 1.0})
      for (double g : {0.0, 1.0})
        for (double ep : {-1.0, 1.0}) {
          Atom a;
          a.x = Vector::Zero(1);
          a.u1 = u1;
          a.u2 = u2;
          a.g = g;
          a.eps_p = ep;
          a.prob = 1.0 / 16.0;
          s.atoms.push_back(a);
        }
  auto constant = [](double v) {
    CoefficientTable t;
    t.keys = {Latent::X};
    t.values[{0.0}] = v;
    return t;
  };
  s.beta_p1 = constant(1.0);
  s.beta_p2 = constant(-1.0);
  s.beta_g = constant(0.5);
  s.beta_ux = constant(0.0);
  s.alpha_g = constant(2.0);
  s.alpha_ux = constant(1.0);
  return s;
}

}  // namespace

TEST_CASE("build_discrete_scm: validation") {
  CHECK_NOTHROW(build_discrete_scm(tiny_spec()));

  DiscreteSCMSpec bad = tiny_spec();
  bad.beta_p1.keys = {Latent::X, Latent::U2};
  bad.beta_p1.values.clear();
  for (double u2 : {-1.0, 1.0}) bad.beta_p1.values[{0.0, u2}] = u2;
  CHECK_THROWS_AS(build_discrete_scm(bad), ConfigError);

  DiscreteSCMSpec deficit;
  Atom a;
  a.x = Vector::Zero(1);
  a.prob = 0.5;
  deficit.atoms.push_back(a);
  a.g = 1.0;
  a.prob = 0.4;
  deficit.atoms.push_back(a);
  const DiscreteSCMSpec ok = tiny_spec();
  deficit.beta_p1 = ok.beta_p1;
  deficit.beta_p2 = ok.beta_p2;
  deficit.beta_g = ok.beta_g;
  deficit.beta_ux = ok.beta_ux;
  deficit.alpha_g = ok.alpha_g;
  deficit.alpha_ux = ok.alpha_ux;
  CHECK_THROWS_AS(build_discrete_scm(deficit), ConfigError);
}

TEST_CASE("discrete SCM JSON round trip and sampling") {
  const DiscreteSCMSpec s = make_product_spec(
      {{Vector::Zero(1), 1.0, {{0, 1}, {0.5, 0.5}}, {{-1, 1}, {0.5, 0.5}}, {{-1, 1}, {0.5, 0.5}},
        {{-1, 1}, {0.5, 0.5}}, {{0}, {1}}}},
      {[](const Vector&, double u1) { return 1 + 0.1 * u1; }, [](const Vector&, double) { return -1.0; },
       [](const Vector&, double, double g) { return g; }, [](const Vector&, double u1, double) { return u1; },
       [](const Vector&, double u2, double g) { return (2 + u2) * g; }, [](const Vector&, double) { return 0.0; }});
  const nlohmann::json j = discrete_scm_spec_to_json(s);
  CHECK(discrete_scm_spec_to_json(discrete_scm_spec_from_json(j)) == j);
  const DiscreteSCM scm = build_discrete_scm(s);
  const Dataset d = sample_discrete_dataset(scm, 100, 1);
  CHECK(d.size() == 100);
  CHECK_THROWS_AS(sample_discrete_dataset(scm, 0, 1), ConfigError);
}

TEST_CASE("fixture designs validate") {
  CHECK(fixtures::all_designs().size() == 3);
}
