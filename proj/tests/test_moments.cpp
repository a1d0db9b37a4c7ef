#include "fixtures.hpp"
#include "ivpricing/identification.hpp"
#include "ivpricing/residuals.hpp"

#include <doctest.h>

#include <random>

using namespace ivpricing;

TEST_CASE("eval_rho: worked examples") {
  CHECK(eval_rho({1, 2, 3}, 1, 3).isZero());
  RhoVector want;
  want << 2, 6, 18, 4, 12, 36;
  CHECK(eval_rho({1, 2, 3}, 1, 1) == want);
  want << 0, 6, 18, 0, 12, 36;
  CHECK(eval_rho({0, 2, 3}, 1, 1) == want);
}

TEST_CASE("eval_W: worked examples") {
  CHECK(eval_W({0, 1, 2}, make_alpha_values(0, 0, 1, 2, 1, 0, 0, 0)).isZero());
  ResidualVector want;
  want << 1, 2, 2, 1.5, 5, 16, -4, -7.5;
  const ResidualVector got = eval_W({1, 2, 3}, make_alpha_values(1, 0, 1, 1, 2, 0.5, 1, 2));
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("eval_W_jacobian matches central differences and the sparsity pattern") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0, 1);
  const auto deps = residual_dependencies();
  for (int probe = 0; probe < 20; ++probe) {
    const Observation z{N(rng), N(rng), N(rng)};
    AlphaValues a;
    for (int c = 0; c < kAlphaDim; ++c) a(c) = N(rng);
    const ResidualJacobian J = eval_W_jacobian(z, a);
    for (int c = 0; c < kAlphaDim; ++c) {
      AlphaValues up = a, dn = a;
      up(c) += 1e-6;
      dn(c) -= 1e-6;
      const ResidualVector fd = (eval_W(z, up) - eval_W(z, dn)) / 2e-6;
      for (int k = 0; k < kResidualDim; ++k) {
        CHECK(J(k, c) == doctest::Approx(fd(k)).epsilon(1e-6).scale(1.0));
        if (!deps[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]) CHECK(J(k, c) == 0.0);
      }
    }
  }
}

TEST_CASE("true_nuisances: constant instrument and enumeration averages") {
  // G constant at 1.5: h1 = 1.5, h3 = 2.25.
  std::vector<ProductSupport> sup{{Vector::Zero(1), 1.0, {{1.5}, {1.0}}, {{-1, 1}, {0.5, 0.5}},
                                   {{-1, 1}, {0.5, 0.5}}, {{-1, 1}, {0.5, 0.5}}, {{0}, {1}}}};
  StructuralFunctions fn{[](const Vector&, double u1) { return 1 + u1; },
                         [](const Vector&, double u1) { return -2 - 0.5 * u1; },
                         [](const Vector&, double, double g) { return g; },
                         [](const Vector&, double, double) { return 0.0; },
                         [](const Vector&, double u2, double g) { return (1 + 0.2 * u2) * g; },
                         [](const Vector&, double u2) { return u2; }};
  const DiscreteSCM scm = build_discrete_scm(make_product_spec(sup, fn));
  const TabulatedAlpha t = true_nuisances(scm);
  CHECK(t.rows[0](kH1) == doctest::Approx(1.5));
  CHECK(t.rows[0](kH3) == doctest::Approx(2.25));
  CHECK(t.rows[0](kBeta2) == doctest::Approx(-2.0));

  for (const auto& d : fixtures::all_designs()) {
    const TabulatedAlpha truth = true_nuisances(d);
    for (std::size_t i = 0; i < d.support().size(); ++i) {
      const ConditionalLaw law = conditional_law(d, i);
      const double b2 = law.expect(d.atoms(), [](const ResolvedAtom& a) { return a.beta_p2; });
      CHECK(truth.rows[i](kBeta2) == doctest::Approx(b2).epsilon(1e-12));
      // h2(x, g) is E[P | x, g] by direct enumeration.
      for (const auto& [g, h2] : truth.h2[i]) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < law.atoms.size(); ++k) {
          const ResolvedAtom& a = d.atoms()[law.atoms[k]];
          if (a.g != g) continue;
          num += law.weights[k] * a.p;
          den += law.weights[k];
        }
        CHECK(h2 == doctest::Approx(num / den).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("Lemma 4 and 5 identities and identify_beta on every fixture") {
  for (const auto& d : fixtures::all_designs()) {
    const TabulatedAlpha truth = true_nuisances(d);
    for (std::size_t i = 0; i < d.support().size(); ++i) {
      const MomentSystem ms = moment_system(d, i);
      const double b1 = truth.rows[i](kBeta1), b2 = truth.rows[i](kBeta2);
      CHECK(std::abs(ms.omega[0] - ms.omega[1] * b1 - ms.omega[2] * b2) <= 1e-9);
      CHECK(std::abs(ms.upsilon[0] - ms.upsilon[1] * b1 - ms.upsilon[2] * b2) <= 1e-9);
      const auto [e1, e2] = identify_beta(ms);
      CHECK(std::abs(e1 - b1) <= 1e-9);
      CHECK(std::abs(e2 - b2) <= 1e-9);
    }
  }
}

TEST_CASE("identify_beta: small systems and degeneracy") {
  MomentSystem ms;
  ms.omega = {2, 1, 0};
  ms.upsilon = {3, 0, 1};
  auto [b1, b2] = identify_beta(ms);
  CHECK(b1 == doctest::Approx(2));
  CHECK(b2 == doctest::Approx(3));
  ms.omega = {0, 1, 0};
  ms.upsilon = {0, 0, 1};
  std::tie(b1, b2) = identify_beta(ms);
  CHECK(b1 == 0.0);
  CHECK(b2 == 0.0);
  ms.omega = {1, 1, 2};
  ms.upsilon = {1, 2, 4};
  CHECK_THROWS_AS(identify_beta(ms), DegenerateSystem);
}

TEST_CASE("instrument irrelevant for price: Omega2 = Omega3 = 0 and a degenerate system") {
  std::vector<ProductSupport> sup{{Vector::Zero(1), 1.0, {{0, 1, 2}, {0.3, 0.4, 0.3}}, {{-1, 1}, {0.5, 0.5}},
                                   {{-1, 1}, {0.5, 0.5}}, {{-1, 1}, {0.5, 0.5}}, {{0}, {1}}}};
  StructuralFunctions fn{[](const Vector&, double u1) { return 1 + u1; },
                         [](const Vector&, double) { return -1.0; },
                         [](const Vector&, double, double g) { return g; },
                         [](const Vector&, double, double) { return 0.0; },
                         [](const Vector&, double, double) { return 0.0; },  // P does not see G
                         [](const Vector&, double u2) { return 3 + u2; }};
  const DiscreteSCM scm = build_discrete_scm(make_product_spec(sup, fn));
  const MomentSystem ms = moment_system(scm, 0);
  CHECK(std::abs(ms.omega[1]) < 1e-12);
  CHECK(std::abs(ms.omega[2]) < 1e-12);
  CHECK_THROWS_AS(identify_beta(ms), DegenerateSystem);
}

TEST_CASE("conditional moments vanish at the truth and are affine in beta") {
  for (const auto& d : fixtures::all_designs()) {
    const TabulatedAlpha truth = true_nuisances(d);
    for (std::size_t i = 0; i < d.support().size(); ++i)
      CHECK(conditional_moment(d, truth.bind(d), i).cwiseAbs().maxCoeff() <= 1e-9);

    // Shifting beta1 by one moves m7 by -Omega2 (both sides enumerated).
    TabulatedAlpha shifted = truth;
    for (auto& r : shifted.rows) r(kBeta1) += 1.0;
    for (std::size_t i = 0; i < d.support().size(); ++i) {
      const ResidualVector m = conditional_moment(d, shifted.bind(d), i);
      CHECK(m(6) == doctest::Approx(-moment_system(d, i).omega[1]).epsilon(1e-9).scale(1.0));
      CHECK(m.head(6).cwiseAbs().maxCoeff() <= 1e-9);
    }

    // Three points along a line in (beta1, beta2) give collinear moments.
    auto at = [&](double t) {
      TabulatedAlpha a = truth;
      for (auto& r : a.rows) {
        r(kBeta1) += 0.7 * t;
        r(kBeta2) -= 0.3 * t;
      }
      return conditional_moment(d, a.bind(d), 0);
    };
    const ResidualVector m0 = at(0), m1 = at(1), m2 = at(2);
    CHECK((m2 - 2 * m1 + m0).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("phi_objective: zero at the truth, positive elsewhere") {
  for (const auto& d : fixtures::all_designs()) {
    const TabulatedAlpha truth = true_nuisances(d);
    CHECK(std::abs(phi_objective(d, truth.bind(d))) <= 1e-9);
    TabulatedAlpha off = truth;
    for (auto& r : off.rows) r(kBeta2) -= 0.5;
    CHECK(phi_objective(d, off.bind(d)) > 1e-6);
    TabulatedAlpha h = truth;
    for (auto& r : h.rows) r(kH4) += 0.25;
    CHECK(phi_objective(d, h.bind(d)) > 0.0);
  }
}
