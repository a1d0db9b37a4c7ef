#pragma once

#include "ivpricing/discrete_scm.hpp"

#include <cmath>
#include <vector>

namespace fixtures {

using namespace ivpricing;

// Four covariate points, four instrument values, binary U1, ternary U2.
// The instrument moves price nonlinearly, which keeps the 2x2 moment systems well conditioned.
inline DiscreteSCM well_conditioned(double shift = 0.0) {
  std::vector<ProductSupport> sup;
  for (auto [a, b] : std::vector<std::pair<double, double>>{{0, 0}, {1, 0}, {0, 1}, {1, 1}}) {
    ProductSupport s;
    s.x = Vector2(a, b);
    s.prob = 0.25;
    s.g = {{-1, 0, 1, 2}, {0.2, 0.3, 0.3, 0.2}};
    s.u1 = {{-1, 1}, {0.5, 0.5}};
    s.u2 = {{-1, 0, 1}, {0.25, 0.5, 0.25}};
    s.eps_p = {{-0.5, 0.5}, {0.5, 0.5}};
    s.eps_y = {{-0.5, 0.5}, {0.5, 0.5}};
    sup.push_back(s);
  }
  StructuralFunctions fn;
  fn.beta_p1 = [shift](const Vector& x, double u1) { return 1 + shift + 0.5 * u1 + 0.3 * x(0); };
  fn.beta_p2 = [](const Vector& x, double u1) { return -1 - 0.3 * u1 - 0.2 * x(1); };
  fn.beta_g = [](const Vector&, double u1, double g) { return 0.5 * g + 0.2 * u1 * g; };
  fn.beta_ux = [](const Vector&, double, double u2) { return 0.5 * u2; };
  fn.alpha_g = [](const Vector& x, double u2, double g) {
    return (u2 * u2 + 0.5 + 0.5 * x(0)) * g * g * 0.5 + (1 - u2 * u2) * g;
  };
  fn.alpha_ux = [](const Vector&, double u2) { return u2; };
  return build_discrete_scm(make_product_spec(sup, fn));
}

// One covariate dimension, three points, uneven instrument law and skewed latents.
inline DiscreteSCM skewed() {
  std::vector<ProductSupport> sup;
  const double xs[] = {-1.0, 0.0, 2.0};
  const double px[] = {0.3, 0.5, 0.2};
  for (int i = 0; i < 3; ++i) {
    ProductSupport s;
    s.x = Vector::Constant(1, xs[i]);
    s.prob = px[i];
    s.g = {{0, 1, 3}, {0.5, 0.3, 0.2}};
    s.u1 = {{-0.5, 0.0, 2.0}, {0.3, 0.5, 0.2}};
    s.u2 = {{-1, 2}, {0.6, 0.4}};
    s.eps_p = {{-1, 2}, {2.0 / 3.0, 1.0 / 3.0}};
    s.eps_y = {{-0.2, 0.2}, {0.5, 0.5}};
    sup.push_back(s);
  }
  StructuralFunctions fn;
  fn.beta_p1 = [](const Vector& x, double u1) { return 2 + u1 * u1 - 0.4 * x(0); };
  fn.beta_p2 = [](const Vector& x, double u1) { return -std::exp(0.3 * u1 + 0.1 * x(0)); };
  fn.beta_g = [](const Vector& x, double u1, double g) { return (u1 + x(0)) * g; };
  fn.beta_ux = [](const Vector& x, double u1, double) { return std::cos(u1 + x(0)); };
  fn.alpha_g = [](const Vector& x, double u2, double g) { return (1.5 + 0.2 * u2 * u2 + 0.1 * x(0)) * g * g; };
  fn.alpha_ux = [](const Vector& x, double u2) { return std::cos(u2) + x(0); };
  return build_discrete_scm(make_product_spec(sup, fn));
}

// Two covariate points in two dimensions, the Table-2 functional forms on coarse latent grids.
inline DiscreteSCM table2_like() {
  std::vector<ProductSupport> sup;
  for (auto [a, b, w] : std::vector<std::tuple<double, double, double>>{{0.25, 0.25, 0.6}, {-0.5, 1.0, 0.4}}) {
    ProductSupport s;
    s.x = Vector2(a, b);
    s.prob = w;
    s.g = {{1.0, 2.0, 3.5}, {0.25, 0.5, 0.25}};
    s.u1 = {{-1.0, 0.5, 2.0}, {0.25, 0.5, 0.25}};
    s.u2 = {{-1.0, 0.0, 1.0}, {0.3, 0.4, 0.3}};  // symmetric, so Cov(U2^2, U2) = 0
    s.eps_p = {{-1, 1}, {0.5, 0.5}};
    s.eps_y = {{-1, 1}, {0.5, 0.5}};
    sup.push_back(s);
  }
  StructuralFunctions fn;
  fn.beta_p1 = [](const Vector& x, double u1) { return u1 * u1 - (0.3 * x(0) + 0.2 * x(1)); };
  fn.beta_p2 = [](const Vector& x, double u1) { return -std::exp(u1 + 0.1 * x(0) - 0.3 * x(1)); };
  fn.beta_g = [](const Vector& x, double u1, double g) { return (u1 * u1 + 0.2 * x(0) - 0.1 * x(1)) * g + g; };
  fn.beta_ux = [](const Vector& x, double u1, double u2) { return std::cos(u1 + 0.4 * x(0) + 0.1 * x(1)) + 0.5 * u2; };
  fn.alpha_g = [](const Vector& x, double u2, double g) { return (u2 * u2 + 1.2 * x(0) + 0.4 * x(1)) * g + 5 * g; };
  fn.alpha_ux = [](const Vector&, double u2) { return std::cos(u2); };
  return build_discrete_scm(make_product_spec(sup, fn));
}

inline std::vector<DiscreteSCM> all_designs() { return {well_conditioned(), skewed(), table2_like()}; }

}  // namespace fixtures
