#pragma once

#include "ivpricing/discrete_scm.hpp"
#include "ivpricing/residuals.hpp"

#include <functional>
#include <map>
#include <vector>

namespace ivpricing {

/// Any representation of alpha that can be evaluated at (x, g).
using AlphaFn = std::function<AlphaValues(const Vector& x, double g)>;

/// Alpha tabulated on the support of a DiscreteSCM: one row per covariate support point,
/// with h2 additionally keyed by the instrument value.
struct TabulatedAlpha {
  std::vector<AlphaValues> rows;            // h2 entry unused
  std::vector<std::map<double, double>> h2; // per support point: g -> h2(x, g)

  [[nodiscard]] AlphaValues at(std::size_t x_index, double g) const;
  /// Evaluator bound to `scm`; x must be a support point.
  [[nodiscard]] AlphaFn bind(const DiscreteSCM& scm) const;
};

/// Exact conditional law of the atoms at one covariate support point.
struct ConditionalLaw {
  std::vector<std::size_t> atoms;
  std::vector<double> weights;  // sum to one

  template <class F>
  double expect(const std::vector<ResolvedAtom>& all, F f) const {
    double s = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) s += weights[k] * f(all[atoms[k]]);
    return s;
  }
};

ConditionalLaw conditional_law(const DiscreteSCM& scm, std::size_t x_index);

/// h1..h6 and the conditional price coefficients, by enumeration.
TabulatedAlpha true_nuisances(const DiscreteSCM& scm);

struct MomentSystem {
  std::array<double, 3> omega{};
  std::array<double, 3> upsilon{};

  [[nodiscard]] double determinant() const { return omega[1] * upsilon[2] - upsilon[1] * omega[2]; }
};

/// Omega_k(x) and Upsilon_k(x) at one support point, by enumeration.
MomentSystem moment_system(const DiscreteSCM& scm, std::size_t x_index);

inline constexpr double kDefaultDegeneracyTol = 1e-10;

/// Solves Omega1 = Omega2 b1 + Omega3 b2 and Upsilon1 = Upsilon2 b1 + Upsilon3 b2.
/// Throws DegenerateSystem when |det| <= tol.
std::pair<double, double> identify_beta(const MomentSystem& ms, double degeneracy_tol = kDefaultDegeneracyTol);

/// m(x; alpha) = E[W(Z; alpha) | X = x], by enumeration.
ResidualVector conditional_moment(const DiscreteSCM& scm, const AlphaFn& alpha, std::size_t x_index);

/// E[W W^T | X = x] at the given alpha.
Eigen::Matrix<double, kResidualDim, kResidualDim> conditional_second_moment(const DiscreteSCM& scm,
                                                                          const AlphaFn& alpha,
                                                                          std::size_t x_index);

/// E_X[m(X; alpha)^T Sigma(X)^{-1} m(X; alpha)] with Sigma taken at the true alpha.
/// Throws SingularCovariance if Sigma(x) is singular at some support point.
double phi_objective(const DiscreteSCM& scm, const AlphaFn& alpha);

}  // namespace ivpricing
