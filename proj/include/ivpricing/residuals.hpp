#pragma once

#include "ivpricing/core.hpp"

#include <Eigen/Core>

#include <array>
#include <string_view>

namespace ivpricing {

inline constexpr int kResidualDim = 8;
inline constexpr int kAlphaDim = 8;

/// Component order of the nuisance vector alpha = (beta1, beta2, h1, ..., h6).
enum Component : int { kBeta1 = 0, kBeta2, kH1, kH2, kH3, kH4, kH5, kH6 };

std::string_view component_name(int c);

/// Values of the eight nuisance components at one (x, g) point.
using AlphaValues = Eigen::Matrix<double, kAlphaDim, 1>;

/// Residual order: G-h1, P-h2, G^2-h3, (P-h2)Y-h4, P(P-h2)-h5, P^2(P-h2)-h6, w7, w8.
using ResidualVector = Eigen::Matrix<double, kResidualDim, 1>;

/// d w_k / d alpha_c at one sample, rows indexed by residual, columns by component.
using ResidualJacobian = Eigen::Matrix<double, kResidualDim, kAlphaDim>;

using RhoVector = Eigen::Matrix<double, 6, 1>;

/// The observable part of a sample needed by the residuals.
struct Observation {
  double y = 0.0;
  double g = 0.0;
  double p = 0.0;
};

inline AlphaValues make_alpha_values(double beta1, double beta2, double h1, double h2, double h3,
                                     double h4, double h5, double h6) {
  AlphaValues a;
  a << beta1, beta2, h1, h2, h3, h4, h5, h6;
  return a;
}

/// rho_1..rho_6: (G-h1)(P-h2) times Y, P, P^2, then G times each of those.
RhoVector eval_rho(const Observation& z, double h1, double h2);

/// Generalized residual W(Z; alpha) given nuisance values at the sample's (x, g).
ResidualVector eval_W(const Observation& z, const AlphaValues& alpha);

/// Exact partial derivatives of W with respect to the nuisance values.
ResidualJacobian eval_W_jacobian(const Observation& z, const AlphaValues& alpha);

/// Which residuals depend on which components (structural sparsity of the Jacobian).
constexpr std::array<std::array<bool, kAlphaDim>, kResidualDim> residual_dependencies() {
  //             b1     b2     h1     h2     h3     h4     h5     h6
  return {{{false, false, true, false, false, false, false, false},
           {false, false, false, true, false, false, false, false},
           {false, false, false, false, true, false, false, false},
           {false, false, false, true, false, true, false, false},
           {false, false, false, true, false, false, true, false},
           {false, false, false, true, false, false, false, true},
           {true, true, true, true, false, false, false, false},
           {true, true, true, true, true, true, true, true}}};
}

}  // namespace ivpricing
