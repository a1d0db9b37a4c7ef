#pragma once

// Sample-sum kernels behind the estimator. Each has an OpenMP version and a plain
// serial reference used by the tests. The parallel versions split samples into one
// contiguous chunk per thread and add the partial sums in thread order, so results
// are reproducible for a fixed thread count.

#include "ivpricing/core.hpp"
#include "ivpricing/residuals.hpp"

#include <array>
#include <vector>

namespace ivpricing::kernels {

/// Test-function features for each residual: phi[k] is n x D, the same D for every k.
using FeatureBlocks = std::array<const Matrix*, kResidualDim>;

/// Every residual paired with the same features.
FeatureBlocks same_features(const Matrix& phi);

/// a = (1/n) sum_i z_i with z_i[k*D + j] = W_ik phi[k]_ij (residual-major stacking).
Vector moment_vector(const FeatureBlocks& phi, const Matrix& W);
Vector moment_vector_serial(const FeatureBlocks& phi, const Matrix& W);

/// M = (1/n) sum_i z_i z_i^T with z_i as in moment_vector.
Matrix second_moment(const FeatureBlocks& phi, const Matrix& W);
Matrix second_moment_serial(const FeatureBlocks& phi, const Matrix& W);

/// Per-sample design for the alpha parameters: the feature matrix of each component and
/// the Jacobian dW/d(alpha values) at every sample.
struct AlphaDesign {
  std::array<const Matrix*, kAlphaDim> psi{};  // psi[c] is n x P_c
  const std::vector<ResidualJacobian>* jac = nullptr;

  [[nodiscard]] Eigen::Index offset(int c) const;
  [[nodiscard]] Eigen::Index num_params() const { return offset(kAlphaDim); }
};

/// d a / d theta_alpha, an (8D) x P matrix. Jacobian entries outside residual_dependencies() are ignored.
Matrix moment_jacobian(const FeatureBlocks& phi, const AlphaDesign& design);
Matrix moment_jacobian_serial(const FeatureBlocks& phi, const AlphaDesign& design);

/// d/d theta_alpha of (1/n) sum_i F_i . W_i, where F is the n x 8 matrix of adversary values.
Vector pairing_gradient(const Matrix& F, const AlphaDesign& design);
Vector pairing_gradient_serial(const Matrix& F, const AlphaDesign& design);

/// Product-Gaussian kernel density estimate of the rows of `data` evaluated at each row of `query`.
Vector gaussian_kde(const Matrix& data, const Matrix& query, const Vector& bandwidths);
Vector gaussian_kde_serial(const Matrix& data, const Matrix& query, const Vector& bandwidths);

}  // namespace ivpricing::kernels
