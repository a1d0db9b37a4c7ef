#include "ivpricing/kernels.hpp"

#include <doctest.h>

#include <random>

using namespace ivpricing;
using namespace ivpricing::kernels;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0, 1);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = N(rng);
  return m;
}

double rel_gap(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial references") {
  std::mt19937_64 rng(1);
  const Eigen::Index n = 1037, D = 7;
  const Matrix phi_x = random_matrix(n, D, rng), phi_xg = random_matrix(n, D, rng);
  const Matrix W = random_matrix(n, kResidualDim, rng);
  FeatureBlocks phi = same_features(phi_x);
  phi[1] = &phi_xg;

  CHECK(rel_gap(moment_vector(phi, W), moment_vector_serial(phi, W)) <= 1e-12);
  CHECK(rel_gap(second_moment(phi, W), second_moment_serial(phi, W)) <= 1e-12);

  // a[k*D + j] = mean_i W_ik phi[k]_ij, written out directly.
  const Vector a = moment_vector_serial(phi, W);
  for (int k = 0; k < kResidualDim; ++k)
    for (Eigen::Index j = 0; j < D; ++j) {
      const double direct = (W.col(k).array() * phi[static_cast<std::size_t>(k)]->col(j).array()).mean();
      CHECK(a(k * D + j) == doctest::Approx(direct).epsilon(1e-12));
    }
  const Matrix M = second_moment_serial(phi, W);
  CHECK((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0);

  std::vector<ResidualJacobian> jac(static_cast<std::size_t>(n));
  constexpr auto deps = residual_dependencies();
  for (auto& J : jac) {
    J = random_matrix(kResidualDim, kAlphaDim, rng);
    for (int k = 0; k < kResidualDim; ++k)
      for (int c = 0; c < kAlphaDim; ++c)
        if (!deps[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]) J(k, c) = 0.0;
  }
  AlphaDesign design;
  for (int c = 0; c < kAlphaDim; ++c) design.psi[static_cast<std::size_t>(c)] = c == 3 ? &phi_xg : &phi_x;
  design.jac = &jac;
  CHECK(design.num_params() == kAlphaDim * D);
  CHECK(rel_gap(moment_jacobian(phi, design), moment_jacobian_serial(phi, design)) <= 1e-12);
  const Matrix F = random_matrix(n, kResidualDim, rng);
  CHECK(rel_gap(pairing_gradient(F, design), pairing_gradient_serial(F, design)) <= 1e-12);
}

TEST_CASE("gaussian_kde: parallel equals serial and the single-point value") {
  std::mt19937_64 rng(2);
  const Matrix data = random_matrix(400, 3, rng), query = random_matrix(57, 3, rng);
  const Vector bw = Eigen::Vector3d(0.5, 0.7, 1.1);
  CHECK(rel_gap(gaussian_kde(data, query, bw), gaussian_kde_serial(data, query, bw)) <= 1e-12);

  // Far from every sample both versions underflow to exactly zero.
  const Matrix far = Matrix::Constant(1, 3, 1e3);
  CHECK(gaussian_kde(data, far, bw)(0) == 0.0);
  CHECK(gaussian_kde_serial(data, far, bw)(0) == 0.0);

  const Matrix one = Matrix::Zero(1, 2);
  const Vector h = Eigen::Vector2d(0.5, 2.0);
  const double peak = 1.0 / (2 * M_PI * 0.5 * 2.0);
  CHECK(gaussian_kde(one, one, h)(0) == doctest::Approx(peak).epsilon(1e-14));
}
