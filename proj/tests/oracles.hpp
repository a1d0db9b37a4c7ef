#pragma once

#include "ivpricing/minimax.hpp"

#include <cmath>

namespace oracles {

using namespace ivpricing;

// The inner objective J(theta) = psi_n - |f|^2_{alpha_tilde,n} - lambda |f|^2 with theta the
// adversary weight matrix (one column per residual), evaluated without the library kernels.
class InnerQuadratic {
 public:
  InnerQuadratic(const Dataset& d, const NuisanceAlpha& alpha, const NuisanceAlpha& alpha_tilde, double lambda,
                 const AdversaryMaps& adv)
      : lambda_(lambda), n_(static_cast<double>(d.size())) {
    phi_x_ = adv.x_map->feature_matrix(d.x());
    phi_xg_ = adv.xg_map->feature_matrix(xg_inputs(d));
    W_.resize(static_cast<Eigen::Index>(d.size()), kResidualDim);
    Wt_.resizeLike(W_);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const Sample s = d.sample(i);
      const Observation z{s.y, s.g, s.p};
      W_.row(static_cast<Eigen::Index>(i)) = eval_W(z, alpha.values(s.x, s.g)).transpose();
      Wt_.row(static_cast<Eigen::Index>(i)) = eval_W(z, alpha_tilde.values(s.x, s.g)).transpose();
    }
  }

  [[nodiscard]] const Matrix& phi(int k) const { return k == 1 ? phi_xg_ : phi_x_; }

  // Per-sample f(X_i) . W_i for a residual matrix.
  [[nodiscard]] Vector pair(const Matrix& theta, const Matrix& W) const {
    Vector s = Vector::Zero(W.rows());
    for (int k = 0; k < kResidualDim; ++k) s.array() += (phi(k) * theta.col(k)).array() * W.col(k).array();
    return s;
  }

  [[nodiscard]] double value(const Matrix& theta) const {
    const Vector s = pair(theta, Wt_);
    return pair(theta, W_).mean() - s.squaredNorm() / n_ - lambda_ * theta.squaredNorm();
  }

  [[nodiscard]] Matrix gradient(const Matrix& theta) const {
    const Vector s = pair(theta, Wt_);
    Matrix g(theta.rows(), theta.cols());
    for (int k = 0; k < kResidualDim; ++k)
      g.col(k) = phi(k).transpose() * (W_.col(k).array() - 2.0 * s.array() * Wt_.col(k).array()).matrix() / n_ -
                 2.0 * lambda_ * theta.col(k);
    return g;
  }

  // Curvature part of the gradient, used for the Lipschitz constant.
  [[nodiscard]] Matrix hessian_apply(const Matrix& v) const {
    const Vector s = pair(v, Wt_);
    Matrix g(v.rows(), v.cols());
    for (int k = 0; k < kResidualDim; ++k)
      g.col(k) = 2.0 * phi(k).transpose() * (s.array() * Wt_.col(k).array()).matrix() / n_ + 2.0 * lambda_ * v.col(k);
    return g;
  }

  // Nesterov-accelerated gradient ascent from zero with step 1/L, L from power iteration.
  [[nodiscard]] double ascend(Eigen::Index rows, int max_iter = 200000, double rel_tol = 1e-12) const {
    Matrix v = Matrix::Ones(rows, kResidualDim);
    double L = 1.0;
    for (int it = 0; it < 200; ++it) {
      const Matrix hv = hessian_apply(v);
      L = hv.norm() / v.norm();
      v = hv / hv.norm();
    }
    L *= 1.05;
    const double mu = 2.0 * lambda_;
    const double q = std::sqrt(mu / L), momentum = (1 - q) / (1 + q);
    Matrix theta = Matrix::Zero(rows, kResidualDim), prev = theta;
    double last = value(theta);
    for (int it = 0; it < max_iter; ++it) {
      const Matrix look = theta + momentum * (theta - prev);
      prev = theta;
      theta = look + gradient(look) / L;
      if (it % 100 == 99) {
        const double now = value(theta);
        if (std::abs(now - last) <= rel_tol * std::abs(now)) break;
        last = now;
      }
    }
    return value(theta);
  }

 private:
  double lambda_, n_;
  Matrix phi_x_, phi_xg_, W_, Wt_;
};

}  // namespace oracles
