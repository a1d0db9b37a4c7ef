#include "ivpricing/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <numbers>

namespace ivpricing::kernels {

namespace {

// Runs body(begin, end, partial) over one contiguous chunk per thread, then sums the partials in
// thread order.
template <class Acc, class Body>
Acc chunked_sum(Eigen::Index n, const Acc& zero, Body body) {
  const int nt = omp_get_max_threads();
  std::vector<Acc> partial(static_cast<std::size_t>(nt), zero);
#pragma omp parallel num_threads(nt)
  {
    const int t = omp_get_thread_num();
    const int T = omp_get_num_threads();
    const Eigen::Index begin = n * t / T;
    const Eigen::Index end = n * (t + 1) / T;
    if (begin < end) body(begin, end, partial[static_cast<std::size_t>(t)]);
  }
  Acc total = zero;
  for (const auto& p : partial) total += p;
  return total;
}

Matrix stacked_rows(const FeatureBlocks& phi, const Matrix& W, Eigen::Index begin, Eigen::Index end) {
  const Eigen::Index D = phi[0]->cols();
  Matrix Z(end - begin, D * kResidualDim);
  for (int k = 0; k < kResidualDim; ++k)
    Z.middleCols(k * D, D) = phi[static_cast<std::size_t>(k)]->middleRows(begin, end - begin).array().colwise() *
                             W.col(k).segment(begin, end - begin).array();
  return Z;
}

void check_rows(const FeatureBlocks& phi, Eigen::Index n) {
  if (n == 0) throw ConfigError("kernels: no samples");
  for (const auto* p : phi)
    if (p == nullptr || p->rows() != n || p->cols() != phi[0]->cols())
      throw ConfigError("kernels: feature blocks must share row and column counts");
}

void check_rows(const FeatureBlocks& phi, const Matrix& W) {
  if (W.cols() != kResidualDim) throw ConfigError("kernels: residual matrix must be n x 8");
  check_rows(phi, W.rows());
}

}  // namespace

FeatureBlocks same_features(const Matrix& phi) {
  FeatureBlocks b;
  b.fill(&phi);
  return b;
}

Vector moment_vector(const FeatureBlocks& phi, const Matrix& W) {
  check_rows(phi, W);
  const Eigen::Index D = phi[0]->cols();
  const Eigen::Index n = W.rows();
  const Vector zero = Vector::Zero(D * kResidualDim);
  Vector s = chunked_sum(n, zero, [&](Eigen::Index b, Eigen::Index e, Vector& acc) {
    for (int k = 0; k < kResidualDim; ++k)
      acc.segment(k * D, D).noalias() +=
          phi[static_cast<std::size_t>(k)]->middleRows(b, e - b).transpose() * W.col(k).segment(b, e - b);
  });
  return s / static_cast<double>(n);
}

Vector moment_vector_serial(const FeatureBlocks& phi, const Matrix& W) {
  check_rows(phi, W);
  const Eigen::Index D = phi[0]->cols();
  Vector a = Vector::Zero(D * kResidualDim);
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (int k = 0; k < kResidualDim; ++k)
      for (Eigen::Index j = 0; j < D; ++j) a(k * D + j) += W(i, k) * (*phi[static_cast<std::size_t>(k)])(i, j);
  return a / static_cast<double>(W.rows());
}

Matrix second_moment(const FeatureBlocks& phi, const Matrix& W) {
  check_rows(phi, W);
  const Eigen::Index m = phi[0]->cols() * kResidualDim;
  const Matrix zero = Matrix::Zero(m, m);
  constexpr Eigen::Index kBlock = 256;
  Matrix s = chunked_sum(W.rows(), zero, [&](Eigen::Index b, Eigen::Index e, Matrix& acc) {
    for (Eigen::Index lo = b; lo < e; lo += kBlock) {
      const Matrix Z = stacked_rows(phi, W, lo, std::min(e, lo + kBlock));
      acc.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
    }
  });
  Matrix M = s.selfadjointView<Eigen::Lower>();
  return M / static_cast<double>(W.rows());
}

Matrix second_moment_serial(const FeatureBlocks& phi, const Matrix& W) {
  check_rows(phi, W);
  const Eigen::Index D = phi[0]->cols();
  const Eigen::Index m = D * kResidualDim;
  Matrix M = Matrix::Zero(m, m);
  Vector z(m);
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (int k = 0; k < kResidualDim; ++k)
      for (Eigen::Index j = 0; j < D; ++j) z(k * D + j) = W(i, k) * (*phi[static_cast<std::size_t>(k)])(i, j);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < m; ++c) M(r, c) += z(r) * z(c);
  }
  return M / static_cast<double>(W.rows());
}

Eigen::Index AlphaDesign::offset(int c) const {
  Eigen::Index off = 0;
  for (int k = 0; k < c; ++k) off += psi[static_cast<std::size_t>(k)]->cols();
  return off;
}

namespace {

void check_design(Eigen::Index n, const AlphaDesign& d) {
  if (d.jac == nullptr || static_cast<Eigen::Index>(d.jac->size()) != n || n == 0)
    throw ConfigError("kernels: Jacobian count must match the sample count");
  for (const auto* p : d.psi)
    if (p == nullptr || p->rows() != n) throw ConfigError("kernels: component features must cover every sample");
}

constexpr auto kDeps = residual_dependencies();

}  // namespace

Matrix moment_jacobian(const FeatureBlocks& phi, const AlphaDesign& design) {
  const Eigen::Index n = phi[0]->rows();
  check_rows(phi, n);
  check_design(n, design);
  const Eigen::Index D = phi[0]->cols();
  const Matrix zero = Matrix::Zero(D * kResidualDim, design.num_params());
  const auto& jac = *design.jac;
  Matrix s = chunked_sum(n, zero, [&](Eigen::Index b, Eigen::Index e, Matrix& acc) {
    Vector wts(e - b);
    for (int k = 0; k < kResidualDim; ++k) {
      for (int c = 0; c < kAlphaDim; ++c) {
        if (!kDeps[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]) continue;
        for (Eigen::Index i = b; i < e; ++i) wts(i - b) = jac[static_cast<std::size_t>(i)](k, c);
        const Matrix& psi = *design.psi[static_cast<std::size_t>(c)];
        acc.block(k * D, design.offset(c), D, psi.cols()).noalias() +=
            (phi[static_cast<std::size_t>(k)]->middleRows(b, e - b).array().colwise() * wts.array()).matrix().transpose() *
            psi.middleRows(b, e - b);
      }
    }
  });
  return s / static_cast<double>(n);
}

Matrix moment_jacobian_serial(const FeatureBlocks& phi, const AlphaDesign& design) {
  const Eigen::Index n = phi[0]->rows();
  check_rows(phi, n);
  check_design(n, design);
  const Eigen::Index D = phi[0]->cols();
  Matrix J = Matrix::Zero(D * kResidualDim, design.num_params());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& jac = (*design.jac)[static_cast<std::size_t>(i)];
    for (int k = 0; k < kResidualDim; ++k)
      for (int c = 0; c < kAlphaDim; ++c) {
        if (!kDeps[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]) continue;
        const Matrix& psi = *design.psi[static_cast<std::size_t>(c)];
        const Eigen::Index off = design.offset(c);
        for (Eigen::Index j = 0; j < D; ++j)
          for (Eigen::Index l = 0; l < psi.cols(); ++l) J(k * D + j, off + l) += jac(k, c) * (*phi[static_cast<std::size_t>(k)])(i, j) * psi(i, l);
      }
  }
  return J / static_cast<double>(n);
}

Vector pairing_gradient(const Matrix& F, const AlphaDesign& design) {
  const Eigen::Index n = F.rows();
  check_design(n, design);
  if (F.cols() != kResidualDim) throw ConfigError("kernels: adversary values must be n x 8");
  const auto& jac = *design.jac;
  const Vector zero = Vector::Zero(design.num_params());
  Vector s = chunked_sum(n, zero, [&](Eigen::Index b, Eigen::Index e, Vector& acc) {
    Vector wts(e - b);
    for (int c = 0; c < kAlphaDim; ++c) {
      for (Eigen::Index i = b; i < e; ++i) wts(i - b) = F.row(i).dot(jac[static_cast<std::size_t>(i)].col(c));
      const Matrix& psi = *design.psi[static_cast<std::size_t>(c)];
      acc.segment(design.offset(c), psi.cols()).noalias() += psi.middleRows(b, e - b).transpose() * wts;
    }
  });
  return s / static_cast<double>(n);
}

Vector pairing_gradient_serial(const Matrix& F, const AlphaDesign& design) {
  const Eigen::Index n = F.rows();
  check_design(n, design);
  Vector g = Vector::Zero(design.num_params());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& jac = (*design.jac)[static_cast<std::size_t>(i)];
    for (int c = 0; c < kAlphaDim; ++c) {
      double w = 0.0;
      for (int k = 0; k < kResidualDim; ++k) w += F(i, k) * jac(k, c);
      const Matrix& psi = *design.psi[static_cast<std::size_t>(c)];
      for (Eigen::Index l = 0; l < psi.cols(); ++l) g(design.offset(c) + l) += w * psi(i, l);
    }
  }
  return g / static_cast<double>(n);
}

namespace {

void check_kde(const Matrix& data, const Matrix& query, const Vector& bw) {
  if (data.rows() == 0) throw ConfigError("gaussian_kde: empty sample");
  if (data.cols() != query.cols() || bw.size() != data.cols())
    throw ConfigError("gaussian_kde: dimension mismatch");
  if (!(bw.array() > 0.0).all()) throw ConfigError("gaussian_kde: bandwidths must be positive");
}

double kde_norm(const Vector& bw, Eigen::Index n) {
  return 1.0 / (static_cast<double>(n) * std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(bw.size())) *
                bw.prod());
}

}  // namespace

Vector gaussian_kde(const Matrix& data, const Matrix& query, const Vector& bandwidths) {
  check_kde(data, query, bandwidths);
  const Matrix scaled = data.array().rowwise() / bandwidths.transpose().array();
  const Matrix qs = query.array().rowwise() / bandwidths.transpose().array();
  const double norm = kde_norm(bandwidths, data.rows());
  Vector out(query.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    const Vector d2 = (scaled.rowwise() - qs.row(q)).rowwise().squaredNorm();
    // The vectorized exp clamps large negative arguments instead of returning 0.
    out(q) = norm * (d2.array() < 1400.0).select((-0.5 * d2.array()).exp(), 0.0).sum();
  }
  return out;
}

Vector gaussian_kde_serial(const Matrix& data, const Matrix& query, const Vector& bandwidths) {
  check_kde(data, query, bandwidths);
  const double norm = kde_norm(bandwidths, data.rows());
  Vector out = Vector::Zero(query.rows());
  for (Eigen::Index q = 0; q < query.rows(); ++q)
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      double e = 0.0;
      for (Eigen::Index k = 0; k < data.cols(); ++k) {
        const double u = (query(q, k) - data(i, k)) / bandwidths(k);
        e += u * u;
      }
      out(q) += std::exp(-0.5 * e);
    }
  return out * norm;
}

}  // namespace ivpricing::kernels
