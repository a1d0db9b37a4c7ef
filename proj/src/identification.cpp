#include "ivpricing/identification.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace ivpricing {

AlphaValues TabulatedAlpha::at(std::size_t x_index, double g) const {
  AlphaValues a = rows.at(x_index);
  const auto& table = h2.at(x_index);
  const auto it = table.find(g);
  if (it == table.end()) throw ConfigError("TabulatedAlpha: instrument value outside the support");
  a(kH2) = it->second;
  return a;
}

AlphaFn TabulatedAlpha::bind(const DiscreteSCM& scm) const {
  return [this, &scm](const Vector& x, double g) { return at(scm.index_of(x), g); };
}

ConditionalLaw conditional_law(const DiscreteSCM& scm, std::size_t x_index) {
  const auto& point = scm.support().at(x_index);
  ConditionalLaw law;
  law.atoms = point.atoms;
  for (auto idx : point.atoms) law.weights.push_back(scm.atoms()[idx].prob / point.prob);
  return law;
}

namespace {

Observation observe(const ResolvedAtom& a) { return {a.y, a.g, a.p}; }

// E[P | X = x, G = g] for every g in the conditional support.
std::map<double, double> price_given_instrument(const DiscreteSCM& scm, std::size_t x_index) {
  std::map<double, std::pair<double, double>> acc;
  for (auto idx : scm.support()[x_index].atoms) {
    const auto& a = scm.atoms()[idx];
    acc[a.g].first += a.prob;
    acc[a.g].second += a.prob * a.p;
  }
  std::map<double, double> out;
  for (const auto& [g, ms] : acc) out[g] = ms.second / ms.first;
  return out;
}

}  // namespace

TabulatedAlpha true_nuisances(const DiscreteSCM& scm) {
  TabulatedAlpha t;
  const auto& atoms = scm.atoms();
  for (std::size_t xi = 0; xi < scm.support().size(); ++xi) {
    const auto law = conditional_law(scm, xi);
    const auto h2 = price_given_instrument(scm, xi);
    auto e2 = [&](const ResolvedAtom& a) { return a.p - h2.at(a.g); };
    AlphaValues v = AlphaValues::Zero();
    v(kBeta1) = law.expect(atoms, [](const ResolvedAtom& a) { return a.beta_p1; });
    v(kBeta2) = law.expect(atoms, [](const ResolvedAtom& a) { return a.beta_p2; });
    v(kH1) = law.expect(atoms, [](const ResolvedAtom& a) { return a.g; });
    v(kH3) = law.expect(atoms, [](const ResolvedAtom& a) { return a.g * a.g; });
    v(kH4) = law.expect(atoms, [&](const ResolvedAtom& a) { return e2(a) * a.y; });
    v(kH5) = law.expect(atoms, [&](const ResolvedAtom& a) { return a.p * e2(a); });
    v(kH6) = law.expect(atoms, [&](const ResolvedAtom& a) { return a.p * a.p * e2(a); });
    t.rows.push_back(v);
    t.h2.push_back(h2);
  }
  return t;
}

MomentSystem moment_system(const DiscreteSCM& scm, std::size_t x_index) {
  const auto& atoms = scm.atoms();
  const auto law = conditional_law(scm, x_index);
  const auto h2 = price_given_instrument(scm, x_index);
  const double h1 = law.expect(atoms, [](const ResolvedAtom& a) { return a.g; });

  auto e1 = [&](const ResolvedAtom& a) { return a.g - h1; };
  auto e2 = [&](const ResolvedAtom& a) { return a.p - h2.at(a.g); };
  auto lever = [&](const ResolvedAtom& a) { return a.g * e1(a); };  // G (G - E[G|X])
  const std::array<std::function<double(const ResolvedAtom&)>, 3> responses = {
      [&](const ResolvedAtom& a) { return e2(a) * a.y; },
      [&](const ResolvedAtom& a) { return e2(a) * a.p; },
      [&](const ResolvedAtom& a) { return e2(a) * a.p * a.p; },
  };

  MomentSystem ms;
  const double mean_lever = law.expect(atoms, lever);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& r = responses[k];
    ms.omega[k] = law.expect(atoms, [&](const ResolvedAtom& a) { return e1(a) * r(a); });
    ms.upsilon[k] = law.expect(atoms, [&](const ResolvedAtom& a) { return lever(a) * r(a); }) -
                    mean_lever * law.expect(atoms, r);
  }
  return ms;
}

std::pair<double, double> identify_beta(const MomentSystem& ms, double degeneracy_tol) {
  const double det = ms.determinant();
  if (!(std::abs(det) > degeneracy_tol))
    throw DegenerateSystem("identify_beta: |Omega2 Upsilon3 - Upsilon2 Omega3| = " +
                           format_double(std::abs(det)) + " is below tolerance");
  const auto& o = ms.omega;
  const auto& u = ms.upsilon;
  return {(o[0] * u[2] - o[2] * u[0]) / det, (o[1] * u[0] - o[0] * u[1]) / det};
}

ResidualVector conditional_moment(const DiscreteSCM& scm, const AlphaFn& alpha, std::size_t x_index) {
  const auto& point = scm.support().at(x_index);
  ResidualVector m = ResidualVector::Zero();
  for (auto idx : point.atoms) {
    const auto& a = scm.atoms()[idx];
    m += (a.prob / point.prob) * eval_W(observe(a), alpha(point.x, a.g));
  }
  return m;
}

Eigen::Matrix<double, kResidualDim, kResidualDim> conditional_second_moment(const DiscreteSCM& scm,
                                                                          const AlphaFn& alpha,
                                                                          std::size_t x_index) {
  const auto& point = scm.support().at(x_index);
  Eigen::Matrix<double, kResidualDim, kResidualDim> s = Eigen::Matrix<double, kResidualDim, kResidualDim>::Zero();
  for (auto idx : point.atoms) {
    const auto& a = scm.atoms()[idx];
    const ResidualVector w = eval_W(observe(a), alpha(point.x, a.g));
    s += (a.prob / point.prob) * w * w.transpose();
  }
  return s;
}

double phi_objective(const DiscreteSCM& scm, const AlphaFn& alpha) {
  constexpr double kRidgeFloor = 1e-12;
  constexpr double kSingularRatio = 1e-10;
  const auto truth = true_nuisances(scm);
  const AlphaFn alpha0 = truth.bind(scm);
  double total = 0.0;
  for (std::size_t xi = 0; xi < scm.support().size(); ++xi) {
    using Mat8 = Eigen::Matrix<double, kResidualDim, kResidualDim>;
    Mat8 sigma = conditional_second_moment(scm, alpha0, xi);
    Eigen::SelfAdjointEigenSolver<Mat8> eig(sigma, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > kSingularRatio * std::max(top, 1.0)))
      throw SingularCovariance("phi_objective: Sigma(x) is singular at support point " + std::to_string(xi));
    sigma.diagonal().array() += kRidgeFloor;
    const ResidualVector m = conditional_moment(scm, alpha, xi);
    total += scm.support()[xi].prob * m.dot(sigma.ldlt().solve(m));
  }
  return total;
}

}  // namespace ivpricing
