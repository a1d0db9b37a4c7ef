#include "ivpricing/complexity.hpp"
#include "ivpricing/features.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ivpricing;

TEST_CASE("random Fourier features approximate the Gaussian kernel") {
  const Vector x = Vector2(0.3, -0.2), y = Vector2(-0.5, 0.4);
  const double bw = 0.8;
  const double exact = std::exp(-(x - y).squaredNorm() / (2 * bw * bw));
  double avg = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FeatureMap m(2, 2000, bw, s);
    avg += m.features(x).dot(m.features(y));
  }
  avg /= 20.0;
  CHECK(std::abs(avg - exact) <= 5.0 / std::sqrt(2000.0));
}

TEST_CASE("feature norms are bounded and seeds reproduce") {
  const FeatureMap m(2, 50, 1.0, 9);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0, 3);
  for (int i = 0; i < 100; ++i) CHECK(m.features(Vector2(N(rng), N(rng))).squaredNorm() <= 2.0 + 1e-12);
  const FeatureMap again(2, 50, 1.0, 9);
  CHECK(m.frequencies() == again.frequencies());
  CHECK(m.phases() == again.phases());
  const FeatureMap other(2, 50, 1.0, 10);
  CHECK(m.frequencies() != other.frequencies());
}

TEST_CASE("intercept, input scale and JSON") {
  const FeatureMap m(2, 5, 1.3, 4, Vector2(2.0, 0.5), true);
  CHECK(m.size() == 6);
  const Vector x = Vector2(0.4, 1.1);
  const Vector phi = m.features(x);
  CHECK(phi(0) == 1.0);
  const FeatureMap back = FeatureMap::from_json(m.to_json());
  CHECK(back.features(x) == phi);
  Matrix xs(2, 2);
  xs << 0.4, 1.1, -1, 2;
  CHECK(m.feature_matrix(xs).row(0).transpose() == phi);
  // Scaling input coordinate 1 by c and the data by c leaves features unchanged.
  const FeatureMap scaled = m.with_rescaled_input(1, 3.0);
  CHECK((scaled.features(Vector2(0.4, 3.3)) - phi).norm() < 1e-12);
}

TEST_CASE("ScalarFunction is linear in its weights") {
  auto map = std::make_shared<FeatureMap>(2, 8, 1.0, 1);
  const Vector x = Vector2(0.1, 0.2);
  const ScalarFunction zero(map);
  CHECK(zero.eval(x) == 0.0);
  CHECK(zero.norm2() == 0.0);
  const Vector w1 = Vector::LinSpaced(8, -1, 1), w2 = Vector::Ones(8);
  const ScalarFunction f(map, w1), g(map, w2), c(map, 3.0 * w1), sum(map, w1 + w2);
  CHECK(c.eval(x) == doctest::Approx(3 * f.eval(x)));
  CHECK(c.norm2() == doctest::Approx(9 * f.norm2()));
  CHECK(sum.eval(x) == doctest::Approx(f.eval(x) + g.eval(x)));
}

TEST_CASE("VectorAdversary: norm additivity and the (x, g) component") {
  auto xm = std::make_shared<FeatureMap>(2, 6, 1.0, 1, Vector{}, true);
  auto xgm = std::make_shared<FeatureMap>(3, 6, 1.0, 2, Vector{}, true);
  Matrix w = Matrix::Random(7, 8);
  const VectorAdversary f(xm, xgm, w);
  double sum = 0.0;
  for (int k = 0; k < 8; ++k) sum += f.component(k).norm2();
  CHECK(f.norm2() == doctest::Approx(sum));
  const Vector x = Vector2(0.5, -0.5);
  const ResidualVector v = f.eval(x, 1.5);
  CHECK(v(0) == doctest::Approx(w.col(0).dot(xm->features(x))));
  CHECK(v(1) == doctest::Approx(w.col(1).dot(xgm->features(Eigen::Vector3d(0.5, -0.5, 1.5)))));
  CHECK_THROWS_AS(VectorAdversary(xm, std::make_shared<FeatureMap>(3, 5, 1.0, 2)), ConfigError);
}

TEST_CASE("rademacher_bound: closed forms") {
  const double d = 0.1;
  std::vector<double> flat(7, d * d);
  CHECK(rademacher_bound(flat, 2.0, 100, d) == doctest::Approx(std::sqrt(2 * 2.0 / 100) * d * std::sqrt(7.0)));
  CHECK(rademacher_bound(std::vector<double>(5, 0.0), 1.0, 10, 0.1) == 0.0);
  CHECK_THROWS_AS(rademacher_bound(std::vector<double>{0.1, 0.2}, 1.0, 10, 0.1), ConfigError);
}

TEST_CASE("rademacher_bound: polynomial spectrum matches direct summation") {
  // gamma = 1: lambda_j = j^-2, 10^6 terms summed directly, smallest first.
  const double d = 0.1, d2 = d * d;
  const std::size_t N = 1000000;
  double s = 0.0;
  for (std::size_t j = N; j >= 1; --j) s += std::min(1.0 / (static_cast<double>(j) * static_cast<double>(j)), d2);
  const double direct = std::sqrt(2.0 / 1000.0) * std::sqrt(s);
  CHECK(std::abs(rademacher_bound(PolynomialSpectrum(1.0, 1.0, N), 1.0, 1000, d) - direct) <= 1e-9);

  // The infinite tail only adds sum_{j > N} j^-2 ~ 1/N.
  const double inf = rademacher_bound(PolynomialSpectrum(1.0), 1.0, 1000, d);
  const double with_tail = std::sqrt(2.0 / 1000.0) * std::sqrt(s + 1.0 / N - 0.5 / (double(N) * N));
  CHECK(inf == doctest::Approx(with_tail).epsilon(1e-10));
}

TEST_CASE("critical_radius: fixed point, B scaling, errors") {
  const PolynomialSpectrum spec(1.0);
  const double r = critical_radius(spec, 1.0, 10000);
  CHECK(rademacher_bound(spec, 1.0, 10000, r) == doctest::Approx(r * r).epsilon(1e-6));
  const double r2 = critical_radius(spec, 2.0, 10000);
  CHECK(r2 > r);
  CHECK(rademacher_bound(spec, 2.0, 10000, r2) == doctest::Approx(r2 * r2).epsilon(1e-6));
  CHECK_THROWS_AS(critical_radius(std::vector<double>(10, 0.0), 1.0, 100), ConfigError);
  CHECK_THROWS_AS(PolynomialSpectrum(0.4), ConfigError);
}

TEST_CASE("critical_radius: log-log slope in n") {
  for (double gamma : {1.0, 2.0}) {
    const PolynomialSpectrum spec(gamma);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double n : {1e3, 1e4, 1e5, 1e6}) {
      const double lx = std::log(n), ly = std::log(critical_radius(spec, 1.0, static_cast<std::size_t>(n), 1e-12));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double slope = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
    CHECK(std::abs(slope + gamma / (2 * gamma + 1)) <= 0.05);
  }
}
