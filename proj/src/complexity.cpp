#include "ivpricing/complexity.hpp"

#include <algorithm>
#include <cmath>

namespace ivpricing {

namespace {

// sum_{j >= N} j^(-s), s > 1, N >= 1, via direct summation up to a cutoff and an
// Euler-Maclaurin remainder beyond it.
double zeta_tail(double s, std::size_t N) {
  constexpr std::size_t kCutoff = 64;
  double sum = 0.0;
  std::size_t j = N;
  for (; j < kCutoff; ++j) sum += std::pow(static_cast<double>(j), -s);
  const double m = static_cast<double>(j);
  const double t0 = std::pow(m, 1.0 - s) / (s - 1.0);
  const double t1 = 0.5 * std::pow(m, -s);
  const double t2 = s * std::pow(m, -s - 1.0) / 12.0;
  const double t3 = -s * (s + 1.0) * (s + 2.0) * std::pow(m, -s - 3.0) / 720.0;
  const double t4 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * std::pow(m, -s - 5.0) / 30240.0;
  return sum + t0 + t1 + t2 + t3 + t4;
}

double kahan_range(double s, std::size_t from, std::size_t to) {  // sum_{j=from}^{to} j^-s, backwards
  double sum = 0.0, comp = 0.0;
  for (std::size_t j = to; j >= from && j > 0; --j) {
    const double y = std::pow(static_cast<double>(j), -s) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

// Number of leading eigenvalues >= threshold.
std::size_t count_at_least(const EigenSpectrum& spec, double threshold) {
  if (spec.length() > 0) {
    std::size_t lo = 0, hi = spec.length();  // answer in [lo, hi]
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo + 1) / 2;
      if (spec.value(mid) >= threshold) lo = mid;
      else hi = mid - 1;
    }
    return lo;
  }
  // Infinite: exponential then binary search; value() must eventually fall below threshold.
  if (threshold <= 0.0) throw ConfigError("rademacher_bound: delta must be positive");
  std::size_t hi = 1;
  while (spec.value(hi) >= threshold) {
    hi *= 2;
    if (hi > (std::size_t{1} << 62)) throw ConfigError("rademacher_bound: spectrum does not decay");
  }
  std::size_t lo = hi / 2;  // value(lo) >= threshold or lo == 0
  while (lo + 1 < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (spec.value(mid) >= threshold) lo = mid;
    else hi = mid;
  }
  return lo;
}

}  // namespace

FiniteSpectrum::FiniteSpectrum(std::vector<double> eigenvalues) : values_(std::move(eigenvalues)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
      throw ConfigError("eigenvalues must be finite and nonnegative");
    if (i > 0 && values_[i] > values_[i - 1]) throw ConfigError("eigenvalues must be nonincreasing");
  }
  suffix_.assign(values_.size() + 1, 0.0);
  for (std::size_t i = values_.size(); i-- > 0;) suffix_[i] = suffix_[i + 1] + values_[i];
}

double FiniteSpectrum::value(std::size_t j) const {
  if (j == 0) throw ConfigError("eigenvalue index starts at 1");
  return j <= values_.size() ? values_[j - 1] : 0.0;
}

double FiniteSpectrum::tail_sum(std::size_t J) const { return J >= values_.size() ? 0.0 : suffix_[J]; }

PolynomialSpectrum::PolynomialSpectrum(double gamma, double scale, std::size_t max_terms)
    : gamma_(gamma), scale_(scale), max_terms_(max_terms) {
  if (!(gamma > 0.5)) throw ConfigError("PolynomialSpectrum: gamma must exceed 1/2 for a summable sequence");
  if (!(scale >= 0.0)) throw ConfigError("PolynomialSpectrum: scale must be nonnegative");
}

double PolynomialSpectrum::value(std::size_t j) const {
  if (j == 0) throw ConfigError("eigenvalue index starts at 1");
  if (max_terms_ > 0 && j > max_terms_) return 0.0;
  return scale_ * std::pow(static_cast<double>(j), -2.0 * gamma_);
}

double PolynomialSpectrum::tail_sum(std::size_t J) const {
  const double s = 2.0 * gamma_;
  if (max_terms_ == 0) return scale_ * zeta_tail(s, J + 1);
  if (J >= max_terms_) return 0.0;
  if (max_terms_ - J <= 4'000'000) return scale_ * kahan_range(s, J + 1, max_terms_);
  return scale_ * (zeta_tail(s, J + 1) - zeta_tail(s, max_terms_ + 1));
}

double rademacher_bound(const EigenSpectrum& eigenvalues, double B, std::size_t n, double delta) {
  if (!(delta > 0.0)) throw ConfigError("rademacher_bound: delta must be positive");
  if (!(B >= 0.0) || n == 0) throw ConfigError("rademacher_bound: need B >= 0 and n >= 1");
  const double d2 = delta * delta;
  const std::size_t head = count_at_least(eigenvalues, d2);
  const double sum = static_cast<double>(head) * d2 + eigenvalues.tail_sum(head);
  return std::sqrt(2.0 * B / static_cast<double>(n)) * std::sqrt(sum);
}

double rademacher_bound(const std::vector<double>& eigenvalues, double B, std::size_t n, double delta) {
  return rademacher_bound(FiniteSpectrum(eigenvalues), B, n, delta);
}

double critical_radius(const EigenSpectrum& eigenvalues, double B, std::size_t n, double tol) {
  auto gap = [&](double delta) { return rademacher_bound(eigenvalues, B, n, delta) - delta * delta; };
  double lo = 1e-12, hi = 1.0;
  if (!(gap(lo) > 0.0)) throw ConfigError("critical_radius: bound never exceeds delta^2 on (0, 1]");
  if (gap(hi) > 0.0) throw ConfigError("critical_radius: no crossing in (0, 1]");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (gap(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double critical_radius(const std::vector<double>& eigenvalues, double B, std::size_t n, double tol) {
  return critical_radius(FiniteSpectrum(eigenvalues), B, n, tol);
}

}  // namespace ivpricing
