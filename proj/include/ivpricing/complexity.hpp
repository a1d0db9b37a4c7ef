#pragma once

#include "ivpricing/core.hpp"

#include <cstddef>
#include <vector>

namespace ivpricing {

/// A nonincreasing, nonnegative kernel eigenvalue sequence lambda_1 >= lambda_2 >= ...
class EigenSpectrum {
 public:
  virtual ~EigenSpectrum() = default;
  /// lambda_j for j >= 1.
  [[nodiscard]] virtual double value(std::size_t j) const = 0;
  /// Number of terms; 0 means infinite.
  [[nodiscard]] virtual std::size_t length() const = 0;
  /// sum_{j > J} lambda_j.
  [[nodiscard]] virtual double tail_sum(std::size_t J) const = 0;
};

/// Finite sequence; throws ConfigError unless nonincreasing and nonnegative.
class FiniteSpectrum final : public EigenSpectrum {
 public:
  explicit FiniteSpectrum(std::vector<double> eigenvalues);
  [[nodiscard]] double value(std::size_t j) const override;
  [[nodiscard]] std::size_t length() const override { return values_.size(); }
  [[nodiscard]] double tail_sum(std::size_t J) const override;

 private:
  std::vector<double> values_;
  std::vector<double> suffix_;  // suffix_[k] = sum_{i >= k} values_[i]
};

/// lambda_j = scale * j^(-2 gamma), optionally truncated after `max_terms` terms.
/// The infinite tail uses an Euler-Maclaurin expansion of the Hurwitz zeta function.
class PolynomialSpectrum final : public EigenSpectrum {
 public:
  PolynomialSpectrum(double gamma, double scale = 1.0, std::size_t max_terms = 0);
  [[nodiscard]] double value(std::size_t j) const override;
  [[nodiscard]] std::size_t length() const override { return max_terms_; }
  [[nodiscard]] double tail_sum(std::size_t J) const override;

 private:
  double gamma_;
  double scale_;
  std::size_t max_terms_;
};

/// sqrt(2B/n) * sqrt(sum_j min(lambda_j, delta^2)).
double rademacher_bound(const EigenSpectrum& eigenvalues, double B, std::size_t n, double delta);
double rademacher_bound(const std::vector<double>& eigenvalues, double B, std::size_t n, double delta);

/// Solves rademacher_bound(delta) = delta^2 on (0, 1] by bisection to `tol`.
/// Throws ConfigError when there is no positive crossing in the interval.
double critical_radius(const EigenSpectrum& eigenvalues, double B, std::size_t n, double tol = 1e-8);
double critical_radius(const std::vector<double>& eigenvalues, double B, std::size_t n, double tol = 1e-8);

}  // namespace ivpricing
