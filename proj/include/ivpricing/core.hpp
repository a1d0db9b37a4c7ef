#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ivpricing {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector2 = Eigen::Vector2d;
using ConstVectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Invalid configuration or parameters. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or unusable input data. The CLI maps this to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when the 2x2 identification system has a (numerically) zero determinant.
class DegenerateSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a conditional second-moment matrix cannot be inverted.
class SingularCovariance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an iterative fit produces a non-finite objective.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0, std::uint64_t d = 0) {
  std::uint64_t s = mix_seed(master);
  s = mix_seed(s ^ a);
  s = mix_seed(s ^ (b + 0x632be59bd9b4e019ULL));
  s = mix_seed(s ^ (c + 0x8cb92ba72f3d8dd7ULL));
  s = mix_seed(s ^ (d + 0x3c6ef372fe94f82bULL));
  return s;
}

inline double clip(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

/// Shortest decimal representation that round-trips an IEEE-754 double.
std::string format_double(double v);

}  // namespace ivpricing
