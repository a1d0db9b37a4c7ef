#pragma once

#include "ivpricing/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace ivpricing {

/// Latent draws kept only for diagnostics. Estimators never read these.
struct HiddenColumns {
  Vector u1, u2, eps_y, eps_p;
};

/// One observed tuple (Y, X, G, P).
struct Sample {
  double y = 0.0;
  Vector x;
  double g = 0.0;
  double p = 0.0;
};

/// Column-major store of n observed samples. Immutable once constructed.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Vector y, Matrix x, Vector g, Vector p, std::uint64_t seed = 0,
          std::string params_fingerprint = {}, std::optional<HiddenColumns> hidden = std::nullopt);

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(y_.size()); }
  [[nodiscard]] std::size_t covariate_dim() const { return static_cast<std::size_t>(x_.cols()); }

  [[nodiscard]] const Vector& y() const { return y_; }
  [[nodiscard]] const Matrix& x() const { return x_; }
  [[nodiscard]] const Vector& g() const { return g_; }
  [[nodiscard]] const Vector& p() const { return p_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const std::string& params_fingerprint() const { return fingerprint_; }
  [[nodiscard]] const std::optional<HiddenColumns>& hidden() const { return hidden_; }

  [[nodiscard]] Sample sample(std::size_t i) const;

  /// Rows selected by index, in the given order. Hidden columns are dropped.
  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& rows) const;

  /// Same observations with y, p and g multiplied by the given factors.
  [[nodiscard]] Dataset rescaled(double y_scale, double p_scale, double g_scale) const;

 private:
  Vector y_;
  Matrix x_;
  Vector g_;
  Vector p_;
  std::uint64_t seed_ = 0;
  std::string fingerprint_;
  std::optional<HiddenColumns> hidden_;
};

/// Writes `y,x1,...,xd,g,p` (plus `u1,u2,eps_y,eps_p` when `with_hidden` and present).
void write_dataset_csv(std::ostream& out, const Dataset& data, bool with_hidden = false);
void write_dataset_csv(const std::string& path, const Dataset& data, bool with_hidden = false);

/// Reads the estimation CSV. Diagnostic columns, if present, are ignored.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);

}  // namespace ivpricing
