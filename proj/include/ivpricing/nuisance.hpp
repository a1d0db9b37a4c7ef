#pragma once

#include "ivpricing/core.hpp"
#include "ivpricing/dataset.hpp"
#include "ivpricing/features.hpp"
#include "ivpricing/residuals.hpp"

#include <json.hpp>

#include <array>

namespace ivpricing {

/// alpha = (beta1, beta2, h1, ..., h6) with every component linear in its own features.
/// h2 reads the concatenated (x, g) input through `xg_map`; all others read x through `x_map`.
class NuisanceAlpha {
 public:
  NuisanceAlpha() = default;
  NuisanceAlpha(FeatureMapPtr x_map, FeatureMapPtr xg_map);  // all weights zero

  [[nodiscard]] const FeatureMapPtr& x_map() const { return x_map_; }
  [[nodiscard]] const FeatureMapPtr& xg_map() const { return xg_map_; }
  [[nodiscard]] const FeatureMapPtr& map_for(int c) const { return c == kH2 ? xg_map_ : x_map_; }

  [[nodiscard]] const Vector& block(int c) const { return weights_[static_cast<std::size_t>(c)]; }
  void set_block(int c, Vector w);

  /// Offset of component c inside the flattened parameter vector.
  [[nodiscard]] Eigen::Index offset(int c) const;
  [[nodiscard]] Eigen::Index num_params() const { return offset(kAlphaDim); }
  [[nodiscard]] Vector flat() const;
  void set_flat(const Vector& theta);

  [[nodiscard]] AlphaValues values(ConstVectorRef x, double g) const;
  [[nodiscard]] double component(int c, ConstVectorRef x, double g) const;

  /// Sum of squared weights over all components.
  [[nodiscard]] double norm2() const;

  /// Multiplies component c by factors[c]; the g input of h2 is divided by g_scale.
  [[nodiscard]] NuisanceAlpha rescaled(const AlphaValues& factors, double g_scale) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static NuisanceAlpha from_json(const nlohmann::json& j);

 private:
  FeatureMapPtr x_map_;
  FeatureMapPtr xg_map_;
  std::array<Vector, kAlphaDim> weights_;
};

/// Rows [x_i, g_i] of the dataset.
Matrix xg_inputs(const Dataset& data);

/// Features of every sample for both maps, computed once per fit.
struct DesignCache {
  Matrix phi_x;   // n x size(x_map)
  Matrix phi_xg;  // n x size(xg_map)

  DesignCache() = default;
  DesignCache(const Dataset& data, const NuisanceAlpha& alpha);
  [[nodiscard]] const Matrix& for_component(int c) const { return c == kH2 ? phi_xg : phi_x; }
};

/// n x 8 matrix of nuisance values at every sample.
Matrix alpha_values(const NuisanceAlpha& alpha, const DesignCache& cache);

/// n x 8 matrix whose row i is W(Z_i; alpha)^T.
Matrix residual_matrix(const Dataset& data, const NuisanceAlpha& alpha, const DesignCache& cache);

}  // namespace ivpricing
