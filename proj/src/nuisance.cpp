#include "ivpricing/nuisance.hpp"
#include "ivpricing/json_util.hpp"

namespace ivpricing {

NuisanceAlpha::NuisanceAlpha(FeatureMapPtr x_map, FeatureMapPtr xg_map)
    : x_map_(std::move(x_map)), xg_map_(std::move(xg_map)) {
  if (!x_map_ || !xg_map_) throw ConfigError("NuisanceAlpha: feature maps required");
  if (xg_map_->input_dim() != x_map_->input_dim() + 1)
    throw ConfigError("NuisanceAlpha: the (x, g) map must take one more input than the x map");
  for (int c = 0; c < kAlphaDim; ++c)
    weights_[static_cast<std::size_t>(c)] = Vector::Zero(static_cast<Eigen::Index>(map_for(c)->size()));
}

void NuisanceAlpha::set_block(int c, Vector w) {
  if (w.size() != static_cast<Eigen::Index>(map_for(c)->size()))
    throw ConfigError("NuisanceAlpha: block size mismatch for " + std::string(component_name(c)));
  weights_[static_cast<std::size_t>(c)] = std::move(w);
}

Eigen::Index NuisanceAlpha::offset(int c) const {
  Eigen::Index off = 0;
  for (int k = 0; k < c; ++k) off += weights_[static_cast<std::size_t>(k)].size();
  return off;
}

Vector NuisanceAlpha::flat() const {
  Vector theta(num_params());
  for (int c = 0; c < kAlphaDim; ++c) theta.segment(offset(c), block(c).size()) = block(c);
  return theta;
}

void NuisanceAlpha::set_flat(const Vector& theta) {
  if (theta.size() != num_params()) throw ConfigError("NuisanceAlpha: parameter vector size mismatch");
  for (int c = 0; c < kAlphaDim; ++c)
    weights_[static_cast<std::size_t>(c)] = theta.segment(offset(c), block(c).size());
}

AlphaValues NuisanceAlpha::values(ConstVectorRef x, double g) const {
  const Vector fx = x_map_->features(x);
  Vector xg(x.size() + 1);
  xg << x, g;
  const Vector fxg = xg_map_->features(xg);
  AlphaValues a;
  for (int c = 0; c < kAlphaDim; ++c) a(c) = block(c).dot(c == kH2 ? fxg : fx);
  return a;
}

double NuisanceAlpha::component(int c, ConstVectorRef x, double g) const {
  if (c != kH2) return block(c).dot(x_map_->features(x));
  Vector xg(x.size() + 1);
  xg << x, g;
  return block(c).dot(xg_map_->features(xg));
}

double NuisanceAlpha::norm2() const {
  double s = 0.0;
  for (const auto& w : weights_) s += w.squaredNorm();
  return s;
}

NuisanceAlpha NuisanceAlpha::rescaled(const AlphaValues& factors, double g_scale) const {
  if (!(g_scale > 0.0)) throw ConfigError("NuisanceAlpha::rescaled: g_scale must be positive");
  NuisanceAlpha out = *this;
  out.xg_map_ = std::make_shared<FeatureMap>(xg_map_->with_rescaled_input(x_map_->input_dim(), g_scale));
  for (int c = 0; c < kAlphaDim; ++c) out.weights_[static_cast<std::size_t>(c)] *= factors(c);
  return out;
}

nlohmann::json NuisanceAlpha::to_json() const {
  nlohmann::json blocks = nlohmann::json::object();
  for (int c = 0; c < kAlphaDim; ++c) blocks[std::string(component_name(c))] = jsonu::vec(block(c));
  return {{"x_map", x_map_->to_json()}, {"xg_map", xg_map_->to_json()}, {"blocks", blocks}};
}

NuisanceAlpha NuisanceAlpha::from_json(const nlohmann::json& j) {
  jsonu::check_keys(j, {"x_map", "xg_map", "blocks"}, "nuisance");
  NuisanceAlpha a(std::make_shared<FeatureMap>(FeatureMap::from_json(j.at("x_map"))),
                  std::make_shared<FeatureMap>(FeatureMap::from_json(j.at("xg_map"))));
  const auto& blocks = j.at("blocks");
  for (int c = 0; c < kAlphaDim; ++c) {
    const std::string name(component_name(c));
    if (!blocks.contains(name)) throw ConfigError("nuisance: missing block '" + name + "'");
    a.set_block(c, jsonu::to_vector(blocks.at(name), name, static_cast<Eigen::Index>(a.map_for(c)->size())));
  }
  return a;
}

Matrix xg_inputs(const Dataset& data) {
  Matrix xg(data.x().rows(), data.x().cols() + 1);
  xg << data.x(), data.g();
  return xg;
}

DesignCache::DesignCache(const Dataset& data, const NuisanceAlpha& alpha)
    : phi_x(alpha.x_map()->feature_matrix(data.x())), phi_xg(alpha.xg_map()->feature_matrix(xg_inputs(data))) {}

Matrix alpha_values(const NuisanceAlpha& alpha, const DesignCache& cache) {
  Matrix v(cache.phi_x.rows(), kAlphaDim);
  for (int c = 0; c < kAlphaDim; ++c) v.col(c) = cache.for_component(c) * alpha.block(c);
  return v;
}

Matrix residual_matrix(const Dataset& data, const NuisanceAlpha& alpha, const DesignCache& cache) {
  const Matrix v = alpha_values(alpha, cache);
  Matrix w(v.rows(), kResidualDim);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const Observation z{data.y()(i), data.g()(i), data.p()(i)};
    w.row(i) = eval_W(z, v.row(i).transpose()).transpose();
  }
  return w;
}

}  // namespace ivpricing
