#pragma once

#include "ivpricing/core.hpp"
#include "ivpricing/dataset.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ivpricing {

/// Variables a coefficient table may be indexed by.
enum class Latent { X, U1, U2, G };

/// One support point of the joint law of (X, U1, U2, G, eps_p, eps_y).
struct Atom {
  Vector x;
  double u1 = 0.0;
  double u2 = 0.0;
  double g = 0.0;
  double eps_p = 0.0;
  double eps_y = 0.0;
  double prob = 0.0;
};

/// A coefficient function tabulated on the support. The key of an entry is the
/// concatenation of the values of `keys`, in order, with X expanded to its coordinates.
struct CoefficientTable {
  std::vector<Latent> keys;
  std::map<std::vector<double>, double> values;
};

/// Unvalidated description of a finite structural model.
struct DiscreteSCMSpec {
  std::vector<Atom> atoms;
  CoefficientTable beta_p1;  // may reference x, u1
  CoefficientTable beta_p2;  // x, u1
  CoefficientTable beta_g;   // x, u1, g
  CoefficientTable beta_ux;  // x, u1, u2
  CoefficientTable alpha_g;  // x, u2, g
  CoefficientTable alpha_ux; // x, u2
};

/// An atom with its coefficient values, price and revenue resolved.
struct ResolvedAtom {
  std::size_t x_index = 0;
  double u1 = 0.0, u2 = 0.0, g = 0.0, eps_p = 0.0, eps_y = 0.0, prob = 0.0;
  double beta_p1 = 0.0, beta_p2 = 0.0, beta_g = 0.0, beta_ux = 0.0, alpha_g = 0.0, alpha_ux = 0.0;
  double p = 0.0;
  double y = 0.0;
};

struct SupportPoint {
  Vector x;
  double prob = 0.0;
  std::vector<std::size_t> atoms;  // indices into DiscreteSCM::atoms()
};

/// A validated finite-support model. Price and revenue follow the structural equations
///   P = alpha_g + alpha_ux + eps_p,   Y = beta_p1 P + beta_p2 P^2 + beta_g + beta_ux + eps_y.
class DiscreteSCM {
 public:
  [[nodiscard]] const std::vector<ResolvedAtom>& atoms() const { return atoms_; }
  [[nodiscard]] const std::vector<SupportPoint>& support() const { return support_; }
  [[nodiscard]] std::size_t covariate_dim() const { return dim_; }

  /// Index of the support point equal to x; throws if x is not in the support.
  [[nodiscard]] std::size_t index_of(const Vector& x) const;

 private:
  friend DiscreteSCM build_discrete_scm(const DiscreteSCMSpec& spec);
  std::vector<ResolvedAtom> atoms_;
  std::vector<SupportPoint> support_;
  std::size_t dim_ = 0;
};

/// Validates the spec and resolves it. Rejects (ConfigError): masses not summing to one,
/// tables keyed by a latent they may not reference or missing an entry, G dependent on U
/// given X, U1 dependent on U2 given (X, G), price noise dependent on U1 given (X, U2, G),
/// noise with non-zero conditional mean, and a price/confounder covariance
/// Cov(alpha_g + alpha_ux, beta_ux | X, G) that varies with G.
DiscreteSCM build_discrete_scm(const DiscreteSCMSpec& spec);

/// Independent discrete marginals at one covariate value; used to assemble product models.
struct DiscreteMarginal {
  std::vector<double> values;
  std::vector<double> probs;
};

struct ProductSupport {
  Vector x;
  double prob = 0.0;
  DiscreteMarginal g, u1, u2, eps_p, eps_y;
};

/// Structural coefficient functions with the signatures the factorization allows.
struct StructuralFunctions {
  std::function<double(const Vector& x, double u1)> beta_p1;
  std::function<double(const Vector& x, double u1)> beta_p2;
  std::function<double(const Vector& x, double u1, double g)> beta_g;
  std::function<double(const Vector& x, double u1, double u2)> beta_ux;
  std::function<double(const Vector& x, double u2, double g)> alpha_g;
  std::function<double(const Vector& x, double u2)> alpha_ux;
};

/// Spec whose latents are independent given X and whose tables are tabulated from `fns`.
DiscreteSCMSpec make_product_spec(const std::vector<ProductSupport>& support, const StructuralFunctions& fns);

DiscreteSCMSpec discrete_scm_spec_from_json(const nlohmann::json& j);
nlohmann::json discrete_scm_spec_to_json(const DiscreteSCMSpec& spec);
DiscreteSCM load_discrete_scm(const std::string& path);

/// n i.i.d. draws of the observed tuple (atoms sampled by probability).
Dataset sample_discrete_dataset(const DiscreteSCM& scm, std::size_t n, std::uint64_t seed);

}  // namespace ivpricing
