#pragma once

#include "ivpricing/dataset.hpp"
#include "ivpricing/policy.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ivpricing {

struct LoanRecord {
  double monthly_payment = 0.0;
  int term = 1;  // months
  double monthly_libor = 0.0;
  double loan_amount = 1.0;
  double apr = 0.0;  // annual; the instrument
  int contracted = 0;
  Vector x;  // feature columns, in file order

  void validate() const;
};

struct LoanTable {
  std::vector<std::string> feature_names;
  std::vector<LoanRecord> records;

  [[nodiscard]] std::size_t size() const { return records.size(); }
  [[nodiscard]] Matrix features() const;
  [[nodiscard]] Vector prices() const;
  [[nodiscard]] std::size_t feature_index(const std::string& name) const;
};

/// Net present value of the payments minus the amount lent:
/// MP * sum_{tau=1}^{term} (1 + libor)^(-tau) - amount.
double compute_price(const LoanRecord& r);

/// Header `monthly_payment,term,monthly_libor,loan_amount,apr,contracted,<features>`.
LoanTable read_loan_csv(std::istream& in);
LoanTable read_loan_csv(const std::string& path);
void write_loan_csv(std::ostream& out, const LoanTable& t);
void write_loan_csv(const std::string& path, const LoanTable& t);

/// Acceptance probability 1 / (1 + exp(-alpha.z - (beta.z) p)), z = (1, x).
struct DemandModel {
  Vector alpha_coef, beta_coef;  // intercept first
  double l2_penalty = 0.0;

  [[nodiscard]] double logit(ConstVectorRef x, double p) const;
  [[nodiscard]] double acceptance(ConstVectorRef x, double p) const;
};

/// p * acceptance(x, p).
double expected_revenue(const DemandModel& model, ConstVectorRef x, double p);

struct DemandFitOptions {
  std::vector<double> penalties{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  int folds = 5;
  std::uint64_t seed = 0;
  double penalty_floor = 1e-8;  // applied to every candidate; keeps separated data finite
  int max_iter = 200;
  double grad_tol = 1e-8;
};

/// Minimizes mean log-loss + penalty * |theta|^2 by damped Newton for one penalty.
DemandModel fit_demand_penalized(const LoanTable& t, double penalty, const DemandFitOptions& opt = {});

/// Penalty chosen by k-fold cross-validated log-loss, then refit on all records.
DemandModel fit_demand(const LoanTable& t, const DemandFitOptions& opt = {});

struct SyntheticLoanConfig {
  std::size_t n = 5000;
  std::uint64_t seed = 0;
  double confounding = 0.2;  // logit shift per sd of the latent competitor rate
  DemandModel demand;        // planted; empty means planted_demand()
};

/// Planted acceptance model on the synthetic features (fico_z, term_z, amount_z, state_z, days_z).
DemandModel planted_demand();

/// Features are standardized draws; APR rises with credit risk plus a latent competitor rate that
/// also shifts acceptance; contracted ~ Bernoulli of the planted demand (plus the confounder).
LoanTable generate_synthetic_loans(const SyntheticLoanConfig& config);

/// y = contracted * price, x = features, g = apr, p = price.
Dataset loans_to_dataset(const LoanTable& t);

/// Evenly spaced [lo, hi] with `points` entries.
Vector linspace(double lo, double hi, int points);

struct RevenueColumn {
  std::string name;
  double revenue = 0.0;
};

/// Mean expected revenue under the demand model: first the per-record grid argmax ("optimal"),
/// then the recorded prices ("historical"), then each named policy.
std::vector<RevenueColumn> evaluate_on_demand(const DemandModel& model,
                                              const std::vector<std::pair<std::string, PricingPolicy>>& policies,
                                              const LoanTable& t, const Vector& price_grid);

/// Mean policy price with feature `feature` of every record set to each grid value.
Vector partial_dependence(const PricingPolicy& policy, const LoanTable& t, std::size_t feature, const Vector& grid);

}  // namespace ivpricing
