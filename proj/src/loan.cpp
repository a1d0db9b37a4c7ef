#include "ivpricing/loan.hpp"
#include "ivpricing/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

namespace ivpricing {

void LoanRecord::validate() const {
  if (term < 1) throw DataError("loan record: term must be at least 1");
  if (!(monthly_libor >= 0.0) || !(apr >= 0.0)) throw DataError("loan record: rates must be nonnegative");
  if (!(loan_amount > 0.0)) throw DataError("loan record: amount must be positive");
  if (!std::isfinite(monthly_payment)) throw DataError("loan record: monthly payment must be finite");
  if (contracted != 0 && contracted != 1) throw DataError("loan record: contracted must be 0 or 1");
}

Matrix LoanTable::features() const {
  const auto d = static_cast<Eigen::Index>(feature_names.size());
  Matrix m(static_cast<Eigen::Index>(records.size()), d);
  for (std::size_t i = 0; i < records.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = records[i].x.transpose();
  return m;
}

Vector LoanTable::prices() const {
  Vector p(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) p(static_cast<Eigen::Index>(i)) = compute_price(records[i]);
  return p;
}

std::size_t LoanTable::feature_index(const std::string& name) const {
  const auto it = std::find(feature_names.begin(), feature_names.end(), name);
  if (it == feature_names.end()) throw ConfigError("unknown loan feature '" + name + "'");
  return static_cast<std::size_t>(it - feature_names.begin());
}

double compute_price(const LoanRecord& r) {
  r.validate();
  double discount = 0.0, f = 1.0;
  const double v = 1.0 / (1.0 + r.monthly_libor);
  for (int tau = 1; tau <= r.term; ++tau) {
    f *= v;
    discount += f;
  }
  return r.monthly_payment * discount - r.loan_amount;
}

namespace {

const std::vector<std::string> kFixed{"monthly_payment", "term", "monthly_libor", "loan_amount", "apr", "contracted"};

int parse_int(const std::string& cell, const char* what) {
  const double v = csv::parse_double(cell, what);
  if (v != std::floor(v)) throw DataError(std::string("loan CSV: ") + what + " must be an integer");
  return static_cast<int>(v);
}

}  // namespace

LoanTable read_loan_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  if (t.header.size() < kFixed.size() || !std::equal(kFixed.begin(), kFixed.end(), t.header.begin()))
    throw DataError("loan CSV: header must start with monthly_payment,term,monthly_libor,loan_amount,apr,contracted");
  LoanTable out;
  out.feature_names.assign(t.header.begin() + static_cast<std::ptrdiff_t>(kFixed.size()), t.header.end());
  const auto d = static_cast<Eigen::Index>(out.feature_names.size());
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw DataError("loan CSV: ragged row");
    LoanRecord r;
    r.monthly_payment = csv::parse_double(row[0], "monthly_payment");
    r.term = parse_int(row[1], "term");
    r.monthly_libor = csv::parse_double(row[2], "monthly_libor");
    r.loan_amount = csv::parse_double(row[3], "loan_amount");
    r.apr = csv::parse_double(row[4], "apr");
    r.contracted = parse_int(row[5], "contracted");
    r.x.resize(d);
    for (Eigen::Index k = 0; k < d; ++k)
      r.x(k) = csv::parse_double(row[kFixed.size() + static_cast<std::size_t>(k)], "feature");
    r.validate();
    out.records.push_back(std::move(r));
  }
  return out;
}

LoanTable read_loan_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_loan_csv(in);
}

void write_loan_csv(std::ostream& out, const LoanTable& t) {
  for (std::size_t k = 0; k < kFixed.size(); ++k) out << (k ? "," : "") << kFixed[k];
  for (const auto& name : t.feature_names) out << ',' << name;
  out << '\n';
  for (const auto& r : t.records) {
    out << format_double(r.monthly_payment) << ',' << r.term << ',' << format_double(r.monthly_libor) << ','
        << format_double(r.loan_amount) << ',' << format_double(r.apr) << ',' << r.contracted;
    for (double v : r.x) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_loan_csv(const std::string& path, const LoanTable& t) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_loan_csv(out, t);
}

double DemandModel::logit(ConstVectorRef x, double p) const {
  if (x.size() + 1 != alpha_coef.size() || alpha_coef.size() != beta_coef.size())
    throw ConfigError("demand model: feature dimension mismatch");
  const double a = alpha_coef(0) + alpha_coef.tail(x.size()).dot(x);
  const double b = beta_coef(0) + beta_coef.tail(x.size()).dot(x);
  return a + b * p;
}

double DemandModel::acceptance(ConstVectorRef x, double p) const {
  const double eta = logit(x, p);
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

double expected_revenue(const DemandModel& model, ConstVectorRef x, double p) { return p * model.acceptance(x, p); }

namespace {

// Rows (z, z p) with z = (1, x).
Matrix demand_design(const LoanTable& t, const std::vector<std::size_t>& rows) {
  const auto d = static_cast<Eigen::Index>(t.feature_names.size()) + 1;
  Matrix A(static_cast<Eigen::Index>(rows.size()), 2 * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const LoanRecord& r = t.records[rows[i]];
    Vector z(d);
    z << 1.0, r.x;
    const double p = compute_price(r);
    A.row(static_cast<Eigen::Index>(i)) << z.transpose(), p * z.transpose();
  }
  return A;
}

Vector outcomes(const LoanTable& t, const std::vector<std::size_t>& rows) {
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = t.records[rows[i]].contracted;
  return y;
}

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double sigmoid(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

double log_loss(const Matrix& A, const Vector& y, const Vector& theta) {
  const Vector eta = A * theta;
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) s += softplus(eta(i)) - y(i) * eta(i);
  return s / static_cast<double>(y.size());
}

// Columns multiplying p are solved in units of the mean |p| so the Newton system stays balanced;
// the penalty applies to the coefficients in those units.
Vector newton_logistic(const Matrix& A_raw, const Vector& y, double penalty, const DemandFitOptions& opt) {
  const Eigen::Index k = A_raw.cols(), half = k / 2;
  const double ps = std::max(1e-12, A_raw.col(half).cwiseAbs().mean());
  Matrix A = A_raw;
  A.rightCols(half) /= ps;
  const double n = static_cast<double>(y.size());
  Vector theta = Vector::Zero(k);
  auto objective = [&](const Vector& th) { return log_loss(A, y, th) + penalty * th.squaredNorm(); };
  double f = objective(theta);
  for (int it = 0; it < opt.max_iter; ++it) {
    const Vector eta = A * theta;
    Vector s(y.size()), w(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      s(i) = sigmoid(eta(i));
      w(i) = s(i) * (1.0 - s(i));
    }
    const Vector grad = A.transpose() * (s - y) / n + 2.0 * penalty * theta;
    if (grad.norm() < opt.grad_tol) break;
    Matrix H = A.transpose() * w.asDiagonal() * A / n;
    H.diagonal().array() += 2.0 * penalty;
    const Vector step = H.ldlt().solve(grad);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      const Vector cand = theta - t * step;
      const double fc = objective(cand);
      if (fc <= f - 1e-4 * t * grad.dot(step)) {
        theta = cand;
        f = fc;
        moved = true;
        break;
      }
    }
    if (!moved) break;  // at machine precision
  }
  if (!theta.allFinite()) throw NumericalFailure("fit_demand: non-finite coefficients");
  theta.tail(half) /= ps;
  return theta;
}

DemandModel to_model(const Vector& theta, double penalty) {
  const Eigen::Index half = theta.size() / 2;
  return {theta.head(half), theta.tail(half), penalty};
}

void check_table(const LoanTable& t) {
  if (t.records.empty()) throw DataError("fit_demand: no records");
  for (const auto& r : t.records)
    if (r.x.size() != static_cast<Eigen::Index>(t.feature_names.size()))
      throw DataError("fit_demand: feature count mismatch");
}

}  // namespace

DemandModel fit_demand_penalized(const LoanTable& t, double penalty, const DemandFitOptions& opt) {
  check_table(t);
  if (!(penalty >= 0.0)) throw ConfigError("fit_demand: penalty must be nonnegative");
  std::vector<std::size_t> all(t.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double pen = std::max(penalty, opt.penalty_floor);
  return to_model(newton_logistic(demand_design(t, all), outcomes(t, all), pen, opt), pen);
}

DemandModel fit_demand(const LoanTable& t, const DemandFitOptions& opt) {
  check_table(t);
  if (opt.folds < 2) throw ConfigError("fit_demand: need at least 2 folds");
  if (opt.penalties.empty()) throw ConfigError("fit_demand: empty penalty grid");
  if (t.size() < static_cast<std::size_t>(opt.folds)) throw DataError("fit_demand: fewer records than folds");
  std::size_t ones = 0;
  for (const auto& r : t.records) ones += static_cast<std::size_t>(r.contracted);
  if (ones == 0 || ones == t.size()) throw DataError("fit_demand: both outcome classes must be present");

  std::vector<std::size_t> perm(t.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(opt.seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  double best_loss = std::numeric_limits<double>::infinity();
  double best_pen = opt.penalties.front();
  for (double pen0 : opt.penalties) {
    if (!(pen0 >= 0.0)) throw ConfigError("fit_demand: penalties must be nonnegative");
    const double pen = std::max(pen0, opt.penalty_floor);
    double loss = 0.0;
    for (int f = 0; f < opt.folds; ++f) {
      std::vector<std::size_t> train, test;
      for (std::size_t i = 0; i < perm.size(); ++i)
        (static_cast<int>(i % static_cast<std::size_t>(opt.folds)) == f ? test : train).push_back(perm[i]);
      const Vector theta = newton_logistic(demand_design(t, train), outcomes(t, train), pen, opt);
      loss += log_loss(demand_design(t, test), outcomes(t, test), theta) * static_cast<double>(test.size());
    }
    if (loss < best_loss) {
      best_loss = loss;
      best_pen = pen;
    }
  }
  return fit_demand_penalized(t, best_pen, opt);
}

DemandModel planted_demand() {
  DemandModel m;
  m.alpha_coef.resize(6);
  m.beta_coef.resize(6);
  // z = (1, fico_z, term_z, amount_z, state_z, days_z); beta per dollar of price.
  m.alpha_coef << 1.0, 0.4, 0.1, 0.3, 0.0, -0.2;
  m.beta_coef << -8e-4, -1e-4, 5e-5, -1.5e-4, 0.0, 0.0;
  return m;
}

LoanTable generate_synthetic_loans(const SyntheticLoanConfig& config) {
  if (config.n == 0) throw ConfigError("synthetic loans: n must be at least 1");
  const DemandModel demand = config.demand.alpha_coef.size() ? config.demand : planted_demand();
  if (demand.alpha_coef.size() != 6) throw ConfigError("synthetic loans: demand needs 6 coefficients per block");
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> term_pick(0, 3), state_pick(0, 9), days_pick(0, 14);
  std::uniform_real_distribution<double> libor(0.001, 0.0025), unif(0.0, 1.0);
  const int terms[] = {36, 48, 60, 72};

  LoanTable t;
  t.feature_names = {"fico_z", "term_z", "amount_z", "state_z", "days_z"};
  for (std::size_t i = 0; i < config.n; ++i) {
    const double fico_z = normal(rng);
    const int term = terms[term_pick(rng)];
    const double amount_z = normal(rng);
    const int state = state_pick(rng);
    const int days = days_pick(rng);
    const double competitor = normal(rng);  // latent, standardized

    LoanRecord r;
    r.term = term;
    r.loan_amount = 25000.0 * std::exp(0.4 * amount_z);
    r.monthly_libor = libor(rng);
    r.apr = std::max(0.005, 0.045 - 0.012 * fico_z + 0.004 * (term - 54) / 13.416 + 0.008 * competitor +
                                0.004 * normal(rng));
    const double rate = r.apr / 12.0;
    r.monthly_payment = r.loan_amount * rate / (1.0 - std::pow(1.0 + rate, -term));
    r.x.resize(5);
    r.x << fico_z, (term - 54) / 13.416, amount_z, (state - 4.5) / 2.8723, (days - 7.0) / 4.3205;
    const double eta = demand.logit(r.x, compute_price(r)) + config.confounding * competitor;
    r.contracted = unif(rng) < sigmoid(eta) ? 1 : 0;
    t.records.push_back(std::move(r));
  }
  return t;
}

Dataset loans_to_dataset(const LoanTable& t) {
  if (t.records.empty()) throw DataError("loan table is empty");
  const Vector p = t.prices();
  Vector y(p.size()), g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    y(i) = t.records[static_cast<std::size_t>(i)].contracted * p(i);
    g(i) = t.records[static_cast<std::size_t>(i)].apr;
  }
  return {y, t.features(), g, p};
}

Vector linspace(double lo, double hi, int points) {
  if (points < 2 || !(lo < hi)) throw ConfigError("linspace: need points >= 2 and lo < hi");
  return Vector::LinSpaced(points, lo, hi);
}

std::vector<RevenueColumn> evaluate_on_demand(const DemandModel& model,
                                              const std::vector<std::pair<std::string, PricingPolicy>>& policies,
                                              const LoanTable& t, const Vector& price_grid) {
  if (t.records.empty()) throw DataError("evaluate_on_demand: no records");
  if (price_grid.size() == 0) throw ConfigError("evaluate_on_demand: empty price grid");
  std::vector<RevenueColumn> out{{"optimal", 0.0}, {"historical", 0.0}};
  for (const auto& [name, _] : policies) out.push_back({name, 0.0});
  for (const auto& r : t.records) {
    double best = -std::numeric_limits<double>::infinity();
    for (double p : price_grid) best = std::max(best, expected_revenue(model, r.x, p));
    out[0].revenue += best;
    out[1].revenue += expected_revenue(model, r.x, compute_price(r));
    for (std::size_t k = 0; k < policies.size(); ++k)
      out[k + 2].revenue += expected_revenue(model, r.x, policies[k].second.price_for(r.x));
  }
  for (auto& c : out) c.revenue /= static_cast<double>(t.size());
  return out;
}

Vector partial_dependence(const PricingPolicy& policy, const LoanTable& t, std::size_t feature, const Vector& grid) {
  if (feature >= t.feature_names.size()) throw ConfigError("partial_dependence: feature index out of range");
  if (t.records.empty()) throw DataError("partial_dependence: no records");
  Vector curve = Vector::Zero(grid.size());
  for (const auto& r : t.records) {
    Vector x = r.x;
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
      x(static_cast<Eigen::Index>(feature)) = grid(k);
      curve(k) += policy.price_for(x);
    }
  }
  return curve / static_cast<double>(t.size());
}

}  // namespace ivpricing
