#pragma once

#include "ivpricing/baselines.hpp"
#include "ivpricing/minimax.hpp"
#include "ivpricing/scm.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace ivpricing {

struct Scenario {
  double c4 = 1.0;  // exclusion violation
  double c7 = 5.0;  // instrument strength
};

struct ExperimentConfig {
  std::vector<Scenario> scenarios{{1, 1}, {1, 5}, {5, 1}, {5, 5}};
  std::vector<std::size_t> sample_sizes{1000, 2000};
  int replicates = 100;
  std::uint64_t master_seed = 0;
  std::vector<std::string> methods{"print", "regression", "kernel_ips"};
  std::size_t n_mc_eval = 10000;
  std::string output_dir = ".";
  bool record_wall_time = true;  // false writes 0 so reruns are byte-identical
  SimParams params;              // c4 and c7 are overridden per scenario
  MinimaxConfig print;           // seed overridden per replicate
  RegressionConfig regression;
  KernelIPSConfig kernel_ips;  // price range taken from params

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::string& path);

struct ResultRow {
  double c4 = 0.0, c7 = 0.0;
  std::size_t n = 0;
  int replicate = 0;
  std::string method;
  std::uint64_t seed = 0;
  double regret = 0.0;
  std::string status;  // "ok" or "failed"
  double wall_time = 0.0;

  [[nodiscard]] std::string key() const;
};

inline constexpr const char* kResultsHeader = "c4,c7,n,replicate,method,seed,regret,status,wall_time";

void write_result_row(std::ostream& out, const ResultRow& r);
std::vector<ResultRow> read_results_csv(std::istream& in);

/// Seed of the simulated dataset for one (scenario, n, replicate) cell.
std::uint64_t replicate_seed(std::uint64_t master, const Scenario& s, std::size_t n, int replicate);

/// One method on one dataset: fit, extract the policy, score by Monte Carlo regret.
ResultRow run_method(const ExperimentConfig& config, const Scenario& s, std::size_t n, int replicate,
                     const std::string& method, const Dataset& data);

/// Runs every missing (scenario, n, replicate, method) cell, appending to
/// `<output_dir>/results.csv` as cells finish, then rewrites the file in canonical order and
/// writes `<output_dir>/summary.json`. Fit failures become status=failed rows.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config, int workers = 1, std::ostream* log = nullptr);

/// Per (scenario, n, method): counts, median, quartiles and mean of regret over ok rows.
nlohmann::json summarize(const std::vector<ResultRow>& rows);

/// Linear-interpolation quantile (q in [0, 1]) of a nonempty sample.
double quantile(std::vector<double> v, double q);

}  // namespace ivpricing
