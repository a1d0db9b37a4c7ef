#include "ivpricing/baselines.hpp"
#include "ivpricing/dataset.hpp"
#include "ivpricing/experiment.hpp"
#include "ivpricing/json_util.hpp"
#include "ivpricing/loan.hpp"
#include "ivpricing/minimax.hpp"
#include "ivpricing/policy.hpp"
#include "ivpricing/scm.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace ivpricing;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

int cmd_simulate(const std::string& params_path, std::size_t n, std::uint64_t seed, const std::string& out,
                 bool hidden) {
  const SimParams params = params_path.empty() ? SimParams{} : load_sim_params(params_path);
  write_dataset_csv(out, generate_dataset(params, n, seed, hidden), hidden);
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& config_path, const std::string& method,
            double p1, double p2, double floor_c, const std::string& out, const std::string& table_out) {
  const Dataset data = read_dataset_csv(data_path);
  const nlohmann::json cfg = config_path.empty() ? nlohmann::json::object() : jsonu::read_file(config_path);
  nlohmann::json result = {{"method", method}};
  std::optional<PricingPolicy> policy;
  try {
    if (method == "print") {
      const auto mc = cfg.get<MinimaxConfig>();
      const FitResult fit = fit_minimax(data, mc);
      policy = extract_policy(fit.alpha_hat, p1, p2, floor_c);
      result["fit"] = fit.to_json();
    } else if (method == "regression") {
      policy = fit_regression(data, cfg.get<RegressionConfig>()).policy(p1, p2, floor_c);
    } else if (method == "kernel_ips") {
      auto kc = cfg.get<KernelIPSConfig>();
      kc.p1 = p1;
      kc.p2 = p2;
      policy = fit_kernel_ips(data, kc);
    } else {
      throw ConfigError("fit: unknown method '" + method + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("fit config: ") + e.what());
  }
  result["policy"] = policy->to_json();
  jsonu::write_file(out, result);
  if (!table_out.empty()) {
    auto t = open_out(table_out);
    write_price_table(t, *policy, data.x());
  }
  if (policy->floored_count() > 0)
    std::cerr << "note: beta2 floor engaged at " << policy->floored_count() << " covariate rows\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir, int workers, bool verbose) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  const auto rows = run_experiment(cfg, workers, verbose ? &std::cerr : nullptr);
  std::cout << summarize(rows).dump(2) << '\n';
  return 0;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + item + "' in list");
    }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

int cmd_loan_eval(const std::string& records, const std::string& penalties, const std::vector<std::string>& policies,
                  const std::string& out, std::uint64_t seed, int grid_points, double p_max) {
  const LoanTable t = read_loan_csv(records);
  DemandFitOptions opt;
  opt.penalties = parse_list(penalties);
  opt.seed = seed;
  const DemandModel model = fit_demand(t, opt);
  if (!(p_max > 0.0)) p_max = 1.5 * std::max(1.0, t.prices().maxCoeff());
  std::vector<std::pair<std::string, PricingPolicy>> named;
  for (const auto& path : policies) named.emplace_back(path, load_policy(path));
  const auto cols = evaluate_on_demand(model, named, t, linspace(0.0, p_max, grid_points));
  auto o = open_out(out);
  o << "policy,revenue\n";
  for (const auto& c : cols) o << c.name << ',' << format_double(c.revenue) << '\n';
  std::cerr << "demand penalty " << model.l2_penalty << '\n';
  return 0;
}

int cmd_pdp(const std::string& policy_path, const std::string& records, const std::string& feature,
            const std::string& out, int grid_points) {
  const LoanTable t = read_loan_csv(records);
  const std::size_t k = t.feature_index(feature);
  if (t.records.empty()) throw DataError("pdp: no records");
  const Matrix x = t.features();
  double lo = x.col(static_cast<Eigen::Index>(k)).minCoeff(), hi = x.col(static_cast<Eigen::Index>(k)).maxCoeff();
  if (!(lo < hi)) hi = lo + 1.0;
  const Vector grid = linspace(lo, hi, grid_points);
  const Vector curve = partial_dependence(load_policy(policy_path), t, k, grid);
  auto o = open_out(out);
  o << feature << ",price\n";
  for (Eigen::Index i = 0; i < grid.size(); ++i) o << format_double(grid(i)) << ',' << format_double(curve(i)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instrumented pricing: simulation, min-max estimation, baselines and evaluation"};
  app.require_subcommand(1);

  std::string params_path, out;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  bool hidden = false;
  auto* sim = app.add_subcommand("simulate", "Draw a dataset from the structural simulator");
  sim->add_option("--params", params_path, "Simulator parameters (JSON); defaults if omitted");
  sim->add_option("--n", n, "Sample size")->required();
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--out", out, "Output CSV")->required();
  sim->add_flag("--hidden", hidden, "Also write latent columns");

  std::string data_path, config_path, method = "print", table_out;
  double p1 = 0.0, p2 = 10.0, floor_c = 1e-3;
  auto* fit = app.add_subcommand("fit", "Fit a pricing policy to a dataset CSV");
  fit->add_option("--data", data_path, "Dataset CSV (y,x1..xd,g,p)")->required();
  fit->add_option("--config", config_path, "Method configuration (JSON)");
  fit->add_option("--method", method, "print, regression or kernel_ips")
      ->check(CLI::IsMember({"print", "regression", "kernel_ips"}));
  fit->add_option("--p1", p1, "Lowest price");
  fit->add_option("--p2", p2, "Highest price");
  fit->add_option("--floor-c", floor_c, "beta2 is raised to -floor_c before taking the argmax (price units)")
      ->check(CLI::PositiveNumber);
  fit->add_option("--out", out, "Output JSON")->required();
  fit->add_option("--price-table", table_out, "Also write x1..xd,price for the data rows");

  std::string out_dir;
  int workers = 1;
  bool verbose = false;
  auto* exp = app.add_subcommand("experiment", "Run the scenario sweep");
  exp->add_option("--config", config_path, "Experiment configuration (JSON)")->required();
  exp->add_option("--out-dir", out_dir, "Output directory (overrides the config)");
  exp->add_option("--workers", workers, "Concurrent replicates")->check(CLI::PositiveNumber);
  exp->add_flag("--verbose", verbose, "Log each finished cell");

  std::string records, penalties = "1e-6,1e-5,1e-4,1e-3,1e-2,1e-1";
  std::vector<std::string> policies;
  int grid_points = 401;
  double p_max = 0.0;
  auto* le = app.add_subcommand("loan-eval", "Score policies on loan records under a fitted demand model");
  le->add_option("--records", records, "Loan CSV")->required();
  le->add_option("--demand-penalties", penalties, "Comma-separated l2 penalties for cross-validation");
  le->add_option("--policies", policies, "Policy JSON files");
  le->add_option("--out", out, "Output CSV")->required();
  le->add_option("--seed", seed, "Fold-assignment seed");
  le->add_option("--grid-points", grid_points, "Price grid size for the optimal column")->check(CLI::Range(2, 1000000));
  le->add_option("--p-max", p_max, "Top of the price grid; default 1.5 x largest recorded price");

  std::string policy_path, feature;
  int pdp_points = 25;
  auto* pdp = app.add_subcommand("pdp", "Partial dependence of a policy on one loan feature");
  pdp->add_option("--policy", policy_path, "Policy JSON")->required();
  pdp->add_option("--records", records, "Loan CSV")->required();
  pdp->add_option("--feature", feature, "Feature column name")->required();
  pdp->add_option("--out", out, "Output CSV")->required();
  pdp->add_option("--grid-points", pdp_points, "Grid size")->check(CLI::Range(2, 100000));

  double confounding = 0.2;
  auto* ls = app.add_subcommand("loan-synth", "Generate synthetic loan records with planted demand");
  ls->add_option("--n", n, "Number of records")->required();
  ls->add_option("--seed", seed, "Random seed");
  ls->add_option("--confounding", confounding, "Acceptance shift per sd of the latent competitor rate");
  ls->add_option("--out", out, "Output loan CSV")->required();

  auto* l2d = app.add_subcommand("loan-dataset", "Convert loan records to a dataset CSV (y = contracted x price)");
  l2d->add_option("--records", records, "Loan CSV")->required();
  l2d->add_option("--out", out, "Output dataset CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(params_path, n, seed, out, hidden);
    if (*fit) return cmd_fit(data_path, config_path, method, p1, p2, floor_c, out, table_out);
    if (*exp) return cmd_experiment(config_path, out_dir, workers, verbose);
    if (*le) return cmd_loan_eval(records, penalties, policies, out, seed, grid_points, p_max);
    if (*pdp) return cmd_pdp(policy_path, records, feature, out, pdp_points);
    if (*ls) {
      write_loan_csv(out, generate_synthetic_loans({n, seed, confounding, {}}));
      return 0;
    }
    if (*l2d) {
      write_dataset_csv(out, loans_to_dataset(read_loan_csv(records)));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
