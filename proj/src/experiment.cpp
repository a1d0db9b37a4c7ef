#include "ivpricing/experiment.hpp"
#include "ivpricing/csv.hpp"
#include "ivpricing/json_util.hpp"
#include "ivpricing/policy.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace ivpricing {

namespace {

const std::set<std::string> kMethods{"print", "regression", "kernel_ips"};

std::uint64_t method_id(const std::string& m) {
  if (m == "print") return 1;
  if (m == "regression") return 2;
  return 3;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("experiment: scenarios must be nonempty");
  if (sample_sizes.empty()) throw ConfigError("experiment: sample_sizes must be nonempty");
  if (replicates < 1) throw ConfigError("experiment: replicates must be at least 1");
  if (methods.empty()) throw ConfigError("experiment: methods must be nonempty");
  for (const auto& m : methods)
    if (!kMethods.count(m)) throw ConfigError("experiment: unknown method '" + m + "'");
  for (auto n : sample_sizes)
    if (n < 10) throw ConfigError("experiment: sample sizes must be at least 10");
  if (n_mc_eval < 2) throw ConfigError("experiment: n_mc_eval must be at least 2");
  params.validate();
  print.validate();
  kernel_ips.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json sc = nlohmann::json::array();
  for (const auto& s : c.scenarios) sc.push_back({s.c4, s.c7});
  j = {{"scenarios", sc},
       {"sample_sizes", c.sample_sizes},
       {"replicates", c.replicates},
       {"master_seed", c.master_seed},
       {"methods", c.methods},
       {"n_mc_eval", c.n_mc_eval},
       {"output_dir", c.output_dir},
       {"record_wall_time", c.record_wall_time},
       {"params", c.params},
       {"print", c.print},
       {"regression", c.regression},
       {"kernel_ips", c.kernel_ips}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  jsonu::check_keys(j,
                    {"scenarios", "sample_sizes", "replicates", "master_seed", "methods", "n_mc_eval", "output_dir",
                     "record_wall_time", "params", "print", "regression", "kernel_ips"},
                    "experiment config");
  try {
    if (j.contains("scenarios")) {
      c.scenarios.clear();
      for (const auto& s : j.at("scenarios")) {
        const Vector v = jsonu::to_vector(s, "scenario", 2);
        c.scenarios.push_back({v(0), v(1)});
      }
    }
    if (j.contains("sample_sizes")) c.sample_sizes = j.at("sample_sizes").get<std::vector<std::size_t>>();
    c.replicates = j.value("replicates", c.replicates);
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    c.n_mc_eval = j.value("n_mc_eval", c.n_mc_eval);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.record_wall_time = j.value("record_wall_time", c.record_wall_time);
    if (j.contains("params")) c.params = j.at("params").get<SimParams>();
    if (j.contains("print")) c.print = j.at("print").get<MinimaxConfig>();
    if (j.contains("regression")) c.regression = j.at("regression").get<RegressionConfig>();
    if (j.contains("kernel_ips")) c.kernel_ips = j.at("kernel_ips").get<KernelIPSConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
}

ExperimentConfig load_experiment_config(const std::string& path) {
  try {
    return jsonu::read_file(path).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

std::string ResultRow::key() const {
  return format_double(c4) + '|' + format_double(c7) + '|' + std::to_string(n) + '|' + std::to_string(replicate) +
         '|' + method;
}

void write_result_row(std::ostream& out, const ResultRow& r) {
  out << format_double(r.c4) << ',' << format_double(r.c7) << ',' << r.n << ',' << r.replicate << ',' << r.method
      << ',' << r.seed << ',' << (std::isfinite(r.regret) ? format_double(r.regret) : "nan") << ',' << r.status
      << ',' << format_double(r.wall_time) << '\n';
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  const char* names[] = {"c4", "c7", "n", "replicate", "method", "seed", "regret", "status", "wall_time"};
  std::vector<std::ptrdiff_t> col;
  for (const char* name : names) {
    col.push_back(t.column(name));
    if (col.back() < 0) throw DataError(std::string("results CSV: missing column '") + name + "'");
  }
  std::vector<ResultRow> rows;
  for (const auto& cells : t.rows) {
    auto cell = [&](int k) -> const std::string& { return cells.at(static_cast<std::size_t>(col[k])); };
    ResultRow r;
    r.c4 = csv::parse_double(cell(0), "c4");
    r.c7 = csv::parse_double(cell(1), "c7");
    r.n = static_cast<std::size_t>(csv::parse_double(cell(2), "n"));
    r.replicate = static_cast<int>(csv::parse_double(cell(3), "replicate"));
    r.method = cell(4);
    try {
      r.seed = std::stoull(cell(5));
    } catch (const std::exception&) {
      throw DataError("results CSV: bad seed '" + cell(5) + "'");
    }
    r.regret = cell(6) == "nan" ? std::nan("") : csv::parse_double(cell(6), "regret");
    r.status = cell(7);
    r.wall_time = csv::parse_double(cell(8), "wall_time");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::uint64_t replicate_seed(std::uint64_t master, const Scenario& s, std::size_t n, int replicate) {
  return derive_seed(master, std::bit_cast<std::uint64_t>(s.c4), std::bit_cast<std::uint64_t>(s.c7), n,
                     static_cast<std::uint64_t>(replicate));
}

ResultRow run_method(const ExperimentConfig& config, const Scenario& s, std::size_t n, int replicate,
                     const std::string& method, const Dataset& data) {
  const std::uint64_t data_seed = replicate_seed(config.master_seed, s, n, replicate);
  ResultRow row{s.c4, s.c7, n, replicate, method, derive_seed(data_seed, method_id(method)), 0.0, "ok", 0.0};
  SimParams params = config.params;
  params.c4 = s.c4;
  params.c7 = s.c7;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::optional<PricingPolicy> policy;
    if (method == "print") {
      MinimaxConfig mc = config.print;
      mc.seed = row.seed;
      policy = extract_policy(fit_minimax(data, mc).alpha_hat, params.p1, params.p2);
    } else if (method == "regression") {
      RegressionConfig rc = config.regression;
      rc.seed = row.seed;
      policy = fit_regression(data, rc).policy(params.p1, params.p2);
    } else {
      KernelIPSConfig kc = config.kernel_ips;
      kc.p1 = params.p1;
      kc.p2 = params.p2;
      kc.seed_regression.seed = row.seed;
      policy = fit_kernel_ips(data, kc);
    }
    // Every method is scored on the same covariate draws for a given cell.
    const auto& pol = *policy;
    row.regret = regret(params, [&](ConstVectorRef x) { return pol.price_for(x); }, config.n_mc_eval,
                        derive_seed(data_seed, 100));
    if (!std::isfinite(row.regret)) throw NumericalFailure("non-finite regret");
  } catch (const std::exception&) {
    row.status = "failed";
    row.regret = std::nan("");
  }
  if (config.record_wall_time)
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

namespace {

struct Cell {
  Scenario s;
  std::size_t n;
  int replicate;
  std::vector<std::string> methods;  // still missing
};

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& config, int workers, std::ostream* log) {
  config.validate();
  if (workers < 1) throw ConfigError("experiment: workers must be at least 1");
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  const fs::path results = fs::path(config.output_dir) / "results.csv";

  std::vector<ResultRow> existing;
  if (fs::exists(results)) {
    std::ifstream in(results);
    existing = read_results_csv(in);
  }
  std::map<std::string, ResultRow> done;
  for (const auto& r : existing) done.emplace(r.key(), r);

  std::vector<Cell> cells;
  std::vector<std::string> order;  // canonical key order
  for (const auto& s : config.scenarios)
    for (auto n : config.sample_sizes)
      for (int rep = 0; rep < config.replicates; ++rep) {
        Cell c{s, n, rep, {}};
        for (const auto& m : config.methods) {
          ResultRow probe;
          probe.c4 = s.c4;
          probe.c7 = s.c7;
          probe.n = n;
          probe.replicate = rep;
          probe.method = m;
          order.push_back(probe.key());
          if (!done.count(probe.key())) c.methods.push_back(m);
        }
        if (!c.methods.empty()) cells.push_back(std::move(c));
      }

  {
    std::ofstream out(results, std::ios::app);
    if (!out) throw DataError("cannot open '" + results.string() + "' for writing");
    if (existing.empty() && fs::file_size(results) == 0) out << kResultsHeader << '\n';
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        const Cell& c = cells[i];
        SimParams params = config.params;
        params.c4 = c.s.c4;
        params.c7 = c.s.c7;
        const Dataset data =
            generate_dataset(params, c.n, replicate_seed(config.master_seed, c.s, c.n, c.replicate), false);
        for (const auto& m : c.methods) {
          ResultRow row = run_method(config, c.s, c.n, c.replicate, m, data);
          const std::lock_guard lock(mu);
          write_result_row(out, row);
          out.flush();
          if (log)
            *log << "c4=" << row.c4 << " c7=" << row.c7 << " n=" << row.n << " rep=" << row.replicate << ' '
                 << row.method << ' ' << row.status << " regret=" << row.regret << '\n';
          done.emplace(row.key(), std::move(row));
        }
      }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }

  // Canonical order: configured cells first, then rows from other configs as they were found.
  std::vector<ResultRow> rows;
  std::set<std::string> placed;
  for (const auto& k : order) {
    rows.push_back(done.at(k));
    placed.insert(k);
  }
  for (const auto& r : existing)
    if (!placed.count(r.key())) rows.push_back(r);
  const fs::path tmp = results.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << kResultsHeader << '\n';
    for (const auto& r : rows) write_result_row(out, r);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, results);
  nlohmann::json summary = summarize(rows);
  summary["config"] = config;
  jsonu::write_file((fs::path(config.output_dir) / "summary.json").string(), summary);
  return rows;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

nlohmann::json summarize(const std::vector<ResultRow>& rows) {
  struct Group {
    double c4, c7;
    std::size_t n;
    std::string method;
    std::vector<double> regrets;
    std::size_t failed = 0;
  };
  std::vector<Group> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.c4 == r.c4 && g.c7 == r.c7 && g.n == r.n && g.method == r.method;
    });
    if (it == groups.end()) {
      groups.push_back({r.c4, r.c7, r.n, r.method, {}, 0});
      it = groups.end() - 1;
    }
    if (r.status == "ok") it->regrets.push_back(r.regret);
    else ++it->failed;
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json e = {{"c4", g.c4},     {"c7", g.c7}, {"n", g.n}, {"method", g.method}, {"ok", g.regrets.size()},
                        {"failed", g.failed}};
    if (!g.regrets.empty()) {
      double mean = 0.0;
      for (double v : g.regrets) mean += v;
      e["median"] = quantile(g.regrets, 0.5);
      e["q25"] = quantile(g.regrets, 0.25);
      e["q75"] = quantile(g.regrets, 0.75);
      e["mean"] = mean / static_cast<double>(g.regrets.size());
    }
    out.push_back(std::move(e));
  }
  return {{"groups", out}};
}

}  // namespace ivpricing
