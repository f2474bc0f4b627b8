// Command-line front end: every subcommand produces a JSON summary and a CSV
// table. stdout carries one of the two (picked by --format); --out writes
// both to files. All output is a pure function of config + seed.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csma/config.hpp"
#include "csma/error.hpp"
#include "csma/experiment.hpp"
#include "csma/fluid.hpp"
#include "csma/runner.hpp"
#include "csma/stability.hpp"
#include "csma/trace.hpp"

namespace {

using csma::ConfigError;
using csma::ScenarioConfig;
using nlohmann::json;

struct CommandOutput {
  json summary;
  std::string csv_name;
  std::string csv;
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file: " + p.string());
  out << content;
}

void emit(const CommandOutput& out, const std::string& out_dir, const std::string& format) {
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(std::filesystem::path(out_dir) / out.csv_name, out.csv);
    write_file(std::filesystem::path(out_dir) / "summary.json", out.summary.dump(2) + "\n");
  }
  if (format == "csv")
    std::cout << out.csv;
  else
    std::cout << out.summary.dump(2) << "\n";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

CommandOutput run_simulate(const ScenarioConfig& cfg) {
  const csma::Trace trace = csma::run(cfg);
  CommandOutput out;
  out.summary = csma::trace_summary_json(trace);
  out.summary["config"] = cfg.to_json();
  out.csv_name = "trace.csv";
  std::ostringstream csv;
  csma::write_trace_csv(trace, csv);
  out.csv = csv.str();
  return out;
}

CommandOutput run_fluid(const ScenarioConfig& cfg, double T, double dt) {
  const csma::InterferenceGraph g = cfg.graph.build();
  const int n = g.node_count();
  std::vector<double> x0(n, 0.0);
  for (std::size_t i = 0; i < cfg.initial_state.size(); ++i)
    x0[i] = static_cast<double>(cfg.initial_state[i]);
  bool zero_start = true;
  for (double v : x0) zero_start = zero_start && v == 0.0;
  const csma::BoundaryMode mode =
      zero_start ? csma::BoundaryMode::absorbing : csma::BoundaryMode::emitting;
  const csma::FluidTrajectory traj =
      csma::integrate(x0, csma::scenario_drift(cfg, g, mode), T, dt, mode);

  CommandOutput out;
  out.summary["config"] = cfg.to_json();
  out.summary["config_digest"] = cfg.digest();
  out.summary["T"] = T;
  out.summary["dt"] = dt;
  out.summary["boundary_mode"] = csma::boundary_mode_name(mode);
  out.summary["steps"] = traj.times.size() - 1;
  out.summary["final_state"] = traj.states.back();
  double total = 0.0;
  for (double v : traj.states.back()) total += v;
  out.summary["final_total"] = total;
  out.csv_name = "trajectory.csv";
  std::ostringstream csv;
  csma::write_trajectory_csv(traj, csv);
  out.csv = csv.str();
  return out;
}

CommandOutput run_stability(const ScenarioConfig& cfg, std::int64_t budget) {
  const csma::InterferenceGraph g = cfg.graph.build();
  const csma::StabilityVerdict v = csma::c_membership(cfg.lambda, g, budget, cfg.seed);
  CommandOutput out;
  out.summary["config_digest"] = cfg.digest();
  out.summary["lambda"] = cfg.lambda;
  out.summary["budget"] = budget;
  out.summary["verdict"] = v.to_json();
  out.csv_name = "witness.csv";
  std::ostringstream csv;
  csv << "node,lambda,witness_weight,rate_at_witness\n";
  if (v.witness) {
    const std::vector<double> rates = csma::phi(*v.witness, g);
    for (int i = 0; i < g.node_count(); ++i)
      csv << i << "," << fmt(cfg.lambda[i]) << "," << fmt((*v.witness)[i]) << ","
          << fmt(rates[i]) << "\n";
  }
  out.csv = csv.str();
  return out;
}

CommandOutput run_fairness(const ScenarioConfig& cfg, std::int64_t samples) {
  const csma::InterferenceGraph g = cfg.graph.build();
  const int n = g.node_count();
  // The check needs a strictly positive queue state; initial_state supplies
  // it, defaulting to all-ones.
  std::vector<double> x(n, 1.0);
  if (!cfg.initial_state.empty()) {
    for (int i = 0; i < n; ++i) {
      if (cfg.initial_state[i] <= 0)
        throw ConfigError("fairness requires a strictly positive initial_state");
      x[i] = static_cast<double>(cfg.initial_state[i]);
    }
  }
  const csma::FairnessReport rep = csma::two_fairness_check(x, g, samples, cfg.seed);
  CommandOutput out;
  out.summary["config_digest"] = cfg.digest();
  out.summary["x"] = x;
  out.summary["samples"] = samples;
  out.summary["report"] = rep.to_json();
  out.csv_name = "fairness.csv";
  std::ostringstream csv;
  csv << "field,value\n";
  csv << "j_at_x," << fmt(rep.j_at_x) << "\n";
  csv << "min_gap," << fmt(rep.min_gap) << "\n";
  csv << "samples_evaluated," << rep.samples_evaluated << "\n";
  csv << "equality_cases," << rep.equality_cases << "\n";
  out.csv = csv.str();
  return out;
}

CommandOutput run_conjecture(int n_min, int n_max, std::int64_t samples, std::uint64_t seed) {
  if (n_min < 3 || n_max < n_min)
    throw ConfigError("conjecture: need 3 <= nmin <= nmax");
  if (samples < 1) throw ConfigError("conjecture: samples must be >= 1");
  const csma::ConjectureScanReport rep =
      csma::conjecture_scan(n_min, n_max, samples, seed, 100, 200);
  CommandOutput out;
  out.summary["n_min"] = n_min;
  out.summary["n_max"] = n_max;
  out.summary["samples_per_n"] = samples;
  out.summary["seed"] = seed;
  out.summary["report"] = rep.to_json();
  out.csv_name = "histogram.csv";
  std::ostringstream csv;
  csv << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < rep.histogram_counts.size(); ++b)
    csv << fmt(rep.histogram_edges[b]) << "," << fmt(rep.histogram_edges[b + 1]) << ","
        << rep.histogram_counts[b] << "\n";
  out.csv = csv.str();
  return out;
}

CommandOutput run_scaling(const ScenarioConfig& cfg, const std::vector<std::int64_t>& rs,
                          double T, double dt, int workers) {
  const auto rows = csma::fluid_scaling_study(cfg, rs, T, dt, workers);
  CommandOutput out;
  out.summary["config_digest"] = cfg.digest();
  out.summary["T"] = T;
  out.summary["dt"] = dt > 0.0 ? dt : 1e-3 * T;
  json jrows = json::array();
  for (const auto& r : rows)
    jrows.push_back({{"r", r.r}, {"horizon", r.horizon}, {"sup_deviation", r.sup_deviation}});
  out.summary["rows"] = jrows;
  out.csv_name = "scaling.csv";
  std::ostringstream csv;
  csma::write_scaling_csv(rows, csv);
  out.csv = csv.str();
  return out;
}

CommandOutput run_sweep(const ScenarioConfig& cfg, const std::string& grid_spec,
                        int replications, int workers) {
  const std::vector<double> grid = csma::parse_lambda_grid(grid_spec);
  const auto rows = csma::sweep(cfg, grid, replications, workers);
  CommandOutput out;
  out.summary["config_digest"] = cfg.digest();
  out.summary["grid"] = grid;
  out.summary["replications"] = replications;
  json jrows = json::array();
  for (const auto& r : rows) {
    json jr;
    jr["lambda"] = r.lambda;
    jr["rep"] = r.rep;
    jr["seed"] = r.seed;
    jr["ok"] = r.ok;
    jr["classification"] = r.classification;
    jr["total_slope"] = r.total_slope;
    jr["slope_stderr"] = r.slope_stderr;
    jr["mean_queue"] = r.mean_queue;
    jr["max_queue"] = r.max_queue;
    jr["error"] = r.error;
    jrows.push_back(std::move(jr));
  }
  out.summary["rows"] = jrows;
  out.csv_name = "sweep.csv";
  std::ostringstream csv;
  csma::write_sweep_csv(rows, csv);
  out.csv = csv.str();
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Priority-CSMA simulator and analysis toolkit"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed_flag;
  int workers = 1;
  std::string format = "json";
  app.add_option("--seed", seed_flag, "Override the scenario seed");
  app.add_option("--workers", workers, "Worker threads for sweeps and scaling studies")
      ->check(CLI::PositiveNumber);
  app.add_option("--format", format, "stdout payload: json summary or csv table")
      ->check(CLI::IsMember({"json", "csv"}));

  std::string cfg_path, out_dir;

  auto* sim = app.add_subcommand("simulate", "Run one slotted simulation");
  sim->add_option("--config", cfg_path, "Scenario JSON file")->required();
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->fallthrough();

  double fl_T = 0.0, fl_dt = 0.0;
  auto* flu = app.add_subcommand("fluid", "Integrate the fluid trajectory of a scenario");
  flu->add_option("--config", cfg_path, "Scenario JSON file")->required();
  flu->add_option("--T", fl_T, "Integration horizon")->required()->check(CLI::PositiveNumber);
  flu->add_option("--dt", fl_dt, "Euler step")->required()->check(CLI::PositiveNumber);
  flu->add_option("--out", out_dir, "Output directory")->required();
  flu->fallthrough();

  std::int64_t budget = 100000;
  auto* stab = app.add_subcommand("stability", "Decide stability-set membership of lambda");
  stab->add_option("--config", cfg_path, "Scenario JSON file")->required();
  stab->add_option("--budget", budget, "Witness-search evaluation budget")
      ->check(CLI::PositiveNumber);
  stab->add_option("--out", out_dir, "Output directory");
  stab->fallthrough();

  std::int64_t fair_samples = 10000;
  auto* fair = app.add_subcommand("fairness", "Check 2-fairness of the rate allocation");
  fair->add_option("--config", cfg_path, "Scenario JSON file")->required();
  fair->add_option("--samples", fair_samples, "Random witness samples")
      ->required()
      ->check(CLI::NonNegativeNumber);
  fair->add_option("--out", out_dir, "Output directory");
  fair->fallthrough();

  int cj_nmin = 3, cj_nmax = 12;
  std::int64_t cj_samples = 0;
  auto* conj = app.add_subcommand("conjecture", "Scan the cyclic-sum inequality for counterexamples");
  conj->add_option("--nmin", cj_nmin, "Smallest circle size")->required();
  conj->add_option("--nmax", cj_nmax, "Largest circle size")->required();
  conj->add_option("--samples", cj_samples, "Samples per circle size")->required();
  conj->add_option("--out", out_dir, "Output directory");
  conj->fallthrough();

  std::vector<std::int64_t> sc_r;
  double sc_T = 0.0, sc_dt = 0.0;
  auto* scal = app.add_subcommand("scaling", "Compare scaled simulations against the fluid path");
  scal->add_option("--config", cfg_path, "Scenario JSON file")->required();
  scal->add_option("--r", sc_r, "Scale factors")->required()->delimiter(',');
  scal->add_option("--T", sc_T, "Fluid horizon")->required()->check(CLI::PositiveNumber);
  scal->add_option("--dt", sc_dt, "Euler step (default T/1000)");
  scal->add_option("--out", out_dir, "Output directory");
  scal->fallthrough();

  std::string grid_spec;
  int reps = 1;
  auto* swp = app.add_subcommand("sweep", "Classify stability across a lambda grid");
  swp->add_option("--config", cfg_path, "Scenario JSON file")->required();
  swp->add_option("--lambda-grid", grid_spec, "start:stop:step or comma list")->required();
  swp->add_option("--reps", reps, "Replications per grid point")
      ->required()
      ->check(CLI::PositiveNumber);
  swp->add_option("--out", out_dir, "Output directory");
  swp->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto load = [&] { return ScenarioConfig::parse_text(read_text_file(cfg_path), seed_flag); };
    CommandOutput out;
    if (app.got_subcommand(sim)) {
      out = run_simulate(load());
    } else if (app.got_subcommand(flu)) {
      out = run_fluid(load(), fl_T, fl_dt);
    } else if (app.got_subcommand(stab)) {
      out = run_stability(load(), budget);
    } else if (app.got_subcommand(fair)) {
      out = run_fairness(load(), fair_samples);
    } else if (app.got_subcommand(conj)) {
      out = run_conjecture(cj_nmin, cj_nmax, cj_samples, seed_flag.value_or(0));
    } else if (app.got_subcommand(scal)) {
      out = run_scaling(load(), sc_r, sc_T, sc_dt, workers);
    } else {
      out = run_sweep(load(), grid_spec, reps, workers);
    }
    emit(out, out_dir, format);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
