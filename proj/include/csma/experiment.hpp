#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "csma/config.hpp"
#include "csma/fluid.hpp"
#include "csma/runner.hpp"
#include "csma/stats.hpp"

namespace csma {

// Runs fn(0..count-1) on up to `workers` threads. Each index owns its output
// slot and derives its own randomness, so results do not depend on the worker
// count or on scheduling.
template <typename Fn>
void parallel_for(int workers, std::int64_t count, Fn&& fn) {
  if (count <= 0) return;
  const int threads = static_cast<int>(std::min<std::int64_t>(std::max(workers, 1), count));
  if (threads == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  for (auto& th : pool) th.join();
}

// "0.25:0.45:0.05" (inclusive range) or "0.25,0.3,0.4" (explicit list).
inline std::vector<double> parse_lambda_grid(const std::string& spec) {
  std::vector<double> grid;
  auto parse_num = [](const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw ConfigError("lambda grid: cannot parse \"" + s + "\"");
    }
    if (pos != s.size()) throw ConfigError("lambda grid: cannot parse \"" + s + "\"");
    return v;
  };
  if (spec.find(':') != std::string::npos) {
    const auto c1 = spec.find(':');
    const auto c2 = spec.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ConfigError("lambda grid range needs start:stop:step");
    const double start = parse_num(spec.substr(0, c1));
    const double stop = parse_num(spec.substr(c1 + 1, c2 - c1 - 1));
    const double step = parse_num(spec.substr(c2 + 1));
    if (!(step > 0.0)) throw ConfigError("lambda grid step must be positive");
    for (double v = start; v <= stop + 1e-12; v += step) grid.push_back(v);
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const auto comma = spec.find(',', pos);
      const std::string tok =
          spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!tok.empty()) grid.push_back(parse_num(tok));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  if (grid.empty()) throw ConfigError("lambda grid is empty");
  return grid;
}

// ---------------------------------------------------------------------------
// Parameter sweep

struct SweepRow {
  double lambda = 0.0;
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::string classification;
  double total_slope = 0.0;
  double slope_stderr = 0.0;
  double mean_queue = 0.0;
  std::int64_t max_queue = 0;
};

// The row seed depends only on (base seed, lambda bits, rep), never on the
// grid position: dropping a grid point leaves every other row untouched.
inline std::uint64_t sweep_row_seed(std::uint64_t base_seed, double lambda, int rep) {
  return derive_key({base_seed, static_cast<std::uint64_t>(Stream::sweep_row),
                     std::bit_cast<std::uint64_t>(lambda), static_cast<std::uint64_t>(rep)});
}

inline std::vector<SweepRow> sweep(const ScenarioConfig& base, const std::vector<double>& grid,
                                   int replications, int workers = 1) {
  if (grid.empty()) throw ConfigError("sweep: empty lambda grid");
  if (replications < 1) throw ConfigError("sweep: replications must be >= 1");
  if (!base.lambda_scalar)
    throw ConfigError("sweep varies a scalar lambda; base config must use one");
  const std::int64_t count = static_cast<std::int64_t>(grid.size()) * replications;
  std::vector<SweepRow> rows(count);
  parallel_for(workers, count, [&](std::int64_t idx) {
    const double lambda = grid[idx / replications];
    const int rep = static_cast<int>(idx % replications);
    SweepRow& row = rows[idx];
    row.lambda = lambda;
    row.rep = rep;
    row.seed = sweep_row_seed(base.seed, lambda, rep);
    try {
      ScenarioConfig cfg = base;
      cfg.lambda_value = lambda;
      cfg.lambda.assign(cfg.lambda.size(), lambda);
      cfg.seed = row.seed;
      // Re-validate the new rate against the arrival model.
      ArrivalSampler probe(cfg.arrival_model,
                           cfg.arrival_rates(static_cast<int>(cfg.lambda.size())));
      (void)probe;
      const Trace trace = run(cfg);
      const StabilityClassification cls = classify_stability(trace);
      row.classification = cls.verdict_name();
      row.total_slope = cls.total_slope;
      row.slope_stderr = cls.slope_stderr;
      row.mean_queue = cls.tail_mean;
      for (std::int64_t v : trace.total_queue) row.max_queue = std::max(row.max_queue, v);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << "lambda,rep,seed,status,classification,total_slope,slope_stderr,mean_queue,max_queue,"
        "error\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << num(r.lambda) << "," << r.rep << "," << r.seed << ","
       << (r.ok ? "ok" : "error") << "," << r.classification << "," << num(r.total_slope) << ","
       << num(r.slope_stderr) << "," << num(r.mean_queue) << "," << r.max_queue << "," << r.error
       << "\n";
  }
}

// ---------------------------------------------------------------------------
// Fluid-scaling comparison

// Drift field induced by a scenario on its graph, with the given handling of
// all-zero neighborhoods. The graph is captured by reference and must outlive
// the returned function.
inline DriftFn scenario_drift(const ScenarioConfig& cfg, const InterferenceGraph& g,
                              BoundaryMode mode) {
  if (cfg.hop_mode.kind == HopMode::Kind::multi_hop) {
    const double lam = cfg.lambda_value;
    const int k = cfg.hop_mode.k;
    return [lam, k, &g, mode](const std::vector<double>& x) {
      return multi_hop_drift(x, lam, k, g, mode);
    };
  }
  const std::vector<double> lambda = cfg.lambda;
  return [lambda, &g, mode](const std::vector<double>& x) {
    return single_hop_drift(x, lambda, g, mode);
  };
}

struct ScalingRow {
  std::int64_t r = 0;
  std::int64_t horizon = 0;
  double sup_deviation = 0.0;
};

// For each scale r: simulate ceil(r*T) slots from floor(r*x0), then measure
// the worst per-node distance between X(rt)/r and the integrated fluid path
// on the decimation grid. Each r owns a derived seed.
inline std::vector<ScalingRow> fluid_scaling_study(const ScenarioConfig& base,
                                                   const std::vector<std::int64_t>& r_values,
                                                   double T, double dt = 0.0, int workers = 1) {
  if (r_values.empty()) throw ConfigError("fluid_scaling_study: empty r list");
  for (std::int64_t r : r_values)
    if (r < 1) throw ConfigError("fluid_scaling_study: r values must be >= 1");
  if (!(T > 0.0)) throw ConfigError("fluid_scaling_study: T must be positive");
  if (dt <= 0.0) dt = 1e-3 * T;

  const InterferenceGraph g = base.graph.build();
  const int n = g.node_count();
  std::vector<double> x0(n, 0.0);
  for (std::size_t i = 0; i < base.initial_state.size(); ++i)
    x0[i] = static_cast<double>(base.initial_state[i]);
  bool zero_start = true;
  for (double v : x0) zero_start = zero_start && v == 0.0;
  // From an empty start the meaningful fluid benchmark is the zero solution;
  // from mass, the emitting branch of the 0/0 ambiguity.
  const BoundaryMode mode = zero_start ? BoundaryMode::absorbing : BoundaryMode::emitting;
  const FluidTrajectory traj = integrate(x0, scenario_drift(base, g, mode), T, dt, mode);

  std::vector<ScalingRow> rows(r_values.size());
  parallel_for(workers, static_cast<std::int64_t>(r_values.size()), [&](std::int64_t idx) {
    const std::int64_t r = r_values[idx];
    ScenarioConfig cfg = base;
    cfg.horizon = static_cast<std::int64_t>(std::ceil(static_cast<double>(r) * T - 1e-9));
    cfg.initial_state.assign(n, 0);
    for (int i = 0; i < n; ++i)
      cfg.initial_state[i] = static_cast<std::int64_t>(std::floor(static_cast<double>(r) * x0[i]));
    cfg.decimation = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::llround(static_cast<double>(r) * dt)));
    cfg.seed = derive_key({base.seed, static_cast<std::uint64_t>(Stream::experiment),
                           static_cast<std::uint64_t>(r)});
    const Trace trace = run(cfg);
    double sup = 0.0;
    for (std::size_t row = 0; row < trace.sample_slots.size(); ++row) {
      const double t = static_cast<double>(trace.sample_slots[row]) / static_cast<double>(r);
      if (t > T + 1e-12) continue;
      const std::vector<double>& fx = traj.states[traj.grid_index(t)];
      for (int i = 0; i < n; ++i) {
        const double scaled =
            static_cast<double>(trace.queue_samples[row][i]) / static_cast<double>(r);
        sup = std::max(sup, std::abs(scaled - fx[i]));
      }
    }
    rows[idx] = {r, cfg.horizon, sup};
  });
  return rows;
}

inline void write_scaling_csv(const std::vector<ScalingRow>& rows, std::ostream& os) {
  os << "r,horizon,sup_deviation\n";
  char buf[40];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.sup_deviation);
    os << r.r << "," << r.horizon << "," << buf << "\n";
  }
}

// ---------------------------------------------------------------------------
// One-slot marginal frequency check

struct RateCheckRow {
  double frequency = 0.0;
  double expected = 0.0;
  double z = 0.0;
};

// Repeatedly redraws the transmission set from a frozen state and compares
// each node's empirical frequency with its rate phi_i. Degenerate rates (0 or
// 1) must match exactly.
inline std::vector<RateCheckRow> one_slot_rate_check(const std::vector<std::int64_t>& counts,
                                                     const InterferenceGraph& g,
                                                     std::int64_t draws, std::uint64_t seed = 0) {
  if (draws < 10000) throw std::invalid_argument("one_slot_rate_check: draws must be >= 10000");
  const int n = g.node_count();
  std::vector<std::int64_t> hits(n, 0);
  for (std::int64_t t = 0; t < draws; ++t) {
    const auto set =
        draw_transmissions(counts, g, ProtocolMode::exact_priority(),
                           derive_key({seed, static_cast<std::uint64_t>(Stream::experiment)}), t);
    for (int i : set) ++hits[i];
  }
  const std::vector<double> rates = phi_counts(counts, g);
  std::vector<RateCheckRow> rows(n);
  for (int i = 0; i < n; ++i) {
    rows[i].frequency = static_cast<double>(hits[i]) / static_cast<double>(draws);
    rows[i].expected = rates[i];
    const double var = rates[i] * (1.0 - rates[i]);
    if (var > 0.0) {
      rows[i].z = (rows[i].frequency - rates[i]) /
                  std::sqrt(var / static_cast<double>(draws));
    } else {
      rows[i].z = rows[i].frequency == rates[i] ? 0.0
                                                : std::numeric_limits<double>::infinity();
    }
  }
  return rows;
}

}  // namespace csma
