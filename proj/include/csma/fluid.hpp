#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csma/error.hpp"
#include "csma/graph.hpp"
#include "csma/rate.hpp"

namespace csma {

// At the all-zero neighborhood the 0/0=0 dynamics are genuinely ambiguous:
// queues could start filling at rate lambda, or the zero solution can persist.
// The caller picks explicitly.
enum class BoundaryMode { emitting, absorbing };

inline const char* boundary_mode_name(BoundaryMode m) {
  return m == BoundaryMode::emitting ? "emitting" : "absorbing";
}

// dx_i/dt for the single-hop dynamics: lambda_i - phi_i(x). For x_i = 0 with
// a positive neighbor phi_i is already 0, so the same expression covers the
// one-sided derivative lambda_i; only a fully zero closed neighborhood needs
// the boundary-mode choice.
inline std::vector<double> single_hop_drift(const std::vector<double>& x,
                                            const std::vector<double>& lambda,
                                            const InterferenceGraph& g, BoundaryMode mode) {
  const int n = g.node_count();
  if (static_cast<int>(x.size()) != n || static_cast<int>(lambda.size()) != n)
    throw std::invalid_argument("single_hop_drift: size mismatch");
  const std::vector<double> rates = phi(x, g);
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) {
    double nbhd = 0.0;
    for (int j : g.closed_neighborhood(i)) nbhd += x[j];
    if (nbhd > 0.0)
      r[i] = lambda[i] - rates[i];
    else
      r[i] = mode == BoundaryMode::emitting ? lambda[i] : 0.0;
  }
  return r;
}

// dx_i/dt for multi-hop relay dynamics on a regular graph with closed
// neighborhoods of size m: exogenous input lambda_total/k, service phi_i, and
// relayed input (1-1/k)/(m-1) * sum of neighbor services.
inline std::vector<double> multi_hop_drift(const std::vector<double>& x, double lambda_total,
                                           int k, const InterferenceGraph& g,
                                           BoundaryMode mode = BoundaryMode::emitting) {
  const int n = g.node_count();
  if (static_cast<int>(x.size()) != n)
    throw std::invalid_argument("multi_hop_drift: size mismatch");
  auto deg = g.regularity_degree();
  if (!deg) throw ConfigError("multi_hop_drift requires a regular graph");
  if (k < 1) throw ConfigError("multi_hop_drift requires k >= 1");
  const int m = *deg + 1;
  const double lam = lambda_total / static_cast<double>(k);
  const double relay =
      m > 1 ? (1.0 - 1.0 / static_cast<double>(k)) / static_cast<double>(m - 1) : 0.0;
  const std::vector<double> rates = phi(x, g);
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) {
    double nbhd = 0.0;
    for (int j : g.closed_neighborhood(i)) nbhd += x[j];
    if (nbhd > 0.0) {
      double incoming = 0.0;
      for (int j : g.neighbors(i)) incoming += rates[j];
      r[i] = lam - rates[i] + relay * incoming;
    } else {
      r[i] = mode == BoundaryMode::emitting ? lam : 0.0;
    }
  }
  return r;
}

struct FluidTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;  // aligned with times
  BoundaryMode boundary_mode = BoundaryMode::emitting;
  double dt = 0.0;

  const std::vector<double>& state_at(std::size_t idx) const { return states[idx]; }

  // Nearest grid point to time t.
  std::size_t grid_index(double t) const {
    if (dt <= 0.0 || times.size() < 2) return 0;
    const auto idx = static_cast<std::int64_t>(std::llround(t / dt));
    return static_cast<std::size_t>(
        std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(times.size()) - 1));
  }
};

using DriftFn = std::function<std::vector<double>(const std::vector<double>&)>;

// Forward Euler with componentwise clamping at zero. Drifts are bounded and
// piecewise smooth, so first order is enough at small dt.
inline FluidTrajectory integrate(const std::vector<double>& x0, const DriftFn& drift, double T,
                                 double dt, BoundaryMode mode) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (T < 0.0) throw std::invalid_argument("integrate: T must be >= 0");
  for (double v : x0)
    if (v < 0.0) throw std::domain_error("integrate: negative initial state");
  FluidTrajectory traj;
  traj.boundary_mode = mode;
  traj.dt = dt;
  const auto steps = static_cast<std::int64_t>(std::ceil(T / dt - 1e-9));
  std::vector<double> x = x0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  for (std::int64_t s = 0; s < steps; ++s) {
    const std::vector<double> r = drift(x);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::max(0.0, x[i] + dt * r[i]);
    traj.times.push_back(static_cast<double>(s + 1) * dt);
    traj.states.push_back(x);
  }
  return traj;
}

// Rows: t, x0..x{N-1}, full double precision so trajectories round-trip.
inline void write_trajectory_csv(const FluidTrajectory& traj, std::ostream& os) {
  const std::size_t n = traj.states.empty() ? 0 : traj.states[0].size();
  os << "t";
  for (std::size_t i = 0; i < n; ++i) os << ",x" << i;
  os << "\n";
  char buf[40];
  for (std::size_t row = 0; row < traj.times.size(); ++row) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.times[row]);
    os << buf;
    for (double v : traj.states[row]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << "," << buf;
    }
    os << "\n";
  }
}

inline double lyapunov_max(const std::vector<double>& x, const std::vector<double>& p) {
  if (x.size() != p.size()) throw std::invalid_argument("lyapunov_max: size mismatch");
  double best = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(p[i] > 0.0)) throw std::domain_error("lyapunov_max: weights must be positive");
    best = std::max(best, x[i] / p[i]);
  }
  return best;
}

struct DriftCheckReport {
  // "decreasing": monotone beyond tolerance wherever the check applies.
  // "violation": some step decreased too slowly (first_violation_time set).
  // "hypothesis_not_satisfied": premise fails; observed behaviour reported,
  // not judged.
  std::string status;
  double epsilon_margin = 0.0;
  double required_decrease_rate = 0.0;  // per unit time while above threshold
  double threshold = 0.0;
  double tolerance = 0.0;
  double first_violation_time = -1.0;
  double worst_excess = 0.0;  // most positive (observed - allowed) step delta
  std::int64_t steps_checked = 0;
  double value_initial = 0.0;
  double value_final = 0.0;
  bool increased_overall = false;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["status"] = status;
    j["epsilon_margin"] = epsilon_margin;
    j["required_decrease_rate"] = required_decrease_rate;
    j["threshold"] = threshold;
    j["tolerance"] = tolerance;
    j["first_violation_time"] = first_violation_time;
    j["worst_excess"] = worst_excess;
    j["steps_checked"] = steps_checked;
    j["value_initial"] = value_initial;
    j["value_final"] = value_final;
    j["increased_overall"] = increased_overall;
    return j;
  }
};

// Checks the weighted-maximum Lyapunov function F(x) = max_i x_i/p_i along an
// integrated trajectory: while F stays above a small floor, each Euler step
// must shed at least dt * margin / max(p) up to an O(dt^2) tolerance, where
// margin = min_i (phi_i(p) - lambda_i) must be positive for the premise to
// hold.
inline DriftCheckReport lyapunov_max_drift_check(const FluidTrajectory& traj,
                                                 const std::vector<double>& p,
                                                 const std::vector<double>& lambda,
                                                 const InterferenceGraph& g) {
  DriftCheckReport rep;
  const std::vector<double> rate_at_p = phi(p, g);
  double margin = std::numeric_limits<double>::infinity();
  double pmax = 0.0, pmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw std::domain_error("lyapunov_max_drift_check: weights must be > 0");
    margin = std::min(margin, rate_at_p[i] - lambda[i]);
    pmax = std::max(pmax, p[i]);
    pmin = std::min(pmin, p[i]);
  }
  rep.epsilon_margin = margin;
  const double dt = traj.dt;
  rep.threshold = 10.0 * dt / pmin;
  rep.tolerance = 10.0 * dt * dt;
  rep.required_decrease_rate = margin / pmax;
  rep.value_initial = lyapunov_max(traj.states.front(), p);
  rep.value_final = lyapunov_max(traj.states.back(), p);
  rep.increased_overall = rep.value_final > rep.value_initial;
  if (!(margin > 0.0)) {
    rep.status = "hypothesis_not_satisfied";
    return rep;
  }
  rep.status = "decreasing";
  double f_prev = rep.value_initial;
  for (std::size_t s = 1; s < traj.states.size(); ++s) {
    const double f = lyapunov_max(traj.states[s], p);
    if (f_prev > rep.threshold) {
      ++rep.steps_checked;
      const double allowed = -dt * rep.required_decrease_rate + rep.tolerance;
      const double excess = (f - f_prev) - allowed;
      if (excess > 0.0) {
        if (rep.status == "decreasing") {
          rep.status = "violation";
          rep.first_violation_time = traj.times[s];
        }
        rep.worst_excess = std::max(rep.worst_excess, excess);
      }
    }
    f_prev = f;
  }
  return rep;
}

// Utility-style Lyapunov check with the concrete instance g(y) = y^2,
// h(y) = -1/y: F(x) = sum_i x_i^3 / (3 nu_i^2). With nu componentwise above
// lambda by eps and nu an achievable rate vector, F must decrease at
// instantaneous rate at least eps * sum_i x_i^2/nu_i^2.
inline DriftCheckReport lyapunov_utility_drift_check(const FluidTrajectory& traj,
                                                     const std::vector<double>& nu,
                                                     const std::vector<double>& lambda) {
  DriftCheckReport rep;
  double margin = std::numeric_limits<double>::infinity();
  double inv_nu_sq_sum = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (!(nu[i] > 0.0))
      throw std::domain_error("lyapunov_utility_drift_check: nu must be positive");
    margin = std::min(margin, nu[i] - lambda[i]);
    inv_nu_sq_sum += 1.0 / (nu[i] * nu[i]);
  }
  rep.epsilon_margin = margin;
  const double dt = traj.dt;

  auto value = [&](const std::vector<double>& x) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) f += x[i] * x[i] * x[i] / (3.0 * nu[i] * nu[i]);
    return f;
  };
  auto weight = [&](const std::vector<double>& x) {  // sum g_i(x_i) h'_i(nu_i)
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i] / (nu[i] * nu[i]);
    return s;
  };

  rep.value_initial = value(traj.states.front());
  rep.value_final = value(traj.states.back());
  rep.increased_overall = rep.value_final > rep.value_initial;
  rep.threshold = 1e-3 * rep.value_initial + 1e-12;
  if (!(margin > 0.0)) {
    rep.status = "hypothesis_not_satisfied";
    return rep;
  }
  rep.status = "decreasing";
  rep.required_decrease_rate = margin;  // times the state-dependent weight
  double f_prev = rep.value_initial;
  for (std::size_t s = 1; s < traj.states.size(); ++s) {
    const double f = value(traj.states[s]);
    if (f_prev > rep.threshold) {
      ++rep.steps_checked;
      const double w = weight(traj.states[s - 1]);
      const double tol = 10.0 * dt * dt * (inv_nu_sq_sum + w);
      rep.tolerance = std::max(rep.tolerance, tol);
      const double allowed = -dt * margin * w + tol;
      const double excess = (f - f_prev) - allowed;
      if (excess > 0.0) {
        if (rep.status == "decreasing") {
          rep.status = "violation";
          rep.first_violation_time = traj.times[s];
        }
        rep.worst_excess = std::max(rep.worst_excess, excess);
      }
    }
    f_prev = f;
  }
  return rep;
}

// d/dt of (1/2) sum x_i^2 along the multi-hop drift: sum_i x_i r_i. Below the
// symmetric capacity this is strictly negative away from zero.
inline double quadratic_drift_multi_hop(const std::vector<double>& x, double lambda_total, int k,
                                        const InterferenceGraph& g) {
  const std::vector<double> r = multi_hop_drift(x, lambda_total, k, g, BoundaryMode::emitting);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * r[i];
  return s;
}

}  // namespace csma
