#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csma/error.hpp"
#include "csma/graph.hpp"
#include "csma/rate.hpp"
#include "csma/rng.hpp"

namespace csma {

inline constexpr double kMembershipTol = 1e-9;

enum class MembershipStatus { strictly_dominated, boundary_member, infeasible_within_budget };

inline const char* membership_status_name(MembershipStatus s) {
  switch (s) {
    case MembershipStatus::strictly_dominated: return "strictly_dominated";
    case MembershipStatus::boundary_member: return "boundary_member";
    case MembershipStatus::infeasible_within_budget: return "infeasible_within_budget";
  }
  return "infeasible_within_budget";
}

struct StabilityVerdict {
  MembershipStatus status = MembershipStatus::infeasible_within_budget;
  std::optional<std::vector<double>> witness;
  double margin = -std::numeric_limits<double>::infinity();
  std::int64_t search_budget_used = 0;
  // True when the verdict follows from the exact regular-graph criterion
  // rather than search; only then is a negative verdict a proof.
  bool exact_certificate = false;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["status"] = membership_status_name(status);
    if (witness)
      j["witness"] = *witness;
    else
      j["witness"] = nullptr;
    j["margin"] = margin;
    j["search_budget_used"] = search_budget_used;
    j["exact_certificate"] = exact_certificate;
    return j;
  }
};

// 1/m for an (m-1)-regular graph: the exact symmetric capacity per node.
inline std::optional<double> symmetric_threshold(const InterferenceGraph& g) {
  if (auto d = g.regularity_degree()) return 1.0 / static_cast<double>(*d + 1);
  return std::nullopt;
}

namespace detail {

// Margin min_i(phi_i(p) - lambda_i), the quantity a witness is judged by.
inline double witness_margin(const std::vector<double>& p, const std::vector<double>& lambda,
                             const InterferenceGraph& g) {
  const std::vector<double> rates = phi(p, g);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) m = std::min(m, rates[i] - lambda[i]);
  return m;
}

// Power iteration on A = diag(lambda) * (Adj + I). The feasibility question
// "exists p > 0 with lambda <= phi(p)" is exactly "A p <= p for some p > 0",
// so the spectral radius of A decides membership and the Perron vector is the
// optimal witness: at it, phi_i(p)/lambda_i = 1/rho for every i.
inline std::vector<double> perron_vector(const std::vector<double>& lambda,
                                         const InterferenceGraph& g, int iterations) {
  const int n = g.node_count();
  std::vector<double> v(n, 1.0 / static_cast<double>(n)), av(n);
  for (int it = 0; it < iterations; ++it) {
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j : g.closed_neighborhood(i)) s += v[j];
      av[i] = lambda[i] * s;
      norm += av[i];
    }
    if (!(norm > 0.0)) break;
    for (int i = 0; i < n; ++i) v[i] = av[i] / norm;
  }
  return v;
}

// Subgradient ascent on the concave surrogate
//   G(q) = min_i (q_i - logsumexp_{j in N_i} q_j - log lambda_i),
// whose maximum equals -log(spectral radius of A). Returns the best margin
// found and updates best_p in place.
inline std::int64_t ascend_from(std::vector<double> q, const std::vector<double>& lambda,
                                const InterferenceGraph& g, std::int64_t max_steps,
                                std::vector<double>& best_p, double& best_margin) {
  const int n = g.node_count();
  std::vector<double> p(n);
  std::int64_t used = 0;
  for (std::int64_t step = 0; step < max_steps; ++step) {
    ++used;
    double qmax = *std::max_element(q.begin(), q.end());
    double psum = 0.0;
    for (int i = 0; i < n; ++i) {
      p[i] = std::exp(q[i] - qmax);
      psum += p[i];
    }
    for (int i = 0; i < n; ++i) p[i] /= psum;
    const double margin = witness_margin(p, lambda, g);
    if (margin > best_margin) {
      best_margin = margin;
      best_p = p;
    }
    // Supergradient of the active (worst) component.
    int worst = 0;
    double worst_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      double denom = 0.0;
      for (int j : g.closed_neighborhood(i)) denom += p[j];
      const double val = std::log(p[i] / denom) - std::log(lambda[i]);
      if (val < worst_val) {
        worst_val = val;
        worst = i;
      }
    }
    double denom = 0.0;
    for (int j : g.closed_neighborhood(worst)) denom += p[j];
    const double eta = 0.5 / std::sqrt(static_cast<double>(step + 1));
    for (int j : g.closed_neighborhood(worst)) q[j] -= eta * p[j] / denom;
    q[worst] += eta;
  }
  return used;
}

}  // namespace detail

// Decide whether lambda admits a weight vector p with lambda <= phi(p).
// Sound: the returned witness is re-verified by direct evaluation. A negative
// answer is only a proof in the exact regular-uniform case; otherwise it
// means the search failed within budget.
inline StabilityVerdict c_membership(const std::vector<double>& lambda,
                                     const InterferenceGraph& g, std::int64_t budget = 20000,
                                     std::uint64_t seed = 0) {
  const int n = g.node_count();
  if (static_cast<int>(lambda.size()) != n)
    throw std::invalid_argument("c_membership: lambda length mismatch");
  for (double v : lambda)
    if (!(v > 0.0)) throw std::domain_error("c_membership: lambda entries must be positive");

  StabilityVerdict verdict;

  const bool uniform =
      std::all_of(lambda.begin(), lambda.end(), [&](double v) { return v == lambda[0]; });
  if (uniform) {
    if (auto thr = symmetric_threshold(g)) {
      const std::vector<double> ones(n, 1.0);
      verdict.margin = detail::witness_margin(ones, lambda, g);  // = 1/m - lambda exactly
      verdict.exact_certificate = true;
      if (verdict.margin > kMembershipTol) {
        verdict.status = MembershipStatus::strictly_dominated;
        verdict.witness = ones;
      } else if (verdict.margin >= -kMembershipTol) {
        verdict.status = MembershipStatus::boundary_member;
        verdict.witness = ones;
      } else {
        verdict.status = MembershipStatus::infeasible_within_budget;  // certified infeasible
      }
      return verdict;
    }
  }

  std::vector<double> best_p(n, 1.0 / static_cast<double>(n));
  double best_margin = detail::witness_margin(best_p, lambda, g);
  std::int64_t used = 1;

  // Spectral start: usually lands on the optimum directly.
  {
    const int iters = static_cast<int>(std::min<std::int64_t>(budget / 4 + 100, 4000));
    std::vector<double> pv = detail::perron_vector(lambda, g, iters);
    used += iters;
    const double m = detail::witness_margin(pv, lambda, g);
    if (m > best_margin) {
      best_margin = m;
      best_p = pv;
    }
  }

  // Multi-start polish: all-ones, lambda itself, and random log-normal draws.
  std::vector<std::vector<double>> starts;
  starts.emplace_back(n, 0.0);
  {
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = std::log(lambda[i]);
    starts.push_back(std::move(q));
  }
  {
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = std::log(std::max(best_p[i], 1e-300));
    starts.push_back(std::move(q));
  }
  RngStream rng = substream(seed, Stream::search);
  for (int extra = 0; extra < 3; ++extra) {
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) {
      const double u1 = rng.next_open(), u2 = rng.next_open();
      q[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    starts.push_back(std::move(q));
  }
  const std::int64_t per_start =
      std::max<std::int64_t>(1, (budget - used) / static_cast<std::int64_t>(starts.size()));
  for (auto& q : starts) {
    if (used >= budget) break;
    used += detail::ascend_from(std::move(q), lambda, g,
                                std::min<std::int64_t>(per_start, budget - used), best_p,
                                best_margin);
  }

  verdict.search_budget_used = used;
  verdict.margin = best_margin;
  if (best_margin > kMembershipTol) {
    verdict.status = MembershipStatus::strictly_dominated;
    verdict.witness = best_p;
  } else if (best_margin >= -kMembershipTol) {
    verdict.status = MembershipStatus::boundary_member;
    verdict.witness = best_p;
  } else {
    verdict.status = MembershipStatus::infeasible_within_budget;
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// 2-fairness of the rate vector phi(x)

struct FairnessReport {
  double j_at_x = 0.0;      // objective at mu = phi(x)
  double min_gap = 0.0;     // min over samples of J(phi(p)) - J(phi(x))
  std::vector<double> witness_p;  // p attaining the minimum gap
  std::int64_t samples_evaluated = 0;
  std::int64_t equality_cases = 0;  // |gap| <= 1e-12

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["j_at_x"] = j_at_x;
    j["min_gap"] = min_gap;
    j["witness_p"] = witness_p;
    j["samples_evaluated"] = samples_evaluated;
    j["equality_cases"] = equality_cases;
    return j;
  }
};

namespace detail {

// J(mu) = sum_i x_i^2 / mu_i, the objective whose minimizer over achievable
// rates is the 2-fair allocation. +inf when some needed rate is zero.
inline double fairness_objective(const std::vector<double>& x, const std::vector<double>& mu) {
  double j = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(mu[i] > 0.0)) return std::numeric_limits<double>::infinity();
    j += x[i] * x[i] / mu[i];
  }
  return j;
}

}  // namespace detail

// Checks that mu = phi(x) minimizes J over the sampled family mu = phi(p):
// the gap J(phi(p)) - J(phi(x)) must never be meaningfully negative, and is 0
// at p proportional to x.
inline FairnessReport two_fairness_check(const std::vector<double>& x,
                                         const InterferenceGraph& g, std::int64_t samples,
                                         std::uint64_t seed = 0) {
  const int n = g.node_count();
  if (static_cast<int>(x.size()) != n)
    throw std::invalid_argument("two_fairness_check: size mismatch");
  for (double v : x)
    if (!(v > 0.0)) throw std::domain_error("two_fairness_check: x entries must be positive");

  FairnessReport rep;
  rep.j_at_x = detail::fairness_objective(x, phi(x, g));

  std::vector<std::vector<double>> probes;
  probes.push_back(x);  // proportional: gap must be exactly 0
  {
    std::vector<double> scaled(x);
    for (double& v : scaled) v *= 2.5;
    probes.push_back(std::move(scaled));
  }
  for (int i = 0; i < n; ++i) {
    std::vector<double> bump(x);
    bump[i] *= 1.1;
    probes.push_back(std::move(bump));
  }
  RngStream rng = substream(seed, Stream::fairness);
  for (std::int64_t s = 0; s < samples; ++s) {
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i)
      p[i] = std::pow(10.0, -2.0 + 4.0 * rng.next_double());  // log-uniform [1e-2, 1e2]
    probes.push_back(std::move(p));
  }

  rep.min_gap = std::numeric_limits<double>::infinity();
  for (const auto& p : probes) {
    const double gap = detail::fairness_objective(x, phi(p, g)) - rep.j_at_x;
    ++rep.samples_evaluated;
    if (std::abs(gap) <= 1e-12) ++rep.equality_cases;
    if (gap < rep.min_gap) {
      rep.min_gap = gap;
      rep.witness_p = p;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Cyclic-sum inequality exploration

// The cyclic expression sum_i x_i (x_i - x_{i+1}) / (x_{i-1} + x_i + x_{i+1})
// on a circle of length n, indices mod n, zero-denominator terms contributing
// zero. Homogeneous of degree 1.
inline double cyclic_inequality_value(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("cyclic_inequality_value: need n >= 3");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = x[(i + n - 1) % n], next = x[(i + 1) % n];
    const double den = prev + x[i] + next;
    if (den > 0.0) sum += x[i] * (x[i] - next) / den;
  }
  return sum;
}

struct ConjectureScanReport {
  double min_value = std::numeric_limits<double>::infinity();
  std::vector<double> argmin;
  int argmin_n = 0;
  std::string argmin_distribution;
  std::int64_t samples_evaluated = 0;
  double min_after_descent = std::numeric_limits<double>::infinity();
  std::vector<double> descent_argmin;
  std::vector<double> histogram_edges;
  std::vector<std::int64_t> histogram_counts;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["min_value"] = min_value;
    j["argmin"] = argmin;
    j["argmin_n"] = argmin_n;
    j["argmin_distribution"] = argmin_distribution;
    j["samples_evaluated"] = samples_evaluated;
    j["min_after_descent"] = min_after_descent;
    j["descent_argmin"] = descent_argmin;
    j["histogram_edges"] = histogram_edges;
    j["histogram_counts"] = histogram_counts;
    return j;
  }
};

namespace detail {

inline const char* kScanDistributions[] = {"uniform", "exponential", "spiky", "sparse", "mixed"};

inline std::vector<double> draw_scan_vector(int n, int dist, RngStream& rng) {
  std::vector<double> x(n, 0.0);
  switch (dist) {
    case 0:  // uniform
      for (auto& v : x) v = rng.next_open();
      break;
    case 1:  // exponential
      for (auto& v : x) v = -std::log(rng.next_open());
      break;
    case 2:  // spiky: one dominant coordinate
      for (auto& v : x) v = 0.01 * rng.next_open();
      x[rng.next_below(static_cast<std::uint64_t>(n))] = 1.0 + 9.0 * rng.next_double();
      break;
    case 3:  // sparse: zeros exercise the vanishing-denominator convention
      for (auto& v : x) v = rng.next_double() < 0.5 ? 0.0 : rng.next_open();
      break;
    default:  // mixed: heavy-tailed spread
      for (auto& v : x) v = std::pow(rng.next_open(), 3.0) * (rng.next_double() < 0.2 ? 50.0 : 1.0);
      break;
  }
  double s = 0.0;
  for (double v : x) s += v;
  if (!(s > 0.0)) {
    x[0] = 1.0;
    s = 1.0;
  }
  for (auto& v : x) v /= s;  // degree-1 homogeneity: normalize to sum 1
  return x;
}

// Projected finite-difference descent on the normalized simplex, hunting for
// values below the sampled minimum.
inline std::pair<double, std::vector<double>> descend_cyclic(std::vector<double> x,
                                                             int iterations) {
  const std::size_t n = x.size();
  double fx = cyclic_inequality_value(x);
  double eta = 0.05;
  const double h = 1e-7;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> hi = x, lo = x;
      hi[i] += h;
      lo[i] = std::max(0.0, lo[i] - h);
      grad[i] = (cyclic_inequality_value(hi) - cyclic_inequality_value(lo)) / (hi[i] - lo[i]);
    }
    std::vector<double> cand(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cand[i] = std::max(0.0, x[i] - eta * grad[i]);
      s += cand[i];
    }
    if (!(s > 0.0)) break;
    for (auto& v : cand) v /= s;
    const double fc = cyclic_inequality_value(cand);
    if (fc < fx) {
      x = std::move(cand);
      fx = fc;
      eta *= 1.2;
    } else {
      eta *= 0.5;
      if (eta < 1e-12) break;
    }
  }
  return {fx, x};
}

}  // namespace detail

// Randomized scan plus local descent for counterexamples to non-negativity
// of the cyclic expression. Histogram bins are fixed so output is stable
// across sample counts.
inline ConjectureScanReport conjecture_scan(int n_min, int n_max, std::int64_t samples_per_n,
                                            std::uint64_t seed = 0, int descent_starts = 10,
                                            int descent_iterations = 200) {
  if (n_min < 3 || n_max < n_min) throw std::invalid_argument("conjecture_scan: bad n range");
  if (samples_per_n < 1) throw std::invalid_argument("conjecture_scan: samples must be >= 1");

  ConjectureScanReport rep;
  const int bins = 56;
  const double lo = -0.1, hi = 1.02;
  rep.histogram_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b)
    rep.histogram_edges[b] = lo + (hi - lo) * static_cast<double>(b) / bins;
  rep.histogram_counts.assign(bins, 0);

  struct Worst {
    double value;
    std::vector<double> x;
  };
  std::vector<Worst> worst;  // kept sorted ascending, at most descent_starts

  for (int n = n_min; n <= n_max; ++n) {
    for (std::int64_t s = 0; s < samples_per_n; ++s) {
      RngStream rng = substream(seed, Stream::scan, static_cast<std::uint64_t>(n),
                                static_cast<std::uint64_t>(s));
      const int dist = static_cast<int>(s % 5);
      const std::vector<double> x = detail::draw_scan_vector(n, dist, rng);
      const double v = cyclic_inequality_value(x);
      ++rep.samples_evaluated;
      const int bin = std::clamp(static_cast<int>((v - lo) / (hi - lo) * bins), 0, bins - 1);
      ++rep.histogram_counts[bin];
      if (v < rep.min_value) {
        rep.min_value = v;
        rep.argmin = x;
        rep.argmin_n = n;
        rep.argmin_distribution = detail::kScanDistributions[dist];
      }
      if (static_cast<int>(worst.size()) < descent_starts || v < worst.back().value) {
        worst.push_back({v, x});
        std::sort(worst.begin(), worst.end(),
                  [](const Worst& a, const Worst& b) { return a.value < b.value; });
        if (static_cast<int>(worst.size()) > descent_starts) worst.pop_back();
      }
    }
  }

  rep.min_after_descent = rep.min_value;
  rep.descent_argmin = rep.argmin;
  for (const auto& w : worst) {
    auto [v, x] = detail::descend_cyclic(w.x, descent_iterations);
    if (v < rep.min_after_descent) {
      rep.min_after_descent = v;
      rep.descent_argmin = x;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Right-routing drift on a circle

// Drift of (1/2) sum x_i^2 when every relayed message moves to its clockwise
// neighbour: sum_i x_i (lambda_total/k - phi_i + (1-1/k) phi_{i-1}), with phi
// on the circle of size n.
inline double asymmetric_routing_drift(const std::vector<double>& x, double lambda_total, int k,
                                       int n) {
  if (n < 3) throw ConfigError("asymmetric_routing_drift requires a circle of size >= 3");
  if (static_cast<int>(x.size()) != n)
    throw std::invalid_argument("asymmetric_routing_drift: size mismatch");
  if (k < 1) throw ConfigError("asymmetric_routing_drift requires k >= 1");
  std::vector<double> rates(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (x[i] < 0.0) throw std::domain_error("asymmetric_routing_drift: negative entry");
    const double den = x[(i + n - 1) % n] + x[i] + x[(i + 1) % n];
    if (den > 0.0) rates[i] = x[i] / den;
  }
  const double lam = lambda_total / static_cast<double>(k);
  const double relay = 1.0 - 1.0 / static_cast<double>(k);
  double drift = 0.0;
  for (int i = 0; i < n; ++i)
    drift += x[i] * (lam - rates[i] + relay * rates[(i + n - 1) % n]);
  return drift;
}

inline double asymmetric_routing_drift(const std::vector<double>& x, double lambda_total, int k,
                                       const InterferenceGraph& g) {
  const int n = g.node_count();
  for (int i = 0; i < n; ++i) {
    const std::vector<int> expect{(i + 1) % n, (i + n - 1) % n};
    std::vector<int> want{std::min(expect[0], expect[1]), std::max(expect[0], expect[1])};
    if (g.neighbors(i) != want)
      throw ConfigError("asymmetric_routing_drift requires circle topology");
  }
  return asymmetric_routing_drift(x, lambda_total, k, n);
}

}  // namespace csma
