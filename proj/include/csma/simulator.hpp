#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "csma/error.hpp"
#include "csma/graph.hpp"
#include "csma/rate.hpp"
#include "csma/rng.hpp"

namespace csma {

// Per-node message counts at a slot boundary.
struct QueueState {
  std::vector<std::int64_t> counts;
  std::int64_t slot = 0;
};

struct ProtocolMode {
  enum class Kind { exact_priority, independent_bernoulli, epsilon_window };
  Kind kind = Kind::exact_priority;
  double epsilon = 0.0;

  static ProtocolMode exact_priority() { return {Kind::exact_priority, 0.0}; }
  static ProtocolMode independent_bernoulli() { return {Kind::independent_bernoulli, 0.0}; }
  static ProtocolMode epsilon_window(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon_window requires epsilon in (0,1)");
    return {Kind::epsilon_window, eps};
  }

  // Fraction of each slot spent on payload rather than access competition.
  double throughput_factor() const {
    return kind == Kind::epsilon_window ? 1.0 - epsilon : 1.0;
  }
};

struct HopMode {
  enum class Kind { single_hop, multi_hop };
  Kind kind = Kind::single_hop;
  int k = 1;  // mean number of transmissions before a message leaves

  static HopMode single_hop() { return {Kind::single_hop, 1}; }
  static HopMode multi_hop(int k) {
    if (k < 1) throw ConfigError("multi_hop requires k >= 1");
    return {Kind::multi_hop, k};
  }
};

struct SlotOutcome {
  std::vector<int> transmitted;               // sorted node ids
  std::vector<int> departures;                // sorted; equals transmitted in single-hop
  std::vector<std::pair<int, int>> moves;     // multi-hop (from, to)
  std::vector<std::int64_t> arrivals;         // per node
};

enum class ArrivalModel { poisson, bernoulli, deterministic_batch };

// Per-node i.i.d. arrival draws with fixed means. Bernoulli requires rates
// <= 1. deterministic_batch adds floor(rate*(slot+1)) - floor(rate*slot)
// messages, a fixed schedule with the right long-run rate.
class ArrivalSampler {
 public:
  ArrivalSampler(ArrivalModel model, std::vector<double> rates)
      : model_(model), rates_(std::move(rates)) {
    for (double r : rates_) {
      if (!(r > 0.0)) throw ConfigError("arrival rates must be positive");
      if (model_ == ArrivalModel::bernoulli && r > 1.0)
        throw ConfigError("bernoulli arrivals require rate <= 1, got " + std::to_string(r));
    }
    if (model_ == ArrivalModel::poisson) {
      exp_neg_.reserve(rates_.size());
      for (double r : rates_) exp_neg_.push_back(std::exp(-r));
    }
  }

  std::int64_t draw(int node, std::uint64_t seed, std::int64_t slot) const {
    const double rate = rates_[node];
    switch (model_) {
      case ArrivalModel::poisson: {
        RngStream s = substream(seed, Stream::arrival, static_cast<std::uint64_t>(slot),
                                static_cast<std::uint64_t>(node));
        return poisson_draw(s, exp_neg_[node]);
      }
      case ArrivalModel::bernoulli: {
        RngStream s = substream(seed, Stream::arrival, static_cast<std::uint64_t>(slot),
                                static_cast<std::uint64_t>(node));
        return s.next_double() < rate ? 1 : 0;
      }
      case ArrivalModel::deterministic_batch:
        return static_cast<std::int64_t>(std::floor(rate * static_cast<double>(slot + 1))) -
               static_cast<std::int64_t>(std::floor(rate * static_cast<double>(slot)));
    }
    return 0;
  }

  ArrivalModel model() const { return model_; }
  const std::vector<double>& rates() const { return rates_; }

 private:
  ArrivalModel model_;
  std::vector<double> rates_;
  std::vector<double> exp_neg_;
};

// Competition statistic of a node holding `count` messages: the minimum of
// `count` i.i.d. uniforms on (0,1), sampled from a single uniform via its
// exact law P(M > m) = (1-m)^count. Empty nodes get +inf.
inline double competition_stat(std::int64_t count, double u) {
  if (count <= 0) return std::numeric_limits<double>::infinity();
  if (count == 1) return u;
  return 1.0 - std::pow(1.0 - u, 1.0 / static_cast<double>(count));
}

// Node i transmits iff its statistic strictly beats every neighbor's.
// The result is an independent set of the graph by construction.
inline std::vector<int> select_transmitters(const std::vector<double>& stats,
                                            const InterferenceGraph& g) {
  std::vector<int> out;
  for (int i = 0; i < g.node_count(); ++i) {
    if (!(stats[i] < std::numeric_limits<double>::infinity())) continue;
    bool best = true;
    for (int j : g.neighbors(i))
      if (!(stats[i] < stats[j])) {
        best = false;
        break;
      }
    if (best) out.push_back(i);
  }
  return out;
}

namespace detail {

inline bool has_finite_tie(std::vector<double> stats) {
  std::erase_if(stats, [](double v) { return !(v < std::numeric_limits<double>::infinity()); });
  std::sort(stats.begin(), stats.end());
  for (std::size_t i = 1; i < stats.size(); ++i)
    if (stats[i - 1] == stats[i]) return true;
  return false;
}

inline std::vector<double> draw_competition_stats(const std::vector<std::int64_t>& counts,
                                                  std::uint64_t seed, std::int64_t slot,
                                                  std::uint64_t attempt) {
  std::vector<double> stats(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    RngStream s = substream(seed, Stream::service, static_cast<std::uint64_t>(slot), i, attempt);
    stats[i] = competition_stat(counts[i], s.next_open());
  }
  return stats;
}

}  // namespace detail

// One slot's transmission selection. exact_priority and epsilon_window share
// the ordering draw (uniforms on (0,eps) preserve ordering), so they have the
// same law and the same seed path; epsilon only changes reported throughput.
// independent_bernoulli includes node i with probability phi_i(X) on its own
// coin, so the returned set need not be an independent set.
inline std::vector<int> draw_transmissions(const std::vector<std::int64_t>& counts,
                                           const InterferenceGraph& g, const ProtocolMode& mode,
                                           std::uint64_t seed, std::int64_t slot) {
  if (static_cast<int>(counts.size()) != g.node_count())
    throw std::invalid_argument("draw_transmissions: state size does not match graph");
  if (mode.kind == ProtocolMode::Kind::independent_bernoulli) {
    const std::vector<double> rates = phi_counts(counts, g);
    std::vector<int> out;
    for (int i = 0; i < g.node_count(); ++i) {
      RngStream s = substream(seed, Stream::service, static_cast<std::uint64_t>(slot),
                              static_cast<std::uint64_t>(i), 0);
      if (s.next_open() < rates[i]) out.push_back(i);
    }
    return out;
  }
  // Ties among competing statistics have probability zero; if floating-point
  // equality occurs the slot is redrawn from a fresh substream.
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    std::vector<double> stats = detail::draw_competition_stats(counts, seed, slot, attempt);
    if (!detail::has_finite_tie(stats)) return select_transmitters(stats, g);
  }
  throw std::logic_error("draw_transmissions: persistent priority tie");
}

// Single-hop slot: transmissions are selected on the pre-arrival state, each
// transmitted message leaves the system, then arrivals are added.
inline std::pair<QueueState, SlotOutcome> step_single_hop(const QueueState& state,
                                                          const InterferenceGraph& g,
                                                          const ArrivalSampler& arrivals,
                                                          const ProtocolMode& mode,
                                                          std::uint64_t seed) {
  const int n = g.node_count();
  if (static_cast<int>(state.counts.size()) != n || static_cast<int>(arrivals.rates().size()) != n)
    throw std::invalid_argument("step_single_hop: size mismatch");
  QueueState next{state.counts, state.slot + 1};
  SlotOutcome out;
  out.transmitted = draw_transmissions(state.counts, g, mode, seed, state.slot);
  for (int i : out.transmitted) {
    if (state.counts[i] >= 1) {
      next.counts[i] -= 1;
      out.departures.push_back(i);
    }
  }
  out.arrivals.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    out.arrivals[i] = arrivals.draw(i, seed, state.slot);
    next.counts[i] += out.arrivals[i];
  }
  return {std::move(next), std::move(out)};
}

// Multi-hop slot on a regular graph: a transmitted message leaves the system
// with probability 1/k, otherwise it moves to a uniformly random neighbor.
// Moves land after all transmissions resolve, arrivals last, so nothing
// transmitted this slot competes again within it.
inline std::pair<QueueState, SlotOutcome> step_multi_hop(const QueueState& state,
                                                         const InterferenceGraph& g, int k,
                                                         const ArrivalSampler& arrivals,
                                                         const ProtocolMode& mode,
                                                         std::uint64_t seed) {
  const int n = g.node_count();
  if (static_cast<int>(state.counts.size()) != n || static_cast<int>(arrivals.rates().size()) != n)
    throw std::invalid_argument("step_multi_hop: size mismatch");
  if (!g.regularity_degree()) throw ConfigError("multi_hop requires a regular graph");
  if (k < 1) throw ConfigError("multi_hop requires k >= 1");
  QueueState next{state.counts, state.slot + 1};
  SlotOutcome out;
  out.transmitted = draw_transmissions(state.counts, g, mode, seed, state.slot);
  const double leave_prob = 1.0 / static_cast<double>(k);
  for (int i : out.transmitted) {
    if (state.counts[i] < 1) continue;
    next.counts[i] -= 1;
    RngStream s = substream(seed, Stream::routing, static_cast<std::uint64_t>(state.slot),
                            static_cast<std::uint64_t>(i));
    if (s.next_double() < leave_prob) {
      out.departures.push_back(i);
    } else {
      const auto& nbrs = g.neighbors(i);
      out.moves.emplace_back(i, nbrs[s.next_below(nbrs.size())]);
    }
  }
  for (const auto& [from, to] : out.moves) next.counts[to] += 1;
  out.arrivals.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    out.arrivals[i] = arrivals.draw(i, seed, state.slot);
    next.counts[i] += out.arrivals[i];
  }
  return {std::move(next), std::move(out)};
}

}  // namespace csma
