#pragma once

#include <chrono>
#include <utility>

#include "csma/config.hpp"
#include "csma/simulator.hpp"
#include "csma/trace.hpp"

namespace csma {

// Execute a scenario slot by slot. Strictly sequential; every random draw is
// keyed by (seed, purpose, slot, node), so the result is a pure function of
// the config.
inline Trace run(const ScenarioConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const InterferenceGraph g = config.graph.build();
  const int n = g.node_count();
  const ArrivalSampler sampler(config.arrival_model, config.arrival_rates(n));

  QueueState state;
  state.counts = config.initial_state.empty() ? std::vector<std::int64_t>(n, 0)
                                              : config.initial_state;
  state.slot = 0;

  Trace trace;
  trace.config_digest = config.digest();
  trace.node_count = n;
  trace.horizon = config.horizon;
  trace.decimation = config.decimation;
  trace.throughput_factor = config.protocol_mode.throughput_factor();
  trace.cum_transmissions.assign(n, 0);
  trace.cum_departures.assign(n, 0);
  trace.total_queue.reserve(config.horizon + 1);

  auto record_total = [&](const QueueState& s) {
    std::int64_t tot = 0;
    for (std::int64_t v : s.counts) tot += v;
    trace.total_queue.push_back(tot);
  };
  auto sample = [&](const QueueState& s) {
    trace.sample_slots.push_back(s.slot);
    trace.queue_samples.push_back(s.counts);
  };

  record_total(state);
  sample(state);
  for (std::int64_t k = 0; k < config.horizon; ++k) {
    auto [next, outcome] =
        config.hop_mode.kind == HopMode::Kind::multi_hop
            ? step_multi_hop(state, g, config.hop_mode.k, sampler, config.protocol_mode,
                             config.seed)
            : step_single_hop(state, g, sampler, config.protocol_mode, config.seed);
    for (int i : outcome.transmitted) ++trace.cum_transmissions[i];
    for (int i : outcome.departures) ++trace.cum_departures[i];
    state = std::move(next);
    record_total(state);
    if (state.slot % config.decimation == 0 || state.slot == config.horizon) sample(state);
  }
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

}  // namespace csma
