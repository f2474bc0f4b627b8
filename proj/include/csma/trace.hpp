#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csma/error.hpp"

namespace csma {

// Recorded trajectory of one run. The full per-node matrix is kept only at
// decimation points; the scalar total is kept every slot so slope estimation
// never loses resolution. wall_seconds is diagnostics for interactive use and
// deliberately excluded from both writers: serialized outputs depend only on
// config and seed.
struct Trace {
  std::string config_digest;
  int node_count = 0;
  std::int64_t horizon = 0;
  std::int64_t decimation = 1;
  std::vector<std::int64_t> sample_slots;
  std::vector<std::vector<std::int64_t>> queue_samples;  // aligned with sample_slots
  std::vector<std::int64_t> total_queue;                 // one entry per slot 0..horizon
  std::vector<std::int64_t> cum_transmissions;
  std::vector<std::int64_t> cum_departures;
  double throughput_factor = 1.0;
  double wall_seconds = 0.0;

  const std::vector<std::int64_t>& final_counts() const { return queue_samples.back(); }
};

// Rows: slot, total queue, then one column per node, at decimation samples.
inline void write_trace_csv(const Trace& t, std::ostream& os) {
  os << "slot,total";
  for (int i = 0; i < t.node_count; ++i) os << ",x" << i;
  os << "\n";
  for (std::size_t r = 0; r < t.sample_slots.size(); ++r) {
    os << t.sample_slots[r] << "," << t.total_queue[t.sample_slots[r]];
    for (std::int64_t v : t.queue_samples[r]) os << "," << v;
    os << "\n";
  }
}

inline nlohmann::json trace_summary_json(const Trace& t) {
  nlohmann::json j;
  j["config_digest"] = t.config_digest;
  j["node_count"] = t.node_count;
  j["horizon"] = t.horizon;
  j["decimation"] = t.decimation;
  j["cumulative_transmissions"] = t.cum_transmissions;
  j["cumulative_departures"] = t.cum_departures;
  double mean = 0.0;
  std::int64_t mx = 0;
  for (std::int64_t v : t.total_queue) {
    mean += static_cast<double>(v);
    mx = std::max(mx, v);
  }
  mean /= static_cast<double>(t.total_queue.size());
  j["mean_total_queue"] = mean;
  j["max_total_queue"] = mx;
  j["final_counts"] = t.final_counts();
  std::vector<double> throughput(t.cum_departures.size(), 0.0);
  if (t.horizon > 0)
    for (std::size_t i = 0; i < throughput.size(); ++i)
      throughput[i] = t.throughput_factor * static_cast<double>(t.cum_departures[i]) /
                      static_cast<double>(t.horizon);
  j["throughput"] = throughput;
  return j;
}

}  // namespace csma
