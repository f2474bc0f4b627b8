#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csma/error.hpp"
#include "csma/graph.hpp"
#include "csma/simulator.hpp"

namespace csma {

using nlohmann::json;

namespace detail {

// Strict object parsing: any key outside `allowed` is an error, so configs
// with typos fail loudly instead of silently running defaults.
inline void reject_unknown_keys(const json& obj, const char* where,
                                std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(std::string(where) + ": unknown field \"" + key + "\"");
  }
}

inline const json& require(const json& obj, const char* where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ConfigError(std::string(where) + ": missing required field \"" + key + "\"");
  return *it;
}

inline std::int64_t as_int(const json& v, const char* what) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError(std::string(what) + " must be an integer");
  return v.get<std::int64_t>();
}

inline double as_number(const json& v, const char* what) {
  if (!v.is_number()) throw ConfigError(std::string(what) + " must be a number");
  return v.get<double>();
}

inline std::string as_string(const json& v, const char* what) {
  if (!v.is_string()) throw ConfigError(std::string(what) + " must be a string");
  return v.get<std::string>();
}

}  // namespace detail

// Declarative graph description; build() materializes the InterferenceGraph.
struct GraphSpec {
  enum class Kind { circle, torus, edges, random_regular };
  Kind kind = Kind::circle;
  int n = 0;
  int rows = 0, cols = 0;
  int degree = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> edge_list;

  static GraphSpec parse(const json& j) {
    if (!j.is_object()) throw ConfigError("graph: must be an object");
    const std::string kind = detail::as_string(detail::require(j, "graph", "kind"), "graph.kind");
    GraphSpec s;
    if (kind == "circle") {
      detail::reject_unknown_keys(j, "graph", {"kind", "n"});
      s.kind = Kind::circle;
      s.n = static_cast<int>(detail::as_int(detail::require(j, "graph", "n"), "graph.n"));
    } else if (kind == "torus") {
      detail::reject_unknown_keys(j, "graph", {"kind", "rows", "cols"});
      s.kind = Kind::torus;
      s.rows = static_cast<int>(detail::as_int(detail::require(j, "graph", "rows"), "graph.rows"));
      s.cols = static_cast<int>(detail::as_int(detail::require(j, "graph", "cols"), "graph.cols"));
    } else if (kind == "edges") {
      detail::reject_unknown_keys(j, "graph", {"kind", "n", "edges"});
      s.kind = Kind::edges;
      s.n = static_cast<int>(detail::as_int(detail::require(j, "graph", "n"), "graph.n"));
      const json& e = detail::require(j, "graph", "edges");
      if (!e.is_array()) throw ConfigError("graph.edges must be an array of [i,j] pairs");
      for (const auto& pair : e) {
        if (!pair.is_array() || pair.size() != 2)
          throw ConfigError("graph.edges entries must be [i,j] pairs");
        s.edge_list.emplace_back(static_cast<int>(detail::as_int(pair[0], "graph edge endpoint")),
                                 static_cast<int>(detail::as_int(pair[1], "graph edge endpoint")));
      }
    } else if (kind == "random_regular") {
      detail::reject_unknown_keys(j, "graph", {"kind", "n", "degree", "seed"});
      s.kind = Kind::random_regular;
      s.n = static_cast<int>(detail::as_int(detail::require(j, "graph", "n"), "graph.n"));
      s.degree =
          static_cast<int>(detail::as_int(detail::require(j, "graph", "degree"), "graph.degree"));
      s.seed = static_cast<std::uint64_t>(
          detail::as_int(detail::require(j, "graph", "seed"), "graph.seed"));
    } else {
      throw ConfigError("graph.kind must be one of circle, torus, edges, random_regular");
    }
    return s;
  }

  json to_json() const {
    json j;
    switch (kind) {
      case Kind::circle:
        j["kind"] = "circle";
        j["n"] = n;
        break;
      case Kind::torus:
        j["kind"] = "torus";
        j["rows"] = rows;
        j["cols"] = cols;
        break;
      case Kind::edges: {
        j["kind"] = "edges";
        j["n"] = n;
        json e = json::array();
        for (const auto& [a, b] : edge_list) e.push_back(json::array({a, b}));
        j["edges"] = std::move(e);
        break;
      }
      case Kind::random_regular:
        j["kind"] = "random_regular";
        j["n"] = n;
        j["degree"] = degree;
        j["seed"] = seed;
        break;
    }
    return j;
  }

  InterferenceGraph build() const {
    try {
      switch (kind) {
        case Kind::circle:
          return InterferenceGraph::circle(n);
        case Kind::torus:
          return InterferenceGraph::torus(rows, cols);
        case Kind::edges:
          return InterferenceGraph::from_edges(n, edge_list);
        case Kind::random_regular:
          return InterferenceGraph::random_regular(n, degree, seed);
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("graph: ") + e.what());
    }
    throw ConfigError("graph: unreachable kind");
  }
};

inline constexpr const char* kSchemaVersion = "scenario/1";

// Full description of one simulation run. Everything that affects the
// trajectory lives here; the digest of the canonical serialization names it.
struct ScenarioConfig {
  GraphSpec graph;
  std::vector<double> lambda;      // per-node; scalar input is broadcast
  bool lambda_scalar = false;      // true when given as a single rate
  double lambda_value = 0.0;       // the scalar, when lambda_scalar
  ArrivalModel arrival_model = ArrivalModel::poisson;
  ProtocolMode protocol_mode = ProtocolMode::exact_priority();
  HopMode hop_mode = HopMode::single_hop();
  std::int64_t horizon = 0;
  std::vector<std::int64_t> initial_state;  // empty vector = all zeros
  std::uint64_t seed = 1;
  std::int64_t decimation = 1;

  // Effective per-node exogenous arrival rates: lambda_i in single-hop,
  // lambda/k at every node in multi-hop.
  std::vector<double> arrival_rates(int n) const {
    if (hop_mode.kind == HopMode::Kind::multi_hop) {
      return std::vector<double>(n, lambda_value / static_cast<double>(hop_mode.k));
    }
    return lambda;
  }

  static ScenarioConfig parse(const json& j, std::optional<std::uint64_t> seed_override = {}) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown_keys(j, "config",
                                {"schema", "graph", "lambda", "arrival_model", "protocol_mode",
                                 "hop_mode", "horizon", "initial_state", "seed", "decimation"});
    const json& schema = detail::require(j, "config", "schema");
    if (!schema.is_string() || schema.get<std::string>() != kSchemaVersion)
      throw ConfigError(std::string("config.schema must be \"") + kSchemaVersion + "\"");

    ScenarioConfig c;
    c.graph = GraphSpec::parse(detail::require(j, "config", "graph"));
    const InterferenceGraph g = c.graph.build();
    const int n = g.node_count();

    const json& lam = detail::require(j, "config", "lambda");
    if (lam.is_number()) {
      c.lambda_scalar = true;
      c.lambda_value = detail::as_number(lam, "config.lambda");
      c.lambda.assign(n, c.lambda_value);
    } else if (lam.is_array()) {
      if (static_cast<int>(lam.size()) != n)
        throw ConfigError("config.lambda vector length does not match graph node count");
      for (const auto& v : lam) c.lambda.push_back(detail::as_number(v, "config.lambda entry"));
    } else {
      throw ConfigError("config.lambda must be a number or an array");
    }
    for (double v : c.lambda)
      if (!(v > 0.0)) throw ConfigError("config.lambda entries must be positive");

    if (auto it = j.find("arrival_model"); it != j.end()) {
      const std::string m = detail::as_string(*it, "config.arrival_model");
      if (m == "poisson")
        c.arrival_model = ArrivalModel::poisson;
      else if (m == "bernoulli")
        c.arrival_model = ArrivalModel::bernoulli;
      else if (m == "deterministic_batch")
        c.arrival_model = ArrivalModel::deterministic_batch;
      else
        throw ConfigError("config.arrival_model must be poisson, bernoulli or deterministic_batch");
    }

    if (auto it = j.find("protocol_mode"); it != j.end()) {
      if (it->is_string()) {
        const std::string m = it->get<std::string>();  // guarded by is_string
        if (m == "exact_priority")
          c.protocol_mode = ProtocolMode::exact_priority();
        else if (m == "independent_bernoulli")
          c.protocol_mode = ProtocolMode::independent_bernoulli();
        else
          throw ConfigError("config.protocol_mode string must name a parameter-free mode");
      } else if (it->is_object()) {
        detail::reject_unknown_keys(*it, "config.protocol_mode", {"kind", "epsilon"});
        const std::string m =
            detail::as_string(detail::require(*it, "protocol_mode", "kind"), "protocol_mode.kind");
        if (m == "epsilon_window") {
          c.protocol_mode = ProtocolMode::epsilon_window(
              detail::as_number(detail::require(*it, "protocol_mode", "epsilon"),
                                "protocol_mode.epsilon"));
        } else if (m == "exact_priority") {
          c.protocol_mode = ProtocolMode::exact_priority();
        } else if (m == "independent_bernoulli") {
          c.protocol_mode = ProtocolMode::independent_bernoulli();
        } else {
          throw ConfigError("config.protocol_mode.kind unknown");
        }
      } else {
        throw ConfigError("config.protocol_mode must be a string or object");
      }
    }

    if (auto it = j.find("hop_mode"); it != j.end()) {
      if (it->is_string()) {
        if (it->get<std::string>() != "single_hop")
          throw ConfigError("config.hop_mode string must be \"single_hop\"");
      } else if (it->is_object()) {
        detail::reject_unknown_keys(*it, "config.hop_mode", {"kind", "k"});
        const std::string m =
            detail::as_string(detail::require(*it, "hop_mode", "kind"), "hop_mode.kind");
        if (m == "multi_hop") {
          c.hop_mode = HopMode::multi_hop(
              static_cast<int>(detail::as_int(detail::require(*it, "hop_mode", "k"), "hop_mode.k")));
        } else if (m == "single_hop") {
          c.hop_mode = HopMode::single_hop();
        } else {
          throw ConfigError("config.hop_mode.kind unknown");
        }
      } else {
        throw ConfigError("config.hop_mode must be a string or object");
      }
    }
    if (c.hop_mode.kind == HopMode::Kind::multi_hop) {
      if (!g.regularity_degree()) throw ConfigError("multi_hop requires a regular graph");
      if (!c.lambda_scalar)
        throw ConfigError("multi_hop takes a single total arrival rate, not a per-node vector");
    }

    c.horizon = detail::as_int(detail::require(j, "config", "horizon"), "config.horizon");
    if (c.horizon < 0) throw ConfigError("config.horizon must be >= 0");

    if (auto it = j.find("initial_state"); it != j.end()) {
      if (it->is_string()) {
        if (it->get<std::string>() != "empty")
          throw ConfigError("config.initial_state string must be \"empty\"");
      } else if (it->is_array()) {
        if (static_cast<int>(it->size()) != n)
          throw ConfigError("config.initial_state length does not match graph node count");
        for (const auto& v : *it) {
          const std::int64_t x = detail::as_int(v, "config.initial_state entry");
          if (x < 0) throw ConfigError("config.initial_state entries must be >= 0");
          c.initial_state.push_back(x);
        }
      } else {
        throw ConfigError("config.initial_state must be \"empty\" or an array");
      }
    }

    if (auto it = j.find("seed"); it != j.end())
      c.seed = static_cast<std::uint64_t>(detail::as_int(*it, "config.seed"));
    if (seed_override) c.seed = *seed_override;

    if (auto it = j.find("decimation"); it != j.end()) {
      c.decimation = detail::as_int(*it, "config.decimation");
      if (c.decimation < 1) throw ConfigError("config.decimation must be >= 1");
    } else {
      c.decimation = std::max<std::int64_t>(1, c.horizon / 1000);
    }

    // Arrival-rate constraints caught at parse time, not first draw.
    ArrivalSampler probe(c.arrival_model, c.arrival_rates(n));
    (void)probe;
    return c;
  }

  static ScenarioConfig parse_text(const std::string& text,
                                   std::optional<std::uint64_t> seed_override = {}) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse(j, seed_override);
  }

  // Canonical serialization: fully explicit, alphabetically ordered keys.
  // Equal configs produce equal text, which is what the digest hashes.
  json to_json() const {
    json j;
    j["schema"] = kSchemaVersion;
    j["graph"] = graph.to_json();
    if (lambda_scalar)
      j["lambda"] = lambda_value;
    else
      j["lambda"] = lambda;
    switch (arrival_model) {
      case ArrivalModel::poisson: j["arrival_model"] = "poisson"; break;
      case ArrivalModel::bernoulli: j["arrival_model"] = "bernoulli"; break;
      case ArrivalModel::deterministic_batch: j["arrival_model"] = "deterministic_batch"; break;
    }
    switch (protocol_mode.kind) {
      case ProtocolMode::Kind::exact_priority:
        j["protocol_mode"] = "exact_priority";
        break;
      case ProtocolMode::Kind::independent_bernoulli:
        j["protocol_mode"] = "independent_bernoulli";
        break;
      case ProtocolMode::Kind::epsilon_window:
        j["protocol_mode"] = {{"kind", "epsilon_window"}, {"epsilon", protocol_mode.epsilon}};
        break;
    }
    if (hop_mode.kind == HopMode::Kind::single_hop)
      j["hop_mode"] = "single_hop";
    else
      j["hop_mode"] = {{"kind", "multi_hop"}, {"k", hop_mode.k}};
    j["horizon"] = horizon;
    if (initial_state.empty())
      j["initial_state"] = "empty";
    else
      j["initial_state"] = initial_state;
    j["seed"] = seed;
    j["decimation"] = decimation;
    return j;
  }

  std::string digest() const {
    const std::string text = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
    for (unsigned char ch : text) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
  }
};

}  // namespace csma
