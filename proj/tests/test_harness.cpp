#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "csma/config.hpp"
#include "csma/error.hpp"
#include "csma/experiment.hpp"
#include "csma/runner.hpp"
#include "csma/stats.hpp"
#include "csma/trace.hpp"

using csma::ConfigError;
using csma::InsufficientDataError;
using csma::ScenarioConfig;
using csma::Trace;
using nlohmann::json;

namespace {

json base_json() {
  return json{{"schema", "scenario/1"},
              {"graph", {{"kind", "circle"}, {"n", 9}}},
              {"lambda", 0.3},
              {"horizon", 5000}};
}

// Trace with a prescribed per-slot total and per-node linear samples, for
// exercising the estimators on exactly known inputs.
Trace synthetic_trace(std::int64_t horizon, std::int64_t decimation, int nodes,
                      const std::function<std::int64_t(std::int64_t)>& total_at,
                      const std::function<std::int64_t(std::int64_t, int)>& node_at) {
  Trace t;
  t.node_count = nodes;
  t.horizon = horizon;
  t.decimation = decimation;
  for (std::int64_t s = 0; s <= horizon; ++s) t.total_queue.push_back(total_at(s));
  for (std::int64_t s = 0; s <= horizon; s += decimation) {
    t.sample_slots.push_back(s);
    auto& row = t.queue_samples.emplace_back();
    for (int i = 0; i < nodes; ++i) row.push_back(node_at(s, i));
  }
  if (t.sample_slots.back() != horizon) {
    t.sample_slots.push_back(horizon);
    auto& row = t.queue_samples.emplace_back();
    for (int i = 0; i < nodes; ++i) row.push_back(node_at(horizon, i));
  }
  t.cum_transmissions.assign(nodes, 0);
  t.cum_departures.assign(nodes, 0);
  return t;
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
  const auto c = ScenarioConfig::parse(base_json());
  EXPECT_TRUE(c.lambda_scalar);
  ASSERT_EQ(c.lambda.size(), 9u);
  EXPECT_DOUBLE_EQ(c.lambda[4], 0.3);
  EXPECT_EQ(c.arrival_model, csma::ArrivalModel::poisson);
  EXPECT_EQ(c.protocol_mode.kind, csma::ProtocolMode::Kind::exact_priority);
  EXPECT_EQ(c.hop_mode.kind, csma::HopMode::Kind::single_hop);
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.decimation, 5);  // horizon/1000
  EXPECT_TRUE(c.initial_state.empty());

  const auto c2 = ScenarioConfig::parse(c.to_json());
  EXPECT_EQ(c.digest(), c2.digest());
  EXPECT_EQ(c.to_json().dump(), c2.to_json().dump());

  const auto c3 = ScenarioConfig::parse(base_json(), 777);
  EXPECT_EQ(c3.seed, 777u);
  EXPECT_NE(c3.digest(), c.digest());  // seed is part of the scenario identity

  auto j = base_json();
  j["lambda"] = json::array({0.1, 0.2, 0.1, 0.2, 0.1, 0.2, 0.1, 0.2, 0.1});
  const auto cv = ScenarioConfig::parse(j);
  EXPECT_FALSE(cv.lambda_scalar);
  EXPECT_DOUBLE_EQ(cv.lambda[1], 0.2);
  EXPECT_NE(cv.digest(), c.digest());
}

TEST(Config, RejectsMalformedInput) {
  auto expect_bad = [](json j) { EXPECT_THROW(ScenarioConfig::parse(j), ConfigError); };

  {
    auto j = base_json();
    j["typo_field"] = 1;
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["schema"] = "scenario/2";
    expect_bad(j);
  }
  {
    auto j = base_json();
    j.erase("lambda");
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["lambda"] = 0.0;
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["lambda"] = json::array({0.1, 0.2});  // wrong length
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["graph"] = {{"kind", "moebius"}, {"n", 9}};
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["graph"] = {{"kind", "circle"}, {"n", 9}, {"rows", 2}};  // stray key
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["horizon"] = -1;
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["decimation"] = 0;
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["arrival_model"] = "bernoulli";
    j["lambda"] = 1.5;  // bernoulli needs rate <= 1
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["protocol_mode"] = {{"kind", "epsilon_window"}};  // missing epsilon
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["protocol_mode"] = {{"kind", "epsilon_window"}, {"epsilon", 1.5}};
    expect_bad(j);
  }
  {
    auto j = base_json();
    j["initial_state"] = json::array({1, 2, 3});  // wrong length
    expect_bad(j);
  }
  {
    auto j = base_json();
    auto arr = json::array();
    for (int i = 0; i < 9; ++i) arr.push_back(i == 3 ? -1 : 0);
    j["initial_state"] = arr;
    expect_bad(j);
  }
  {
    // multi-hop demands a regular graph
    json j{{"schema", "scenario/1"},
           {"graph", {{"kind", "edges"}, {"n", 3}, {"edges", json::array({json::array({0, 1}),
                                                                          json::array({1, 2})})}}},
           {"lambda", 0.3},
           {"hop_mode", {{"kind", "multi_hop"}, {"k", 2}}},
           {"horizon", 10}};
    expect_bad(j);
  }
  {
    // multi-hop demands a scalar rate
    auto j = base_json();
    j["hop_mode"] = {{"kind", "multi_hop"}, {"k", 2}};
    j["lambda"] = json::array({0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
    expect_bad(j);
  }
  EXPECT_THROW(ScenarioConfig::parse_text("{not json"), ConfigError);
  EXPECT_THROW(ScenarioConfig::parse_text("[1,2,3]"), ConfigError);
}

TEST(Config, MultiHopSpreadsArrivals) {
  json j{{"schema", "scenario/1"},
         {"graph", {{"kind", "torus"}, {"rows", 3}, {"cols", 3}}},
         {"lambda", 0.8},
         {"hop_mode", {{"kind", "multi_hop"}, {"k", 4}}},
         {"horizon", 10}};
  const auto c = ScenarioConfig::parse(j);
  const auto rates = c.arrival_rates(9);
  ASSERT_EQ(rates.size(), 9u);
  for (double r : rates) EXPECT_DOUBLE_EQ(r, 0.2);
}

TEST(Runner, HorizonZeroAndInitialState) {
  auto j = base_json();
  j["horizon"] = 0;
  j["initial_state"] = json::array({3, 0, 1, 0, 0, 2, 0, 0, 4});
  const auto c = ScenarioConfig::parse(j);
  const Trace t = csma::run(c);
  ASSERT_EQ(t.total_queue.size(), 1u);
  EXPECT_EQ(t.total_queue[0], 10);
  ASSERT_EQ(t.sample_slots.size(), 1u);
  EXPECT_EQ(t.sample_slots[0], 0);
  EXPECT_EQ(t.final_counts(), (std::vector<std::int64_t>{3, 0, 1, 0, 0, 2, 0, 0, 4}));
  for (auto v : t.cum_transmissions) EXPECT_EQ(v, 0);
}

TEST(Runner, DeterministicAndConservative) {
  auto j = base_json();
  j["horizon"] = 2000;
  j["seed"] = 5;
  j["decimation"] = 7;
  j["initial_state"] = json::array({4, 0, 0, 9, 0, 0, 0, 2, 0});
  const auto c = ScenarioConfig::parse(j);
  const Trace a = csma::run(c);
  const Trace b = csma::run(c);
  EXPECT_EQ(a.sample_slots, b.sample_slots);
  EXPECT_EQ(a.queue_samples, b.queue_samples);
  EXPECT_EQ(a.total_queue, b.total_queue);
  EXPECT_EQ(a.cum_transmissions, b.cum_transmissions);
  EXPECT_EQ(a.cum_departures, b.cum_departures);

  // Single-hop: every transmission is a departure, and the recorded totals
  // agree with the sampled rows.
  EXPECT_EQ(a.cum_transmissions, a.cum_departures);
  for (std::size_t r = 0; r < a.sample_slots.size(); ++r) {
    std::int64_t s = 0;
    for (auto v : a.queue_samples[r]) {
      EXPECT_GE(v, 0);
      s += v;
    }
    EXPECT_EQ(s, a.total_queue[a.sample_slots[r]]);
  }
  EXPECT_EQ(a.sample_slots.back(), 2000);
}

TEST(Runner, MultiHopWithSingleVisitMatchesSingleHop) {
  auto js = base_json();
  js["horizon"] = 1500;
  js["seed"] = 17;
  const auto cs = ScenarioConfig::parse(js);
  auto jm = js;
  jm["hop_mode"] = {{"kind", "multi_hop"}, {"k", 1}};
  const auto cm = ScenarioConfig::parse(jm);
  const Trace ts = csma::run(cs);
  const Trace tm = csma::run(cm);
  // k = 1 means every transmitted message departs immediately, so the queue
  // trajectory is the single-hop one bit for bit.
  EXPECT_EQ(ts.total_queue, tm.total_queue);
  EXPECT_EQ(ts.queue_samples, tm.queue_samples);
  EXPECT_EQ(ts.cum_departures, tm.cum_departures);
}

TEST(Runner, MultiHopDeparturesAreASubsetOfTransmissions) {
  json j{{"schema", "scenario/1"},
         {"graph", {{"kind", "torus"}, {"rows", 3}, {"cols", 3}}},
         {"lambda", 0.5},
         {"hop_mode", {{"kind", "multi_hop"}, {"k", 3}}},
         {"horizon", 2000},
         {"seed", 23}};
  const auto c = ScenarioConfig::parse(j);
  const Trace t = csma::run(c);
  std::int64_t tx = 0, dep = 0;
  for (int i = 0; i < 9; ++i) {
    EXPECT_LE(t.cum_departures[i], t.cum_transmissions[i]);
    tx += t.cum_transmissions[i];
    dep += t.cum_departures[i];
  }
  EXPECT_GT(tx, 0);
  EXPECT_GT(dep, 0);
  EXPECT_LT(dep, tx);  // with k=3 most transmissions relay rather than depart
}

TEST(Runner, CsvAndSummaryShapes) {
  auto j = base_json();
  j["horizon"] = 50;
  j["decimation"] = 10;
  const auto c = ScenarioConfig::parse(j);
  const Trace t = csma::run(c);

  std::ostringstream csv;
  csma::write_trace_csv(t, csv);
  std::istringstream lines(csv.str());
  std::string line;
  ASSERT_TRUE(std::getline(lines, line));
  EXPECT_EQ(line, "slot,total,x0,x1,x2,x3,x4,x5,x6,x7,x8");
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, t.sample_slots.size());

  const json s = csma::trace_summary_json(t);
  EXPECT_EQ(s.at("config_digest").get<std::string>(), c.digest());
  EXPECT_EQ(s.at("horizon").get<std::int64_t>(), 50);
  EXPECT_EQ(s.at("node_count").get<int>(), 9);
  EXPECT_EQ(s.at("cumulative_departures").size(), 9u);
  EXPECT_EQ(s.at("throughput").size(), 9u);
  EXPECT_EQ(s.at("final_counts").get<std::vector<std::int64_t>>(), t.final_counts());
  // Serialized outputs must be reproducible, so timing never appears.
  EXPECT_FALSE(s.contains("wall_seconds"));
  EXPECT_EQ(csv.str().find("wall"), std::string::npos);
  for (int i = 0; i < 9; ++i) {
    const double th = s.at("throughput")[i].get<double>();
    EXPECT_DOUBLE_EQ(th, static_cast<double>(t.cum_departures[i]) / 50.0);
  }
}

TEST(Runner, EpsilonWindowScalesThroughputOnly) {
  auto j = base_json();
  j["horizon"] = 800;
  j["seed"] = 9;
  const auto exact = ScenarioConfig::parse(j);
  j["protocol_mode"] = {{"kind", "epsilon_window"}, {"epsilon", 0.25}};
  const auto eps = ScenarioConfig::parse(j);
  const Trace te = csma::run(exact);
  const Trace tw = csma::run(eps);
  // Identical contention outcomes under the same seed; only the usable
  // fraction of each slot differs.
  EXPECT_EQ(te.queue_samples, tw.queue_samples);
  EXPECT_EQ(te.cum_departures, tw.cum_departures);
  EXPECT_DOUBLE_EQ(tw.throughput_factor, 0.75);
  const json se = csma::trace_summary_json(te);
  const json sw = csma::trace_summary_json(tw);
  for (int i = 0; i < 9; ++i) {
    const double a = se.at("throughput")[i].get<double>();
    const double b = sw.at("throughput")[i].get<double>();
    EXPECT_DOUBLE_EQ(b, 0.75 * a);
  }
}

TEST(Stats, ExactSlopeRecovery) {
  const auto t = synthetic_trace(
      20000, 100, 2, [](std::int64_t s) { return 7 + 3 * s; },
      [](std::int64_t s, int i) { return 2 * s + i; });
  const auto g = csma::growth_rate(t);
  EXPECT_EQ(g.tail_start_slot, 10000);
  EXPECT_DOUBLE_EQ(g.total.slope, 3.0);
  EXPECT_DOUBLE_EQ(g.total.stderr_slope, 0.0);
  ASSERT_EQ(g.per_node.size(), 2u);
  EXPECT_DOUBLE_EQ(g.per_node[0].slope, 2.0);
  EXPECT_DOUBLE_EQ(g.per_node[1].slope, 2.0);

  const auto flat = synthetic_trace(
      20000, 100, 1, [](std::int64_t) { return 42; }, [](std::int64_t, int) { return 42; });
  EXPECT_DOUBLE_EQ(csma::growth_rate(flat).total.slope, 0.0);

  EXPECT_THROW(csma::growth_rate(t, 0.0), std::invalid_argument);
  EXPECT_THROW(csma::growth_rate(t, 1.5), std::invalid_argument);
  const auto tiny = synthetic_trace(
      5, 1, 1, [](std::int64_t s) { return s; }, [](std::int64_t s, int) { return s; });
  EXPECT_THROW(csma::growth_rate(tiny), InsufficientDataError);
  const auto sparse = synthetic_trace(
      20000, 5000, 1, [](std::int64_t s) { return s; }, [](std::int64_t s, int) { return s; });
  EXPECT_THROW(csma::growth_rate(sparse), InsufficientDataError);
}

TEST(Stats, StabilityClassification) {
  const auto stable = synthetic_trace(
      20000, 100, 1, [](std::int64_t) { return 50; }, [](std::int64_t, int) { return 50; });
  EXPECT_EQ(csma::classify_stability(stable).verdict_name(), "stable");

  const auto unstable = synthetic_trace(
      20000, 100, 1, [](std::int64_t s) { return 3 * s; }, [](std::int64_t s, int) { return 3 * s; });
  const auto cu = csma::classify_stability(unstable);
  EXPECT_EQ(cu.verdict_name(), "unstable");
  EXPECT_DOUBLE_EQ(cu.total_slope, 3.0);

  const auto slow = synthetic_trace(
      20000, 100, 1, [](std::int64_t s) { return s / 100; },
      [](std::int64_t s, int) { return s / 100; });
  EXPECT_EQ(csma::classify_stability(slow).verdict_name(), "inconclusive");

  const auto shallow = synthetic_trace(
      9999, 100, 1, [](std::int64_t) { return 1; }, [](std::int64_t, int) { return 1; });
  EXPECT_THROW(csma::classify_stability(shallow), std::invalid_argument);
}

TEST(Grid, ParseLambdaGrid) {
  const auto range = csma::parse_lambda_grid("0.25:0.45:0.05");
  ASSERT_EQ(range.size(), 5u);
  EXPECT_NEAR(range[0], 0.25, 1e-12);
  EXPECT_NEAR(range[4], 0.45, 1e-12);

  const auto list = csma::parse_lambda_grid("0.1,0.2,0.7");
  EXPECT_EQ(list, (std::vector<double>{0.1, 0.2, 0.7}));
  EXPECT_EQ(csma::parse_lambda_grid("0.3"), std::vector<double>{0.3});

  EXPECT_THROW(csma::parse_lambda_grid("a,b"), ConfigError);
  EXPECT_THROW(csma::parse_lambda_grid("0.1:0.2"), ConfigError);
  EXPECT_THROW(csma::parse_lambda_grid("0.1:0.2:0"), ConfigError);
  EXPECT_THROW(csma::parse_lambda_grid(""), ConfigError);
  EXPECT_THROW(csma::parse_lambda_grid("0.1:0.2:-0.05"), ConfigError);
}

TEST(Sweep, ClassifiesLoadsOnBothSidesOfCapacity) {
  auto j = base_json();
  j["horizon"] = 20000;
  j["seed"] = 3;
  const auto base = ScenarioConfig::parse(j);
  const std::vector<double> grid{0.22, 0.42};
  const auto rows = csma::sweep(base, grid, 2);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.ok) << r.error;
    EXPECT_EQ(r.seed, csma::sweep_row_seed(base.seed, r.lambda, r.rep));
    if (r.lambda < 1.0 / 3.0) {
      EXPECT_EQ(r.classification, "stable") << "lambda=" << r.lambda << " rep=" << r.rep;
    } else {
      EXPECT_EQ(r.classification, "unstable") << "lambda=" << r.lambda << " rep=" << r.rep;
    }
  }

  // A row's result is a function of (base seed, lambda, rep) alone, so
  // shrinking the grid leaves surviving rows bit-identical.
  const auto solo = csma::sweep(base, {0.42}, 2);
  ASSERT_EQ(solo.size(), 2u);
  for (int rep = 0; rep < 2; ++rep) {
    EXPECT_EQ(solo[rep].seed, rows[2 + rep].seed);
    EXPECT_EQ(solo[rep].total_slope, rows[2 + rep].total_slope);
    EXPECT_EQ(solo[rep].classification, rows[2 + rep].classification);
    EXPECT_EQ(solo[rep].max_queue, rows[2 + rep].max_queue);
  }

  // Worker count is an execution detail, not part of the scenario.
  const auto par = csma::sweep(base, grid, 2, 4);
  ASSERT_EQ(par.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(par[i].seed, rows[i].seed);
    EXPECT_EQ(par[i].total_slope, rows[i].total_slope);
    EXPECT_EQ(par[i].mean_queue, rows[i].mean_queue);
    EXPECT_EQ(par[i].classification, rows[i].classification);
  }

  std::ostringstream csv;
  csma::write_sweep_csv(rows, csv);
  std::istringstream lines(csv.str());
  std::string header;
  ASSERT_TRUE(std::getline(lines, header));
  EXPECT_NE(header.find("lambda,rep,seed,status"), std::string::npos);
  std::size_t body = 0;
  std::string line;
  while (std::getline(lines, line)) ++body;
  EXPECT_EQ(body, rows.size());
}

TEST(Sweep, RowErrorsAreIsolated) {
  auto j = base_json();
  j["horizon"] = 12000;
  j["arrival_model"] = "bernoulli";
  j["lambda"] = 0.5;
  const auto base = ScenarioConfig::parse(j);
  const auto rows = csma::sweep(base, {0.5, 1.5}, 1);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].ok) << rows[0].error;
  EXPECT_FALSE(rows[1].ok);  // bernoulli cannot run at rate 1.5
  EXPECT_NE(rows[1].error.find("bernoulli"), std::string::npos);

  EXPECT_THROW(csma::sweep(base, {}, 1), ConfigError);
  EXPECT_THROW(csma::sweep(base, {0.3}, 0), ConfigError);
  auto jv = base_json();
  jv["lambda"] = json::array({0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  EXPECT_THROW(csma::sweep(ScenarioConfig::parse(jv), {0.3}, 1), ConfigError);
}

TEST(Scaling, ShapeAndDeterminism) {
  auto j = base_json();
  j["seed"] = 11;
  j["initial_state"] = json::array({20, 20, 20, 20, 20, 20, 20, 20, 20});
  const auto base = ScenarioConfig::parse(j);
  const std::vector<std::int64_t> rs{10, 50};
  const auto rows = csma::fluid_scaling_study(base, rs, 2.0);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].r, 10);
  EXPECT_EQ(rows[0].horizon, 20);
  EXPECT_EQ(rows[1].r, 50);
  EXPECT_EQ(rows[1].horizon, 100);
  for (const auto& r : rows) {
    EXPECT_GE(r.sup_deviation, 0.0);
    EXPECT_TRUE(std::isfinite(r.sup_deviation));
  }
  const auto again = csma::fluid_scaling_study(base, rs, 2.0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    EXPECT_EQ(rows[i].sup_deviation, again[i].sup_deviation);
  const auto par = csma::fluid_scaling_study(base, rs, 2.0, 0.0, 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    EXPECT_EQ(rows[i].sup_deviation, par[i].sup_deviation);

  EXPECT_THROW(csma::fluid_scaling_study(base, {}, 2.0), ConfigError);
  EXPECT_THROW(csma::fluid_scaling_study(base, {0}, 2.0), ConfigError);
  EXPECT_THROW(csma::fluid_scaling_study(base, {10}, 0.0), ConfigError);

  std::ostringstream csv;
  csma::write_scaling_csv(rows, csv);
  EXPECT_NE(csv.str().find("r,horizon,sup_deviation"), std::string::npos);
}

TEST(RateCheck, MarginalFrequenciesMatchRates) {
  // A node with no contenders transmits every slot it has work.
  auto lone = csma::InterferenceGraph::from_edges(1, {});
  auto rows = csma::one_slot_rate_check({5}, lone, 10000);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].frequency, 1.0);
  EXPECT_DOUBLE_EQ(rows[0].expected, 1.0);
  EXPECT_DOUBLE_EQ(rows[0].z, 0.0);

  auto pair = csma::InterferenceGraph::from_edges(2, {{0, 1}});
  rows = csma::one_slot_rate_check({0, 0}, pair, 10000);
  EXPECT_DOUBLE_EQ(rows[0].frequency, 0.0);
  EXPECT_DOUBLE_EQ(rows[0].expected, 0.0);
  EXPECT_DOUBLE_EQ(rows[0].z, 0.0);

  rows = csma::one_slot_rate_check({2, 1}, pair, 100000, 77);
  EXPECT_NEAR(rows[0].expected, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(rows[1].expected, 1.0 / 3.0, 1e-15);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.frequency, r.expected, 0.01);
    EXPECT_LE(std::abs(r.z), 3.5);
  }

  EXPECT_THROW(csma::one_slot_rate_check({1, 1}, pair, 9999), std::invalid_argument);
}

TEST(Parallel, WorkerCountIsInvisible) {
  const std::int64_t count = 500;
  std::vector<std::uint64_t> seq(count), par(count);
  auto fill = [](std::vector<std::uint64_t>& out) {
    return [&out](std::int64_t i) {
      out[i] = csma::derive_key({static_cast<std::uint64_t>(i), 123});
    };
  };
  csma::parallel_for(1, count, fill(seq));
  csma::parallel_for(8, count, fill(par));
  EXPECT_EQ(seq, par);
  csma::parallel_for(4, 0, [](std::int64_t) { FAIL() << "must not be called"; });
}
