#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "csma/error.hpp"
#include "csma/trace.hpp"

namespace csma {

struct SlopeFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares y ~ a + b*x. Exact for exactly-linear input.
inline SlopeFit least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  if (m < 2) throw InsufficientDataError("least_squares_slope: need at least 2 points");
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    xbar += x[i];
    ybar += y[i];
  }
  xbar /= static_cast<double>(m);
  ybar /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  SlopeFit fit;
  fit.points = m;
  fit.slope = sxy / sxx;
  if (m > 2) {
    const double a = ybar - fit.slope * xbar;
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = y[i] - (a + fit.slope * x[i]);
      rss += r * r;
    }
    fit.stderr_slope = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
  }
  return fit;
}

struct GrowthRate {
  std::vector<SlopeFit> per_node;  // from decimated samples in the tail window
  SlopeFit total;                  // from the per-slot total series
  std::int64_t tail_start_slot = 0;
};

// Least-squares growth of each queue over the trailing tail_fraction of the
// run, in messages per slot.
inline GrowthRate growth_rate(const Trace& t, double tail_fraction = 0.5) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw std::invalid_argument("tail_fraction must lie in (0,1]");
  if (t.total_queue.empty()) throw InsufficientDataError("growth_rate: empty trace");
  GrowthRate g;
  g.tail_start_slot =
      static_cast<std::int64_t>(std::ceil((1.0 - tail_fraction) * static_cast<double>(t.horizon)));

  std::vector<double> xs, ys;
  for (std::size_t s = 0; s < t.total_queue.size(); ++s)
    if (static_cast<std::int64_t>(s) >= g.tail_start_slot) {
      xs.push_back(static_cast<double>(s));
      ys.push_back(static_cast<double>(t.total_queue[s]));
    }
  if (xs.size() < 10) throw InsufficientDataError("growth_rate: fewer than 10 slots in tail");
  g.total = least_squares_slope(xs, ys);

  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < t.sample_slots.size(); ++r)
    if (t.sample_slots[r] >= g.tail_start_slot) rows.push_back(r);
  if (rows.size() < 10)
    throw InsufficientDataError("growth_rate: fewer than 10 decimated samples in tail");
  std::vector<double> sx(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    sx[i] = static_cast<double>(t.sample_slots[rows[i]]);
  for (int node = 0; node < t.node_count; ++node) {
    std::vector<double> sy(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      sy[i] = static_cast<double>(t.queue_samples[rows[i]][node]);
    g.per_node.push_back(least_squares_slope(sx, sy));
  }
  return g;
}

enum class StabilityVerdictKind { stable, unstable, inconclusive };

struct StabilityClassification {
  StabilityVerdictKind verdict = StabilityVerdictKind::inconclusive;
  double total_slope = 0.0;
  double slope_stderr = 0.0;
  double tail_mean = 0.0;
  double middle_mean = 0.0;

  std::string verdict_name() const {
    switch (verdict) {
      case StabilityVerdictKind::stable: return "stable";
      case StabilityVerdictKind::unstable: return "unstable";
      case StabilityVerdictKind::inconclusive: return "inconclusive";
    }
    return "inconclusive";
  }
};

// Operational stability call on a finite trace. Positive recurrence is not
// observable in finite runs, so this is a heuristic with documented
// thresholds: flat-and-settled reads stable, confidently growing reads
// unstable, anything else inconclusive.
inline StabilityClassification classify_stability(const Trace& t, double stable_slope = 0.005,
                                                  double unstable_slope = 0.02,
                                                  double tail_fraction = 0.5) {
  if (t.horizon < 10000)
    throw std::invalid_argument("classify_stability needs horizon >= 10000");
  const GrowthRate g = growth_rate(t, tail_fraction);
  StabilityClassification c;
  c.total_slope = g.total.slope;
  c.slope_stderr = g.total.stderr_slope;

  double tail_sum = 0.0, middle_sum = 0.0;
  std::size_t tail_n = 0, middle_n = 0;
  const std::int64_t third = t.horizon / 3;
  for (std::size_t s = 0; s < t.total_queue.size(); ++s) {
    const auto slot = static_cast<std::int64_t>(s);
    if (slot >= g.tail_start_slot) {
      tail_sum += static_cast<double>(t.total_queue[s]);
      ++tail_n;
    }
    if (slot >= third && slot < 2 * third) {
      middle_sum += static_cast<double>(t.total_queue[s]);
      ++middle_n;
    }
  }
  c.tail_mean = tail_sum / static_cast<double>(tail_n);
  c.middle_mean = middle_sum / static_cast<double>(middle_n);

  // The 1e-9 slack keeps identically-zero traces on the stable side of the
  // settledness ratio.
  const bool settled = c.tail_mean <= 3.0 * c.middle_mean + 1e-9;
  if (c.total_slope < stable_slope && settled) {
    c.verdict = StabilityVerdictKind::stable;
  } else if (c.total_slope > unstable_slope &&
             c.total_slope - 1.96 * c.slope_stderr > 0.0) {
    c.verdict = StabilityVerdictKind::unstable;
  } else {
    c.verdict = StabilityVerdictKind::inconclusive;
  }
  return c;
}

}  // namespace csma
