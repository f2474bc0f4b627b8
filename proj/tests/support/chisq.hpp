#pragma once

// Chi-square goodness-of-fit helper for distribution tests: upper-tail
// p-value via the regularized incomplete gamma function Q(k/2, x/2),
// computed with the standard series / continued-fraction split.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace support {

inline double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// Q(a, x) = upper regularized incomplete gamma.
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q domain");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

// P(ChiSq_df >= stat).
inline double chi_square_pvalue(double stat, int df) {
  return gamma_q(0.5 * df, 0.5 * stat);
}

// Pearson statistic for observed counts vs expected probabilities.
inline double pearson_statistic(const std::vector<std::uint64_t>& observed,
                                const std::vector<double>& expected_prob,
                                std::uint64_t total) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = expected_prob[i] * static_cast<double>(total);
    if (e <= 0.0) throw std::invalid_argument("expected cell probability must be positive");
    const double diff = static_cast<double>(observed[i]) - e;
    stat += diff * diff / e;
  }
  return stat;
}

}  // namespace support
