#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "csma/graph.hpp"

namespace csma {

// Transmission rate function phi_i(p) = p_i / sum_{j in N_i} p_j over closed
// neighborhoods, with the 0/0 = 0 convention. Each entry lies in [0,1].
inline std::vector<double> phi(const std::vector<double>& p, const InterferenceGraph& g) {
  const int n = g.node_count();
  if (static_cast<int>(p.size()) != n)
    throw std::invalid_argument("phi: weight vector length " + std::to_string(p.size()) +
                                " does not match node count " + std::to_string(n));
  for (double v : p)
    if (v < 0.0) throw std::domain_error("phi: negative weight entry");
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double denom = 0.0;
    for (int j : g.closed_neighborhood(i)) denom += p[j];
    if (denom > 0.0) out[i] = p[i] / denom;
  }
  return out;
}

inline std::vector<double> phi_counts(const std::vector<std::int64_t>& counts,
                                      const InterferenceGraph& g) {
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) p[i] = static_cast<double>(counts[i]);
  return phi(p, g);
}

}  // namespace csma
