#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "csma/error.hpp"
#include "csma/rng.hpp"

namespace csma {

// Undirected connected interference graph over nodes 0..n-1. An edge means
// the two transmitters may not transmit in the same slot. Immutable after
// construction; construction validates symmetry, irreflexivity and
// connectivity, so downstream code can rely on them.
class InterferenceGraph {
 public:
  // n >= 3 nodes on a circle, node i adjacent to i-1 and i+1 mod n.
  static InterferenceGraph circle(int n) {
    if (n < 3) throw std::invalid_argument("circle size must be >= 3, got " + std::to_string(n));
    std::vector<std::set<int>> adj(n);
    for (int i = 0; i < n; ++i) {
      adj[i].insert((i + n - 1) % n);
      adj[i].insert((i + 1) % n);
    }
    return InterferenceGraph(std::move(adj));
  }

  // Wrap-around grid, 4-regular; both dimensions >= 3.
  static InterferenceGraph torus(int rows, int cols) {
    if (rows < 3 || cols < 3)
      throw std::invalid_argument("torus dimensions must be >= 3, got " + std::to_string(rows) +
                                  "x" + std::to_string(cols));
    std::vector<std::set<int>> adj(static_cast<std::size_t>(rows) * cols);
    auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        adj[id(r, c)].insert(id((r + rows - 1) % rows, c));
        adj[id(r, c)].insert(id((r + 1) % rows, c));
        adj[id(r, c)].insert(id(r, (c + cols - 1) % cols));
        adj[id(r, c)].insert(id(r, (c + 1) % cols));
      }
    }
    return InterferenceGraph(std::move(adj));
  }

  // Explicit edge list; duplicates are merged, self-loops rejected.
  static InterferenceGraph from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n < 1) throw std::invalid_argument("graph needs at least one node");
    std::vector<std::set<int>> adj(n);
    for (const auto& [a, b] : edges) {
      if (a < 0 || a >= n || b < 0 || b >= n)
        throw std::invalid_argument("edge index out of range: (" + std::to_string(a) + "," +
                                    std::to_string(b) + ")");
      if (a == b) throw std::invalid_argument("self-loop at node " + std::to_string(a));
      adj[a].insert(b);
      adj[b].insert(a);
    }
    return InterferenceGraph(std::move(adj));
  }

  // Pairing-model random d-regular graph; rejects self-loops, multi-edges and
  // disconnected outcomes. Requires n*degree even and degree < n.
  static InterferenceGraph random_regular(int n, int degree, std::uint64_t seed) {
    if (n < 1 || degree < 1 || degree >= n)
      throw std::invalid_argument("random_regular needs 1 <= degree < n");
    if ((static_cast<std::int64_t>(n) * degree) % 2 != 0)
      throw std::invalid_argument("random_regular needs n*degree even");
    for (std::uint64_t attempt = 0; attempt < 4096; ++attempt) {
      RngStream rng = substream(seed, Stream::graph_gen, attempt);
      std::vector<int> stubs(static_cast<std::size_t>(n) * degree);
      for (int i = 0; i < n; ++i)
        for (int d = 0; d < degree; ++d) stubs[static_cast<std::size_t>(i) * degree + d] = i;
      for (std::size_t i = stubs.size() - 1; i > 0; --i)
        std::swap(stubs[i], stubs[rng.next_below(i + 1)]);
      std::vector<std::set<int>> adj(n);
      bool simple = true;
      for (std::size_t i = 0; i + 1 < stubs.size() && simple; i += 2) {
        int a = stubs[i], b = stubs[i + 1];
        if (a == b || adj[a].count(b)) {
          simple = false;
          break;
        }
        adj[a].insert(b);
        adj[b].insert(a);
      }
      if (!simple) continue;
      if (!is_connected(adj)) continue;
      return InterferenceGraph(std::move(adj));
    }
    throw ConfigError("random_regular: no simple connected pairing found");
  }

  int node_count() const { return static_cast<int>(adjacency_.size()); }
  int degree(int i) const { return static_cast<int>(adjacency_[i].size()); }
  const std::vector<int>& neighbors(int i) const { return adjacency_[i]; }

  // Closed neighborhood: the node together with its neighbors, sorted.
  const std::vector<int>& closed_neighborhood(int i) const { return closed_[i]; }

  // Shared degree m-1 if the graph is regular, otherwise empty. The closed
  // neighborhood size m is this value plus one.
  std::optional<int> regularity_degree() const { return regular_degree_; }

 private:
  explicit InterferenceGraph(std::vector<std::set<int>> adj) {
    if (!is_connected(adj)) throw ConfigError("graph is not connected");
    adjacency_.reserve(adj.size());
    closed_.reserve(adj.size());
    for (std::size_t i = 0; i < adj.size(); ++i) {
      adjacency_.emplace_back(adj[i].begin(), adj[i].end());
      std::vector<int> cl = adjacency_.back();
      cl.insert(std::lower_bound(cl.begin(), cl.end(), static_cast<int>(i)), static_cast<int>(i));
      closed_.push_back(std::move(cl));
    }
    regular_degree_ = static_cast<int>(adjacency_[0].size());
    for (const auto& a : adjacency_)
      if (static_cast<int>(a.size()) != *regular_degree_) {
        regular_degree_.reset();
        break;
      }
  }

  static bool is_connected(const std::vector<std::set<int>>& adj) {
    if (adj.empty()) return false;
    std::vector<char> seen(adj.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          ++visited;
          stack.push_back(w);
        }
    }
    return visited == adj.size();
  }

  std::vector<std::vector<int>> adjacency_;
  std::vector<std::vector<int>> closed_;
  std::optional<int> regular_degree_;
};

}  // namespace csma
