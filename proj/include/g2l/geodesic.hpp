#pragma once

// K-NN moment graph with 1 - cos edge weights and shortest-path (geodesic)
// distances over it.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "g2l/errors.hpp"
#include "g2l/numcore.hpp"
#include "json.hpp"

namespace g2l {

inline constexpr double kDefaultGeodesicCap = 10.0;
inline constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

struct Edge {
  std::size_t source;
  std::size_t target;
  double weight;

  bool operator==(const Edge&) const = default;
};

// Directed graph stored as a CSR-style adjacency list.
class MomentGraph {
 public:
  MomentGraph() = default;

  // Edges may arrive in any order; they are grouped by source.
  MomentGraph(std::size_t node_count, std::size_t neighbors, std::vector<Edge> edges)
      : nodes_(node_count), neighbors_(neighbors), edges_(std::move(edges)) {
    for (const Edge& e : edges_) {
      if (e.source >= nodes_ || e.target >= nodes_)
        throw DomainError("MomentGraph: edge endpoint out of range");
      if (!(e.weight >= 0.0)) throw DomainError("MomentGraph: negative edge weight");
    }
    std::stable_sort(edges_.begin(), edges_.end(),
                     [](const Edge& a, const Edge& b) { return a.source < b.source; });
    offsets_.assign(nodes_ + 1, 0);
    for (const Edge& e : edges_) ++offsets_[e.source + 1];
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  }

  std::size_t node_count() const { return nodes_; }
  std::size_t neighbors() const { return neighbors_; }
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const Edge> out_edges(std::size_t node) const {
    return {edges_.data() + offsets_[node], offsets_[node + 1] - offsets_[node]};
  }

 private:
  std::size_t nodes_ = 0;
  std::size_t neighbors_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
};

struct GeodesicTable {
  std::size_t source = 0;
  std::vector<double> distances;
  std::vector<bool> reachable;
  std::vector<std::size_t> parent;  // shortest-path tree; kNoParent at source/unreachable
  double cap = kDefaultGeodesicCap;
};

// 1 - m_i . m_j, clamped into [0, 2] against rounding.
inline double cosine_edge_weight(std::span<const double> a, std::span<const double> b) {
  return std::clamp(1.0 - dot(a, b), 0.0, 2.0);
}

// Edge i -> j iff j is among the n nearest neighbours of i (lower index wins ties).
inline MomentGraph build_knn_graph(const EmbeddingMatrix& moments, std::size_t n) {
  const std::size_t count = moments.rows();
  if (!moments.normalized || !rows_unit_norm(moments.values))
    throw DomainError("build_knn_graph: moment embeddings must be unit-normalized");
  if (n < 1 || n >= count)
    throw DomainError("build_knn_graph: neighbour count must satisfy 1 <= n < node count (n=" +
                      std::to_string(n) + ", nodes=" + std::to_string(count) + ")");

  std::vector<Edge> edges;
  edges.reserve(count * n);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < count; ++j) {
      if (j == i) continue;
      cand.emplace_back(cosine_edge_weight(moments.row(i), moments.row(j)), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(n), cand.end());
    for (std::size_t r = 0; r < n; ++r) edges.push_back({i, cand[r].second, cand[r].first});
  }
  return MomentGraph(count, n, std::move(edges));
}

inline GeodesicTable dijkstra(const MomentGraph& graph, std::size_t source,
                              double cap = kDefaultGeodesicCap) {
  const std::size_t count = graph.node_count();
  if (source >= count)
    throw DomainError("dijkstra: source " + std::to_string(source) + " out of range");

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(count, inf);
  std::vector<std::size_t> parent(count, kNoParent);
  std::vector<bool> done(count, false);

  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = true;
    for (const Edge& e : graph.out_edges(u)) {
      const double nd = d + e.weight;
      if (nd < dist[e.target]) {
        dist[e.target] = nd;
        parent[e.target] = u;
        heap.emplace(nd, e.target);
      }
    }
  }

  GeodesicTable table;
  table.source = source;
  table.cap = cap;
  table.parent = std::move(parent);
  table.reachable.resize(count);
  table.distances.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    table.reachable[j] = done[j];
    table.distances[j] = done[j] ? dist[j] : cap;
  }
  return table;
}

// Floyd-Warshall; unreachable pairs carry `cap`.
inline Matrix all_pairs_oracle(const MomentGraph& graph, double cap = kDefaultGeodesicCap) {
  const std::size_t count = graph.node_count();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Matrix d(count, count, inf);
  for (std::size_t i = 0; i < count; ++i) d(i, i) = 0.0;
  for (const Edge& e : graph.edges()) {
    if (e.weight < 0.0) throw DomainError("all_pairs_oracle: negative edge weight");
    d(e.source, e.target) = std::min(d(e.source, e.target), e.weight);
  }
  for (std::size_t k = 0; k < count; ++k)
    for (std::size_t i = 0; i < count; ++i) {
      if (d(i, k) == inf) continue;
      for (std::size_t j = 0; j < count; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    }
  for (double& v : d.data())
    if (v == inf) v = cap;
  return d;
}

inline std::vector<GeodesicTable> geodesics_from_targets(const EmbeddingMatrix& moments,
                                                         std::span<const std::size_t> targets,
                                                         std::size_t n,
                                                         double cap = kDefaultGeodesicCap) {
  const MomentGraph graph = build_knn_graph(moments, n);
  std::vector<GeodesicTable> tables;
  tables.reserve(targets.size());
  for (std::size_t t : targets) tables.push_back(dijkstra(graph, t, cap));
  return tables;
}

// {"nodes": N, "n": n, "edges": [[i,j,w],...], "tables": [{"source": s, "dist": [...]}]}
inline nlohmann::json geodesic_to_json(const MomentGraph& graph,
                                       std::span<const GeodesicTable> tables) {
  nlohmann::json out;
  out["nodes"] = graph.node_count();
  out["n"] = graph.neighbors();
  auto edges = nlohmann::json::array();
  for (const Edge& e : graph.edges()) edges.push_back({e.source, e.target, e.weight});
  out["edges"] = std::move(edges);
  auto tabs = nlohmann::json::array();
  for (const GeodesicTable& t : tables) tabs.push_back({{"source", t.source}, {"dist", t.distances}});
  out["tables"] = std::move(tabs);
  return out;
}

}  // namespace g2l
