#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "graphweave/errors.hpp"

namespace gw {

using Edge = std::pair<int, int>;

// Directed acyclic graph over dense non-negative integer vertex ids.
// Always valid: no self-loops, acyclicity is enforced on every insertion,
// edge endpoints are registered automatically.
class Dag {
 public:
  Dag() = default;

  // Registers and returns the next unused id.
  int add_vertex() {
    const int v = vertices_.empty() ? 0 : *vertices_.rbegin() + 1;
    vertices_.insert(v);
    return v;
  }

  void add_vertex(int v) {
    if (v < 0) throw Error("vertex id must be non-negative");
    vertices_.insert(v);
  }

  bool has_vertex(int v) const { return vertices_.count(v) > 0; }
  bool has_edge(int u, int v) const { return edges_.count({u, v}) > 0; }

  // Inserting an existing edge is a no-op (set semantics). Throws CycleError
  // if the edge is a self-loop or would close a directed cycle.
  void add_edge(int u, int v) {
    if (u < 0 || v < 0) throw Error("vertex id must be non-negative");
    if (u == v) throw CycleError("self-loop on vertex " + std::to_string(u));
    if (has_edge(u, v)) return;
    if (reaches(v, u)) {
      throw CycleError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                       ") would close a directed cycle");
    }
    vertices_.insert(u);
    vertices_.insert(v);
    edges_.insert({u, v});
    succ_[u].push_back(v);
    pred_[v].push_back(u);
  }

  const std::set<int>& vertices() const { return vertices_; }
  const std::set<Edge>& edges() const { return edges_; }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::vector<int>& successors(int v) const {
    static const std::vector<int> kEmpty;
    const auto it = succ_.find(v);
    return it == succ_.end() ? kEmpty : it->second;
  }

  const std::vector<int>& predecessors(int v) const {
    static const std::vector<int> kEmpty;
    const auto it = pred_.find(v);
    return it == pred_.end() ? kEmpty : it->second;
  }

  int in_degree(int v) const { return static_cast<int>(predecessors(v).size()); }
  int out_degree(int v) const { return static_cast<int>(successors(v).size()); }

 private:
  // DFS from `from` looking for `to`.
  bool reaches(int from, int to) const {
    if (from == to) return true;
    std::vector<int> stack{from};
    std::unordered_set<int> seen{from};
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      const auto it = succ_.find(x);
      if (it == succ_.end()) continue;
      for (const int y : it->second) {
        if (y == to) return true;
        if (seen.insert(y).second) stack.push_back(y);
      }
    }
    return false;
  }

  std::set<int> vertices_;
  std::set<Edge> edges_;
  std::unordered_map<int, std::vector<int>> succ_;
  std::unordered_map<int, std::vector<int>> pred_;
};

// Directed density |E| / (|V| * (|V|-1)); self-loops are excluded by type.
inline double graph_density(const Dag& g) {
  const auto n = g.vertex_count();
  if (n < 2) throw EmptyGraphError("graph density needs at least 2 vertices");
  return static_cast<double>(g.edge_count()) /
         (static_cast<double>(n) * static_cast<double>(n - 1));
}

// Dense 0/1 matrix, row-major.
struct BinaryMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> data;

  BinaryMatrix() = default;
  BinaryMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0) {}

  std::uint8_t& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// A Dag plus its longest-path layering: layer(v) = 0 iff v has no
// predecessors, otherwise 1 + max over predecessor layers. Every edge points
// to a strictly higher layer and skip-layer edges are explicit. Within a
// layer, vertices are ordered by ascending id. Immutable once built.
class LayeredDag {
 public:
  LayeredDag() = default;  // the empty graph

  explicit LayeredDag(Dag dag) : dag_(std::move(dag)) { build(); }

  const Dag& dag() const { return dag_; }
  bool empty() const { return dag_.vertex_count() == 0; }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  const std::vector<std::vector<int>>& layers() const { return layers_; }

  const std::vector<int>& layer(int i) const {
    if (i < 0 || i >= layer_count())
      throw LayerIndexError("layer index " + std::to_string(i) + " out of range");
    return layers_[i];
  }

  int layer_of(int v) const {
    const auto it = layer_of_.find(v);
    if (it == layer_of_.end()) throw Error("unknown vertex " + std::to_string(v));
    return it->second;
  }

  // Rank of v within its layer (layers are sorted by ascending id).
  int position_in_layer(int v) const {
    const auto it = pos_of_.find(v);
    if (it == pos_of_.end()) throw Error("unknown vertex " + std::to_string(v));
    return it->second;
  }

  int vertex_at(int layer_index, int pos) const { return layer(layer_index).at(pos); }

 private:
  void build() {
    if (dag_.vertex_count() == 0) throw EmptyGraphError("cannot layer an empty graph");
    // Kahn's algorithm; the layer values are independent of processing order.
    std::map<int, int> indeg;
    std::vector<int> queue;
    for (const int v : dag_.vertices()) {
      indeg[v] = dag_.in_degree(v);
      if (indeg[v] == 0) {
        queue.push_back(v);
        layer_of_[v] = 0;
      }
    }
    std::size_t processed = 0;
    while (!queue.empty()) {
      const int u = queue.back();
      queue.pop_back();
      ++processed;
      for (const int w : dag_.successors(u)) {
        auto it = layer_of_.find(w);
        const int candidate = layer_of_[u] + 1;
        if (it == layer_of_.end())
          layer_of_[w] = candidate;
        else
          it->second = std::max(it->second, candidate);
        if (--indeg[w] == 0) queue.push_back(w);
      }
    }
    if (processed != dag_.vertex_count())
      throw CycleError("graph contains a directed cycle");  // unreachable for a valid Dag

    int max_layer = 0;
    for (const auto& [v, l] : layer_of_) max_layer = std::max(max_layer, l);
    layers_.assign(max_layer + 1, {});
    for (const auto& [v, l] : layer_of_) layers_[l].push_back(v);
    for (auto& layer : layers_) {
      std::sort(layer.begin(), layer.end());
      for (int p = 0; p < static_cast<int>(layer.size()); ++p) pos_of_[layer[p]] = p;
    }
  }

  Dag dag_;
  std::map<int, int> layer_of_;
  std::map<int, int> pos_of_;
  std::vector<std::vector<int>> layers_;
};

inline LayeredDag compute_layering(const Dag& g) { return LayeredDag(g); }

// Adjacency between two layers: entry (a, b) = 1 iff there is an edge from
// the b-th vertex of layer j to the a-th vertex of layer i. Shape is
// (|layer i| x |layer j|), i.e. exactly the mask shape of a weight block
// mapping layer j activations to layer i.
inline BinaryMatrix cross_layer_adjacency(const LayeredDag& lg, int j, int i) {
  if (j < 0 || i >= lg.layer_count() || j >= i)
    throw LayerIndexError("cross_layer_adjacency requires 0 <= j < i < layer count, got j=" +
                          std::to_string(j) + " i=" + std::to_string(i));
  const auto& from = lg.layer(j);
  const auto& to = lg.layer(i);
  BinaryMatrix m(static_cast<int>(to.size()), static_cast<int>(from.size()));
  for (int a = 0; a < m.rows; ++a)
    for (int b = 0; b < m.cols; ++b)
      if (lg.dag().has_edge(from[b], to[a])) m.at(a, b) = 1;
  return m;
}

// Relabels vertices to 0..n-1 in (layer, within-layer position) order. The
// result is structurally identical and its ids coincide with the canonical
// neuron ordering used when the graph is compiled into a network, which is
// what makes exact round-trip comparisons possible.
inline LayeredDag canonicalize(const LayeredDag& lg) {
  if (lg.empty()) return LayeredDag{};
  std::unordered_map<int, int> relabel;
  int next = 0;
  for (const auto& layer : lg.layers())
    for (const int v : layer) relabel[v] = next++;
  Dag out;
  for (const auto& layer : lg.layers())
    for (const int v : layer) out.add_vertex(relabel[v]);
  for (const auto& [u, v] : lg.dag().edges()) out.add_edge(relabel[u], relabel[v]);
  return LayeredDag(std::move(out));
}

}  // namespace gw
