#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "graphweave/errors.hpp"
#include "graphweave/graph.hpp"
#include "graphweave/rng.hpp"

namespace gw {

struct GeneratorSpec {
  enum class Kind { watts_strogatz_newman, random_layered_dag };

  Kind kind = Kind::watts_strogatz_newman;
  int n = 0;            // vertex count
  int k = 0;            // ring neighbors (WS, even) / layer count (layered)
  double p = 0.0;       // shortcut probability (WS) / edge probability (layered)
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 2) throw SpecError("generator requires n >= 2, got " + std::to_string(n));
    if (kind == Kind::watts_strogatz_newman) {
      if (k <= 0 || k >= n) throw SpecError("watts-strogatz requires 0 < k < n");
      if (k % 2 != 0) throw SpecError("watts-strogatz requires even k, got " + std::to_string(k));
      if (p < 0.0 || p > 1.0) throw SpecError("probability p must lie in [0, 1]");
    } else {
      if (k < 2) throw SpecError("layered generator requires >= 2 layers");
      if (n < k) throw SpecError("layered generator requires n >= layer count");
      if (p <= 0.0 || p > 1.0) throw SpecError("edge probability must lie in (0, 1]");
    }
  }
};

// Newman-Watts-Strogatz small-world graph: a ring lattice where every vertex
// is joined to its k nearest neighbors, plus one shortcut per lattice edge
// added with probability p. No edges are removed, so the lattice is always a
// subset of the result. Shortcut targets are redrawn while they would form a
// self-loop or duplicate an existing edge; a shortcut is skipped when its
// source is already connected to every other vertex. Edges are returned as
// (min, max) pairs.
inline std::set<Edge> generate_newman_watts_strogatz(const GeneratorSpec& spec) {
  spec.validate();
  if (spec.kind != GeneratorSpec::Kind::watts_strogatz_newman)
    throw SpecError("spec kind is not watts_strogatz_newman");

  const int n = spec.n;
  std::set<Edge> edges;
  std::map<int, int> degree;
  const auto add = [&](int a, int b) {
    const Edge e{std::min(a, b), std::max(a, b)};
    if (edges.insert(e).second) {
      ++degree[a];
      ++degree[b];
    }
  };

  for (int j = 1; j <= spec.k / 2; ++j)
    for (int u = 0; u < n; ++u) add(u, (u + j) % n);

  Rng rng(spec.seed);
  for (int j = 1; j <= spec.k / 2; ++j) {
    for (int u = 0; u < n; ++u) {
      if (rng.next_double() >= spec.p) continue;
      if (degree[u] >= n - 1) continue;  // saturated, no shortcut possible
      int w = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
      while (w == u || edges.count({std::min(u, w), std::max(u, w)}) > 0)
        w = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
      add(u, w);
    }
  }
  return edges;
}

// Orients each undirected edge {u, v} from the lower to the higher id. The
// result is acyclic by construction. Vertices are the edge endpoints.
inline Dag orient_to_dag(const std::set<Edge>& undirected) {
  Dag g;
  for (const auto& [a, b] : undirected) {
    if (a == b) throw Error("undirected edge set contains a self-loop");
    g.add_edge(std::min(a, b), std::max(a, b));
  }
  return g;
}

// Random layered DAG: n vertices spread round-robin over `layers` layers
// (vertex v sits in nominal layer v % layers), every pair in strictly
// increasing nominal layers connected independently with probability p_edge,
// and every vertex outside the first layer guaranteed at least one
// predecessor (a repair edge from a random vertex of the previous nominal
// layer). The returned layering is recomputed from the sampled edges, so
// sparse draws may compress to fewer layers than requested.
inline LayeredDag generate_random_layered_dag(int n, int layers, double p_edge,
                                              std::uint64_t seed) {
  GeneratorSpec spec{GeneratorSpec::Kind::random_layered_dag, n, layers, p_edge, seed};
  spec.validate();

  const auto nominal = [layers](int v) { return v % layers; };
  std::vector<std::vector<int>> nominal_layers(layers);
  for (int v = 0; v < n; ++v) nominal_layers[nominal(v)].push_back(v);

  Rng rng(seed);
  Dag g;
  for (int v = 0; v < n; ++v) g.add_vertex(v);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (nominal(u) < nominal(v) && rng.next_double() < p_edge) g.add_edge(u, v);

  for (int v = 0; v < n; ++v) {
    if (nominal(v) == 0 || g.in_degree(v) > 0) continue;
    const auto& prev = nominal_layers[nominal(v) - 1];
    const int u = prev[rng.next_below(prev.size())];
    g.add_edge(u, v);
  }
  return LayeredDag(std::move(g));
}

}  // namespace gw
