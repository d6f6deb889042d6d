#pragma once

// Transforms models back into graphs. Neuron granularity yields one vertex
// per input feature, hidden neuron, and output neuron; layer granularity
// collapses each block endpoint group to a single vertex. Hidden vertex ids
// are canonical (model layer, within-layer position), so the hidden subgraph
// of an extracted network reproduces construction-time ids.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "graphweave/errors.hpp"
#include "graphweave/graph.hpp"
#include "graphweave/models.hpp"
#include "graphweave/nn.hpp"
#include "graphweave/rng.hpp"

namespace gw {

enum class Granularity { neuron, layer };
enum class EdgeRule { mask_nonzero, weight_above };

struct ExtractionConfig {
  std::vector<int> probe_shape;  // input shape without the batch dimension
  Granularity granularity = Granularity::neuron;
  EdgeRule edge_rule = EdgeRule::mask_nonzero;
  double epsilon = 0.0;             // for weight_above: keep |W| > epsilon
  long edge_cap = 10'000'000;       // refuse beyond this unless forced
  bool force = false;

  void validate() const {
    if (probe_shape.empty()) throw ProbeShapeError("probe shape must be non-empty");
    for (const int d : probe_shape)
      if (d < 1) throw ProbeShapeError("probe shape dimensions must be positive");
    if (edge_rule == EdgeRule::weight_above && epsilon < 0)
      throw SpecError("epsilon must be non-negative");
    if (edge_cap < 1) throw SpecError("edge cap must be positive");
  }
};

struct ExtractedGraph {
  LayeredDag graph;
  int hidden_count = 0;
  int input_count = 0;
  int output_count = 0;
};

namespace detail {

inline bool edge_survives(const MaskedLinear& layer, int r, int c, const ExtractionConfig& cfg) {
  if (cfg.edge_rule == EdgeRule::mask_nonzero)
    return layer.mask.at(r, c) != 0.0f;
  return std::fabs(layer.weight.at(r, c)) > cfg.epsilon;
}

// Validity probe: the model must accept an input of the declared shape.
inline void run_probe(Model& model, const ExtractionConfig& cfg) {
  long flat = 1;
  for (const int d : cfg.probe_shape) flat *= d;
  if (model.kind() == ModelKind::cell) {
    if (cfg.probe_shape.size() < 2 || cfg.probe_shape[0] != model.input_size())
      throw ProbeShapeError("probe shape " + shape_string(cfg.probe_shape) +
                            " does not provide " + std::to_string(model.input_size()) +
                            " channels");
  } else if (flat != model.input_size()) {
    throw ProbeShapeError("probe shape " + shape_string(cfg.probe_shape) + " flattens to " +
                          std::to_string(flat) + ", model expects " +
                          std::to_string(model.input_size()));
  }

  std::vector<int> shape{1};
  shape.insert(shape.end(), cfg.probe_shape.begin(), cfg.probe_shape.end());
  if (model.kind() != ModelKind::cell) shape = {1, model.input_size()};
  Tensor probe(shape);
  Rng rng(0x70726f6265ull);
  for (auto& v : probe.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  Tape tape;
  model.forward(tape, make_input(tape, probe));
}

inline long estimate_edges(Model& model) {
  long total = 0;
  for (MaskedLinear* layer : model.maskable_layers()) total += layer->mask_total();
  return total;
}

}  // namespace detail

inline ExtractedGraph transform(Model& model, const ExtractionConfig& cfg) {
  cfg.validate();
  detail::run_probe(model, cfg);

  if (model.kind() == ModelKind::cell) {
    if (cfg.granularity == Granularity::neuron)
      throw UnsupportedModelError(
          "cell models have no maskable layers; extract at layer granularity");
    auto* cell_model = dynamic_cast<DeepCellDAN*>(&model);
    ExtractedGraph out;
    out.graph = canonicalize(cell_model->structure());
    out.hidden_count = static_cast<int>(out.graph.dag().vertex_count());
    return out;
  }

  const auto maskable = model.maskable_layers();
  if (maskable.empty()) throw NoMaskableLayersError("model has no maskable layers");

  if (cfg.granularity == Granularity::neuron) {
    const long estimate = detail::estimate_edges(model);
    if (estimate > cfg.edge_cap && !cfg.force)
      throw MemoryGuardError("estimated edge count " + std::to_string(estimate) +
                             " exceeds cap " + std::to_string(cfg.edge_cap) +
                             "; pass force (--force) to proceed");
  }

  ExtractedGraph out;
  out.input_count = model.input_size();
  out.output_count = model.output_size();
  Dag g;

  if (model.kind() == ModelKind::ffn) {
    auto* ffn = dynamic_cast<MaskedDeepFFN*>(&model);
    const auto hidden = ffn->hidden_sizes();
    const int L = static_cast<int>(hidden.size());

    if (cfg.granularity == Granularity::layer) {
      // Vertices: input 0, hidden groups 1..L, output L+1.
      for (int v = 0; v <= L + 1; ++v) g.add_vertex(v);
      for (int k = 0; k <= L; ++k) {
        const MaskedLinear& block = *maskable[static_cast<std::size_t>(k)];
        bool any = false;
        for (int r = 0; r < block.out_features() && !any; ++r)
          for (int c = 0; c < block.in_features() && !any; ++c)
            any = detail::edge_survives(block, r, c, cfg);
        if (any) g.add_edge(k, k + 1);
      }
      out.graph = LayeredDag(g);
      out.hidden_count = L;
      return out;
    }

    int hidden_total = 0;
    for (const int h : hidden) hidden_total += h;
    out.hidden_count = hidden_total;
    const int input_base = hidden_total;
    const int output_base = hidden_total + out.input_count;
    for (int v = 0; v < output_base + out.output_count; ++v) g.add_vertex(v);

    std::vector<int> offset(static_cast<std::size_t>(L) + 1, 0);
    for (int k = 0; k < L; ++k) offset[static_cast<std::size_t>(k) + 1] = offset[k] + hidden[k];

    for (int k = 0; k <= L; ++k) {
      const MaskedLinear& block = *maskable[static_cast<std::size_t>(k)];
      for (int r = 0; r < block.out_features(); ++r) {
        for (int c = 0; c < block.in_features(); ++c) {
          if (!detail::edge_survives(block, r, c, cfg)) continue;
          const int from = (k == 0) ? input_base + c : offset[static_cast<std::size_t>(k) - 1] + c;
          const int to = (k == L) ? output_base + r : offset[static_cast<std::size_t>(k)] + r;
          g.add_edge(from, to);
        }
      }
    }
    out.graph = LayeredDag(g);
    return out;
  }

  // DAN: hidden ids follow the canonical (layer, position) enumeration of the
  // source structure.
  auto* dan = dynamic_cast<MaskedDeepDAN*>(&model);
  const LayeredDag& structure = dan->structure();
  const int K = structure.layer_count();

  std::vector<int> offset(static_cast<std::size_t>(K) + 1, 0);
  for (int l = 0; l < K; ++l)
    offset[static_cast<std::size_t>(l) + 1] =
        offset[static_cast<std::size_t>(l)] + static_cast<int>(structure.layer(l).size());
  const int hidden_total = offset[static_cast<std::size_t>(K)];
  const auto hidden_id = [&](int vertex) {
    return offset[static_cast<std::size_t>(structure.layer_of(vertex))] +
           structure.position_in_layer(vertex);
  };

  if (cfg.granularity == Granularity::layer) {
    // Vertices: input 0, structure layer l -> 1 + l, output 1 + K.
    for (int v = 0; v <= K + 1; ++v) g.add_vertex(v);

    const MaskedLinear& in_block = dan->input_block();
    bool any_in = false;
    for (int r = 0; r < in_block.out_features() && !any_in; ++r)
      for (int c = 0; c < in_block.in_features() && !any_in; ++c)
        any_in = detail::edge_survives(in_block, r, c, cfg);
    if (any_in) g.add_edge(0, 1);

    for (const auto& [key, block] : dan->blocks()) {
      const auto [to_layer, from_layer] = key;
      bool any = false;
      for (int r = 0; r < block.out_features() && !any; ++r)
        for (int c = 0; c < block.in_features() && !any; ++c)
          any = detail::edge_survives(block, r, c, cfg);
      if (any) g.add_edge(1 + from_layer, 1 + to_layer);
    }

    const MaskedLinear& out_block = dan->output_block();
    const auto& sinks = dan->sink_vertices();
    std::vector<bool> layer_feeds(static_cast<std::size_t>(K), false);
    for (int c = 0; c < out_block.in_features(); ++c) {
      bool any = false;
      for (int r = 0; r < out_block.out_features() && !any; ++r)
        any = detail::edge_survives(out_block, r, c, cfg);
      if (any) layer_feeds[static_cast<std::size_t>(
          structure.layer_of(sinks[static_cast<std::size_t>(c)]))] = true;
    }
    for (int l = 0; l < K; ++l)
      if (layer_feeds[static_cast<std::size_t>(l)]) g.add_edge(1 + l, 1 + K);

    out.graph = LayeredDag(g);
    out.hidden_count = K;
    return out;
  }

  out.hidden_count = hidden_total;
  const int input_base = hidden_total;
  const int output_base = hidden_total + out.input_count;
  for (int v = 0; v < output_base + out.output_count; ++v) g.add_vertex(v);

  const MaskedLinear& in_block = dan->input_block();
  for (int r = 0; r < in_block.out_features(); ++r)
    for (int c = 0; c < in_block.in_features(); ++c)
      if (detail::edge_survives(in_block, r, c, cfg)) g.add_edge(input_base + c, r);

  for (const auto& [key, block] : dan->blocks()) {
    const auto [to_layer, from_layer] = key;
    for (int r = 0; r < block.out_features(); ++r)
      for (int c = 0; c < block.in_features(); ++c)
        if (detail::edge_survives(block, r, c, cfg))
          g.add_edge(offset[static_cast<std::size_t>(from_layer)] + c,
                     offset[static_cast<std::size_t>(to_layer)] + r);
  }

  const MaskedLinear& out_block = dan->output_block();
  const auto& sinks = dan->sink_vertices();
  for (int r = 0; r < out_block.out_features(); ++r)
    for (int c = 0; c < out_block.in_features(); ++c)
      if (detail::edge_survives(out_block, r, c, cfg))
        g.add_edge(hidden_id(sinks[static_cast<std::size_t>(c)]), output_base + r);

  out.graph = LayeredDag(g);
  return out;
}

struct RoundtripResult {
  bool ok = false;
  int hidden_count = 0;
  std::vector<Edge> missing;  // in the source, absent from the extraction
  std::vector<Edge> extra;    // extracted but not in the source
};

// Headline property: canonicalize -> build a DAN -> extract at neuron
// granularity -> restrict to hidden vertices; the result must equal the
// source edge set.
inline RoundtripResult roundtrip_check(const LayeredDag& structure, int input_size,
                                       int output_size) {
  const LayeredDag canonical = canonicalize(structure);
  MaskedDeepDAN model(input_size, output_size, canonical);

  ExtractionConfig cfg;
  cfg.probe_shape = {input_size};
  cfg.granularity = Granularity::neuron;
  cfg.edge_rule = EdgeRule::mask_nonzero;
  const ExtractedGraph extracted = transform(model, cfg);

  RoundtripResult result;
  result.hidden_count = extracted.hidden_count;

  std::set<Edge> got;
  for (const Edge& e : extracted.graph.dag().edges())
    if (e.first < extracted.hidden_count && e.second < extracted.hidden_count) got.insert(e);
  const std::set<Edge>& want = canonical.dag().edges();

  std::set_difference(want.begin(), want.end(), got.begin(), got.end(),
                      std::back_inserter(result.missing));
  std::set_difference(got.begin(), got.end(), want.begin(), want.end(),
                      std::back_inserter(result.extra));
  result.ok = result.missing.empty() && result.extra.empty();
  return result;
}

struct GraphStats {
  long vertices = 0;
  long edges = 0;
  std::optional<double> density;  // undefined below two vertices
  int layer_count = 0;
  std::vector<int> layer_sizes;
  int max_path_length = 0;
};

inline GraphStats graph_stats(const LayeredDag& lg) {
  GraphStats stats;
  if (lg.empty()) return stats;
  const Dag& g = lg.dag();
  stats.vertices = static_cast<long>(g.vertex_count());
  stats.edges = static_cast<long>(g.edge_count());
  if (stats.vertices >= 2) stats.density = graph_density(g);
  stats.layer_count = lg.layer_count();
  for (int l = 0; l < lg.layer_count(); ++l)
    stats.layer_sizes.push_back(static_cast<int>(lg.layer(l).size()));
  stats.max_path_length = lg.layer_count() - 1;
  return stats;
}

}  // namespace gw
