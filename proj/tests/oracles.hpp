#pragma once

// Independent reference implementations used as test oracles. Numeric
// references run entirely in double precision and share no code with the
// library's float32 tape; graph references use edge-relaxation instead of the
// library's topological recurrence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "graphweave/graph.hpp"
#include "graphweave/models.hpp"
#include "graphweave/nn.hpp"
#include "graphweave/tensor.hpp"

namespace oracle {

// Longest-path layer of every vertex by repeated edge relaxation.
inline std::map<int, int> longest_path_layers(const gw::Dag& g) {
  std::map<int, int> layer;
  for (const int v : g.vertices()) layer[v] = 0;
  const std::size_t n = g.vertex_count();
  for (std::size_t pass = 0; pass < n; ++pass) {
    bool changed = false;
    for (const auto& [u, v] : g.edges()) {
      if (layer[v] < layer[u] + 1) {
        layer[v] = layer[u] + 1;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return layer;
}

// Kahn-style acyclicity check on a raw edge list.
inline bool is_acyclic(const std::set<int>& vertices, const std::set<gw::Edge>& edges) {
  std::map<int, int> indeg;
  std::map<int, std::vector<int>> succ;
  for (const int v : vertices) indeg[v] = 0;
  for (const auto& [u, v] : edges) {
    ++indeg[v];
    succ[u].push_back(v);
  }
  std::vector<int> queue;
  for (const auto& [v, d] : indeg)
    if (d == 0) queue.push_back(v);
  std::size_t seen = 0;
  while (!queue.empty()) {
    const int u = queue.back();
    queue.pop_back();
    ++seen;
    for (const int v : succ[u])
      if (--indeg[v] == 0) queue.push_back(v);
  }
  return seen == vertices.size();
}

// --- double-precision network references -------------------------------------

inline double ref_activate(gw::Activation act, double z) {
  switch (act) {
    case gw::Activation::relu: return z > 0 ? z : 0.0;
    case gw::Activation::tanh: return std::tanh(z);
    case gw::Activation::identity: return z;
  }
  return z;
}

// y = x (W .* M)^T + B on one row, all in double.
inline std::vector<double> ref_affine(const gw::MaskedLinear& layer,
                                      const std::vector<double>& x) {
  std::vector<double> y(static_cast<std::size_t>(layer.out_features()), 0.0);
  for (int r = 0; r < layer.out_features(); ++r) {
    double acc = static_cast<double>(layer.bias.data[static_cast<std::size_t>(r)]);
    for (int c = 0; c < layer.in_features(); ++c)
      acc += x[static_cast<std::size_t>(c)] * static_cast<double>(layer.weight.at(r, c)) *
             static_cast<double>(layer.mask.at(r, c));
    y[static_cast<std::size_t>(r)] = acc;
  }
  return y;
}

inline std::vector<double> ref_ffn_logits(gw::MaskedDeepFFN& model, const std::vector<double>& x) {
  const auto layers = model.maskable_layers();
  std::vector<double> h = x;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = ref_affine(*layers[i], h);
    for (auto& v : h) v = ref_activate(model.activation(), v);
  }
  return ref_affine(*layers.back(), h);
}

inline std::vector<double> ref_dan_logits(gw::MaskedDeepDAN& model, const std::vector<double>& x) {
  const gw::LayeredDag& s = model.structure();
  std::vector<std::vector<double>> acts(static_cast<std::size_t>(s.layer_count()));

  acts[0] = ref_affine(model.input_block(), x);
  for (auto& v : acts[0]) v = ref_activate(model.activation(), v);

  for (int l = 1; l < s.layer_count(); ++l) {
    std::vector<double> z(s.layer(l).size(), 0.0);
    for (int j = 0; j < l; ++j) {
      if (!model.has_block(j, l)) continue;
      const gw::MaskedLinear& block = model.block(j, l);
      for (int r = 0; r < block.out_features(); ++r)
        for (int c = 0; c < block.in_features(); ++c)
          z[static_cast<std::size_t>(r)] += acts[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] *
                                            static_cast<double>(block.weight.at(r, c)) *
                                            static_cast<double>(block.mask.at(r, c));
    }
    const gw::MaskedLinear& adjacent = model.block(l - 1, l);
    for (std::size_t r = 0; r < z.size(); ++r)
      z[r] += static_cast<double>(adjacent.bias.data[r]);
    for (auto& v : z) v = ref_activate(model.activation(), v);
    acts[static_cast<std::size_t>(l)] = std::move(z);
  }

  std::vector<double> gathered;
  for (const int v : model.sink_vertices())
    gathered.push_back(acts[static_cast<std::size_t>(s.layer_of(v))]
                           [static_cast<std::size_t>(s.position_in_layer(v))]);
  return ref_affine(model.output_block(), gathered);
}

inline std::vector<double> ref_logits(gw::Model& model, const std::vector<double>& x) {
  if (auto* ffn = dynamic_cast<gw::MaskedDeepFFN*>(&model)) return ref_ffn_logits(*ffn, x);
  return ref_dan_logits(dynamic_cast<gw::MaskedDeepDAN&>(model), x);
}

inline double ref_softmax_ce_row(const std::vector<double>& logits, int label) {
  double mx = logits[0];
  for (const double v : logits) mx = std::max(mx, v);
  double denom = 0.0;
  for (const double v : logits) denom += std::exp(v - mx);
  return -(logits[static_cast<std::size_t>(label)] - mx - std::log(denom));
}

// Mean cross-entropy of a float32 batch through the double-precision path.
inline double ref_batch_loss(gw::Model& model, const gw::Tensor& x, const std::vector<int>& labels) {
  const int batch = x.dim(0);
  const int in = x.dim(1);
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    std::vector<double> row(static_cast<std::size_t>(in));
    for (int c = 0; c < in; ++c)
      row[static_cast<std::size_t>(c)] =
          static_cast<double>(x.data[static_cast<std::size_t>(b * in + c)]);
    total += ref_softmax_ce_row(ref_logits(model, row), labels[static_cast<std::size_t>(b)]);
  }
  return total / batch;
}

// Central finite differences of ref_batch_loss against the tape's analytic
// gradients. Returns the max of |analytic - numeric| / max(1, |numeric|).
inline double max_gradient_error(gw::Model& model, const gw::Tensor& x,
                                 const std::vector<int>& labels, float h = 1e-3f) {
  model.zero_grad();
  gw::Tape tape;
  const gw::VarId logits = model.forward(tape, gw::make_input(tape, x));
  const gw::VarId loss = gw::softmax_cross_entropy(tape, logits, labels);
  tape.backward(loss);

  double worst = 0.0;
  for (gw::Tensor* param : model.parameters()) {
    for (std::size_t i = 0; i < param->data.size(); ++i) {
      const float saved = param->data[i];
      param->data[i] = saved + h;
      const double hi = static_cast<double>(param->data[i]);
      const double f_hi = ref_batch_loss(model, x, labels);
      param->data[i] = saved - h;
      const double lo = static_cast<double>(param->data[i]);
      const double f_lo = ref_batch_loss(model, x, labels);
      param->data[i] = saved;

      const double numeric = (f_hi - f_lo) / (hi - lo);
      const double analytic = static_cast<double>(param->grad[i]);
      const double err = std::fabs(analytic - numeric) / std::max(1.0, std::fabs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// --- counting oracles ----------------------------------------------------------

inline long ffn_param_count(int input, int output, const std::vector<int>& hidden) {
  long total = 0;
  int in = input;
  for (const int h : hidden) {
    total += static_cast<long>(in) * h + h;
    in = h;
  }
  return total + static_cast<long>(in) * output + output;
}

// Cross-layer block dimensions |L_i| x |L_j| for every layer pair with at
// least one edge, plus the total edge count.
struct BlockCounts {
  long blocks = 0;
  long entries = 0;  // sum of block sizes
  long edges = 0;    // graph edges = mask popcount
};

inline BlockCounts dan_hidden_block_counts(const gw::LayeredDag& lg) {
  BlockCounts counts;
  const int K = lg.layer_count();
  for (int i = 1; i < K; ++i) {
    for (int j = 0; j < i; ++j) {
      long edges = 0;
      for (const int u : lg.layer(j))
        for (const int v : lg.layer(i))
          if (lg.dag().has_edge(u, v)) ++edges;
      if (edges == 0) continue;
      ++counts.blocks;
      counts.entries += static_cast<long>(lg.layer(i).size()) * static_cast<long>(lg.layer(j).size());
      counts.edges += edges;
    }
  }
  return counts;
}

// Survivor count after keeping values >= the rate-quantile a[floor(rate*m)].
inline long expected_survivors(long m, double rate) {
  return m - static_cast<long>(rate * static_cast<double>(m));
}

}  // namespace oracle
