#pragma once

// Network families compiled from layer-size lists or layered DAGs. All three
// share the MaskedLinear primitive; connectivity lives in the masks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "graphweave/errors.hpp"
#include "graphweave/graph.hpp"
#include "graphweave/nn.hpp"

namespace gw {

enum class ModelKind { ffn, dan, cell };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::ffn: return "ffn";
    case ModelKind::dan: return "dan";
    case ModelKind::cell: return "cell";
  }
  return "ffn";
}

class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual int input_size() const = 0;
  virtual int output_size() const = 0;
  virtual Activation activation() const = 0;
  virtual std::uint64_t seed() const = 0;

  // Records the forward pass on the tape and returns the logits node.
  virtual VarId forward(Tape& tape, VarId x) = 0;

  // Every trainable tensor (weights and biases), in a fixed order.
  virtual std::vector<Tensor*> parameters() = 0;

  // Mask-carrying blocks in their canonical order. Empty for cell models,
  // whose intra-cell weights are not graph edges.
  virtual std::vector<MaskedLinear*> maskable_layers() = 0;

  void zero_grad() {
    for (Tensor* p : parameters()) {
      p->ensure_grad();
      p->zero_grad();
    }
  }

  // Convenience: one forward pass on a fresh tape, returning the logits value.
  Tensor forward_values(const Tensor& x) {
    Tape tape;
    const VarId out = forward(tape, make_input(tape, x));
    return tape.value(out);
  }
};

// Plain feed-forward chain in -> h1 -> ... -> hL -> out with a binary mask on
// every block. Masks start dense (all ones).
class MaskedDeepFFN : public Model {
 public:
  MaskedDeepFFN(int input_size, int output_size, const std::vector<int>& hidden_sizes,
                Activation act = Activation::relu, std::uint64_t seed = 0,
                InitFanIn fanin = InitFanIn::dense)
      : input_size_(input_size), output_size_(output_size), act_(act), seed_(seed) {
    if (input_size < 1 || output_size < 1) throw SizeError("layer sizes must be >= 1");
    for (const int h : hidden_sizes)
      if (h < 1) throw SizeError("layer sizes must be >= 1");

    Rng rng(seed);
    int in = input_size;
    for (std::size_t i = 0; i < hidden_sizes.size(); ++i) {
      hidden_.emplace_back("fc" + std::to_string(i), hidden_sizes[i], in);
      init_masked_linear(hidden_.back(), rng, fanin);
      in = hidden_sizes[i];
    }
    output_ = MaskedLinear("out", output_size, in);
    init_masked_linear(output_, rng, fanin);
  }

  ModelKind kind() const override { return ModelKind::ffn; }
  int input_size() const override { return input_size_; }
  int output_size() const override { return output_size_; }
  Activation activation() const override { return act_; }
  std::uint64_t seed() const override { return seed_; }

  std::vector<int> hidden_sizes() const {
    std::vector<int> hs;
    for (const auto& h : hidden_) hs.push_back(h.out_features());
    return hs;
  }

  VarId forward(Tape& tape, VarId x) override {
    VarId h = x;
    for (auto& layer : hidden_) h = activate(tape, act_, masked_linear_forward(tape, layer, h));
    return masked_linear_forward(tape, output_, h);
  }

  std::vector<Tensor*> parameters() override {
    std::vector<Tensor*> ps;
    for (auto& h : hidden_) {
      ps.push_back(&h.weight);
      ps.push_back(&h.bias);
    }
    ps.push_back(&output_.weight);
    ps.push_back(&output_.bias);
    return ps;
  }

  std::vector<MaskedLinear*> maskable_layers() override {
    std::vector<MaskedLinear*> ls;
    for (auto& h : hidden_) ls.push_back(&h);
    ls.push_back(&output_);
    return ls;
  }

 private:
  int input_size_;
  int output_size_;
  Activation act_;
  std::uint64_t seed_;
  std::vector<MaskedLinear> hidden_;
  MaskedLinear output_;
};

// Directed acyclic network: one neuron per graph vertex, one weight block per
// realized (layer j -> layer i) pair with the block mask equal to the
// cross-layer adjacency. The input feeds the first layer densely; all sink
// vertices (out-degree 0) feed a dense output block. Computes
// y^l = act(sum_j (W_{j->l} (.) M_{j->l}) y^j + B_l).
class MaskedDeepDAN : public Model {
 public:
  // Blocks are keyed (to_layer, from_layer) so map order is the canonical
  // (i, j) enumeration order.
  using BlockKey = std::pair<int, int>;

  MaskedDeepDAN(int input_size, int output_size, const LayeredDag& structure,
                Activation act = Activation::relu, std::uint64_t seed = 0,
                InitFanIn fanin = InitFanIn::dense)
      : input_size_(input_size), output_size_(output_size), act_(act), seed_(seed),
        structure_(structure) {
    if (input_size < 1 || output_size < 1) throw SizeError("layer sizes must be >= 1");
    if (structure.empty()) throw EmptyGraphError("cannot build a network from an empty graph");

    const int layer_count = structure_.layer_count();
    Rng rng(seed);

    input_block_ = MaskedLinear("in", static_cast<int>(structure_.layer(0).size()), input_size_);
    init_masked_linear(input_block_, rng, fanin);

    for (int i = 1; i < layer_count; ++i) {
      for (int j = 0; j < i; ++j) {
        BinaryMatrix adj = cross_layer_adjacency(structure_, j, i);
        bool any = false;
        for (const auto v : adj.data) any = any || (v != 0);
        if (!any) continue;
        MaskedLinear block(std::to_string(j) + "->" + std::to_string(i), adj.rows, adj.cols);
        for (int r = 0; r < adj.rows; ++r)
          for (int c = 0; c < adj.cols; ++c) block.mask.at(r, c) = static_cast<float>(adj.at(r, c));
        init_masked_linear(block, rng, fanin);
        blocks_.emplace(BlockKey{i, j}, std::move(block));
      }
    }

    // Sinks in canonical order: layer by layer, ascending position.
    sink_cols_.assign(static_cast<std::size_t>(layer_count), {});
    for (int l = 0; l < layer_count; ++l) {
      const auto& layer = structure_.layer(l);
      for (int p = 0; p < static_cast<int>(layer.size()); ++p) {
        if (structure_.dag().out_degree(layer[p]) == 0) {
          sink_cols_[static_cast<std::size_t>(l)].push_back(p);
          sink_vertices_.push_back(layer[p]);
        }
      }
    }
    output_ = MaskedLinear("out", output_size_, static_cast<int>(sink_vertices_.size()));
    init_masked_linear(output_, rng, fanin);
  }

  ModelKind kind() const override { return ModelKind::dan; }
  int input_size() const override { return input_size_; }
  int output_size() const override { return output_size_; }
  Activation activation() const override { return act_; }
  std::uint64_t seed() const override { return seed_; }

  const LayeredDag& structure() const { return structure_; }
  const std::vector<int>& sink_vertices() const { return sink_vertices_; }
  const std::map<BlockKey, MaskedLinear>& blocks() const { return blocks_; }
  MaskedLinear& input_block() { return input_block_; }
  MaskedLinear& output_block() { return output_; }
  MaskedLinear& block(int from_layer, int to_layer) {
    return blocks_.at(BlockKey{to_layer, from_layer});
  }
  bool has_block(int from_layer, int to_layer) const {
    return blocks_.count(BlockKey{to_layer, from_layer}) > 0;
  }

  VarId forward(Tape& tape, VarId x) override {
    const int layer_count = structure_.layer_count();
    std::vector<VarId> act_of(static_cast<std::size_t>(layer_count), -1);
    act_of[0] = activate(tape, act_, masked_linear_forward(tape, input_block_, x));

    for (int l = 1; l < layer_count; ++l) {
      VarId z = -1;
      for (int j = 0; j < l; ++j) {
        const auto it = blocks_.find(BlockKey{l, j});
        if (it == blocks_.end()) continue;
        const VarId part = masked_matmul(tape, it->second, act_of[static_cast<std::size_t>(j)]);
        z = (z < 0) ? part : add(tape, z, part);
      }
      // The adjacent block always exists under longest-path layering; its
      // bias is the per-layer bias B_l. Skip-block biases stay inert.
      auto& adjacent = blocks_.at(BlockKey{l, l - 1});
      z = add_bias(tape, adjacent.bias, z);
      act_of[static_cast<std::size_t>(l)] = activate(tape, act_, z);
    }

    std::vector<VarId> sink_parts;
    for (int l = 0; l < layer_count; ++l) {
      const auto& cols = sink_cols_[static_cast<std::size_t>(l)];
      if (cols.empty()) continue;
      sink_parts.push_back(gather_cols(tape, act_of[static_cast<std::size_t>(l)], cols));
    }
    const VarId gathered =
        sink_parts.size() == 1 ? sink_parts[0] : concat_cols(tape, sink_parts);
    return masked_linear_forward(tape, output_, gathered);
  }

  std::vector<Tensor*> parameters() override {
    std::vector<Tensor*> ps{&input_block_.weight, &input_block_.bias};
    for (auto& [key, block] : blocks_) {
      ps.push_back(&block.weight);
      ps.push_back(&block.bias);
    }
    ps.push_back(&output_.weight);
    ps.push_back(&output_.bias);
    return ps;
  }

  std::vector<MaskedLinear*> maskable_layers() override {
    std::vector<MaskedLinear*> ls{&input_block_};
    for (auto& [key, block] : blocks_) ls.push_back(&block);
    ls.push_back(&output_);
    return ls;
  }

 private:
  int input_size_;
  int output_size_;
  Activation act_;
  std::uint64_t seed_;
  LayeredDag structure_;
  MaskedLinear input_block_;
  std::map<BlockKey, MaskedLinear> blocks_;
  MaskedLinear output_;
  std::vector<std::vector<int>> sink_cols_;  // per layer, positions of sinks
  std::vector<int> sink_vertices_;
};

// --- cell-based networks ---------------------------------------------------

struct CellContext {
  bool is_input = false;
  bool is_output = false;
  int in_degree = 0;
  int out_degree = 0;
  int layer = 0;
  int input_channel_size = 0;
};

// One high-level operation occupying a graph vertex. Cells map stacked
// predecessor feature maps (batch, in_channels, spatial...) to
// (batch, out_channels, spatial...) with unchanged spatial shape.
class Cell {
 public:
  virtual ~Cell() = default;
  virtual int in_channels() const = 0;
  virtual int out_channels() const = 0;
  virtual VarId forward(Tape& tape, VarId x) = 0;
  virtual std::vector<Tensor*> parameters() { return {}; }
};

using CellConstructor = std::function<std::unique_ptr<Cell>(const CellContext&)>;

// Trainable 1x1 channel mixer followed by relu; the default cell kind.
class LinearMixerCell : public Cell {
 public:
  LinearMixerCell(int in_channels, int out_channels, Rng& rng)
      : mix_("mix", out_channels, in_channels) {
    init_masked_linear(mix_, rng);
  }

  int in_channels() const override { return mix_.in_features(); }
  int out_channels() const override { return mix_.out_features(); }
  VarId forward(Tape& tape, VarId x) override {
    return activate(tape, Activation::relu, channel_mix(tape, mix_, x));
  }
  std::vector<Tensor*> parameters() override { return {&mix_.weight, &mix_.bias}; }

  MaskedLinear& mixer() { return mix_; }

 private:
  MaskedLinear mix_;
};

// 5x5 convolution + relu + batch normalization, shape-preserving. Shipped
// forward-only: useful for shape checks and structure extraction, not for
// gradient training.
class ReductionCell : public Cell {
 public:
  ReductionCell(int in_channels, int out_channels, Rng& rng)
      : kernel_(std::vector<int>{out_channels, in_channels, 5, 5}),
        bias_(std::vector<int>{out_channels}),
        gamma_(std::vector<int>{out_channels}, 1.0f),
        beta_(std::vector<int>{out_channels}),
        mean_(std::vector<int>{out_channels}),
        var_(std::vector<int>{out_channels}, 1.0f) {
    const double a = std::sqrt(6.0 / (in_channels * 25.0));
    for (auto& v : kernel_.data) v = static_cast<float>(rng.uniform(-a, a));
  }

  int in_channels() const override { return kernel_.dim(1); }
  int out_channels() const override { return kernel_.dim(0); }

  VarId forward(Tape& tape, VarId x) override {
    const VarId conv = conv2d_forward(tape, kernel_, bias_, x, /*pad=*/2);
    const VarId act = activate(tape, Activation::relu, conv);
    return batchnorm_inference(tape, gamma_, beta_, mean_, var_, 1e-5f, act);
  }

 private:
  Tensor kernel_, bias_, gamma_, beta_, mean_, var_;
};

// Network whose vertices carry whole cells instead of single neurons. Source
// vertices consume the raw input; every other vertex consumes its
// predecessors' outputs stacked along the channel axis. Sink outputs are
// stacked, globally average-pooled and mapped to class logits by a dense
// readout.
class DeepCellDAN : public Model {
 public:
  DeepCellDAN(int num_classes, int input_channel_size, const CellConstructor& constructor,
              const LayeredDag& structure, std::uint64_t seed = 0,
              std::string constructor_kind = "custom")
      : num_classes_(num_classes), input_channel_size_(input_channel_size), seed_(seed),
        structure_(structure), constructor_kind_(std::move(constructor_kind)) {
    if (num_classes < 1 || input_channel_size < 1) throw SizeError("sizes must be >= 1");
    if (structure.empty()) throw EmptyGraphError("cannot build a network from an empty graph");

    // Construct cells in layer order so predecessor channel counts are known.
    for (int l = 0; l < structure_.layer_count(); ++l) {
      for (const int v : structure_.layer(l)) {
        const auto& dag = structure_.dag();
        CellContext ctx;
        ctx.in_degree = dag.in_degree(v);
        ctx.out_degree = dag.out_degree(v);
        ctx.is_input = ctx.in_degree == 0;
        ctx.is_output = ctx.out_degree == 0;
        ctx.layer = l;
        ctx.input_channel_size = input_channel_size_;

        auto cell = constructor(ctx);
        if (!cell) throw CellArityError("cell constructor returned null for vertex " +
                                        std::to_string(v));
        const int expected = expected_in_channels(v, ctx);
        if (cell->in_channels() != expected)
          throw CellArityError("cell at vertex " + std::to_string(v) + " declares " +
                               std::to_string(cell->in_channels()) + " input channels, wiring needs " +
                               std::to_string(expected));
        cells_.emplace(v, std::move(cell));
      }
    }

    int readout_in = 0;
    for (int l = 0; l < structure_.layer_count(); ++l)
      for (const int v : structure_.layer(l))
        if (structure_.dag().out_degree(v) == 0) {
          sink_vertices_.push_back(v);
          readout_in += cells_.at(v)->out_channels();
        }
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    readout_ = MaskedLinear("readout", num_classes_, readout_in);
    init_masked_linear(readout_, rng);
  }

  ModelKind kind() const override { return ModelKind::cell; }
  int input_size() const override { return input_channel_size_; }
  int output_size() const override { return num_classes_; }
  Activation activation() const override { return Activation::relu; }
  std::uint64_t seed() const override { return seed_; }
  const std::string& constructor_kind() const { return constructor_kind_; }

  const LayeredDag& structure() const { return structure_; }
  Cell& cell(int vertex) { return *cells_.at(vertex); }
  MaskedLinear& readout() { return readout_; }
  const std::vector<int>& sink_vertices() const { return sink_vertices_; }

  VarId forward(Tape& tape, VarId x) override {
    const Tensor& xv = tape.value(x);
    if (xv.rank() < 3 || xv.dim(1) != input_channel_size_)
      throw ShapeError("cell network expects (batch, " + std::to_string(input_channel_size_) +
                       ", spatial...) input, got " + shape_string(xv.shape));

    std::map<int, VarId> out_of;
    for (int l = 0; l < structure_.layer_count(); ++l) {
      for (const int v : structure_.layer(l)) {
        const auto& preds = structure_.dag().predecessors(v);
        VarId in;
        if (preds.empty()) {
          in = x;
        } else {
          std::vector<int> ordered(preds.begin(), preds.end());
          std::sort(ordered.begin(), ordered.end());
          std::vector<VarId> parts;
          for (const int p : ordered) parts.push_back(out_of.at(p));
          in = parts.size() == 1 ? parts[0] : concat_channels(tape, parts);
        }
        out_of[v] = cells_.at(v)->forward(tape, in);
      }
    }

    std::vector<VarId> sink_parts;
    for (const int v : sink_vertices_) sink_parts.push_back(out_of.at(v));
    const VarId stacked =
        sink_parts.size() == 1 ? sink_parts[0] : concat_channels(tape, sink_parts);
    return masked_linear_forward(tape, readout_, global_avg_pool(tape, stacked));
  }

  std::vector<Tensor*> parameters() override {
    std::vector<Tensor*> ps;
    for (int l = 0; l < structure_.layer_count(); ++l)
      for (const int v : structure_.layer(l))
        for (Tensor* p : cells_.at(v)->parameters()) ps.push_back(p);
    ps.push_back(&readout_.weight);
    ps.push_back(&readout_.bias);
    return ps;
  }

  std::vector<MaskedLinear*> maskable_layers() override { return {}; }

 private:
  int expected_in_channels(int v, const CellContext& ctx) const {
    if (ctx.is_input) return input_channel_size_;
    std::vector<int> preds = structure_.dag().predecessors(v);
    int total = 0;
    for (const int p : preds) total += cells_.at(p)->out_channels();
    return total;
  }

  int num_classes_;
  int input_channel_size_;
  std::uint64_t seed_;
  LayeredDag structure_;
  std::string constructor_kind_;
  std::map<int, std::unique_ptr<Cell>> cells_;
  std::vector<int> sink_vertices_;
  MaskedLinear readout_;
};

// The default cell family: unit-output channel mixers, matching the
// (in_degree, 1) wiring convention.
inline CellConstructor linear_mixer_constructor(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const CellContext& ctx) -> std::unique_ptr<Cell> {
    const int in = ctx.is_input ? ctx.input_channel_size : ctx.in_degree;
    return std::make_unique<LinearMixerCell>(in, 1, *rng);
  };
}

inline CellConstructor reduction_cell_constructor(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const CellContext& ctx) -> std::unique_ptr<Cell> {
    const int in = ctx.is_input ? ctx.input_channel_size : ctx.in_degree;
    return std::make_unique<ReductionCell>(in, 1, *rng);
  };
}

}  // namespace gw
