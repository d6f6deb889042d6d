#pragma once

// Minimal dense neural-network core: masked linear layers, a reverse-mode
// tape, and batch SGD. Float32 parameters, float64 accumulation in every
// reduction. Single-threaded by design so results are reproducible.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "graphweave/errors.hpp"
#include "graphweave/rng.hpp"
#include "graphweave/tensor.hpp"

namespace gw {

enum class Activation { relu, tanh, identity };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "relu";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw Error("unknown activation '" + s + "'");
}

// Weight matrix + bias + binary mask of identical shape. The forward pass
// always computes with the effective weight W (.) M, so masked positions
// contribute nothing to the output and receive zero gradient.
struct MaskedLinear {
  std::string name;
  Tensor weight;  // out x in
  Tensor bias;    // out
  Tensor mask;    // out x in, entries in {0, 1}

  MaskedLinear() = default;
  MaskedLinear(std::string name_in, int out_features, int in_features)
      : name(std::move(name_in)),
        weight(std::vector<int>{out_features, in_features}),
        bias(std::vector<int>{out_features}),
        mask(std::vector<int>{out_features, in_features}, 1.0f) {}

  int out_features() const { return weight.dim(0); }
  int in_features() const { return weight.dim(1); }

  std::int64_t mask_total() const { return mask.size(); }
  std::int64_t mask_kept() const {
    std::int64_t kept = 0;
    for (const float m : mask.data) kept += (m != 0.0f);
    return kept;
  }
  double density() const {
    return static_cast<double>(mask_kept()) / static_cast<double>(mask_total());
  }

  void validate_mask() const {
    if (!mask.same_shape(weight)) throw ShapeError("mask shape differs from weight shape");
    for (const float m : mask.data)
      if (m != 0.0f && m != 1.0f) throw Error("mask entries must be 0 or 1");
  }
};

enum class InitFanIn { dense, masked };

// uniform(-a, a) with a = sqrt(6 / fan_in). In dense mode fan_in is the full
// input width; in masked mode it is the per-row mask popcount (>= 1).
inline void init_masked_linear(MaskedLinear& layer, Rng& rng, InitFanIn mode = InitFanIn::dense) {
  const int out = layer.out_features();
  const int in = layer.in_features();
  for (int r = 0; r < out; ++r) {
    double fan = in;
    if (mode == InitFanIn::masked) {
      double kept = 0.0;
      for (int c = 0; c < in; ++c) kept += (layer.mask.at(r, c) != 0.0f);
      fan = std::max(1.0, kept);
    }
    const double a = std::sqrt(6.0 / fan);
    for (int c = 0; c < in; ++c) layer.weight.at(r, c) = static_cast<float>(rng.uniform(-a, a));
  }
}

using VarId = int;

// Records one forward pass. Nodes are appended in topological order, so the
// reverse sweep is just reverse insertion order. Backward closures hold raw
// pointers to parameter tensors: a tape must not outlive the model that was
// run through it, and is meant to be rebuilt for every forward pass.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // same shape as value, zero-initialized
    std::function<void(Tape&, VarId)> backprop;
  };

  VarId push(Tensor value, std::function<void(Tape&, VarId)> backprop = nullptr) {
    Node n;
    n.grad = Tensor(value.shape);
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size()) - 1;
  }

  const Tensor& value(VarId id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  Tensor& grad(VarId id) { return nodes_.at(static_cast<std::size_t>(id)).grad; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse, accumulating
  // into node grads and parameter grad buffers. The root must be scalar.
  void backward(VarId root) {
    if (nodes_.empty() || root < 0 || root >= static_cast<VarId>(nodes_.size()))
      throw NoTapeError("no recorded forward pass to differentiate");
    if (nodes_[static_cast<std::size_t>(root)].value.size() != 1)
      throw ShapeError("backward root must be a scalar");
    nodes_[static_cast<std::size_t>(root)].grad.data[0] = 1.0f;
    for (VarId i = root; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backprop) n.backprop(*this, i);
    }
  }

 private:
  std::vector<Node> nodes_;
};

inline VarId make_input(Tape& tape, Tensor x) { return tape.push(std::move(x)); }

namespace detail {

inline void check_matrix_input(const Tensor& x, const MaskedLinear& layer) {
  if (x.rank() != 2 || x.dim(1) != layer.in_features())
    throw ShapeError("layer '" + layer.name + "' expects input (batch, " +
                     std::to_string(layer.in_features()) + "), got " + shape_string(x.shape));
}

// Shared forward/backward for the affine and bias-free variants.
inline VarId masked_affine(Tape& tape, MaskedLinear& layer, VarId x, bool with_bias) {
  const Tensor& xv = tape.value(x);
  check_matrix_input(xv, layer);
  const int batch = xv.dim(0);
  const int out = layer.out_features();
  const int in = layer.in_features();

  Tensor y(std::vector<int>{batch, out});
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out; ++o) {
      double acc = with_bias ? layer.bias.data[static_cast<std::size_t>(o)] : 0.0;
      for (int i = 0; i < in; ++i)
        acc += static_cast<double>(xv.at(b, i)) * layer.weight.at(o, i) * layer.mask.at(o, i);
      y.at(b, o) = static_cast<float>(acc);
    }
  }

  MaskedLinear* lp = &layer;
  return tape.push(std::move(y), [lp, x, with_bias](Tape& t, VarId self) {
    const Tensor& dy = t.grad(self);
    const Tensor& xv = t.value(x);
    Tensor& dx = t.grad(x);
    const int batch = xv.dim(0);
    const int out = lp->out_features();
    const int in = lp->in_features();

    lp->weight.ensure_grad();
    if (with_bias) {
      lp->bias.ensure_grad();
      for (int o = 0; o < out; ++o) {
        double acc = 0.0;
        for (int b = 0; b < batch; ++b) acc += dy.at(b, o);
        lp->bias.grad[static_cast<std::size_t>(o)] += static_cast<float>(acc);
      }
    }
    for (int o = 0; o < out; ++o) {
      for (int i = 0; i < in; ++i) {
        if (lp->mask.at(o, i) == 0.0f) continue;  // masked weights receive no gradient
        double acc = 0.0;
        for (int b = 0; b < batch; ++b) acc += static_cast<double>(dy.at(b, o)) * xv.at(b, i);
        lp->weight.grad[static_cast<std::size_t>(o) * in + i] += static_cast<float>(acc);
      }
    }
    for (int b = 0; b < batch; ++b) {
      for (int i = 0; i < in; ++i) {
        double acc = 0.0;
        for (int o = 0; o < out; ++o)
          acc += static_cast<double>(dy.at(b, o)) * lp->weight.at(o, i) * lp->mask.at(o, i);
        dx.at(b, i) += static_cast<float>(acc);
      }
    }
  });
}

}  // namespace detail

// y = x . (W (.) M)^T + B, broadcast over the batch.
inline VarId masked_linear_forward(Tape& tape, MaskedLinear& layer, VarId x) {
  return detail::masked_affine(tape, layer, x, /*with_bias=*/true);
}

// Bias-free variant, used when several blocks sum into one target layer.
inline VarId masked_matmul(Tape& tape, MaskedLinear& layer, VarId x) {
  return detail::masked_affine(tape, layer, x, /*with_bias=*/false);
}

inline VarId add(Tape& tape, VarId a, VarId b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (!av.same_shape(bv))
    throw ShapeError("add requires equal shapes, got " + shape_string(av.shape) + " and " +
                     shape_string(bv.shape));
  Tensor y = av;
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += bv.data[i];
  return tape.push(std::move(y), [a, b](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& da = t.grad(a);
    Tensor& db = t.grad(b);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      da.data[i] += g.data[i];
      db.data[i] += g.data[i];
    }
  });
}

// Adds a parameter bias vector to every row of a 2-D value.
inline VarId add_bias(Tape& tape, Tensor& bias, VarId x) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 2 || bias.rank() != 1 || bias.dim(0) != xv.dim(1))
    throw ShapeError("add_bias requires (batch, n) input and length-n bias");
  Tensor y = xv;
  const int batch = xv.dim(0);
  const int n = xv.dim(1);
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < n; ++i) y.at(b, i) += bias.data[static_cast<std::size_t>(i)];
  Tensor* bp = &bias;
  return tape.push(std::move(y), [bp, x](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& dx = t.grad(x);
    const int batch = g.dim(0);
    const int n = g.dim(1);
    bp->ensure_grad();
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int b = 0; b < batch; ++b) acc += g.at(b, i);
      bp->grad[static_cast<std::size_t>(i)] += static_cast<float>(acc);
    }
    for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] += g.data[i];
  });
}

// Elementwise activation; works on any rank. relu'(0) is defined as 0.
inline VarId activate(Tape& tape, Activation act, VarId x) {
  if (act == Activation::identity) return x;
  const Tensor& xv = tape.value(x);
  Tensor y = xv;
  if (act == Activation::relu) {
    for (auto& v : y.data) v = v > 0.0f ? v : 0.0f;
  } else {
    for (auto& v : y.data) v = std::tanh(v);
  }
  return tape.push(std::move(y), [act, x](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    const Tensor& yv = t.value(self);
    const Tensor& xv = t.value(x);
    Tensor& dx = t.grad(x);
    if (act == Activation::relu) {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        dx.data[i] += xv.data[i] > 0.0f ? g.data[i] : 0.0f;
    } else {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        dx.data[i] += g.data[i] * (1.0f - yv.data[i] * yv.data[i]);
    }
  });
}

// y[b, k] = x[b, cols[k]].
inline VarId gather_cols(Tape& tape, VarId x, std::vector<int> cols) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 2) throw ShapeError("gather_cols requires a 2-D input");
  for (const int c : cols)
    if (c < 0 || c >= xv.dim(1)) throw ShapeError("gather_cols column index out of range");
  const int batch = xv.dim(0);
  const int k = static_cast<int>(cols.size());
  Tensor y(std::vector<int>{batch, k});
  for (int b = 0; b < batch; ++b)
    for (int j = 0; j < k; ++j) y.at(b, j) = xv.at(b, cols[static_cast<std::size_t>(j)]);
  return tape.push(std::move(y), [x, cols = std::move(cols)](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& dx = t.grad(x);
    const int batch = g.dim(0);
    for (int b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < cols.size(); ++j) dx.at(b, cols[j]) += g.at(b, static_cast<int>(j));
  });
}

// Concatenates 2-D values along columns.
inline VarId concat_cols(Tape& tape, const std::vector<VarId>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols requires at least one input");
  const int batch = tape.value(parts[0]).dim(0);
  int total = 0;
  for (const VarId p : parts) {
    const Tensor& v = tape.value(p);
    if (v.rank() != 2 || v.dim(0) != batch)
      throw ShapeError("concat_cols inputs must share the batch dimension");
    total += v.dim(1);
  }
  Tensor y(std::vector<int>{batch, total});
  int off = 0;
  for (const VarId p : parts) {
    const Tensor& v = tape.value(p);
    for (int b = 0; b < batch; ++b)
      for (int c = 0; c < v.dim(1); ++c) y.at(b, off + c) = v.at(b, c);
    off += v.dim(1);
  }
  return tape.push(std::move(y), [parts](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    const int batch = g.dim(0);
    int off = 0;
    for (const VarId p : parts) {
      Tensor& dp = t.grad(p);
      for (int b = 0; b < batch; ++b)
        for (int c = 0; c < dp.dim(1); ++c) dp.at(b, c) += g.at(b, off + c);
      off += dp.dim(1);
    }
  });
}

namespace detail {
inline std::int64_t spatial_size(const Tensor& x) {
  std::int64_t s = 1;
  for (int d = 2; d < x.rank(); ++d) s *= x.dim(d);
  return s;
}
}  // namespace detail

// Mixes channels with an (out_channels x in_channels) masked matrix at every
// spatial position: y[b, o, s] = sum_c (W (.) M)[o, c] * x[b, c, s] + B[o].
inline VarId channel_mix(Tape& tape, MaskedLinear& layer, VarId x) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() < 3 || xv.dim(1) != layer.in_features())
    throw ShapeError("channel_mix '" + layer.name + "' expects (batch, " +
                     std::to_string(layer.in_features()) + ", spatial...), got " +
                     shape_string(xv.shape));
  const int batch = xv.dim(0);
  const int cin = layer.in_features();
  const int cout = layer.out_features();
  const std::int64_t sp = detail::spatial_size(xv);

  std::vector<int> yshape = xv.shape;
  yshape[1] = cout;
  Tensor y(yshape);
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < cout; ++o) {
      for (std::int64_t s = 0; s < sp; ++s) {
        double acc = layer.bias.data[static_cast<std::size_t>(o)];
        for (int c = 0; c < cin; ++c)
          acc += static_cast<double>(xv.data[(static_cast<std::size_t>(b) * cin + c) * sp + s]) *
                 layer.weight.at(o, c) * layer.mask.at(o, c);
        y.data[(static_cast<std::size_t>(b) * cout + o) * sp + s] = static_cast<float>(acc);
      }
    }
  }

  MaskedLinear* lp = &layer;
  return tape.push(std::move(y), [lp, x](Tape& t, VarId self) {
    const Tensor& dy = t.grad(self);
    const Tensor& xv = t.value(x);
    Tensor& dx = t.grad(x);
    const int batch = xv.dim(0);
    const int cin = lp->in_features();
    const int cout = lp->out_features();
    const std::int64_t sp = detail::spatial_size(xv);

    lp->weight.ensure_grad();
    lp->bias.ensure_grad();
    for (int o = 0; o < cout; ++o) {
      double acc = 0.0;
      for (int b = 0; b < batch; ++b)
        for (std::int64_t s = 0; s < sp; ++s)
          acc += dy.data[(static_cast<std::size_t>(b) * cout + o) * sp + s];
      lp->bias.grad[static_cast<std::size_t>(o)] += static_cast<float>(acc);
    }
    for (int o = 0; o < cout; ++o) {
      for (int c = 0; c < cin; ++c) {
        if (lp->mask.at(o, c) == 0.0f) continue;
        double acc = 0.0;
        for (int b = 0; b < batch; ++b)
          for (std::int64_t s = 0; s < sp; ++s)
            acc += static_cast<double>(dy.data[(static_cast<std::size_t>(b) * cout + o) * sp + s]) *
                   xv.data[(static_cast<std::size_t>(b) * cin + c) * sp + s];
        lp->weight.grad[static_cast<std::size_t>(o) * cin + c] += static_cast<float>(acc);
      }
    }
    for (int b = 0; b < batch; ++b) {
      for (int c = 0; c < cin; ++c) {
        for (std::int64_t s = 0; s < sp; ++s) {
          double acc = 0.0;
          for (int o = 0; o < cout; ++o)
            acc += static_cast<double>(dy.data[(static_cast<std::size_t>(b) * cout + o) * sp + s]) *
                   lp->weight.at(o, c) * lp->mask.at(o, c);
          dx.data[(static_cast<std::size_t>(b) * cin + c) * sp + s] += static_cast<float>(acc);
        }
      }
    }
  });
}

// Concatenates values of rank >= 3 along the channel axis (dim 1).
inline VarId concat_channels(Tape& tape, const std::vector<VarId>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels requires at least one input");
  const Tensor& first = tape.value(parts[0]);
  if (first.rank() < 3) throw ShapeError("concat_channels requires rank >= 3 inputs");
  int channels = 0;
  for (const VarId p : parts) {
    const Tensor& v = tape.value(p);
    if (v.rank() != first.rank() || v.dim(0) != first.dim(0))
      throw ShapeError("concat_channels inputs must share batch and rank");
    for (int d = 2; d < v.rank(); ++d)
      if (v.dim(d) != first.dim(d))
        throw ShapeError("concat_channels inputs must share spatial dimensions");
    channels += v.dim(1);
  }
  std::vector<int> yshape = first.shape;
  yshape[1] = channels;
  Tensor y(yshape);
  const int batch = first.dim(0);
  const std::int64_t sp = detail::spatial_size(first);
  std::int64_t coff = 0;
  for (const VarId p : parts) {
    const Tensor& v = tape.value(p);
    const int pc = v.dim(1);
    for (int b = 0; b < batch; ++b)
      for (int c = 0; c < pc; ++c)
        for (std::int64_t s = 0; s < sp; ++s)
          y.data[((static_cast<std::size_t>(b) * channels) + coff + c) * sp + s] =
              v.data[(static_cast<std::size_t>(b) * pc + c) * sp + s];
    coff += pc;
  }
  return tape.push(std::move(y), [parts, channels, sp](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    const int batch = g.dim(0);
    std::int64_t coff = 0;
    for (const VarId p : parts) {
      Tensor& dp = t.grad(p);
      const int pc = dp.dim(1);
      for (int b = 0; b < batch; ++b)
        for (int c = 0; c < pc; ++c)
          for (std::int64_t s = 0; s < sp; ++s)
            dp.data[(static_cast<std::size_t>(b) * pc + c) * sp + s] +=
                g.data[((static_cast<std::size_t>(b) * channels) + coff + c) * sp + s];
      coff += pc;
    }
  });
}

// (batch, channels, spatial...) -> (batch, channels), mean over all spatial positions.
inline VarId global_avg_pool(Tape& tape, VarId x) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() < 3) throw ShapeError("global_avg_pool requires rank >= 3 input");
  const int batch = xv.dim(0);
  const int channels = xv.dim(1);
  const std::int64_t sp = detail::spatial_size(xv);
  Tensor y(std::vector<int>{batch, channels});
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::int64_t s = 0; s < sp; ++s)
        acc += xv.data[(static_cast<std::size_t>(b) * channels + c) * sp + s];
      y.at(b, c) = static_cast<float>(acc / static_cast<double>(sp));
    }
  }
  return tape.push(std::move(y), [x, sp](Tape& t, VarId self) {
    const Tensor& g = t.grad(self);
    Tensor& dx = t.grad(x);
    const int batch = g.dim(0);
    const int channels = g.dim(1);
    const float inv = 1.0f / static_cast<float>(sp);
    for (int b = 0; b < batch; ++b)
      for (int c = 0; c < channels; ++c)
        for (std::int64_t s = 0; s < sp; ++s)
          dx.data[(static_cast<std::size_t>(b) * channels + c) * sp + s] += g.at(b, c) * inv;
  });
}

inline VarId reduce_sum(Tape& tape, VarId x) {
  const Tensor& xv = tape.value(x);
  double acc = 0.0;
  for (const float v : xv.data) acc += v;
  Tensor y(std::vector<int>{1});
  y.data[0] = static_cast<float>(acc);
  return tape.push(std::move(y), [x](Tape& t, VarId self) {
    const float g = t.grad(self).data[0];
    Tensor& dx = t.grad(x);
    for (auto& v : dx.data) v += g;
  });
}

// Mean over the batch of -log softmax(logits)[label], stabilized by
// max-subtraction; softmax and the log-sum are evaluated in double.
inline VarId softmax_cross_entropy(Tape& tape, VarId logits, const std::vector<int>& labels) {
  const Tensor& lv = tape.value(logits);
  if (lv.rank() != 2) throw ShapeError("softmax_cross_entropy expects (batch, classes) logits");
  const int batch = lv.dim(0);
  const int classes = lv.dim(1);
  if (static_cast<int>(labels.size()) != batch)
    throw ShapeError("label count does not match the batch size");
  for (const int l : labels)
    if (l < 0 || l >= classes)
      throw LabelRangeError("label " + std::to_string(l) + " outside [0, " +
                            std::to_string(classes) + ")");

  auto probs = std::make_shared<std::vector<float>>(static_cast<std::size_t>(batch) * classes);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    double mx = lv.at(b, 0);
    for (int c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(lv.at(b, c)));
    double z = 0.0;
    for (int c = 0; c < classes; ++c) z += std::exp(static_cast<double>(lv.at(b, c)) - mx);
    for (int c = 0; c < classes; ++c)
      (*probs)[static_cast<std::size_t>(b) * classes + c] =
          static_cast<float>(std::exp(static_cast<double>(lv.at(b, c)) - mx) / z);
    loss -= static_cast<double>(lv.at(b, labels[static_cast<std::size_t>(b)])) - mx - std::log(z);
  }
  Tensor y(std::vector<int>{1});
  y.data[0] = static_cast<float>(loss / batch);
  return tape.push(std::move(y), [logits, labels, probs](Tape& t, VarId self) {
    const float g = t.grad(self).data[0];
    Tensor& dl = t.grad(logits);
    const int batch = dl.dim(0);
    const int classes = dl.dim(1);
    const float scale = g / static_cast<float>(batch);
    for (int b = 0; b < batch; ++b)
      for (int c = 0; c < classes; ++c) {
        const float p = (*probs)[static_cast<std::size_t>(b) * classes + c];
        const float onehot = (c == labels[static_cast<std::size_t>(b)]) ? 1.0f : 0.0f;
        dl.at(b, c) += scale * (p - onehot);
      }
  });
}

// p <- p - lr * grad(p). Parameters without an allocated grad are skipped.
inline void sgd_step(const std::vector<Tensor*>& params, float lr) {
  for (Tensor* p : params) {
    if (p->grad.empty()) continue;
    for (std::size_t i = 0; i < p->data.size(); ++i) p->data[i] -= lr * p->grad[i];
  }
}

// --- forward-only ops for high-level cells -------------------------------

// Stride-1 2-D convolution with symmetric zero padding. Inference only.
inline VarId conv2d_forward(Tape& tape, const Tensor& kernel, const Tensor& bias, VarId x,
                            int pad) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 4) throw ShapeError("conv2d expects (batch, channels, h, w) input");
  if (kernel.rank() != 4 || kernel.dim(1) != xv.dim(1))
    throw ShapeError("conv2d kernel must be (out, in, kh, kw) with in = input channels");
  const int batch = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const int cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const int oh = h + 2 * pad - kh + 1;
  const int ow = w + 2 * pad - kw + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d kernel larger than padded input");

  Tensor y(std::vector<int>{batch, cout, oh, ow});
  const auto xat = [&](int b, int c, int i, int j) -> float {
    return xv.data[((static_cast<std::size_t>(b) * cin + c) * h + i) * w + j];
  };
  for (int b = 0; b < batch; ++b)
    for (int o = 0; o < cout; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = bias.data.empty() ? 0.0 : bias.data[static_cast<std::size_t>(o)];
          for (int c = 0; c < cin; ++c)
            for (int ki = 0; ki < kh; ++ki)
              for (int kj = 0; kj < kw; ++kj) {
                const int ii = i + ki - pad;
                const int jj = j + kj - pad;
                if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                acc += static_cast<double>(xat(b, c, ii, jj)) *
                       kernel.data[((static_cast<std::size_t>(o) * cin + c) * kh + ki) * kw + kj];
              }
          y.data[((static_cast<std::size_t>(b) * cout + o) * oh + i) * ow + j] =
              static_cast<float>(acc);
        }
  return tape.push(std::move(y), [](Tape&, VarId) {
    throw Error("conv2d is forward-only and cannot be differentiated");
  });
}

// Channelwise inference-mode normalization: y = gamma * (x - mean) / sqrt(var + eps) + beta.
inline VarId batchnorm_inference(Tape& tape, const Tensor& gamma, const Tensor& beta,
                                 const Tensor& mean, const Tensor& var, float eps, VarId x) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() < 3) throw ShapeError("batchnorm expects (batch, channels, spatial...) input");
  const int channels = xv.dim(1);
  if (gamma.size() != channels || beta.size() != channels || mean.size() != channels ||
      var.size() != channels)
    throw ShapeError("batchnorm parameter length must equal the channel count");
  const int batch = xv.dim(0);
  const std::int64_t sp = detail::spatial_size(xv);
  Tensor y = xv;
  for (int c = 0; c < channels; ++c) {
    const float scale =
        gamma.data[static_cast<std::size_t>(c)] /
        std::sqrt(var.data[static_cast<std::size_t>(c)] + eps);
    const float shift = beta.data[static_cast<std::size_t>(c)] -
                        mean.data[static_cast<std::size_t>(c)] * scale;
    for (int b = 0; b < batch; ++b)
      for (std::int64_t s = 0; s < sp; ++s) {
        auto& v = y.data[(static_cast<std::size_t>(b) * channels + c) * sp + s];
        v = v * scale + shift;
      }
  }
  return tape.push(std::move(y), [](Tape&, VarId) {
    throw Error("batchnorm_inference is forward-only and cannot be differentiated");
  });
}

}  // namespace gw
