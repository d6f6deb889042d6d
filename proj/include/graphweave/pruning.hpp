#pragma once

// Magnitude pruning over mask-carrying layers. recompute_mask intersects with
// the existing mask (one-way sparsification); apply_mask hard-zeroes pruned
// weights; iterative_magnitude_prune runs the train/threshold/rewind loop
// that produces lottery tickets.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "graphweave/data.hpp"
#include "graphweave/errors.hpp"
#include "graphweave/models.hpp"
#include "graphweave/train.hpp"

namespace gw {

struct LayerPruneStat {
  std::string layer;
  long kept = 0;
  long total = 0;
  double density = 0.0;
};

struct PruneReport {
  std::vector<LayerPruneStat> layers;
  long kept = 0;
  long total = 0;
  double global_density = 0.0;
};

inline PruneReport make_prune_report(Model& model) {
  const auto maskable = model.maskable_layers();
  if (maskable.empty()) throw NoMaskableLayersError("model has no maskable layers");
  PruneReport report;
  for (MaskedLinear* layer : maskable) {
    LayerPruneStat stat;
    stat.layer = layer->name;
    stat.kept = layer->mask_kept();
    stat.total = layer->mask_total();
    stat.density = static_cast<double>(stat.kept) / static_cast<double>(stat.total);
    report.kept += stat.kept;
    report.total += stat.total;
    report.layers.push_back(std::move(stat));
  }
  report.global_density = static_cast<double>(report.kept) / static_cast<double>(report.total);
  return report;
}

inline double density(Model& model) { return make_prune_report(model).global_density; }

struct PruneOptions {
  bool protect_io = false;  // exempt the first and last maskable layer
  bool fresh = false;       // rebuild masks from raw magnitudes instead of intersecting
};

namespace detail {

inline bool layer_protected(std::size_t index, std::size_t count, bool protect_io) {
  return protect_io && (index == 0 || index + 1 == count);
}

inline void threshold_mask(MaskedLinear& layer, float theta, bool fresh) {
  for (std::size_t i = 0; i < layer.mask.data.size(); ++i) {
    const bool magnitude_ok = std::fabs(layer.weight.data[i]) >= theta;
    const bool keep = fresh ? magnitude_ok : (layer.mask.data[i] != 0.0f && magnitude_ok);
    layer.mask.data[i] = keep ? 1.0f : 0.0f;
  }
}

}  // namespace detail

// M <- M AND (|W| >= theta) for every maskable layer; entries exactly at theta
// survive, so theta = 0 is a no-op on live entries.
inline PruneReport recompute_mask(Model& model, float theta, const PruneOptions& opts = {}) {
  if (theta < 0) throw SpecError("theta must be non-negative");
  const auto maskable = model.maskable_layers();
  if (maskable.empty()) throw NoMaskableLayersError("model has no maskable layers");
  for (std::size_t i = 0; i < maskable.size(); ++i) {
    if (detail::layer_protected(i, maskable.size(), opts.protect_io)) continue;
    detail::threshold_mask(*maskable[i], theta, opts.fresh);
  }
  return make_prune_report(model);
}

// W <- W (.) M, irreversibly. Masks themselves are untouched.
inline void apply_mask(Model& model) {
  for (MaskedLinear* layer : model.maskable_layers())
    for (std::size_t i = 0; i < layer->weight.data.size(); ++i)
      layer->weight.data[i] *= layer->mask.data[i];
}

enum class PruneScope { layer, global };

struct ImpOptions {
  int rounds = 1;
  double rate = 0.2;  // fraction removed per round
  int train_epochs = 1;
  bool rewind = true;
  PruneScope scope = PruneScope::layer;
  double lr = 0.1;
  int batch_size = 0;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool protect_io = false;
};

// Initial parameter snapshot plus the masks the pruning loop settled on; the
// pair is the ticket.
struct TicketState {
  std::vector<Tensor> snapshot;  // parameters() order, captured at entry
  std::vector<Tensor> masks;     // maskable_layers() order, after the final round
};

namespace detail {

// rate-quantile of an ascending sample: a[floor(rate * m)]. Keeping >= theta
// then removes floor(rate * m) entries when values are distinct.
inline float magnitude_quantile(std::vector<float>& magnitudes, double rate) {
  std::sort(magnitudes.begin(), magnitudes.end());
  const auto idx = static_cast<std::size_t>(rate * static_cast<double>(magnitudes.size()));
  return magnitudes[std::min(idx, magnitudes.size() - 1)];
}

inline std::vector<float> surviving_magnitudes(const MaskedLinear& layer) {
  std::vector<float> mags;
  for (std::size_t i = 0; i < layer.mask.data.size(); ++i)
    if (layer.mask.data[i] != 0.0f) mags.push_back(std::fabs(layer.weight.data[i]));
  return mags;
}

}  // namespace detail

// Lottery-ticket loop: per round, train, threshold at the rate-quantile of
// surviving magnitudes (per layer or pooled globally), intersect masks, and
// optionally rewind all parameters to the entry snapshot. The model is left
// rewound (if requested) under the final masks.
inline TicketState iterative_magnitude_prune(Model& model, const Dataset& data,
                                             const ImpOptions& opts) {
  if (opts.rounds < 1) throw SpecError("rounds must be >= 1");
  if (opts.rate <= 0.0 || opts.rate >= 1.0) throw SpecError("rate must be in (0, 1)");
  if (data.empty()) throw DataError("cannot prune against an empty dataset");
  const auto maskable = model.maskable_layers();
  if (maskable.empty()) throw NoMaskableLayersError("model has no maskable layers");

  TicketState ticket;
  for (const Tensor* p : model.parameters()) ticket.snapshot.push_back(*p);

  for (int round = 0; round < opts.rounds; ++round) {
    if (opts.train_epochs > 0) {
      TrainConfig tc;
      tc.epochs = opts.train_epochs;
      tc.lr = opts.lr;
      tc.batch_size = opts.batch_size;
      tc.seed = opts.seed + static_cast<std::uint64_t>(round);
      tc.shuffle = opts.shuffle;
      train(model, data, tc);
    }

    if (opts.scope == PruneScope::layer) {
      for (std::size_t i = 0; i < maskable.size(); ++i) {
        if (detail::layer_protected(i, maskable.size(), opts.protect_io)) continue;
        auto mags = detail::surviving_magnitudes(*maskable[i]);
        if (mags.empty()) continue;
        detail::threshold_mask(*maskable[i], detail::magnitude_quantile(mags, opts.rate),
                               /*fresh=*/false);
      }
    } else {
      std::vector<float> pool;
      for (std::size_t i = 0; i < maskable.size(); ++i) {
        if (detail::layer_protected(i, maskable.size(), opts.protect_io)) continue;
        auto mags = detail::surviving_magnitudes(*maskable[i]);
        pool.insert(pool.end(), mags.begin(), mags.end());
      }
      if (!pool.empty()) {
        const float theta = detail::magnitude_quantile(pool, opts.rate);
        for (std::size_t i = 0; i < maskable.size(); ++i) {
          if (detail::layer_protected(i, maskable.size(), opts.protect_io)) continue;
          detail::threshold_mask(*maskable[i], theta, /*fresh=*/false);
        }
      }
    }

    if (opts.rewind) {
      const auto params = model.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->data = ticket.snapshot[i].data;
        params[i]->grad.clear();
      }
    }
  }

  for (const MaskedLinear* layer : maskable) ticket.masks.push_back(layer->mask);
  return ticket;
}

}  // namespace gw
