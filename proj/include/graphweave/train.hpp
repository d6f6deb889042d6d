#pragma once

// Minibatch SGD driver. Deterministic for a fixed seed and dataset: one PRNG
// stream drives shuffling, batches are visited in order, and all arithmetic
// is single-threaded.

#include <functional>
#include <numeric>
#include <vector>

#include "graphweave/data.hpp"
#include "graphweave/errors.hpp"
#include "graphweave/models.hpp"
#include "graphweave/nn.hpp"
#include "graphweave/rng.hpp"

namespace gw {

struct TrainConfig {
  int epochs = 1;
  double lr = 0.1;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

inline double evaluate_accuracy(Model& model, const Dataset& data) {
  if (data.empty()) throw DataError("cannot evaluate on an empty dataset");
  const Tensor logits = model.forward_values(data.features_tensor());
  const int classes = logits.dim(1);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    int best = 0;
    for (int c = 1; c < classes; ++c)
      if (logits.data[i * classes + c] > logits.data[i * classes + best]) best = c;
    if (best == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

using EpochCallback = std::function<void(const EpochStats&)>;

// Trains in place and returns per-epoch stats. Loss is the sample-weighted
// mean of batch losses seen during the epoch; accuracy is measured on the
// full dataset after the epoch's updates.
inline std::vector<EpochStats> train(Model& model, const Dataset& data,
                                     const TrainConfig& cfg,
                                     const EpochCallback& on_epoch = nullptr) {
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  if (cfg.lr <= 0) throw SpecError("learning rate must be positive");
  if (cfg.batch_size < 0) throw SpecError("batch size must be >= 0");

  const int n = static_cast<int>(data.size());
  const int batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
  Rng rng(cfg.seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  const std::vector<Tensor*> params = model.parameters();
  std::vector<EpochStats> history;
  history.reserve(static_cast<std::size_t>(std::max(cfg.epochs, 0)));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
    }

    double loss_sum = 0.0;
    for (int start = 0; start < n; start += batch) {
      const int stop = std::min(start + batch, n);
      const std::vector<int> rows(order.begin() + start, order.begin() + stop);

      model.zero_grad();
      Tape tape;
      const VarId x = make_input(tape, data.batch_features(rows));
      const VarId logits = model.forward(tape, x);
      const VarId loss = softmax_cross_entropy(tape, logits, data.batch_labels(rows));
      tape.backward(loss);
      sgd_step(params, static_cast<float>(cfg.lr));

      loss_sum += static_cast<double>(tape.value(loss).data[0]) * (stop - start);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / n;
    stats.accuracy = evaluate_accuracy(model, data);
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return history;
}

}  // namespace gw
