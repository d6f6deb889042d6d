// Acceptance gate: nine end-to-end properties, one verdict line each on
// stdout so the run can be scanned at a glance.

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "graphweave/graphweave.hpp"
#include "oracles.hpp"

namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-3;       // max relative gradient error
constexpr double kLogitAbsTol = 1e-6;      // ffn/dan logit agreement
constexpr double kQuantileSlack = 2.0;     // mask entries around the 0.512 target
constexpr double kXorAccuracy = 0.95;
constexpr double kBlobsAccuracy = 0.90;
constexpr double kRoundtripBudgetSec = 30.0;
constexpr double kTrainBudgetSec = 10.0;

template <typename F>
void run_criterion(int id, const char* name, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    ADD_FAILURE() << "unexpected exception: " << e.what();
  }
  std::cout << "ACCEPTANCE " << id << " (" << name << "): "
            << (::testing::Test::HasFailure() ? "FAIL" : "PASS") << std::endl;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t param_count(gw::Model& m) {
  std::size_t n = 0;
  for (const gw::Tensor* t : m.parameters()) n += t->size();
  return n;
}

gw::Tensor random_batch(gw::Rng& rng, int batch, int features) {
  std::vector<float> vals(static_cast<std::size_t>(batch) * features);
  for (auto& v : vals) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return gw::Tensor::from_values({batch, features}, vals);
}

TEST(Acceptance, C1RoundTripIdentity) {
  run_criterion(1, "round-trip identity", [] {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      gw::Rng meta(seed);
      const int n = 5 + static_cast<int>(meta.next_below(196));  // 5..200
      const int max_layers = std::min(8, n);
      const int layers = 2 + static_cast<int>(meta.next_below(
                                 static_cast<std::uint64_t>(max_layers - 1)));
      const double p = 0.1 + 0.9 * meta.next_double();
      const auto lg = gw::generate_random_layered_dag(n, layers, p, seed);

      const gw::RoundtripResult r = gw::roundtrip_check(lg, 3, 2);
      EXPECT_TRUE(r.ok) << "seed " << seed << ": " << r.missing.size() << " missing, "
                        << r.extra.size() << " extra";
      EXPECT_EQ(r.hidden_count, n);
    }
    EXPECT_LT(seconds_since(t0), kRoundtripBudgetSec);
  });
}

TEST(Acceptance, C2SkipBlockCount) {
  run_criterion(2, "skip-block count", [] {
    for (int l = 3; l <= 10; ++l) {
      const auto lg = gw::generate_random_layered_dag(2 * l, l, 1.0, 0);
      ASSERT_EQ(lg.layer_count(), l);
      gw::MaskedDeepDAN dan(2, 2, lg);

      const long hidden_blocks = static_cast<long>(dan.blocks().size());
      EXPECT_EQ(hidden_blocks, static_cast<long>(l) * (l - 1) / 2) << "l = " << l;

      // Blocks feeding hidden layers (input block included, output excluded).
      const long feeding = static_cast<long>(dan.maskable_layers().size()) - 1;
      EXPECT_EQ(feeding, l + (static_cast<long>(l) * l - 3 * l + 2) / 2) << "l = " << l;
    }
  });
}

TEST(Acceptance, C3GradientCheck) {
  run_criterion(3, "gradient check", [] {
    gw::Rng meta(303);
    for (int t = 0; t < 20; ++t) {
      const int in = 2 + static_cast<int>(meta.next_below(3));
      const int out = 2 + static_cast<int>(meta.next_below(2));
      std::unique_ptr<gw::Model> model;
      if (t % 2 == 0) {
        std::vector<int> hidden;
        const int depth = 1 + static_cast<int>(meta.next_below(2));
        for (int d = 0; d < depth; ++d)
          hidden.push_back(2 + static_cast<int>(meta.next_below(5)));
        model = std::make_unique<gw::MaskedDeepFFN>(in, out, hidden, gw::Activation::tanh,
                                                    meta.next_u64());
      } else {
        const int n = 6 + static_cast<int>(meta.next_below(9));
        const int layers = 2 + static_cast<int>(meta.next_below(3));
        const auto lg = gw::generate_random_layered_dag(
            n, layers, 0.3 + 0.6 * meta.next_double(), meta.next_u64());
        model = std::make_unique<gw::MaskedDeepDAN>(in, out, lg, gw::Activation::tanh,
                                                    meta.next_u64());
      }
      ASSERT_LE(param_count(*model), 1000u);

      const gw::Tensor x = random_batch(meta, 2, in);
      std::vector<int> labels;
      for (int b = 0; b < 2; ++b) labels.push_back(static_cast<int>(meta.next_below(out)));
      EXPECT_LE(oracle::max_gradient_error(*model, x, labels), kGradRelTol)
          << "instance " << t;
    }
  });
}

TEST(Acceptance, C4MaskSemantics) {
  run_criterion(4, "mask semantics", [] {
    // (a) masked weights are inert; (b) their gradients are zero.
    gw::Rng rng(404);
    for (int t = 0; t < 1000; ++t) {
      const int out = 1 + static_cast<int>(rng.next_below(4));
      const int in = 1 + static_cast<int>(rng.next_below(4));
      const int batch = 1 + static_cast<int>(rng.next_below(3));
      gw::MaskedLinear layer("t", out, in);
      for (auto& w : layer.weight.data) w = static_cast<float>(rng.uniform(-1.0, 1.0));
      for (auto& b : layer.bias.data) b = static_cast<float>(rng.uniform(-1.0, 1.0));
      bool any_masked = false;
      for (auto& m : layer.mask.data) {
        m = rng.next_double() < 0.4 ? 0.0f : 1.0f;
        any_masked |= (m == 0.0f);
      }
      if (!any_masked) layer.mask.data[0] = 0.0f;
      const gw::Tensor x = random_batch(rng, batch, in);

      gw::Tape tape;
      const gw::VarId y = gw::masked_linear_forward(tape, layer, gw::make_input(tape, x));
      const std::vector<float> y_vals = tape.value(y).data;
      tape.backward(gw::reduce_sum(tape, y));
      for (std::size_t i = 0; i < layer.mask.data.size(); ++i)
        if (layer.mask.data[i] == 0.0f) EXPECT_EQ(layer.weight.grad[i], 0.0f);

      for (std::size_t i = 0; i < layer.mask.data.size(); ++i)
        if (layer.mask.data[i] == 0.0f)
          layer.weight.data[i] = static_cast<float>(rng.uniform(-999.0, 999.0));
      gw::Tape tape2;
      const gw::VarId y2 = gw::masked_linear_forward(tape2, layer, gw::make_input(tape2, x));
      EXPECT_EQ(tape2.value(y2).data, y_vals) << "trial " << t;
    }

    // (c) thresholding is monotone in theta; (d) apply_mask is idempotent.
    for (std::uint64_t t = 0; t < 1000; ++t) {
      gw::MaskedDeepFFN a(2, 2, {3}, gw::Activation::relu, t);
      gw::MaskedDeepFFN b(2, 2, {3}, gw::Activation::relu, t);
      gw::Rng r(t ^ 0xabcdull);
      double t1 = 0.6 * r.next_double();
      double t2 = 0.6 * r.next_double();
      if (t1 > t2) std::swap(t1, t2);
      gw::recompute_mask(a, static_cast<float>(t1));
      gw::recompute_mask(b, static_cast<float>(t2));
      const auto la = a.maskable_layers();
      const auto lb = b.maskable_layers();
      for (std::size_t i = 0; i < la.size(); ++i)
        for (std::size_t k = 0; k < la[i]->mask.data.size(); ++k)
          EXPECT_LE(lb[i]->mask.data[k], la[i]->mask.data[k]);  // kept(t2) subset kept(t1)

      gw::apply_mask(b);
      std::vector<float> once;
      for (const gw::MaskedLinear* l : lb) {
        once.insert(once.end(), l->weight.data.begin(), l->weight.data.end());
      }
      gw::apply_mask(b);
      std::vector<float> twice;
      for (const gw::MaskedLinear* l : lb) {
        twice.insert(twice.end(), l->weight.data.begin(), l->weight.data.end());
      }
      EXPECT_EQ(once, twice);
    }
  });
}

TEST(Acceptance, C5PruningQuantiles) {
  run_criterion(5, "pruning quantiles", [] {
    gw::MaskedDeepFFN model(10, 10, {10}, gw::Activation::relu, 50);

    gw::Dataset ds;
    ds.num_features = 10;
    ds.num_classes = 10;
    gw::Rng r(55);
    for (int i = 0; i < 40; ++i) {
      for (int f = 0; f < 10; ++f)
        ds.features.push_back(static_cast<float>(r.uniform(-1.0, 1.0)));
      ds.labels.push_back(static_cast<int>(r.next_below(10)));
    }

    std::vector<std::vector<float>> before;
    for (const gw::Tensor* t : model.parameters()) before.push_back(t->data);

    gw::ImpOptions opts;
    opts.rounds = 3;
    opts.rate = 0.2;
    opts.train_epochs = 1;
    opts.rewind = true;
    opts.lr = 0.1;
    opts.seed = 5;
    const gw::TicketState ticket = gw::iterative_magnitude_prune(model, ds, opts);

    // Each 100-entry mask should land within +-2 of 0.512 * 100 survivors.
    for (const gw::MaskedLinear* layer : model.maskable_layers()) {
      ASSERT_EQ(layer->mask_total(), 100u);
      const double kept = static_cast<double>(layer->mask_kept());
      EXPECT_LE(std::fabs(kept - 0.512 * 100.0), kQuantileSlack) << layer->name;
    }

    // Rewind restored every parameter to the entry snapshot.
    const auto params = model.parameters();
    ASSERT_EQ(params.size(), before.size());
    for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(params[i]->data, before[i]);
    ASSERT_EQ(ticket.snapshot.size(), before.size());
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(ticket.snapshot[i].data, before[i]);
  });
}

TEST(Acceptance, C6Trainability) {
  run_criterion(6, "trainability", [] {
    {
      const auto t0 = std::chrono::steady_clock::now();
      const auto ds = gw::synthesize(gw::SyntheticKind::Xor, 64, 1, 0.0);
      gw::MaskedDeepFFN model(2, 2, {8}, gw::Activation::relu, 1);
      gw::TrainConfig tc;
      tc.epochs = 500;
      tc.lr = 0.1;
      tc.seed = 1;
      double best = 0.0;
      gw::train(model, ds, tc, [&](const gw::EpochStats& s) { best = std::max(best, s.accuracy); });
      EXPECT_GE(best, kXorAccuracy);
      EXPECT_LT(seconds_since(t0), kTrainBudgetSec);
    }
    {
      const auto t0 = std::chrono::steady_clock::now();
      const auto ds = gw::synthesize(gw::SyntheticKind::Blobs, 150, 2);
      const auto lg = gw::generate_random_layered_dag(30, 3, 0.5, 6);
      gw::MaskedDeepDAN model(2, 3, lg, gw::Activation::relu, 6);
      gw::TrainConfig tc;
      tc.epochs = 300;
      tc.lr = 0.1;
      tc.seed = 2;
      double best = 0.0;
      gw::train(model, ds, tc, [&](const gw::EpochStats& s) { best = std::max(best, s.accuracy); });
      EXPECT_GE(best, kBlobsAccuracy);
      EXPECT_LT(seconds_since(t0), kTrainBudgetSec);
    }
  });
}

TEST(Acceptance, C7FfnDanEquivalence) {
  run_criterion(7, "ffn-dan equivalence", [] {
    const std::vector<int> sizes = {4, 5, 3};
    gw::MaskedDeepFFN ffn(3, 2, sizes, gw::Activation::tanh, 70);

    // Chain of complete bipartite blocks with the same layer sizes.
    gw::Dag g;
    int base = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      for (int u = 0; u < sizes[l]; ++u)
        for (int v = 0; v < sizes[l + 1]; ++v)
          g.add_edge(base + u, base + sizes[l] + v);
      base += sizes[l];
    }
    gw::MaskedDeepDAN dan(3, 2, gw::LayeredDag(g), gw::Activation::tanh, 0);

    const auto src = ffn.maskable_layers();
    const auto dst = dan.maskable_layers();
    ASSERT_EQ(src.size(), dst.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      ASSERT_TRUE(src[i]->weight.same_shape(dst[i]->weight))
          << src[i]->name << " vs " << dst[i]->name;
      dst[i]->weight.data = src[i]->weight.data;
      dst[i]->bias.data = src[i]->bias.data;
    }

    gw::Rng rng(71);
    const gw::Tensor x = random_batch(rng, 100, 3);
    const gw::Tensor a = ffn.forward_values(x);
    const gw::Tensor b = dan.forward_values(x);
    ASSERT_TRUE(a.same_shape(b));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
      worst = std::max(worst, std::fabs(static_cast<double>(a.data[i]) - b.data[i]));
    EXPECT_LE(worst, kLogitAbsTol);
  });
}

TEST(Acceptance, C8FormatRoundTrips) {
  run_criterion(8, "format round-trips", [] {
    const std::string dir = testing::TempDir();
    gw::Rng rng(808);
    const gw::Activation acts[3] = {gw::Activation::relu, gw::Activation::tanh,
                                    gw::Activation::identity};

    // 60 model instances.
    for (int t = 0; t < 60; ++t) {
      const int in = 1 + static_cast<int>(rng.next_below(4));
      const int out = 1 + static_cast<int>(rng.next_below(4));
      std::unique_ptr<gw::Model> model;
      if (t % 10 == 9) {
        const auto lg = gw::generate_random_layered_dag(5, 2, 0.8, rng.next_u64());
        model = std::make_unique<gw::DeepCellDAN>(out + 1, 2,
                                                  gw::linear_mixer_constructor(rng.next_u64()),
                                                  lg, rng.next_u64(), "linear_mixer");
      } else if (t % 2 == 0) {
        std::vector<int> hidden;
        for (std::uint64_t d = rng.next_below(3); d > 0; --d)
          hidden.push_back(1 + static_cast<int>(rng.next_below(5)));
        model = std::make_unique<gw::MaskedDeepFFN>(in, out, hidden, acts[t % 3],
                                                    rng.next_u64());
      } else {
        const auto lg = gw::generate_random_layered_dag(
            4 + static_cast<int>(rng.next_below(12)), 2 + static_cast<int>(rng.next_below(2)),
            0.4 + 0.5 * rng.next_double(), rng.next_u64());
        model = std::make_unique<gw::MaskedDeepDAN>(in, out, lg, acts[t % 3], rng.next_u64());
      }
      if (model->kind() != gw::ModelKind::cell && rng.next_double() < 0.5)
        gw::recompute_mask(*model, 0.15f);

      const std::string path = dir + "gwacc_model" + std::to_string(t) + ".ckpt";
      gw::save_model(path, *model);
      const auto loaded = gw::load_model(path);
      const auto la = gw::detail::checkpoint_layers(*model);
      const auto lb = gw::detail::checkpoint_layers(*loaded);
      ASSERT_EQ(la.size(), lb.size());
      for (std::size_t i = 0; i < la.size(); ++i) {
        EXPECT_EQ(la[i].second->weight.data, lb[i].second->weight.data);
        EXPECT_EQ(la[i].second->bias.data, lb[i].second->bias.data);
        EXPECT_EQ(la[i].second->mask.data, lb[i].second->mask.data);
      }
      if (model->kind() == gw::ModelKind::cell) {
        const gw::Tensor x(std::vector<int>{1, 2, 3}, 0.25f);
        EXPECT_EQ(model->forward_values(x).data, loaded->forward_values(x).data);
      } else {
        const gw::Tensor x = random_batch(rng, 2, in);
        EXPECT_EQ(model->forward_values(x).data, loaded->forward_values(x).data);
      }
    }

    // 40 graph instances.
    for (int t = 0; t < 40; ++t) {
      const auto lg = gw::generate_random_layered_dag(
          5 + static_cast<int>(rng.next_below(40)), 2 + static_cast<int>(rng.next_below(4)),
          0.2 + 0.7 * rng.next_double(), rng.next_u64());
      const std::string path = dir + "gwacc_graph" + std::to_string(t) + ".json";
      gw::save_graph(path, lg);
      const gw::LayeredDag back = gw::load_graph(path);
      EXPECT_EQ(back.dag().edges(), lg.dag().edges());
      EXPECT_EQ(back.layer_count(), lg.layer_count());
      for (const int v : lg.dag().vertices()) EXPECT_EQ(back.layer_of(v), lg.layer_of(v));
    }

    // Corrupted files are rejected with the declared errors.
    gw::MaskedDeepFFN small(2, 2, {3});
    const std::string path = dir + "gwacc_corrupt.ckpt";
    gw::save_model(path, small);
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    const auto rewrite = [&](const std::string& mutated) {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(mutated.data(), static_cast<std::streamsize>(mutated.size()));
    };
    std::string bad_magic = bytes;
    bad_magic[0] = 'Z';
    rewrite(bad_magic);
    EXPECT_THROW(gw::load_model(path), gw::FormatError);
    std::string bad_crc = bytes;
    bad_crc[bytes.size() - 2] = static_cast<char>(bad_crc[bytes.size() - 2] ^ 0x11);
    rewrite(bad_crc);
    EXPECT_THROW(gw::load_model(path), gw::FormatError);
    rewrite(bytes.substr(0, bytes.size() / 2));
    EXPECT_THROW(gw::load_model(path), gw::TruncationError);
    rewrite(bytes.substr(0, 6));
    EXPECT_THROW(gw::load_model(path), gw::TruncationError);
  });
}

TEST(Acceptance, C9DensityBookkeeping) {
  run_criterion(9, "density bookkeeping", [] {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto lg = gw::generate_random_layered_dag(
          10 + static_cast<int>(seed) * 3, 2 + static_cast<int>(seed % 4), 0.35, seed);
      gw::MaskedDeepDAN dan(3, 2, lg);
      const oracle::BlockCounts counts = oracle::dan_hidden_block_counts(dan.structure());

      long kept = 0;
      long total = 0;
      for (const auto& [key, block] : dan.blocks()) {
        kept += static_cast<long>(block.mask_kept());
        total += static_cast<long>(block.mask_total());
      }
      EXPECT_EQ(static_cast<long>(dan.blocks().size()), counts.blocks) << "seed " << seed;
      EXPECT_EQ(kept, counts.edges) << "seed " << seed;
      EXPECT_EQ(total, counts.entries) << "seed " << seed;
      if (total > 0)
        EXPECT_DOUBLE_EQ(static_cast<double>(kept) / static_cast<double>(total),
                         static_cast<double>(counts.edges) / static_cast<double>(counts.entries));
    }
  });
}

}  // namespace
