#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "graphweave/data.hpp"
#include "graphweave/models.hpp"
#include "graphweave/train.hpp"

namespace {

std::vector<float> snapshot(gw::Model& m) {
  std::vector<float> all;
  for (const gw::Tensor* p : m.parameters()) all.insert(all.end(), p->data.begin(), p->data.end());
  return all;
}

TEST(Train, LearnsXor) {
  const auto data = gw::synthesize(gw::SyntheticKind::Xor, 64, 1, 0.05);
  gw::MaskedDeepFFN model(2, 2, {8}, gw::Activation::relu, 1);
  gw::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.lr = 0.1;
  cfg.seed = 1;
  const auto history = gw::train(model, data, cfg);
  ASSERT_EQ(history.size(), 200u);
  EXPECT_GE(history.back().accuracy, 0.95);
  EXPECT_LT(history.back().loss, history.front().loss);
}

TEST(Train, SeparatesBlobs) {
  const auto data = gw::synthesize(gw::SyntheticKind::Blobs, 60, 2);
  gw::MaskedDeepFFN model(2, 3, {6}, gw::Activation::tanh, 3);
  gw::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.lr = 0.1;
  cfg.seed = 2;
  const auto history = gw::train(model, data, cfg);
  EXPECT_GE(history.back().accuracy, 0.9);
  EXPECT_LT(history.back().loss, history.front().loss);
}

TEST(Train, DeterministicForFixedSeeds) {
  const auto data = gw::synthesize(gw::SyntheticKind::Blobs, 30, 5);
  gw::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.lr = 0.05;
  cfg.batch_size = 8;
  cfg.seed = 9;

  gw::MaskedDeepFFN a(2, 3, {5}, gw::Activation::relu, 4);
  gw::MaskedDeepFFN b(2, 3, {5}, gw::Activation::relu, 4);
  const auto ha = gw::train(a, data, cfg);
  const auto hb = gw::train(b, data, cfg);

  EXPECT_EQ(snapshot(a), snapshot(b));  // bit-exact
  ASSERT_EQ(ha.size(), hb.size());
  for (std::size_t i = 0; i < ha.size(); ++i) {
    EXPECT_EQ(ha[i].loss, hb[i].loss);
    EXPECT_EQ(ha[i].accuracy, hb[i].accuracy);
  }

  gw::MaskedDeepFFN c(2, 3, {5}, gw::Activation::relu, 4);
  gw::TrainConfig other = cfg;
  other.seed = 10;
  gw::train(c, data, other);
  EXPECT_NE(snapshot(a), snapshot(c));  // shuffle order matters
}

TEST(Train, Validation) {
  const auto data = gw::synthesize(gw::SyntheticKind::Xor, 8, 0);
  gw::MaskedDeepFFN model(2, 2, {3});
  gw::TrainConfig cfg;

  gw::Dataset empty;
  EXPECT_THROW(gw::train(model, empty, cfg), gw::DataError);
  EXPECT_THROW(gw::evaluate_accuracy(model, empty), gw::DataError);

  cfg.lr = 0.0;
  EXPECT_THROW(gw::train(model, data, cfg), gw::SpecError);
  cfg.lr = 0.1;
  cfg.batch_size = -1;
  EXPECT_THROW(gw::train(model, data, cfg), gw::SpecError);
}

TEST(Train, BatchSizesAndCallback) {
  const auto data = gw::synthesize(gw::SyntheticKind::Xor, 10, 3);
  for (const int batch : {1, 3, 0, 32}) {
    gw::MaskedDeepFFN model(2, 2, {4}, gw::Activation::relu, 7);
    gw::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = batch;
    cfg.seed = 3;
    std::vector<int> seen;
    const auto history =
        gw::train(model, data, cfg, [&seen](const gw::EpochStats& s) { seen.push_back(s.epoch); });
    ASSERT_EQ(history.size(), 3u) << "batch " << batch;
    EXPECT_EQ(seen, (std::vector<int>{0, 1, 2}));
    for (const auto& s : history) EXPECT_TRUE(std::isfinite(s.loss));
  }
}

TEST(Train, MaskedWeightsSurviveTrainingUntouched) {
  const auto data = gw::synthesize(gw::SyntheticKind::Xor, 16, 4);
  gw::MaskedDeepFFN model(2, 2, {4}, gw::Activation::relu, 5);

  // Mask a fixed pattern and remember the frozen weight values.
  gw::MaskedLinear& fc0 = *model.maskable_layers()[0];
  fc0.mask.at(0, 0) = 0.0f;
  fc0.mask.at(2, 1) = 0.0f;
  const float w00 = fc0.weight.at(0, 0);
  const float w21 = fc0.weight.at(2, 1);
  const std::vector<float> mask_before = fc0.mask.data;
  const std::vector<float> params_before = snapshot(model);

  gw::TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 6;
  gw::train(model, data, cfg);

  EXPECT_EQ(fc0.weight.at(0, 0), w00);  // no gradient through a dead edge
  EXPECT_EQ(fc0.weight.at(2, 1), w21);
  EXPECT_EQ(fc0.mask.data, mask_before);
  EXPECT_NE(snapshot(model), params_before);  // live parameters did move
}

TEST(EvaluateAccuracy, ArgmaxAgainstLabels) {
  gw::MaskedDeepFFN model(2, 2, {});
  gw::MaskedLinear& out = *model.maskable_layers()[0];
  out.weight = gw::Tensor::from_values({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
  out.bias = gw::Tensor::from_values({2}, {0.0f, 0.0f});

  gw::Dataset data;
  data.num_features = 2;
  data.num_classes = 2;
  data.features = {0.9f, 0.1f, 0.2f, 0.8f, 0.9f, 0.0f};
  data.labels = {0, 1, 1};
  EXPECT_NEAR(gw::evaluate_accuracy(model, data), 2.0 / 3.0, 1e-12);
}

}  // namespace
