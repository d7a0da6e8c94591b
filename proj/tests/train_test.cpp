/**
 * Copyright 2026 The xgbd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"
#include "xgbd/attack.hpp"
#include "xgbd/metrics.hpp"
#include "xgbd/train.hpp"

namespace xgbd {
namespace {

// Triangle with a tail (label 1) against a path (label 0), same node counts.
Dataset motif_dataset() {
  Dataset ds;
  ds.name = "motif";
  ds.num_classes = 2;
  ds.feature_dim = 1;
  for (int n = 4; n <= 8; ++n) {
    std::vector<Edge> tri{{0, 1}, {1, 2}, {0, 2}};
    for (int v = 3; v < n; ++v) tri.emplace_back(v - 1, v);
    ds.graphs.emplace_back(n, tri, Matrix::Ones(n, 1), 1);
    ds.graphs.push_back(testing::path_graph(n, 1, 0));
  }
  return ds;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

TEST(TrainStandard, FitsSeparableMotifs) {
  const Dataset ds = motif_dataset();
  ModelConfig cfg;
  cfg.seed = 1;
  const TrainResult r = train_standard(ds, cfg);
  ASSERT_EQ(r.loss_trace.size(), 100u);
  EXPECT_LT(mean_std(r.final_losses()).mean, 0.1);
  for (const auto& g : ds.graphs) EXPECT_EQ(predict(r.params, g), g.label());
}

TEST(TrainStandard, ZeroEpochsKeepsInit) {
  const Dataset ds = motif_dataset();
  ModelConfig cfg;
  cfg.epochs = 0;
  const TrainResult r = train_standard(ds, cfg);
  EXPECT_TRUE(r.loss_trace.empty());
  EXPECT_EQ(r.params, init_params(cfg, ds.feature_dim));
}

TEST(TrainStandard, Deterministic) {
  const Dataset ds = motif_dataset();
  ModelConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 4;
  const TrainResult a = train_standard(ds, cfg);
  const TrainResult b = train_standard(ds, cfg);
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  cfg.seed = 9;
  EXPECT_NE(train_standard(ds, cfg).params.flatten(), a.params.flatten());
}

TEST(TrainStandard, EmptyDatasetRejected) {
  Dataset ds;
  ds.feature_dim = 1;
  ds.num_classes = 2;
  EXPECT_THROW(train_standard(ds, ModelConfig{}), ConfigError);
}

TEST(TrainStandard, SgdStepIsMeanGradientDescent) {
  const Dataset ds = motif_dataset();
  ModelConfig cfg;
  cfg.optimizer = Optimizer::sgd;
  cfg.epochs = 1;
  cfg.batch_size = ds.size();
  cfg.hidden_dim = 6;
  const GinParams init = init_params(cfg, 1);
  GinParams expect = init;
  GinParams mean = init.zeros_like();
  for (const auto& g : ds.graphs) mean.add_scaled(gradients(init, g, g.label()), 1.0 / ds.size());
  expect.add_scaled(mean, -cfg.learning_rate);
  const auto got = train_standard(ds, cfg).params.flatten();
  const auto want = expect.flatten();
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(TrainStandard, LossTraceMatchesParams) {
  const Dataset ds = motif_dataset();
  ModelConfig cfg;
  cfg.epochs = 3;
  const TrainResult r = train_standard(ds, cfg);
  EXPECT_EQ(r.final_losses(), per_sample_losses(r.params, ds));
}

TEST(TrainTrap, SingleSampleSettlesAtGamma) {
  Dataset ds;
  ds.num_classes = 2;
  ds.feature_dim = 1;
  ds.graphs.push_back(testing::path_graph(5, 1, 1));
  ModelConfig cfg;
  cfg.epochs = 400;
  // mean readout starts unsaturated; see SaturatedSampleIsStationary
  cfg.readout = Readout::mean;
  const TrainResult r = train_trap(ds, cfg, 0.5);
  const double l = r.final_losses()[0];
  EXPECT_NEAR(l, 0.5, 1e-2);
  const auto g = gradients(r.params, ds.graphs[0], 1, LossSpec::trap(0.5)).flatten();
  double norm = 0.0;
  for (double v : g) norm += v * v;
  EXPECT_LT(std::sqrt(norm), 1e-2);
}

// A sample whose loss is driven to the clamp floor has no gradient left, so
// the trap cannot lift it back to gamma.
TEST(TrainTrap, SaturatedSampleIsStationary) {
  Dataset ds;
  ds.num_classes = 2;
  ds.feature_dim = 1;
  ds.graphs.push_back(testing::path_graph(5, 1, 1));
  ModelConfig cfg;
  cfg.epochs = 100;
  const TrainResult r = train_trap(ds, cfg, 0.5);
  EXPECT_LT(r.final_losses()[0], 1e-6);
  for (double v : gradients(r.params, ds.graphs[0], 1, LossSpec::trap(0.5)).flatten()) {
    EXPECT_LT(std::abs(v), 1e-6);
  }
}

TEST(TrainTrap, RejectsNonPositiveGamma) {
  EXPECT_THROW(train_trap(motif_dataset(), ModelConfig{}, 0.0), ConfigError);
}

TEST(TrainTrap, Deterministic) {
  const Dataset ds = motif_dataset();
  ModelConfig cfg;
  cfg.epochs = 10;
  EXPECT_EQ(train_trap(ds, cfg, 0.5).loss_trace, train_trap(ds, cfg, 0.5).loss_trace);
}

TEST(TrainTrap, BackdoorSamplesSitBelowCleanOnPoisonedMutag) {
  AttackConfig attack;
  attack.seed = 1;
  const PoisonedDataset pd = inject_badgraph(testing::mutag(), attack);
  ModelConfig cfg;
  cfg.num_classes = 2;
  cfg.seed = 1;
  const auto losses = train_trap(pd.dataset, cfg, 0.5).final_losses();
  const auto truth = pd.truth();
  std::vector<double> clean, poisoned;
  for (std::size_t i = 0; i < losses.size(); ++i) (truth[i] ? poisoned : clean).push_back(losses[i]);
  EXPECT_GT(median(clean), median(poisoned));
}

TEST(TrainLga, Runs) {
  const Dataset ds = motif_dataset();
  ModelConfig cfg;
  cfg.epochs = 5;
  EXPECT_EQ(train_lga(ds, cfg, 0.5).loss_trace.size(), 5u);
  EXPECT_THROW(train_lga(ds, cfg, -1.0), ConfigError);
}

}  // namespace
}  // namespace xgbd
