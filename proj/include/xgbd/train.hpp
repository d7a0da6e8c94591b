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
#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "xgbd/error.hpp"
#include "xgbd/gin.hpp"
#include "xgbd/graph.hpp"
#include "xgbd/random.hpp"

namespace xgbd {

struct TrainResult {
  GinParams params;
  /// loss_trace[e][i]: cross-entropy of sample i evaluated after epoch e.
  std::vector<std::vector<double>> loss_trace;

  [[nodiscard]] const std::vector<double>& final_losses() const { return loss_trace.back(); }
};

/// Per-sample cross-entropy of every graph under `params`, labels taken from
/// the graphs themselves.
inline std::vector<double> per_sample_losses(const GinParams& params, const Dataset& ds) {
  std::vector<double> out;
  out.reserve(ds.graphs.size());
  for (const auto& g : ds.graphs) out.push_back(sample_loss(params, g, g.label()));
  return out;
}

/// First-order update rule applied to a batch-mean gradient.
class OptimizerState {
 public:
  OptimizerState(const ModelConfig& cfg, const GinParams& shape)
      : kind_(cfg.optimizer), lr_(cfg.learning_rate) {
    if (kind_ == Optimizer::adam) {
      m_.assign(shape.num_parameters(), 0.0);
      v_.assign(shape.num_parameters(), 0.0);
    }
  }

  void step(GinParams& params, const GinParams& grad) {
    if (kind_ == Optimizer::sgd) {
      params.add_scaled(grad, -lr_);
      return;
    }
    ++t_;
    const auto g = grad.flatten();
    auto p = params.flatten();
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
    params.assign(p);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Optimizer kind_;
  double lr_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

/// Mini-batch training on the mean of `loss` over the dataset.
///
/// Each epoch draws a fresh seeded permutation, splits it into batches of
/// `cfg.batch_size`, and takes one step per batch along the mean per-sample
/// gradient (plain descent or Adam). Per-sample gradients are accumulated in
/// permutation order.
inline TrainResult train(const Dataset& ds, const ModelConfig& cfg, const LossSpec& loss,
                         const GinParams& init) {
  cfg.validate();
  if (ds.graphs.empty()) throw ConfigError("cannot train on an empty dataset");
  TrainResult out;
  out.params = init;
  OptimizerState opt(cfg, init);
  Rng rng = make_rng(derive_seed(cfg.seed, 0x7a41));
  std::vector<int> order(ds.graphs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      GinParams batch = out.params.zeros_like();
      const LossSpec per_sample = loss.batch_mean ? LossSpec::standard() : loss;
      double batch_ce = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const Graph& g = ds.graphs[order[k]];
        auto r = loss_and_gradients(out.params, g, g.label(), per_sample);
        batch.add_scaled(r.gradient, 1.0);
        batch_ce += r.cross_entropy;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      // chain rule through the batch mean: d f(mean l) = f'(mean l) * mean dl
      batch.scale(loss.batch_mean ? inv * loss.outer_derivative(batch_ce * inv) : inv);
      opt.step(out.params, batch);
    }
    out.loss_trace.push_back(per_sample_losses(out.params, ds));
  }
  return out;
}

inline TrainResult train(const Dataset& ds, const ModelConfig& cfg, const LossSpec& loss) {
  if (ds.graphs.empty()) throw ConfigError("cannot train on an empty dataset");
  return train(ds, cfg, loss, init_params(cfg, ds.feature_dim));
}

/// Cross-entropy training.
inline TrainResult train_standard(const Dataset& ds, const ModelConfig& cfg) {
  return train(ds, cfg, LossSpec::standard());
}

/// Training on (l - gamma)^2, which holds most samples' loss near gamma.
inline TrainResult train_trap(const Dataset& ds, const ModelConfig& cfg, double gamma,
                              bool batch_mean = false) {
  if (!(gamma > 0.0)) throw ConfigError("trap threshold gamma must be > 0");
  return train(ds, cfg, LossSpec::trap(gamma, batch_mean));
}

/// Training on the local gradient ascent objective (l - gamma) * l.
inline TrainResult train_lga(const Dataset& ds, const ModelConfig& cfg, double gamma) {
  if (gamma < 0.0) throw ConfigError("LGA threshold gamma must be >= 0");
  return train(ds, cfg, LossSpec::lga(gamma));
}

/// Index of the most probable class.
inline int predict(const GinParams& params, const Graph& g) {
  Eigen::Index best = 0;
  forward(params, g).maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace xgbd
