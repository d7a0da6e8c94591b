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

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "xgbd/explain.hpp"
#include "xgbd/gin.hpp"
#include "xgbd/graph.hpp"
#include "xgbd/metrics.hpp"
#include "xgbd/random.hpp"

// Numerical and combinatorial oracles run by `xgbd selftest`.

namespace xgbd::checks {

struct Instance {
  GinParams model;
  Graph graph;
  int label = 0;
  std::vector<double> mask_logits;  // one per edge
};

/// A random connected-ish graph with Gaussian features and a model with
/// non-zero biases.
inline Instance random_instance(std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const int n = 3 + static_cast<int>(uniform_index(rng, 8));
  Graph shape = erdos_renyi(n, 0.45, derive_seed(seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  const int dim = 4;
  Matrix x(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) x(i, k) = normal(rng);
  }
  ModelConfig cfg;
  cfg.num_layers = 2 + static_cast<int>(uniform_index(rng, 2));
  cfg.hidden_dim = 8;
  cfg.num_classes = 2 + static_cast<int>(uniform_index(rng, 2));
  cfg.readout = bernoulli(rng, 0.5) ? Readout::sum : Readout::mean;
  cfg.seed = derive_seed(seed, 2);
  Instance inst;
  inst.model = init_params(cfg, dim);
  for (auto& layer : inst.model.layers) {
    for (Eigen::Index k = 0; k < layer.b1.size(); ++k) layer.b1(k) = 0.1 * normal(rng);
    for (Eigen::Index k = 0; k < layer.b2.size(); ++k) layer.b2(k) = 0.1 * normal(rng);
  }
  for (Eigen::Index k = 0; k < inst.model.head_b.size(); ++k) inst.model.head_b(k) = 0.1 * normal(rng);
  inst.graph = Graph(n, shape.edges(), x);
  inst.label = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.num_classes)));
  for (std::size_t e = 0; e < shape.edges().size(); ++e) inst.mask_logits.push_back(normal(rng));
  return inst;
}

/// Smallest |pre-activation| over every ReLU input; finite differences are
/// invalid when a step can cross zero.
inline double min_relu_margin(const ForwardCache& c) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& z : c.z1) m = std::min(m, z.cwiseAbs().minCoeff());
  for (const auto& z : c.z2) m = std::min(m, z.cwiseAbs().minCoeff());
  return m;
}

/// ||a - b|| / (||a|| + ||b||), with a floor on the denominator.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-8);
}

enum class GradientKind { standard, trap, edge_mask };

inline std::string to_string(GradientKind k) {
  switch (k) {
    case GradientKind::trap: return "trap";
    case GradientKind::edge_mask: return "edge_mask";
    case GradientKind::standard: break;
  }
  return "standard";
}

struct GradientCheck {
  double max_relative_error = 0.0;
  int checked = 0;
  int skipped = 0;
};

inline constexpr double kFdStep = 1e-5;
inline constexpr double kKinkMargin = 1e-3;

/// Central differences against the analytic gradient on `n` random instances.
inline GradientCheck check_gradients(GradientKind kind, int n, std::uint64_t seed) {
  GradientCheck out;
  for (int t = 0; out.checked < n; ++t) {
    if (t > 20 * n) throw std::runtime_error("too many degenerate gradient instances");
    Instance inst = random_instance(derive_seed(seed, static_cast<std::uint64_t>(t)));
    if (kind == GradientKind::edge_mask && inst.graph.num_edges() == 0) {
      ++out.skipped;
      continue;
    }
    std::vector<double> mask;
    for (double l : inst.mask_logits) mask.push_back(sigmoid(l));
    const ForwardCache c = forward_cached(inst.model, inst.graph,
                                          kind == GradientKind::edge_mask ? mask : std::vector<double>{});
    const double ce_raw = -std::log(c.probs(inst.label));
    if (min_relu_margin(c) < kKinkMargin || !(ce_raw > 1e-9 && ce_raw < 20.0)) {
      ++out.skipped;
      continue;
    }
    std::vector<double> analytic, numeric;
    if (kind == GradientKind::edge_mask) {
      const double lambda = 0.01;
      analytic = mask_objective(inst.model, inst.graph, inst.label, inst.mask_logits, lambda).gradient;
      for (std::size_t e = 0; e < inst.mask_logits.size(); ++e) {
        auto plus = inst.mask_logits, minus = inst.mask_logits;
        plus[e] += kFdStep;
        minus[e] -= kFdStep;
        numeric.push_back((mask_objective(inst.model, inst.graph, inst.label, plus, lambda).value -
                           mask_objective(inst.model, inst.graph, inst.label, minus, lambda).value) /
                          (2.0 * kFdStep));
      }
    } else {
      const LossSpec loss = kind == GradientKind::trap ? LossSpec::trap(0.5) : LossSpec::standard();
      analytic = gradients(inst.model, inst.graph, inst.label, loss).flatten();
      const std::vector<double> theta = inst.model.flatten();
      GinParams probe = inst.model;
      auto objective = [&](const std::vector<double>& th) {
        probe.assign(th);
        return loss.value(sample_loss(probe, inst.graph, inst.label));
      };
      for (std::size_t i = 0; i < theta.size(); ++i) {
        auto plus = theta, minus = theta;
        plus[i] += kFdStep;
        minus[i] -= kFdStep;
        numeric.push_back((objective(plus) - objective(minus)) / (2.0 * kFdStep));
      }
    }
    out.max_relative_error = std::max(out.max_relative_error, relative_error(analytic, numeric));
    ++out.checked;
  }
  return out;
}

/// Fraction of poisoned-clean pairs where the poisoned score is higher, ties
/// counted one half.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& truth) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) throw ShapeError("pairwise_auc: need both classes");
  return wins / static_cast<double>(pairs);
}

/// Largest |roc_auc - pairwise_auc| over random fixtures of up to 100 samples
/// with deliberately coarse scores to force ties.
inline double check_auc(int fixtures, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  double worst = 0.0;
  for (int f = 0; f < fixtures; ++f) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 99));
    std::vector<double> scores(n);
    std::vector<bool> truth(n);
    const int levels = 1 + static_cast<int>(uniform_index(rng, 10));
    for (int i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(uniform_index(rng, static_cast<std::uint64_t>(levels)));
      truth[i] = bernoulli(rng, 0.3);
    }
    truth[0] = true;
    truth[1] = false;
    worst = std::max(worst, std::abs(roc_auc(scores, truth) - pairwise_auc(scores, truth)));
  }
  return worst;
}

/// Largest deviation of the empirical per-edge inclusion frequency from d.
inline double check_er_frequency(int n, double d, int seeds) {
  std::vector<int> counts(static_cast<std::size_t>(n * n), 0);
  for (int s = 0; s < seeds; ++s) {
    const Graph g = erdos_renyi(n, d, static_cast<std::uint64_t>(s));
    for (const Edge& e : g.edges()) ++counts[static_cast<std::size_t>(e.u * n + e.v)];
  }
  double worst = 0.0;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const double f = counts[static_cast<std::size_t>(u * n + v)] / static_cast<double>(seeds);
      worst = std::max(worst, std::abs(f - d));
    }
  }
  return worst;
}

struct ExplainerCheck {
  int graphs = 0;
  int within = 0;  // search score >= ratio * exhaustive score
  [[nodiscard]] double fraction() const { return graphs ? static_cast<double>(within) / graphs : 0.0; }
};

/// Fidelity of the MCTS answer against exhaustive enumeration on the largest
/// component of random ER graphs drawn with 4 to `max_nodes` nodes.
inline ExplainerCheck check_explainer(int graphs, int max_nodes, int rollouts, double ratio,
                                      std::uint64_t seed) {
  ExplainerCheck out;
  Rng rng = make_rng(seed);
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_dim = 16;
  cfg.num_classes = 2;
  const int dim = 3;
  ExplainerConfig ec;
  ec.mcts_rollouts = rollouts;
  for (int t = 0; t < graphs; ++t) {
    const int n = 4 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(max_nodes - 3)));
    const Graph er = erdos_renyi(n, 0.35, derive_seed(seed, 100 + static_cast<std::uint64_t>(t)));
    Graph g = induced_subgraph(er, largest_component(er, NodeSet::range(er.num_nodes())));
    Matrix x = Matrix::Zero(g.num_nodes(), dim);
    for (int i = 0; i < g.num_nodes(); ++i) x(i, static_cast<Eigen::Index>(uniform_index(rng, dim))) = 1.0;
    g = Graph(g.num_nodes(), g.edges(), x);
    cfg.seed = derive_seed(seed, 200 + t);
    const GinParams model = init_params(cfg, dim);
    const int y = static_cast<int>(uniform_index(rng, 2));
    ec.seed = derive_seed(seed, 300 + t);
    const double best = explain_bruteforce(model, g, y, ec.omega).score;
    const double found = fidelity_score(model, g, explain_subgraphx(model, g, y, ec).node_set, y);
    ++out.graphs;
    if (found >= best - (1.0 - ratio) * std::abs(best) - 1e-12) ++out.within;
  }
  return out;
}

}  // namespace xgbd::checks
