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

#include <chrono>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "xgbd/error.hpp"
#include "xgbd/explain.hpp"
#include "xgbd/gin.hpp"
#include "xgbd/graph.hpp"
#include "xgbd/metrics.hpp"
#include "xgbd/parallel.hpp"
#include "xgbd/random.hpp"
#include "xgbd/train.hpp"

namespace xgbd {

struct DetectionConfig {
  double tau = 1e-5;
  double gamma = 0.5;
  ExplainerMethod explainer = ExplainerMethod::subgraphx;
  /// Holds omega and the search budgets.
  ExplainerConfig explainer_config;
  ModelConfig model_config;
  /// Train the detector with the trap loss; cross-entropy otherwise.
  bool trap_loss = true;
  /// Trap on the batch-mean loss rather than per sample.
  bool trap_batch_mean = false;
  /// Score the one-hop expansion of the explanation; the bare explanation otherwise.
  bool expand = true;
  std::uint64_t seed = 0;
  /// Width of the per-sample parallel map.
  int jobs = 1;

  void validate() const {
    if (!(tau >= 0.0)) throw ConfigError("tau must be >= 0");
    if (trap_loss && !(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    explainer_config.validate();
    model_config.validate();
  }
};

/// The explanation's nodes plus their neighbors, keeping exactly the edges of
/// `g` that touch the explanation. Edges between two neighbor-only nodes are
/// left out.
inline Graph expand_one_hop(const Graph& g, const NodeSet& s) {
  if (s.empty()) throw StructureError("expand_one_hop: empty node set");
  check_node_set(g, s);
  const NodeSet nodes = neighbor_set(g, s).set_union(s);
  std::vector<int> local(g.num_nodes(), -1);
  for (int i = 0; i < nodes.size(); ++i) local[nodes[i]] = i;
  std::vector<Edge> edges;
  for (const Edge& e : g.edges()) {
    if (s.contains(e.u) || s.contains(e.v)) edges.emplace_back(local[e.u], local[e.v]);
  }
  Matrix x(nodes.size(), g.feature_dim());
  for (int i = 0; i < nodes.size(); ++i) x.row(i) = g.features().row(nodes[i]);
  return Graph(nodes.size(), std::move(edges), std::move(x), g.label());
}

/// Cross-entropy of the model on an (expanded) explanation subgraph.
inline double subgraph_loss(const GinParams& model, const Graph& g_expanded, int y) {
  return sample_loss(model, g_expanded, y);
}

struct SampleResult {
  int graph_index = 0;
  NodeSet explanation;
  double explanation_score = 0.0;
  NodeSet expanded;
  double subgraph_loss = 0.0;
  bool flagged = false;
  /// Non-empty when explaining this sample failed; such samples stay unflagged.
  std::string error;
};

struct StageTiming {
  double train_seconds = 0.0;
  double explain_seconds = 0.0;
  double total_seconds = 0.0;
};

struct DetectionReport {
  std::vector<SampleResult> per_sample;
  std::vector<int> flagged_set;
  DetectionConfig config;
  StageTiming timing;

  [[nodiscard]] std::vector<bool> flags() const {
    std::vector<bool> f;
    f.reserve(per_sample.size());
    for (const auto& s : per_sample) f.push_back(s.flagged);
    return f;
  }
  /// Backdoor-likeness score for AUC: the negated subgraph loss.
  [[nodiscard]] std::vector<double> scores() const {
    std::vector<double> out;
    out.reserve(per_sample.size());
    for (const auto& s : per_sample) out.push_back(-s.subgraph_loss);
    return out;
  }
  [[nodiscard]] std::vector<double> losses() const {
    std::vector<double> out;
    out.reserve(per_sample.size());
    for (const auto& s : per_sample) out.push_back(s.subgraph_loss);
    return out;
  }
};

/// Flags loss <= tau on every sample without a recorded error.
inline void apply_threshold(DetectionReport& report, double tau) {
  report.config.tau = tau;
  report.flagged_set.clear();
  for (auto& s : report.per_sample) {
    s.flagged = s.error.empty() && s.subgraph_loss <= tau;
    if (s.flagged) report.flagged_set.push_back(s.graph_index);
  }
}

inline DetectionReport rethreshold(DetectionReport report, double tau) {
  apply_threshold(report, tau);
  return report;
}

/// Model configuration with the class count taken from the dataset.
inline ModelConfig detector_model_config(const Dataset& ds, ModelConfig cfg) {
  cfg.num_classes = ds.num_classes;
  return cfg;
}

/// Stage 1: train the detector model.
inline TrainResult train_detector(const Dataset& ds, const DetectionConfig& cfg) {
  const ModelConfig mc = detector_model_config(ds, cfg.model_config);
  return cfg.trap_loss ? train_trap(ds, mc, cfg.gamma, cfg.trap_batch_mean) : train_standard(ds, mc);
}

/// Explanation seed of sample i.
inline std::uint64_t sample_seed(std::uint64_t seed, int index) {
  return derive_seed(seed, 0xe1000 + static_cast<std::uint64_t>(index));
}

/// Stages 2-5: explain, expand, score, and threshold every sample against a
/// fixed model. With `given`, those explanations are scored instead of
/// searching (one per graph, in dataset order).
inline DetectionReport score_samples(const Dataset& ds, const GinParams& model,
                                     const DetectionConfig& cfg,
                                     const std::vector<Explanation>* given = nullptr) {
  cfg.validate();
  if (given && static_cast<int>(given->size()) != ds.size()) {
    throw ShapeError("expected " + std::to_string(ds.size()) + " explanations, got " +
                     std::to_string(given->size()));
  }
  DetectionReport report;
  report.config = cfg;
  const auto t0 = std::chrono::steady_clock::now();
  report.per_sample = parallel_map(ds.size(), cfg.jobs, [&](int i) {
    SampleResult r;
    r.graph_index = i;
    const Graph& g = ds.graphs[i];
    try {
      ExplainerConfig ec = cfg.explainer_config;
      ec.seed = sample_seed(cfg.seed, i);
      const Explanation ex = given ? (*given)[i] : explain(cfg.explainer, model, g, g.label(), ec);
      r.explanation = ex.node_set;
      r.explanation_score = ex.score;
      const Graph scored = cfg.expand ? expand_one_hop(g, ex.node_set) : induced_subgraph(g, ex.node_set);
      r.expanded = cfg.expand ? neighbor_set(g, ex.node_set).set_union(ex.node_set) : ex.node_set;
      r.subgraph_loss = subgraph_loss(model, scored, g.label());
    } catch (const std::exception& e) {
      r.error = e.what();
      r.subgraph_loss = kMaxLoss;
    }
    return r;
  });
  report.timing.explain_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  apply_threshold(report, cfg.tau);
  return report;
}

/// Explanation of every graph for its own label, parallel over graphs.
inline std::vector<Explanation> explain_dataset(const Dataset& ds, const GinParams& model,
                                                const DetectionConfig& cfg) {
  cfg.validate();
  return parallel_map(ds.size(), cfg.jobs, [&](int i) {
    ExplainerConfig ec = cfg.explainer_config;
    ec.seed = sample_seed(cfg.seed, i);
    return explain(cfg.explainer, model, ds.graphs[i], ds.graphs[i].label(), ec);
  });
}

struct DetectionRun {
  DetectionReport report;
  TrainResult training;
};

/// Trap-train, explain each sample, expand one hop, compute the subgraph loss,
/// and flag losses <= tau.
inline DetectionRun run_xgbd_full(const Dataset& ds, const DetectionConfig& cfg) {
  if (ds.graphs.empty()) throw ConfigError("cannot run detection on an empty dataset");
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  DetectionRun run;
  run.training = train_detector(ds, cfg);
  const double train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.report = score_samples(ds, run.training.params, cfg);
  run.report.timing.train_seconds = train_s;
  run.report.timing.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

inline DetectionReport run_xgbd(const Dataset& ds, const DetectionConfig& cfg) {
  return run_xgbd_full(ds, cfg).report;
}

/// The round(k * n) lowest values; ties go to the lower index.
inline std::vector<int> lowest_k(const std::vector<double>& values, double k_fraction) {
  if (!(k_fraction > 0.0 && k_fraction < 1.0)) throw ConfigError("k_fraction must lie in (0, 1)");
  const int k = static_cast<int>(std::floor(k_fraction * static_cast<double>(values.size()) + 0.5));
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
  std::sort(order.begin(), order.end());
  return order;
}

struct BaselineResult {
  std::vector<int> flagged;
  /// Per-sample cross-entropy the ranking was made on.
  std::vector<double> losses;

  [[nodiscard]] std::vector<bool> flags() const {
    std::vector<bool> f(losses.size(), false);
    for (int i : flagged) f[i] = true;
    return f;
  }
  [[nodiscard]] std::vector<double> scores() const {
    std::vector<double> s;
    for (double l : losses) s.push_back(-l);
    return s;
  }
};

/// Flags the lowest-loss fraction after a single epoch of cross-entropy training.
inline BaselineResult baseline_loss_isolation(const Dataset& ds, ModelConfig model_config,
                                              double k_fraction) {
  model_config = detector_model_config(ds, model_config);
  model_config.epochs = 1;
  BaselineResult r;
  r.losses = train_standard(ds, model_config).final_losses();
  r.flagged = lowest_k(r.losses, k_fraction);
  return r;
}

inline constexpr int kAblEpochs = 20;

/// Anti-backdoor learning: 20 epochs on (l - gamma) * l, then flag the
/// lowest-loss fraction by cross-entropy.
inline BaselineResult baseline_abl(const Dataset& ds, ModelConfig model_config, double gamma,
                                   double k_fraction) {
  model_config = detector_model_config(ds, model_config);
  model_config.epochs = kAblEpochs;
  BaselineResult r;
  r.losses = train_lga(ds, model_config, gamma).final_losses();
  r.flagged = lowest_k(r.losses, k_fraction);
  return r;
}

}  // namespace xgbd
