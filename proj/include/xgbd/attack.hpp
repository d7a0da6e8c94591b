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
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "xgbd/error.hpp"
#include "xgbd/gin.hpp"
#include "xgbd/graph.hpp"
#include "xgbd/random.hpp"
#include "xgbd/train.hpp"

namespace xgbd {

enum class AttackMethod { badgraph, exa };

inline std::string to_string(AttackMethod m) { return m == AttackMethod::exa ? "exa" : "badgraph"; }

inline AttackMethod parse_attack_method(const std::string& s) {
  if (s == "badgraph") return AttackMethod::badgraph;
  if (s == "exa") return AttackMethod::exa;
  throw ConfigError("unknown attack method '" + s + "' (expected badgraph or exa)");
}

struct AttackConfig {
  AttackMethod method = AttackMethod::badgraph;
  /// Trigger node count as a fraction of the mean graph size.
  double trigger_size = 0.2;
  /// ER edge probability of the trigger.
  double trigger_density = 0.8;
  /// Fraction of the dataset to poison.
  double injection_ratio = 0.1;
  int target_label = 0;
  std::uint64_t seed = 0;

  void validate(int num_classes) const {
    if (!(trigger_size > 0.0 && trigger_size < 1.0)) throw ConfigError("trigger_size must lie in (0, 1)");
    if (!(trigger_density >= 0.0 && trigger_density <= 1.0)) {
      throw ConfigError("trigger_density must lie in [0, 1]");
    }
    if (!(injection_ratio > 0.0 && injection_ratio < 1.0)) {
      throw ConfigError("injection_ratio must lie in (0, 1)");
    }
    if (target_label < 0 || target_label >= num_classes) {
      throw ConfigError("target_label " + std::to_string(target_label) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
};

/// Connected subgraph trigger with its own feature rows.
struct TriggerGraph {
  Graph graph;
  [[nodiscard]] int size() const { return graph.num_nodes(); }
};

struct PoisonRecord {
  int graph_index = 0;
  /// Victim node ids; trigger node i was written onto poisoned_nodes[i].
  NodeSet poisoned_nodes;
  int original_label = 0;
};

struct PoisonedDataset {
  Dataset dataset;
  std::vector<PoisonRecord> records;
  AttackConfig config;
  TriggerGraph trigger;

  /// truth[i] is true iff graph i was poisoned.
  [[nodiscard]] std::vector<bool> truth() const {
    std::vector<bool> t(dataset.graphs.size(), false);
    for (const auto& r : records) t[r.graph_index] = true;
    return t;
  }
};

inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

inline int trigger_node_count(const Dataset& ds, double trigger_size) {
  return round_half_up(ds.mean_nodes() * trigger_size);
}

inline constexpr int kTriggerConnectAttempts = 100;

/// ER trigger of round(N_avg * t) nodes, resampled until connected. Each node's
/// feature row is copied from a uniformly drawn node of the dataset, which
/// follows the empirical node-label distribution.
inline TriggerGraph make_trigger(const Dataset& ds, const AttackConfig& cfg) {
  const int k = trigger_node_count(ds, cfg.trigger_size);
  if (k < 2) {
    throw ConfigError("trigger of " + std::to_string(k) +
                      " nodes is too small; increase trigger_size");
  }
  std::optional<Graph> topology;
  for (int attempt = 0; attempt < kTriggerConnectAttempts; ++attempt) {
    Graph g = erdos_renyi(k, cfg.trigger_density, derive_seed(cfg.seed, 0x7000 + attempt));
    if (is_connected(g)) {
      topology = std::move(g);
      break;
    }
  }
  if (!topology) {
    throw GenerationError("no connected trigger after " + std::to_string(kTriggerConnectAttempts) +
                          " attempts (size " + std::to_string(k) + ", density " +
                          std::to_string(cfg.trigger_density) + ")");
  }
  std::vector<std::pair<int, int>> all_nodes;
  for (int gi = 0; gi < ds.size(); ++gi) {
    for (int v = 0; v < ds.graphs[gi].num_nodes(); ++v) all_nodes.emplace_back(gi, v);
  }
  if (all_nodes.empty()) throw ConfigError("dataset has no nodes to draw trigger features from");
  Rng rng = make_rng(derive_seed(cfg.seed, 0x7f00));
  Matrix x(k, ds.feature_dim);
  for (int i = 0; i < k; ++i) {
    const auto [gi, v] = all_nodes[uniform_index(rng, all_nodes.size())];
    x.row(i) = ds.graphs[gi].features().row(v);
  }
  return {topology->with_features(std::move(x))};
}

/// Indices of round(eta * n) graphs sampled uniformly among those whose label
/// differs from the target and that are large enough to host the trigger.
inline std::vector<int> select_victims(const Dataset& ds, const AttackConfig& cfg,
                                       int trigger_nodes) {
  std::vector<int> eligible;
  for (int i = 0; i < ds.size(); ++i) {
    const Graph& g = ds.graphs[i];
    if (g.label() != cfg.target_label && g.num_nodes() >= trigger_nodes) eligible.push_back(i);
  }
  const int want = round_half_up(cfg.injection_ratio * ds.size());
  if (want > static_cast<int>(eligible.size())) {
    throw ConfigError("need " + std::to_string(want) + " victims but only " +
                      std::to_string(eligible.size()) + " graphs are eligible (shortfall " +
                      std::to_string(want - static_cast<int>(eligible.size())) + ")");
  }
  Rng rng = make_rng(derive_seed(cfg.seed, 0x5e1));
  std::vector<int> victims;
  for (int pos : sample_without_replacement(rng, static_cast<int>(eligible.size()), want)) {
    victims.push_back(eligible[pos]);
  }
  return victims;
}

inline std::vector<int> select_victims(const Dataset& ds, const AttackConfig& cfg) {
  return select_victims(ds, cfg, trigger_node_count(ds, cfg.trigger_size));
}

/// Replaces the subgraph on `victim_nodes` by the trigger: internal edges are
/// dropped, trigger edges installed (trigger node i -> victim_nodes[i]),
/// feature rows overwritten, edges to the rest of the graph kept.
inline Graph poison_graph(const Graph& g, const TriggerGraph& trigger, const NodeSet& victim_nodes,
                          int target) {
  if (victim_nodes.size() != trigger.size()) {
    throw ConfigError("victim node count " + std::to_string(victim_nodes.size()) +
                      " does not match trigger size " + std::to_string(trigger.size()));
  }
  check_node_set(g, victim_nodes);
  if (trigger.graph.feature_dim() != g.feature_dim()) {
    throw ShapeError("trigger feature width does not match graph feature width");
  }
  std::vector<Edge> edges;
  for (const Edge& e : g.edges()) {
    if (!(victim_nodes.contains(e.u) && victim_nodes.contains(e.v))) edges.push_back(e);
  }
  for (const Edge& e : trigger.graph.edges()) edges.emplace_back(victim_nodes[e.u], victim_nodes[e.v]);
  Matrix x = g.features();
  for (int i = 0; i < trigger.size(); ++i) x.row(victim_nodes[i]) = trigger.graph.features().row(i);
  return Graph(g.num_nodes(), std::move(edges), std::move(x), target);
}

namespace detail {

inline PoisonedDataset inject_with(const Dataset& ds, const AttackConfig& cfg,
                                   const std::function<NodeSet(int, const Graph&, int)>& place) {
  cfg.validate(ds.num_classes);
  PoisonedDataset out;
  out.config = cfg;
  out.trigger = make_trigger(ds, cfg);
  out.dataset = ds;
  for (int gi : select_victims(ds, cfg, out.trigger.size())) {
    const Graph& g = ds.graphs[gi];
    NodeSet nodes = place(gi, g, out.trigger.size());
    out.dataset.graphs[gi] = poison_graph(g, out.trigger, nodes, cfg.target_label);
    out.records.push_back({gi, std::move(nodes), g.label()});
  }
  return out;
}

}  // namespace detail

/// Random placement of one shared trigger on every victim.
inline PoisonedDataset inject_badgraph(const Dataset& ds, const AttackConfig& cfg) {
  return detail::inject_with(ds, cfg, [&](int gi, const Graph& g, int k) {
    Rng rng = make_rng(derive_seed(cfg.seed, 0x10000 + static_cast<std::uint64_t>(gi)));
    return NodeSet(sample_without_replacement(rng, g.num_nodes(), k));
  });
}

/// Per-node importance, higher is more important.
using NodeImportance = std::function<std::vector<double>(const Graph&)>;

/// The k highest-importance nodes; ties go to the lower id.
inline NodeSet top_k_nodes(const std::vector<double>& importance, int k) {
  std::vector<int> order(importance.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return importance[a] > importance[b]; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
  return NodeSet(std::move(order));
}

/// Occlusion importance: drop in the probability of the model's predicted
/// class when node v is removed. Removing the only node yields 1/C.
inline std::vector<double> occlusion_importance(const GinParams& model, const Graph& g) {
  const RowVector full = forward(model, g);
  Eigen::Index cls = 0;
  full.maxCoeff(&cls);
  const NodeSet all = NodeSet::range(g.num_nodes());
  std::vector<double> out(g.num_nodes());
  for (int v = 0; v < g.num_nodes(); ++v) {
    const NodeSet rest = all.without(v);
    const double p = rest.empty() ? 1.0 / model.num_classes()
                                  : forward(model, induced_subgraph(g, rest))(cls);
    out[v] = full(cls) - p;
  }
  return out;
}

/// Explanation-guided placement: the trigger overwrites the k most important
/// nodes of each victim under `importance`.
inline PoisonedDataset inject_exa(const Dataset& ds, const AttackConfig& cfg,
                                  const NodeImportance& importance) {
  return detail::inject_with(ds, cfg, [&](int, const Graph& g, int k) {
    auto scores = importance(g);
    if (static_cast<int>(scores.size()) != g.num_nodes()) {
      throw ShapeError("importance function returned wrong number of scores");
    }
    return top_k_nodes(scores, k);
  });
}

/// ExA with an occlusion-scored surrogate model.
inline PoisonedDataset inject_exa(const Dataset& ds, const AttackConfig& cfg,
                                  const GinParams& surrogate) {
  return inject_exa(ds, cfg, [&](const Graph& g) { return occlusion_importance(surrogate, g); });
}

/// Trains the default ExA surrogate (cross-entropy on the clean data).
inline GinParams train_exa_surrogate(const Dataset& clean, ModelConfig cfg) {
  cfg.num_classes = clean.num_classes;
  return train_standard(clean, cfg).params;
}

/// Stamps the trigger onto uniformly chosen nodes of `g` (efficacy checks).
inline Graph stamp_trigger(const Graph& g, const TriggerGraph& trigger, int target,
                           std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return poison_graph(g, trigger, NodeSet(sample_without_replacement(rng, g.num_nodes(), trigger.size())),
                      target);
}

}  // namespace xgbd
