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

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "xgbd/error.hpp"
#include "xgbd/gin.hpp"
#include "xgbd/graph.hpp"
#include "xgbd/random.hpp"

namespace xgbd {

struct ExplainerConfig {
  /// Maximum explanation size in nodes.
  int omega = 4;
  int mcts_rollouts = 200;
  double exploration_c = 5.0;
  /// Monte-Carlo permutations for Shapley values with large contexts.
  int shapley_samples = 100;
  /// Contexts up to this many players are enumerated exactly.
  int exact_shapley_max_players = 5;
  /// Edge-mask explainer: size penalty, optimizer steps and step size.
  double lambda_reg = 0.005;
  int mask_steps = 100;
  double mask_lr = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (omega < 1) throw ConfigError("omega must be >= 1");
    if (mcts_rollouts < 1) throw ConfigError("mcts_rollouts must be >= 1");
    if (shapley_samples < 1) throw ConfigError("shapley_samples must be >= 1");
    if (lambda_reg < 0.0) throw ConfigError("lambda_reg must be >= 0");
    if (mask_steps < 0) throw ConfigError("mask_steps must be >= 0");
  }
};

struct Explanation {
  NodeSet node_set;
  double score = 0.0;
  std::string method;
};

/// Probability of class `y` predicted from the subgraph induced by `s` alone.
inline double fidelity_score(const GinParams& model, const Graph& g, const NodeSet& s, int y) {
  check_label(model, y);
  return forward(model, induced_subgraph(g, s))(y);
}

/// Cooperative game over node coalitions: v(S) = p_y(G[S]), v({}) = 1/C.
/// Coalition values are memoized; instances are single-threaded.
class CoalitionGame {
 public:
  CoalitionGame(const GinParams& model, const Graph& g, int y) : model_(model), g_(g), y_(y) {
    check_label(model, y);
  }

  double value(const NodeSet& coalition) {
    if (coalition.empty()) return 1.0 / model_.num_classes();
    auto it = cache_.find(coalition);
    if (it != cache_.end()) return it->second;
    const double v = forward(model_, induced_subgraph(g_, coalition))(y_);
    cache_.emplace(coalition, v);
    return v;
  }

  [[nodiscard]] const Graph& graph() const { return g_; }
  [[nodiscard]] std::size_t evaluations() const { return cache_.size(); }

  /// Nodes adjacent to `s` but outside it: the other players of the game.
  [[nodiscard]] NodeSet context(const NodeSet& s) const { return neighbor_set(g_, s).set_difference(s); }

  /// Shapley value of `s` as a single player, by enumerating every coalition
  /// of the context players.
  double shapley_exact(const NodeSet& s) {
    const NodeSet ctx = context(s);
    const int k = ctx.size();
    if (k > 20) throw ConfigError("exact Shapley refused for more than 20 context players");
    // weight(|S|) = |S|! (k - |S|)! / (k + 1)!
    std::vector<double> weight(k + 1);
    for (int m = 0; m <= k; ++m) {
      weight[m] = std::exp(std::lgamma(m + 1.0) + std::lgamma(k - m + 1.0) - std::lgamma(k + 2.0));
    }
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
      std::vector<int> members;
      for (int i = 0; i < k; ++i) {
        if (mask & (1u << i)) members.push_back(ctx[i]);
      }
      const NodeSet coalition(std::move(members));
      total += weight[std::popcount(mask)] * (value(coalition.set_union(s)) - value(coalition));
    }
    return total;
  }

  /// Monte-Carlo Shapley value of `s` from `samples` random player orders.
  double shapley_monte_carlo(const NodeSet& s, int samples, std::uint64_t seed) {
    if (samples < 1) throw ConfigError("shapley samples must be >= 1");
    const NodeSet ctx = context(s);
    const int k = ctx.size();
    Rng rng = make_rng(seed);
    // player k stands for s itself
    std::vector<int> order(k + 1);
    double total = 0.0;
    for (int t = 0; t < samples; ++t) {
      for (int i = 0; i <= k; ++i) order[i] = i;
      shuffle(order, rng);
      std::vector<int> before;
      for (int p : order) {
        if (p == k) break;
        before.push_back(ctx[p]);
      }
      const NodeSet coalition(std::move(before));
      total += value(coalition.set_union(s)) - value(coalition);
    }
    return total / samples;
  }

 private:
  const GinParams& model_;
  const Graph& g_;
  int y_;
  std::map<NodeSet, double> cache_;
};

/// Monte-Carlo Shapley value of `s` against its one-hop context, with T
/// sampled permutations.
inline double shapley_score(const GinParams& model, const Graph& g, const NodeSet& s, int y,
                            int samples, std::uint64_t seed) {
  if (s.empty()) throw StructureError("shapley_score: empty node set");
  check_node_set(g, s);
  CoalitionGame game(model, g, y);
  return game.shapley_monte_carlo(s, samples, seed);
}

/// Exact Shapley value of `s` against its one-hop context.
inline double shapley_exact(const GinParams& model, const Graph& g, const NodeSet& s, int y) {
  if (s.empty()) throw StructureError("shapley_exact: empty node set");
  check_node_set(g, s);
  CoalitionGame game(model, g, y);
  return game.shapley_exact(s);
}

namespace detail {

/// Seed for the Shapley estimate of a particular node set, so that the value
/// does not depend on the order in which sets are visited.
inline std::uint64_t node_set_seed(std::uint64_t seed, const NodeSet& s) {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (int v : s) h = mix_seed(h ^ static_cast<std::uint64_t>(v));
  return derive_seed(seed, h);
}

/// Deterministic order on candidate explanations: higher score, then fewer
/// nodes, then lexicographically smaller ids.
inline bool better_candidate(double score, const NodeSet& s, double best_score, const NodeSet& best) {
  if (best.empty()) return true;
  if (score != best_score) return score > best_score;
  if (s.size() != best.size()) return s.size() < best.size();
  return s.ids() < best.ids();
}

}  // namespace detail

/// Monte-Carlo tree search over node pruning, scored by Shapley values.
///
/// Tree states are connected node sets. The root is the full graph; an action
/// removes one node and keeps the largest remaining component. A rollout prunes
/// down to a single node; every state with at most omega nodes on the way is a
/// candidate scored by its Shapley value (exact for small contexts, sampled
/// otherwise), and the best of those is the reward. Children are selected by
///   Q + c * P * sqrt(1 + sum N) / (1 + N)
/// with Q the mean leaf reward and P the child's fidelity.
class SubgraphSearch {
 public:
  SubgraphSearch(const GinParams& model, const Graph& g, int y, const ExplainerConfig& cfg)
      : game_(model, g, y), cfg_(cfg) {
    cfg.validate();
  }

  Explanation run() {
    const Graph& g = game_.graph();
    if (g.num_nodes() < 1) throw StructureError("cannot explain an empty graph");
    const NodeSet all = NodeSet::range(g.num_nodes());
    if (g.num_nodes() <= cfg_.omega) return {all, leaf_score(all), "subgraphx"};
    states_.clear();
    index_.clear();
    const int root = intern(all);
    for (int r = 0; r < cfg_.mcts_rollouts; ++r) rollout(root);
    return {best_, best_score_, "subgraphx"};
  }

  [[nodiscard]] std::size_t num_states() const { return states_.size(); }

 private:
  struct State {
    NodeSet nodes;
    std::vector<int> children;
    bool expanded = false;
    int visits = 0;
    double total_reward = 0.0;
    double prior = 0.0;
  };

  int intern(const NodeSet& s) {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(states_.size());
    State st;
    st.nodes = s;
    st.prior = game_.value(s);
    states_.push_back(std::move(st));
    index_.emplace(s, id);
    return id;
  }

  void expand(int id) {
    const NodeSet nodes = states_[id].nodes;
    std::vector<int> kids;
    for (int v : nodes) {
      NodeSet child = largest_component(game_.graph(), nodes.without(v));
      if (child.empty()) continue;
      const int cid = intern(child);
      if (std::find(kids.begin(), kids.end(), cid) == kids.end()) kids.push_back(cid);
    }
    states_[id].children = std::move(kids);
    states_[id].expanded = true;
  }

  double leaf_score(const NodeSet& s) {
    auto it = leaf_cache_.find(s);
    if (it != leaf_cache_.end()) return it->second;
    const int players = game_.context(s).size();
    const double v = players <= cfg_.exact_shapley_max_players
                         ? game_.shapley_exact(s)
                         : game_.shapley_monte_carlo(s, cfg_.shapley_samples,
                                                     detail::node_set_seed(cfg_.seed, s));
    leaf_cache_.emplace(s, v);
    if (detail::better_candidate(v, s, best_score_, best_)) {
      best_ = s;
      best_score_ = v;
    }
    return v;
  }

  int select_child(int id) const {
    const State& st = states_[id];
    int total_visits = 0;
    for (int c : st.children) total_visits += states_[c].visits;
    const double explore = cfg_.exploration_c * std::sqrt(1.0 + total_visits);
    int best = -1;
    double best_ucb = -std::numeric_limits<double>::infinity();
    for (int c : st.children) {
      const State& ch = states_[c];
      const double q = ch.visits ? ch.total_reward / ch.visits : 0.0;
      const double ucb = q + explore * ch.prior / (1.0 + ch.visits);
      if (ucb > best_ucb) {
        best_ucb = ucb;
        best = c;
      }
    }
    return best;
  }

  void rollout(int root) {
    std::vector<int> path{root};
    int cur = root;
    double reward = -std::numeric_limits<double>::infinity();
    while (true) {
      const int size = states_[cur].nodes.size();
      if (size <= cfg_.omega) reward = std::max(reward, leaf_score(states_[cur].nodes));
      if (size <= 1) break;
      if (!states_[cur].expanded) expand(cur);
      const int next = select_child(cur);
      if (next < 0) break;
      cur = next;
      path.push_back(cur);
    }
    for (int id : path) {
      states_[id].visits += 1;
      states_[id].total_reward += reward;
    }
  }

  CoalitionGame game_;
  ExplainerConfig cfg_;
  std::vector<State> states_;
  std::map<NodeSet, int> index_;
  std::map<NodeSet, double> leaf_cache_;
  NodeSet best_;
  double best_score_ = -std::numeric_limits<double>::infinity();
};

inline Explanation explain_subgraphx(const GinParams& model, const Graph& g, int y,
                                     const ExplainerConfig& cfg) {
  return SubgraphSearch(model, g, y, cfg).run();
}

inline constexpr int kBruteForceMaxNodes = 14;

/// Every connected node subset of size <= omega, in increasing bitmask order.
inline std::vector<NodeSet> connected_subsets(const Graph& g, int omega) {
  if (g.num_nodes() > kBruteForceMaxNodes) {
    throw ConfigError("brute-force enumeration refused for " + std::to_string(g.num_nodes()) +
                      " nodes (limit " + std::to_string(kBruteForceMaxNodes) + ")");
  }
  std::vector<NodeSet> out;
  const std::uint32_t n = static_cast<std::uint32_t>(g.num_nodes());
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (std::popcount(mask) > omega) continue;
    std::vector<int> ids;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) ids.push_back(static_cast<int>(i));
    }
    NodeSet s(std::move(ids));
    if (is_connected(g, s)) out.push_back(std::move(s));
  }
  return out;
}

/// Exact argmax of fidelity over connected subsets of size <= omega. Ties go
/// to the smaller set, then the lexicographically smaller one.
inline Explanation explain_bruteforce(const GinParams& model, const Graph& g, int y, int omega) {
  if (omega < 1) throw ConfigError("omega must be >= 1");
  Explanation best{{}, -std::numeric_limits<double>::infinity(), "bruteforce"};
  for (const NodeSet& s : connected_subsets(g, omega)) {
    const double f = fidelity_score(model, g, s, y);
    if (detail::better_candidate(f, s, best.score, best.node_set)) {
      best.node_set = s;
      best.score = f;
    }
  }
  if (best.node_set.empty()) throw StructureError("graph has no nodes to explain");
  return best;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct MaskObjective {
  double value = 0.0;
  /// d value / d logit, one per edge.
  std::vector<double> gradient;
};

/// log p_y(G with edge masks sigmoid(logits)) - lambda * sum of masks, and its
/// gradient with respect to the mask logits.
inline MaskObjective mask_objective(const GinParams& model, const Graph& g, int y,
                                    const std::vector<double>& mask_logits, double lambda) {
  check_label(model, y);
  if (mask_logits.size() != g.edges().size()) throw ShapeError("one mask logit per edge expected");
  std::vector<double> mask(mask_logits.size());
  for (std::size_t e = 0; e < mask.size(); ++e) mask[e] = sigmoid(mask_logits[e]);
  const ForwardCache c = forward_cached(model, g, mask);
  MaskObjective out;
  const double log_p = c.logits(y) - detail::log_sum_exp(c.logits);
  double mass = 0.0;
  for (double m : mask) mass += m;
  out.value = log_p - lambda * mass;
  RowVector dlogits = -c.probs;
  dlogits(y) += 1.0;
  const Backward b = backward(model, g, c, dlogits, mask, true);
  out.gradient.resize(mask.size());
  for (std::size_t e = 0; e < mask.size(); ++e) {
    out.gradient[e] = (b.edge_weights[e] - lambda) * mask[e] * (1.0 - mask[e]);
  }
  return out;
}

/// Final sigmoid edge mask after gradient ascent on mask_objective, starting
/// from every mask at 1/2.
inline std::vector<double> optimize_edge_mask(const GinParams& model, const Graph& g, int y,
                                              const ExplainerConfig& cfg) {
  std::vector<double> logits(g.edges().size(), 0.0);
  for (int step = 0; step < cfg.mask_steps; ++step) {
    const auto obj = mask_objective(model, g, y, logits, cfg.lambda_reg);
    for (std::size_t e = 0; e < logits.size(); ++e) logits[e] += cfg.mask_lr * obj.gradient[e];
  }
  for (double& l : logits) l = sigmoid(l);
  return logits;
}


/// Greedy region growth on an edge mask: start from the heaviest edge, then
/// repeatedly add the heaviest edge leading to a new node until omega nodes
/// are selected or the component is exhausted.
inline NodeSet grow_mask_region(const Graph& g, const std::vector<double>& mask, int omega) {
  const auto& edges = g.edges();
  if (edges.empty()) throw StructureError("edge mask region needs at least one edge");
  std::size_t seed_edge = 0;
  for (std::size_t e = 1; e < edges.size(); ++e) {
    if (mask[e] > mask[seed_edge]) seed_edge = e;
  }
  if (omega == 1) return NodeSet{edges[seed_edge].u};
  NodeSet region{edges[seed_edge].u, edges[seed_edge].v};
  while (region.size() < omega) {
    int pick = -1;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const bool in_u = region.contains(edges[e].u);
      const bool in_v = region.contains(edges[e].v);
      if (in_u == in_v) continue;
      if (pick < 0 || mask[e] > mask[pick]) pick = static_cast<int>(e);
    }
    if (pick < 0) break;
    region = region.set_union(NodeSet{edges[pick].u, edges[pick].v});
  }
  return region;
}

/// Edge-mask explanation: optimize a soft mask, then extract a connected
/// region of at most omega nodes. Score is the region's fidelity.
inline Explanation explain_gnnexplainer(const GinParams& model, const Graph& g, int y,
                                        const ExplainerConfig& cfg) {
  cfg.validate();
  if (g.num_edges() == 0) throw StructureError("edge-mask explainer needs a graph with edges");
  const auto mask = optimize_edge_mask(model, g, y, cfg);
  NodeSet region = grow_mask_region(g, mask, cfg.omega);
  const double score = fidelity_score(model, g, region, y);
  return {std::move(region), score, "gnnexplainer"};
}

enum class ExplainerMethod { subgraphx, gnnexplainer, bruteforce };

inline std::string to_string(ExplainerMethod m) {
  switch (m) {
    case ExplainerMethod::gnnexplainer: return "gnnexplainer";
    case ExplainerMethod::bruteforce: return "bruteforce";
    case ExplainerMethod::subgraphx: break;
  }
  return "subgraphx";
}

inline ExplainerMethod parse_explainer(const std::string& s) {
  if (s == "subgraphx") return ExplainerMethod::subgraphx;
  if (s == "gnnexplainer") return ExplainerMethod::gnnexplainer;
  if (s == "bruteforce") return ExplainerMethod::bruteforce;
  throw ConfigError("unknown explainer '" + s + "'");
}

inline Explanation explain(ExplainerMethod method, const GinParams& model, const Graph& g, int y,
                           const ExplainerConfig& cfg) {
  switch (method) {
    case ExplainerMethod::gnnexplainer: return explain_gnnexplainer(model, g, y, cfg);
    case ExplainerMethod::bruteforce: return explain_bruteforce(model, g, y, cfg.omega);
    case ExplainerMethod::subgraphx: break;
  }
  return explain_subgraphx(model, g, y, cfg);
}

}  // namespace xgbd
