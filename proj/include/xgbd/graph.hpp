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

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "xgbd/error.hpp"
#include "xgbd/random.hpp"

namespace xgbd {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Undirected edge stored with `u < v`.
struct Edge {
  int u = 0;
  int v = 0;

  Edge() = default;
  Edge(int a, int b) : u(std::min(a, b)), v(std::max(a, b)) {}

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Sorted, duplicate-free set of node ids of some graph.
class NodeSet {
 public:
  NodeSet() = default;
  NodeSet(std::initializer_list<int> ids) : ids_(ids) { normalize(); }
  explicit NodeSet(std::vector<int> ids) : ids_(std::move(ids)) { normalize(); }

  static NodeSet range(int n) {
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    return NodeSet(std::move(ids));
  }

  [[nodiscard]] bool empty() const { return ids_.empty(); }
  [[nodiscard]] int size() const { return static_cast<int>(ids_.size()); }
  [[nodiscard]] bool contains(int v) const {
    return std::binary_search(ids_.begin(), ids_.end(), v);
  }
  [[nodiscard]] bool is_subset_of(const NodeSet& other) const {
    return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(), ids_.end());
  }
  [[nodiscard]] const std::vector<int>& ids() const { return ids_; }
  [[nodiscard]] auto begin() const { return ids_.begin(); }
  [[nodiscard]] auto end() const { return ids_.end(); }
  int operator[](int i) const { return ids_[i]; }

  [[nodiscard]] NodeSet set_union(const NodeSet& other) const {
    std::vector<int> out;
    std::set_union(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                   std::back_inserter(out));
    return from_sorted(std::move(out));
  }
  [[nodiscard]] NodeSet set_difference(const NodeSet& other) const {
    std::vector<int> out;
    std::set_difference(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                        std::back_inserter(out));
    return from_sorted(std::move(out));
  }
  [[nodiscard]] NodeSet set_intersection(const NodeSet& other) const {
    std::vector<int> out;
    std::set_intersection(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                          std::back_inserter(out));
    return from_sorted(std::move(out));
  }
  [[nodiscard]] NodeSet without(int v) const {
    std::vector<int> out;
    out.reserve(ids_.size());
    for (int x : ids_) {
      if (x != v) out.push_back(x);
    }
    return from_sorted(std::move(out));
  }

  friend bool operator==(const NodeSet&, const NodeSet&) = default;
  friend auto operator<=>(const NodeSet&, const NodeSet&) = default;

 private:
  static NodeSet from_sorted(std::vector<int> ids) {
    NodeSet s;
    s.ids_ = std::move(ids);
    return s;
  }
  void normalize() {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }

  std::vector<int> ids_;
};

/// Undirected, self-loop-free graph with dense node features and a class label.
/// Immutable after construction.
class Graph {
 public:
  Graph() = default;

  /// Edges are canonicalized (u < v), sorted, and deduplicated. A feature matrix
  /// with zero columns is allowed (features not yet assigned).
  Graph(int num_nodes, std::vector<Edge> edges, Matrix features, int label = 0)
      : num_nodes_(num_nodes), edges_(std::move(edges)), features_(std::move(features)),
        label_(label) {
    if (num_nodes_ < 0) throw StructureError("negative node count");
    if (features_.rows() != num_nodes_) {
      throw ShapeError("feature matrix has " + std::to_string(features_.rows()) +
                       " rows for " + std::to_string(num_nodes_) + " nodes");
    }
    for (const Edge& e : edges_) {
      if (e.u == e.v) throw StructureError("self-loop on node " + std::to_string(e.u));
      if (e.u < 0 || e.v >= num_nodes_) {
        throw StructureError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                             ") out of range for " + std::to_string(num_nodes_) + " nodes");
      }
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    adjacency_.assign(num_nodes_, {});
    for (const Edge& e : edges_) {
      adjacency_[e.u].push_back(e.v);
      adjacency_[e.v].push_back(e.u);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
  }

  [[nodiscard]] int num_nodes() const { return num_nodes_; }
  [[nodiscard]] int num_edges() const { return static_cast<int>(edges_.size()); }
  [[nodiscard]] int feature_dim() const { return static_cast<int>(features_.cols()); }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] const std::vector<int>& neighbors(int v) const { return adjacency_[v]; }
  [[nodiscard]] int degree(int v) const { return static_cast<int>(adjacency_[v].size()); }
  [[nodiscard]] const Matrix& features() const { return features_; }
  [[nodiscard]] int label() const { return label_; }

  [[nodiscard]] bool has_edge(int a, int b) const {
    if (a < 0 || b < 0 || a >= num_nodes_ || b >= num_nodes_) return false;
    const auto& n = adjacency_[a];
    return std::binary_search(n.begin(), n.end(), b);
  }

  /// Index of edge (a, b) in edges(), or -1.
  [[nodiscard]] int edge_index(int a, int b) const {
    const Edge key(a, b);
    auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || !(*it == key)) return -1;
    return static_cast<int>(it - edges_.begin());
  }

  [[nodiscard]] Graph with_label(int label) const {
    Graph g = *this;
    g.label_ = label;
    return g;
  }

  [[nodiscard]] Graph with_features(Matrix features) const {
    return Graph(num_nodes_, edges_, std::move(features), label_);
  }

  /// Structural and feature equality, including label.
  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.label_ == b.label_ && a.edges_ == b.edges_ &&
           a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
           a.features_ == b.features_;
  }

 private:
  int num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
  Matrix features_;
  int label_ = 0;
};

/// A labelled collection of graphs sharing one feature width.
struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  int num_classes = 0;
  int feature_dim = 0;
  /// Original graph-label values, indexed by dense class id.
  std::vector<long> class_values;
  /// Original node-label values, indexed by one-hot column; empty when the
  /// features are degree buckets.
  std::vector<long> node_label_values;

  [[nodiscard]] int size() const { return static_cast<int>(graphs.size()); }

  [[nodiscard]] double mean_nodes() const {
    if (graphs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& g : graphs) total += g.num_nodes();
    return total / static_cast<double>(graphs.size());
  }

  [[nodiscard]] double mean_edges() const {
    if (graphs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& g : graphs) total += g.num_edges();
    return total / static_cast<double>(graphs.size());
  }

  [[nodiscard]] std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(g.label());
    return out;
  }
};

inline void check_node_set(const Graph& g, const NodeSet& s) {
  for (int v : s) {
    if (v < 0 || v >= g.num_nodes()) {
      throw StructureError("node id " + std::to_string(v) + " invalid for graph with " +
                           std::to_string(g.num_nodes()) + " nodes");
    }
  }
}

/// Row i is the indicator of node i's label.
inline Matrix one_hot_features(const std::vector<int>& node_labels, int vocab_size) {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(node_labels.size()), vocab_size);
  for (std::size_t i = 0; i < node_labels.size(); ++i) {
    const int l = node_labels[i];
    if (l < 0 || l >= vocab_size) {
      throw ConfigError("node label " + std::to_string(l) + " outside vocabulary of size " +
                        std::to_string(vocab_size));
    }
    x(static_cast<Eigen::Index>(i), l) = 1.0;
  }
  return x;
}

inline constexpr int kDegreeBucketCap = 10;

/// One-hot node degree, degrees >= 10 share the last bucket. Width 11.
inline Matrix degree_bucket_features(int num_nodes, const std::vector<Edge>& edges) {
  std::vector<int> degree(num_nodes, 0);
  for (const Edge& e : edges) {
    ++degree[e.u];
    ++degree[e.v];
  }
  for (int& d : degree) d = std::min(d, kDegreeBucketCap);
  return one_hot_features(degree, kDegreeBucketCap + 1);
}

/// Nodes of `s` renumbered 0..|s|-1 in ascending original order, with every
/// edge of `g` whose endpoints both lie in `s`.
inline Graph induced_subgraph(const Graph& g, const NodeSet& s) {
  if (s.empty()) throw StructureError("induced_subgraph: empty node set");
  check_node_set(g, s);
  std::vector<int> local(g.num_nodes(), -1);
  for (int i = 0; i < s.size(); ++i) local[s[i]] = i;
  std::vector<Edge> edges;
  for (int v : s) {
    for (int u : g.neighbors(v)) {
      if (u > v && local[u] >= 0) edges.emplace_back(local[v], local[u]);
    }
  }
  Matrix x(s.size(), g.feature_dim());
  for (int i = 0; i < s.size(); ++i) x.row(i) = g.features().row(s[i]);
  return Graph(s.size(), std::move(edges), std::move(x), g.label());
}

/// Union of the neighborhoods of the members of `s`. Members of `s` appear
/// when they neighbor another member.
inline NodeSet neighbor_set(const Graph& g, const NodeSet& s) {
  check_node_set(g, s);
  std::vector<int> out;
  for (int v : s) {
    const auto& n = g.neighbors(v);
    out.insert(out.end(), n.begin(), n.end());
  }
  return NodeSet(std::move(out));
}

/// Connected components of the subgraph induced by `s`, each sorted, ordered
/// by smallest member.
inline std::vector<NodeSet> connected_components(const Graph& g, const NodeSet& s) {
  std::vector<char> in_set(g.num_nodes(), 0), seen(g.num_nodes(), 0);
  for (int v : s) in_set[v] = 1;
  std::vector<NodeSet> comps;
  for (int start : s) {
    if (seen[start]) continue;
    std::vector<int> comp;
    std::queue<int> q;
    q.push(start);
    seen[start] = 1;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      comp.push_back(v);
      for (int u : g.neighbors(v)) {
        if (in_set[u] && !seen[u]) {
          seen[u] = 1;
          q.push(u);
        }
      }
    }
    comps.emplace_back(std::move(comp));
  }
  return comps;
}

inline bool is_connected(const Graph& g, const NodeSet& s) {
  if (s.empty()) return false;
  return connected_components(g, s).size() == 1;
}

inline bool is_connected(const Graph& g) {
  return g.num_nodes() > 0 && is_connected(g, NodeSet::range(g.num_nodes()));
}

/// Largest component of `s`; ties go to the component with the smallest id.
inline NodeSet largest_component(const Graph& g, const NodeSet& s) {
  auto comps = connected_components(g, s);
  if (comps.empty()) return {};
  std::size_t best = 0;
  for (std::size_t i = 1; i < comps.size(); ++i) {
    if (comps[i].size() > comps[best].size()) best = i;
  }
  return comps[best];
}

/// G(n, d): every candidate pair included independently with probability d.
/// Features are left with zero columns.
inline Graph erdos_renyi(int n, double d, std::uint64_t seed) {
  if (n < 2) throw ConfigError("erdos_renyi: need at least 2 nodes, got " + std::to_string(n));
  if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("erdos_renyi: edge probability outside [0, 1]");
  Rng rng = make_rng(seed);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (bernoulli(rng, d)) edges.emplace_back(i, j);
    }
  }
  return Graph(n, std::move(edges), Matrix(n, 0));
}

}  // namespace xgbd
