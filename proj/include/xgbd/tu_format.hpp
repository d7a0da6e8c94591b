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

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "xgbd/error.hpp"
#include "xgbd/graph.hpp"

namespace xgbd {

/// Non-integer token in an otherwise readable file.
class LexicalError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Diagnostics collected while parsing a TU dataset.
struct ParseReport {
  /// Edges listed in only one direction; they are symmetrized.
  int one_directional_edges = 0;
  int directed_lines = 0;
};

namespace tu_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline long parse_int(std::string_view token, const std::string& file, int line) {
  token = trim(token);
  long value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (token.empty() || ec != std::errc() || ptr != last) {
    throw LexicalError(file + ":" + std::to_string(line) + ": expected integer, got '" +
                       std::string(token) + "'");
  }
  return value;
}

inline std::ifstream open_required(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open required file " + path.string());
  return in;
}

/// One integer per non-blank line.
inline std::vector<long> read_column(const std::filesystem::path& path) {
  auto in = open_required(path);
  std::vector<long> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty()) continue;
    // some TU files carry multiple comma-separated columns; the first is the label
    auto comma = t.find(',');
    out.push_back(parse_int(comma == std::string_view::npos ? t : t.substr(0, comma),
                            path.string(), line_no));
  }
  return out;
}

inline std::vector<std::pair<long, long>> read_pairs(const std::filesystem::path& path) {
  auto in = open_required(path);
  std::vector<std::pair<long, long>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty()) continue;
    auto comma = t.find(',');
    if (comma == std::string_view::npos) {
      throw LexicalError(path.string() + ":" + std::to_string(line_no) +
                         ": expected 'i, j', got '" + std::string(t) + "'");
    }
    out.emplace_back(parse_int(t.substr(0, comma), path.string(), line_no),
                     parse_int(t.substr(comma + 1), path.string(), line_no));
  }
  return out;
}

/// Sorted distinct values and a value -> dense index lookup.
inline std::pair<std::vector<long>, std::map<long, int>> dense_codes(const std::vector<long>& v) {
  std::map<long, int> index;
  for (long x : v) index.emplace(x, 0);
  std::vector<long> values;
  int i = 0;
  for (auto& [value, code] : index) {
    code = i++;
    values.push_back(value);
  }
  return {values, index};
}

}  // namespace tu_detail

inline std::filesystem::path tu_file(const std::filesystem::path& root, const std::string& name,
                                     const std::string& suffix) {
  return root / (name + "_" + suffix + ".txt");
}

/// Loads a dataset in TU text format from `root/<name>_*.txt`.
///
/// Node ids become 0-based per graph in indicator order, both directions of an
/// edge collapse to one undirected edge, graph labels are mapped to a dense
/// 0-based range in ascending value order. Features are the one-hot node
/// labels when `<name>_node_labels.txt` exists, degree buckets otherwise.
inline Dataset parse_tu_dataset(const std::filesystem::path& root, const std::string& name,
                                ParseReport* report = nullptr) {
  using namespace tu_detail;
  if (!std::filesystem::is_directory(root)) {
    throw ParseError("dataset directory not found: " + root.string());
  }
  const auto indicator = read_column(tu_file(root, name, "graph_indicator"));
  const auto graph_labels = read_column(tu_file(root, name, "graph_labels"));
  const auto pairs = read_pairs(tu_file(root, name, "A"));
  std::optional<std::vector<long>> node_labels;
  if (std::filesystem::exists(tu_file(root, name, "node_labels"))) {
    node_labels = read_column(tu_file(root, name, "node_labels"));
    if (node_labels->size() != indicator.size()) {
      throw StructureError(tu_file(root, name, "node_labels").string() + " has " +
                           std::to_string(node_labels->size()) + " entries for " +
                           std::to_string(indicator.size()) + " nodes");
    }
  }

  const auto num_graphs = static_cast<long>(graph_labels.size());
  std::vector<int> graph_of(indicator.size());
  std::vector<int> local_id(indicator.size());
  std::vector<int> node_count(num_graphs, 0);
  for (std::size_t k = 0; k < indicator.size(); ++k) {
    const long gid = indicator[k];
    if (gid < 1 || gid > num_graphs) {
      throw StructureError("graph indicator line " + std::to_string(k + 1) +
                           " names graph " + std::to_string(gid) + " but only " +
                           std::to_string(num_graphs) + " graph labels exist");
    }
    graph_of[k] = static_cast<int>(gid - 1);
    local_id[k] = node_count[gid - 1]++;
  }

  std::vector<std::map<Edge, int>> directed(num_graphs);
  for (const auto& [a, b] : pairs) {
    const auto n = static_cast<long>(indicator.size());
    if (a < 1 || a > n || b < 1 || b > n) {
      throw StructureError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                           ") references a node absent from the graph indicator");
    }
    const int ga = graph_of[a - 1];
    if (ga != graph_of[b - 1]) {
      throw StructureError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                           ") crosses graphs");
    }
    if (a == b) throw StructureError("self-loop on node " + std::to_string(a));
    const Edge e(local_id[a - 1], local_id[b - 1]);
    // bit 1: listed as (small, large); bit 2: listed as (large, small)
    directed[ga][e] |= (local_id[a - 1] < local_id[b - 1]) ? 1 : 2;
  }

  auto [class_values, class_index] = dense_codes(graph_labels);
  Dataset ds;
  ds.name = name;
  ds.class_values = class_values;
  ds.num_classes = static_cast<int>(class_values.size());

  std::map<long, int> node_index;
  if (node_labels) {
    auto [values, index] = dense_codes(*node_labels);
    ds.node_label_values = values;
    node_index = std::move(index);
    ds.feature_dim = static_cast<int>(values.size());
  } else {
    ds.feature_dim = kDegreeBucketCap + 1;
  }

  std::vector<std::vector<int>> labels_per_graph(num_graphs);
  if (node_labels) {
    for (std::size_t k = 0; k < indicator.size(); ++k) {
      labels_per_graph[graph_of[k]].push_back(node_index.at((*node_labels)[k]));
    }
  }

  ParseReport local_report;
  ds.graphs.reserve(num_graphs);
  for (long gi = 0; gi < num_graphs; ++gi) {
    std::vector<Edge> edges;
    edges.reserve(directed[gi].size());
    for (const auto& [e, dirs] : directed[gi]) {
      if (dirs != 3) ++local_report.one_directional_edges;
      edges.push_back(e);
    }
    Matrix x = node_labels ? one_hot_features(labels_per_graph[gi], ds.feature_dim)
                           : degree_bucket_features(node_count[gi], edges);
    ds.graphs.emplace_back(node_count[gi], std::move(edges), std::move(x),
                           class_index.at(graph_labels[gi]));
  }
  local_report.directed_lines = static_cast<int>(pairs.size());
  if (report) *report = local_report;
  return ds;
}

/// Writes `ds` in TU format. Edges are emitted in both directions, ordered by
/// (row, col) of the global 1-based ids. Node labels are written only when the
/// dataset has a node-label vocabulary (one-hot features).
inline void write_tu_dataset(const Dataset& ds, const std::filesystem::path& root,
                             const std::string& name) {
  std::filesystem::create_directories(root);
  auto open = [&](const std::string& suffix) {
    std::ofstream out(tu_file(root, name, suffix));
    if (!out) throw ParseError("cannot write " + tu_file(root, name, suffix).string());
    return out;
  };
  auto a = open("A");
  auto ind = open("graph_indicator");
  auto gl = open("graph_labels");
  const bool labelled = !ds.node_label_values.empty();
  std::ofstream nl;
  if (labelled) nl = open("node_labels");

  long offset = 1;
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    const Graph& g = ds.graphs[gi];
    for (int v = 0; v < g.num_nodes(); ++v) {
      for (int u : g.neighbors(v)) a << (offset + v) << ", " << (offset + u) << '\n';
      ind << (gi + 1) << '\n';
      if (labelled) {
        Eigen::Index col = 0;
        g.features().row(v).maxCoeff(&col);
        nl << ds.node_label_values.at(static_cast<std::size_t>(col)) << '\n';
      }
    }
    const int label = g.label();
    gl << (ds.class_values.empty() ? static_cast<long>(label)
                                   : ds.class_values.at(static_cast<std::size_t>(label)))
       << '\n';
    offset += g.num_nodes();
  }
}

}  // namespace xgbd
