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

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xgbd/attack.hpp"
#include "xgbd/detect.hpp"
#include "xgbd/error.hpp"
#include "xgbd/explain.hpp"
#include "xgbd/gin.hpp"
#include "xgbd/graph.hpp"

namespace xgbd {

using Json = nlohmann::json;

inline constexpr const char* kCheckpointFormat = "xgbd-gin-checkpoint";
inline constexpr const char* kManifestFormat = "xgbd-poison-manifest";
inline constexpr const char* kReportFormat = "xgbd-detection-report";
inline constexpr int kFormatVersion = 1;

namespace io_detail {

/// Rejects keys outside `allowed`.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
}

inline void check_format(const Json& j, const char* format, const std::string& where) {
  if (!j.contains("format") || j.at("format") != format) {
    throw ParseError(where + ": not a " + std::string(format) + " file");
  }
  if (j.value("version", 0) != kFormatVersion) {
    throw ParseError(where + ": unsupported version " + std::to_string(j.value("version", 0)));
  }
}

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : cols_if_empty;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw ParseError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

}  // namespace io_detail

// ---- configuration objects ----

inline Json to_json(const ModelConfig& c) {
  return {{"num_layers", c.num_layers},       {"hidden_dim", c.hidden_dim},
          {"num_classes", c.num_classes},     {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},               {"batch_size", c.batch_size},
          {"readout", to_string(c.readout)},  {"optimizer", to_string(c.optimizer)},
          {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const Json& j, ModelConfig c = {}) {
  io_detail::check_keys(j, {"num_layers", "hidden_dim", "num_classes", "learning_rate", "epochs",
                            "batch_size", "readout", "optimizer", "seed"},
                        "model config");
  io_detail::read_opt(j, "num_layers", c.num_layers);
  io_detail::read_opt(j, "hidden_dim", c.hidden_dim);
  io_detail::read_opt(j, "num_classes", c.num_classes);
  io_detail::read_opt(j, "learning_rate", c.learning_rate);
  io_detail::read_opt(j, "epochs", c.epochs);
  io_detail::read_opt(j, "batch_size", c.batch_size);
  io_detail::read_opt(j, "seed", c.seed);
  if (j.contains("readout")) c.readout = parse_readout(j.at("readout").get<std::string>());
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.validate();
  return c;
}

inline Json to_json(const AttackConfig& c) {
  return {{"method", to_string(c.method)},
          {"trigger_size", c.trigger_size},
          {"trigger_density", c.trigger_density},
          {"injection_ratio", c.injection_ratio},
          {"target_label", c.target_label},
          {"seed", c.seed}};
}

inline AttackConfig attack_config_from_json(const Json& j, AttackConfig c = {}) {
  io_detail::check_keys(j, {"method", "trigger_size", "trigger_density", "injection_ratio",
                            "target_label", "seed"},
                        "attack config");
  if (j.contains("method")) c.method = parse_attack_method(j.at("method").get<std::string>());
  io_detail::read_opt(j, "trigger_size", c.trigger_size);
  io_detail::read_opt(j, "trigger_density", c.trigger_density);
  io_detail::read_opt(j, "injection_ratio", c.injection_ratio);
  io_detail::read_opt(j, "target_label", c.target_label);
  io_detail::read_opt(j, "seed", c.seed);
  return c;
}

inline Json to_json(const ExplainerConfig& c) {
  return {{"omega", c.omega},
          {"mcts_rollouts", c.mcts_rollouts},
          {"exploration_c", c.exploration_c},
          {"shapley_samples", c.shapley_samples},
          {"exact_shapley_max_players", c.exact_shapley_max_players},
          {"lambda_reg", c.lambda_reg},
          {"mask_steps", c.mask_steps},
          {"mask_lr", c.mask_lr}};
}

inline ExplainerConfig explainer_config_from_json(const Json& j, ExplainerConfig c = {}) {
  io_detail::check_keys(j, {"omega", "mcts_rollouts", "exploration_c", "shapley_samples",
                            "exact_shapley_max_players", "lambda_reg", "mask_steps", "mask_lr"},
                        "explainer config");
  io_detail::read_opt(j, "omega", c.omega);
  io_detail::read_opt(j, "mcts_rollouts", c.mcts_rollouts);
  io_detail::read_opt(j, "exploration_c", c.exploration_c);
  io_detail::read_opt(j, "shapley_samples", c.shapley_samples);
  io_detail::read_opt(j, "exact_shapley_max_players", c.exact_shapley_max_players);
  io_detail::read_opt(j, "lambda_reg", c.lambda_reg);
  io_detail::read_opt(j, "mask_steps", c.mask_steps);
  io_detail::read_opt(j, "mask_lr", c.mask_lr);
  c.validate();
  return c;
}

inline Json to_json(const DetectionConfig& c) {
  return {{"tau", c.tau},
          {"gamma", c.gamma},
          {"explainer", to_string(c.explainer)},
          {"explainer_config", to_json(c.explainer_config)},
          {"model", to_json(c.model_config)},
          {"trap_loss", c.trap_loss},
          {"trap_batch_mean", c.trap_batch_mean},
          {"expand", c.expand},
          {"seed", c.seed}};
}

inline DetectionConfig detection_config_from_json(const Json& j, DetectionConfig c = {}) {
  io_detail::check_keys(j, {"tau", "gamma", "explainer", "explainer_config", "model", "trap_loss",
                            "trap_batch_mean", "expand", "seed"},
                        "detection config");
  io_detail::read_opt(j, "tau", c.tau);
  io_detail::read_opt(j, "gamma", c.gamma);
  if (j.contains("explainer")) c.explainer = parse_explainer(j.at("explainer").get<std::string>());
  if (j.contains("explainer_config")) {
    c.explainer_config = explainer_config_from_json(j.at("explainer_config"), c.explainer_config);
  }
  if (j.contains("model")) c.model_config = model_config_from_json(j.at("model"), c.model_config);
  io_detail::read_opt(j, "trap_loss", c.trap_loss);
  io_detail::read_opt(j, "trap_batch_mean", c.trap_batch_mean);
  io_detail::read_opt(j, "expand", c.expand);
  io_detail::read_opt(j, "seed", c.seed);
  c.validate();
  return c;
}

// ---- model checkpoint ----

struct Checkpoint {
  GinParams params;
  ModelConfig config;
};

inline Json checkpoint_to_json(const GinParams& p, const ModelConfig& cfg) {
  Json tensors = Json::array();
  auto add = [&](const std::string& name, const Matrix& m) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
    }
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}});
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    add(pre + "w1", p.layers[l].w1);
    add(pre + "b1", p.layers[l].b1);
    add(pre + "w2", p.layers[l].w2);
    add(pre + "b2", p.layers[l].b2);
  }
  add("head.w", p.head_w);
  add("head.b", p.head_b);
  return {{"format", kCheckpointFormat},
          {"version", kFormatVersion},
          {"config", to_json(cfg)},
          {"input_dim", p.input_dim()},
          {"readout", to_string(p.readout)},
          {"tensors", std::move(tensors)}};
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  io_detail::check_format(j, kCheckpointFormat, "checkpoint");
  Checkpoint c;
  c.config = model_config_from_json(j.at("config"));
  c.params = init_params(c.config, j.at("input_dim").get<int>());
  c.params.readout = parse_readout(j.at("readout").get<std::string>());
  std::map<std::string, const Json*> by_name;
  for (const auto& t : j.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
  auto load = [&](const std::string& name, auto& m) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError("checkpoint is missing tensor " + name);
    const Json& t = *it->second;
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows != m.rows() || cols != m.cols()) {
      throw ShapeError("checkpoint tensor " + name + " has shape " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", expected " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()));
    }
    const Json& data = t.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError("tensor " + name + " data size");
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data.at(i * cols + k).get<double>();
    }
  };
  for (std::size_t l = 0; l < c.params.layers.size(); ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    load(pre + "w1", c.params.layers[l].w1);
    load(pre + "b1", c.params.layers[l].b1);
    load(pre + "w2", c.params.layers[l].w2);
    load(pre + "b2", c.params.layers[l].b2);
  }
  load("head.w", c.params.head_w);
  load("head.b", c.params.head_b);
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const GinParams& p, const ModelConfig& cfg) {
  io_detail::write_text(path, checkpoint_to_json(p, cfg).dump() + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(io_detail::read_json_file(path));
}

// ---- poison manifest ----

/// Attack ground truth: config, trigger, and one record per victim.
struct PoisonManifest {
  std::string dataset;
  int num_graphs = 0;
  AttackConfig config;
  TriggerGraph trigger;
  std::vector<PoisonRecord> records;

  [[nodiscard]] std::vector<bool> truth() const {
    std::vector<bool> t(static_cast<std::size_t>(num_graphs), false);
    for (const auto& r : records) t.at(static_cast<std::size_t>(r.graph_index)) = true;
    return t;
  }
};

inline PoisonManifest manifest_of(const PoisonedDataset& pd) {
  return {pd.dataset.name, pd.dataset.size(), pd.config, pd.trigger, pd.records};
}

inline Json to_json(const PoisonManifest& m) {
  Json edges = Json::array();
  for (const Edge& e : m.trigger.graph.edges()) edges.push_back({e.u, e.v});
  Json records = Json::array();
  for (const auto& r : m.records) {
    records.push_back({{"graph_index", r.graph_index},
                       {"poisoned_nodes", r.poisoned_nodes.ids()},
                       {"original_label", r.original_label}});
  }
  return {{"format", kManifestFormat},
          {"version", kFormatVersion},
          {"dataset", m.dataset},
          {"num_graphs", m.num_graphs},
          {"config", to_json(m.config)},
          {"trigger",
           {{"num_nodes", m.trigger.size()},
            {"edges", std::move(edges)},
            {"features", io_detail::matrix_to_json(m.trigger.graph.features())}}},
          {"records", std::move(records)}};
}

inline PoisonManifest manifest_from_json(const Json& j) {
  io_detail::check_format(j, kManifestFormat, "manifest");
  PoisonManifest m;
  m.dataset = j.at("dataset").get<std::string>();
  m.num_graphs = j.at("num_graphs").get<int>();
  m.config = attack_config_from_json(j.at("config"));
  const Json& t = j.at("trigger");
  const int n = t.at("num_nodes").get<int>();
  std::vector<Edge> edges;
  for (const auto& e : t.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  m.trigger.graph = Graph(n, std::move(edges), io_detail::matrix_from_json(t.at("features")));
  for (const auto& r : j.at("records")) {
    m.records.push_back({r.at("graph_index").get<int>(),
                         NodeSet(r.at("poisoned_nodes").get<std::vector<int>>()),
                         r.at("original_label").get<int>()});
  }
  return m;
}

inline void save_manifest(const std::filesystem::path& path, const PoisonManifest& m) {
  io_detail::write_text(path, to_json(m).dump(2) + "\n");
}

inline PoisonManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(io_detail::read_json_file(path));
}

// ---- explanations ----

/// One JSON object per line: graph_index, method, node_set, score, seed.
inline std::string explanations_to_jsonl(const std::vector<Explanation>& ex,
                                         const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    Json j = {{"graph_index", i},
              {"method", ex[i].method},
              {"node_set", ex[i].node_set.ids()},
              {"score", ex[i].score},
              {"seed", seeds.at(i)}};
    out += j.dump() + "\n";
  }
  return out;
}

struct ExplanationRecord {
  int graph_index = 0;
  Explanation explanation;
  std::uint64_t seed = 0;
};

inline std::vector<ExplanationRecord> load_explanations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<ExplanationRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      out.push_back({j.at("graph_index").get<int>(),
                     {NodeSet(j.at("node_set").get<std::vector<int>>()), j.at("score").get<double>(),
                      j.at("method").get<std::string>()},
                     j.at("seed").get<std::uint64_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Explanations indexed by graph; every index in [0, n) exactly once.
inline std::vector<Explanation> explanations_in_order(const std::vector<ExplanationRecord>& records, int n) {
  std::vector<std::optional<Explanation>> slot(static_cast<std::size_t>(n));
  for (const auto& r : records) {
    if (r.graph_index < 0 || r.graph_index >= n) {
      throw ShapeError("explanation for graph " + std::to_string(r.graph_index) + " is out of range");
    }
    auto& s = slot[static_cast<std::size_t>(r.graph_index)];
    if (s) throw ShapeError("duplicate explanation for graph " + std::to_string(r.graph_index));
    s = r.explanation;
  }
  std::vector<Explanation> out;
  for (int i = 0; i < n; ++i) {
    if (!slot[static_cast<std::size_t>(i)]) throw ShapeError("missing explanation for graph " + std::to_string(i));
    out.push_back(*slot[static_cast<std::size_t>(i)]);
  }
  return out;
}

// ---- detection report ----

inline Json to_json(const DetectionReport& r) {
  Json samples = Json::array();
  for (const auto& s : r.per_sample) {
    Json js = {{"graph_index", s.graph_index},
               {"explanation", s.explanation.ids()},
               {"explanation_score", s.explanation_score},
               {"expanded", s.expanded.ids()},
               {"subgraph_loss", s.subgraph_loss},
               {"flagged", s.flagged}};
    if (!s.error.empty()) js["error"] = s.error;
    samples.push_back(std::move(js));
  }
  return {{"format", kReportFormat},
          {"version", kFormatVersion},
          {"config", to_json(r.config)},
          {"timing",
           {{"train_seconds", r.timing.train_seconds},
            {"explain_seconds", r.timing.explain_seconds},
            {"total_seconds", r.timing.total_seconds}}},
          {"flagged_set", r.flagged_set},
          {"per_sample", std::move(samples)}};
}

inline DetectionReport report_from_json(const Json& j) {
  io_detail::check_format(j, kReportFormat, "report");
  DetectionReport r;
  r.config = detection_config_from_json(j.at("config"));
  const Json& t = j.at("timing");
  r.timing = {t.at("train_seconds").get<double>(), t.at("explain_seconds").get<double>(),
              t.at("total_seconds").get<double>()};
  r.flagged_set = j.at("flagged_set").get<std::vector<int>>();
  for (const auto& js : j.at("per_sample")) {
    SampleResult s;
    s.graph_index = js.at("graph_index").get<int>();
    s.explanation = NodeSet(js.at("explanation").get<std::vector<int>>());
    s.explanation_score = js.at("explanation_score").get<double>();
    s.expanded = NodeSet(js.at("expanded").get<std::vector<int>>());
    s.subgraph_loss = js.at("subgraph_loss").get<double>();
    s.flagged = js.at("flagged").get<bool>();
    s.error = js.value("error", "");
    r.per_sample.push_back(std::move(s));
  }
  return r;
}

inline void save_report(const std::filesystem::path& path, const DetectionReport& r) {
  io_detail::write_text(path, to_json(r).dump(2) + "\n");
}

inline DetectionReport load_report(const std::filesystem::path& path) {
  return report_from_json(io_detail::read_json_file(path));
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Per-sample table: graph_index,loss,flagged[,is_poisoned].
inline std::string report_csv(const DetectionReport& r, const std::vector<bool>* truth = nullptr) {
  std::string out = truth ? "graph_index,loss,flagged,is_poisoned\n" : "graph_index,loss,flagged\n";
  for (const auto& s : r.per_sample) {
    out += std::to_string(s.graph_index) + "," + format_double(s.subgraph_loss) + "," +
           (s.flagged ? "1" : "0");
    if (truth) out += std::string(",") + (truth->at(static_cast<std::size_t>(s.graph_index)) ? "1" : "0");
    out += "\n";
  }
  return out;
}

}  // namespace xgbd
