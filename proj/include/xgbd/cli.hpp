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

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "xgbd/checks.hpp"
#include "xgbd/experiment.hpp"
#include "xgbd/json_io.hpp"
#include "xgbd/train.hpp"
#include "xgbd/tu_format.hpp"

namespace xgbd::cli {

/// Contents of a --config file.
///   {"version": 1, "attack": {...}, "detection": {...}, "experiment": {...}}
/// Every block is optional; unknown keys anywhere are rejected.
struct Config {
  AttackConfig attack;
  DetectionConfig detection;
  Json experiment = Json::object();
};

inline Config config_from_json(const Json& j) {
  io_detail::check_keys(j, {"version", "attack", "detection", "experiment"}, "config");
  if (j.contains("version") && j.at("version") != kFormatVersion) {
    throw ConfigError("unsupported config version " + j.at("version").dump());
  }
  Config c;
  if (j.contains("attack")) c.attack = attack_config_from_json(j.at("attack"));
  if (j.contains("detection")) c.detection = detection_config_from_json(j.at("detection"));
  if (j.contains("experiment")) {
    c.experiment = j.at("experiment");
    experiment_spec_from_json(c.experiment, c.attack, c.detection);  // key check only
  }
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(io_detail::read_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir = "out";
  int jobs = 1;
  bool quiet = false;
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    CLI::App app{"Explanation-guided backdoor detection for graph classifiers", "xgbd"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", seed_opt_, "Seed for attack, training and explanation");
    app.add_option("--config", g_.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", g_.out_dir, "Output directory")->capture_default_str();
    app.add_option("--jobs", g_.jobs, "Parallel explanation width")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", g_.quiet, "Suppress progress output");

    std::string dataset, manifest, model, explanations, report, mode = "trap", method, attack_method;
    std::optional<double> tau, gamma;

    auto* poison = app.add_subcommand("poison", "Inject a backdoor into a TU dataset");
    poison->add_option("--dataset", dataset, "TU dataset directory")->required();
    poison->add_option("--method", attack_method, "badgraph or exa");

    auto* train_cmd = app.add_subcommand("train", "Train a GIN with cross-entropy or the trap loss");
    train_cmd->add_option("--dataset", dataset, "TU dataset directory")->required();
    train_cmd->add_option("--mode", mode, "standard or trap")
        ->check(CLI::IsMember({"standard", "trap"}))
        ->capture_default_str();
    train_cmd->add_option("--gamma", gamma, "Trap threshold");

    auto* explain_cmd = app.add_subcommand("explain", "Explain every graph under a trained model");
    explain_cmd->add_option("--dataset", dataset, "TU dataset directory")->required();
    explain_cmd->add_option("--model", model, "Model checkpoint")->required()->check(CLI::ExistingFile);
    explain_cmd->add_option("--method", method, "subgraphx, gnnexplainer or bruteforce");

    auto* detect = app.add_subcommand("detect", "Run the detector");
    detect->add_option("--dataset", dataset, "TU dataset directory")->required();
    detect->add_option("--attack-manifest", manifest, "Poison manifest for scoring")->check(CLI::ExistingFile);
    detect->add_option("--model", model, "Reuse this checkpoint instead of training")->check(CLI::ExistingFile);
    detect->add_option("--explanations", explanations, "Reuse these explanations (requires --model)")
        ->check(CLI::ExistingFile);
    detect->add_option("--tau", tau, "Detection threshold");
    detect->add_option("--gamma", gamma, "Trap threshold");

    auto* eval = app.add_subcommand("eval", "Score a detection report against a manifest");
    eval->add_option("--report", report, "report.json")->required()->check(CLI::ExistingFile);
    eval->add_option("--manifest", manifest, "Poison manifest")->required()->check(CLI::ExistingFile);
    eval->add_option("--tau", tau, "Re-threshold before scoring");

    auto* experiment = app.add_subcommand("experiment", "Run the sweep described by --config");
    experiment->add_option("--dataset", dataset, "TU dataset directory (overrides the config)");

    auto* selftest = app.add_subcommand("selftest", "Run gradient and oracle checks");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out_, err_);
      return code == 0 ? 0 : 2;
    }
    if (seed_opt_) g_.seed = *seed_opt_;

    try {
      cfg_ = g_.config_path.empty() ? Config{} : load_config(g_.config_path);
    } catch (const Error& e) {
      err_ << "error: " << e.what() << "\n" << app.help();
      return 2;
    }
    try {
      apply_globals();
      if (tau) cfg_.detection.tau = *tau;
      if (gamma) cfg_.detection.gamma = *gamma;
      if (!attack_method.empty()) cfg_.attack.method = parse_attack_method(attack_method);
      if (!method.empty()) cfg_.detection.explainer = parse_explainer(method);
      cfg_.detection.validate();

      if (*poison) return cmd_poison(dataset);
      if (*train_cmd) return cmd_train(dataset, mode);
      if (*explain_cmd) return cmd_explain(dataset, model);
      if (*detect) return cmd_detect(dataset, manifest, model, explanations);
      if (*eval) return cmd_eval(report, manifest, tau);
      if (*experiment) return cmd_experiment(dataset);
      if (*selftest) return cmd_selftest();
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return 1;
    }
    return 2;
  }

 private:
  std::ostream& info() { return g_.quiet ? null_ : out_; }

  std::filesystem::path out_path(const std::string& file) const {
    return std::filesystem::path(g_.out_dir) / file;
  }

  void apply_globals() {
    if (g_.seed) {
      cfg_.attack.seed = *g_.seed;
      cfg_.detection.seed = *g_.seed;
      cfg_.detection.model_config.seed = *g_.seed;
    }
    cfg_.detection.jobs = g_.jobs;
  }

  static Dataset load(const std::string& dir) {
    if (!std::filesystem::is_directory(dir)) throw ParseError("dataset directory not found: " + dir);
    return load_tu_dir(dir);
  }

  int cmd_poison(const std::string& dir) {
    const Dataset ds = load(dir);
    const PoisonedDataset pd = poison_dataset(ds, cfg_.attack, cfg_.detection.model_config);
    write_tu_dataset(pd.dataset, out_path(ds.name), ds.name);
    save_manifest(out_path("manifest.json"), manifest_of(pd));
    info() << "poisoned " << pd.records.size() << " of " << ds.size() << " graphs with a "
           << pd.trigger.size() << "-node trigger; wrote " << out_path(ds.name).string() << " and "
           << out_path("manifest.json").string() << "\n";
    return 0;
  }

  int cmd_train(const std::string& dir, const std::string& mode) {
    const Dataset ds = load(dir);
    DetectionConfig d = cfg_.detection;
    d.trap_loss = mode == "trap";
    const TrainResult tr = train_detector(ds, d);
    const ModelConfig mc = detector_model_config(ds, d.model_config);
    save_checkpoint(out_path("model.json"), tr.params, mc);
    std::string csv = "epoch,graph_index,loss\n";
    for (std::size_t e = 0; e < tr.loss_trace.size(); ++e) {
      for (std::size_t i = 0; i < tr.loss_trace[e].size(); ++i) {
        csv += std::to_string(e) + "," + std::to_string(i) + "," + format_double(tr.loss_trace[e][i]) + "\n";
      }
    }
    io_detail::write_text(out_path("loss_trace.csv"), csv);
    const auto final_losses = tr.final_losses();
    info() << "trained (" << mode << ") for " << mc.epochs << " epochs; mean final loss "
           << (final_losses.empty() ? 0.0 : mean_std(final_losses).mean) << "; wrote "
           << out_path("model.json").string() << "\n";
    return 0;
  }

  int cmd_explain(const std::string& dir, const std::string& model_path) {
    const Dataset ds = load(dir);
    const Checkpoint ck = load_checkpoint(model_path);
    const auto ex = explain_dataset(ds, ck.params, cfg_.detection);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < ds.size(); ++i) seeds.push_back(sample_seed(cfg_.detection.seed, i));
    io_detail::write_text(out_path("explanations.jsonl"), explanations_to_jsonl(ex, seeds));
    info() << "explained " << ex.size() << " graphs with " << to_string(cfg_.detection.explainer) << "; wrote "
           << out_path("explanations.jsonl").string() << "\n";
    return 0;
  }

  int cmd_detect(const std::string& dir, const std::string& manifest_path, const std::string& model_path,
                 const std::string& explanations_path) {
    const Dataset ds = load(dir);
    std::optional<PoisonManifest> manifest;
    if (!manifest_path.empty()) {
      manifest = load_manifest(manifest_path);
      if (manifest->num_graphs != ds.size()) {
        throw ShapeError("manifest covers " + std::to_string(manifest->num_graphs) + " graphs, dataset has " +
                         std::to_string(ds.size()));
      }
    }
    if (!explanations_path.empty() && model_path.empty()) {
      throw ConfigError("--explanations needs the --model the explanations were computed with");
    }
    DetectionReport report;
    if (model_path.empty()) {
      const DetectionRun run = run_xgbd_full(ds, cfg_.detection);
      report = run.report;
      save_checkpoint(out_path("model.json"), run.training.params,
                      detector_model_config(ds, cfg_.detection.model_config));
    } else {
      const Checkpoint ck = load_checkpoint(model_path);
      std::optional<std::vector<Explanation>> given;
      if (!explanations_path.empty()) given = explanations_in_order(load_explanations(explanations_path), ds.size());
      report = score_samples(ds, ck.params, cfg_.detection, given ? &*given : nullptr);
    }
    save_report(out_path("report.json"), report);
    std::vector<bool> truth;
    if (manifest) truth = manifest->truth();
    io_detail::write_text(out_path("report.csv"), report_csv(report, manifest ? &truth : nullptr));
    info() << "flagged " << report.flagged_set.size() << " of " << ds.size() << " graphs at tau "
           << format_double(report.config.tau) << "; wrote " << out_path("report.json").string() << "\n";
    if (manifest) print_metrics(evaluate_detection(report.flags(), report.scores(), truth));
    return 0;
  }

  int cmd_eval(const std::string& report_path, const std::string& manifest_path, std::optional<double> tau) {
    DetectionReport report = load_report(report_path);
    const PoisonManifest manifest = load_manifest(manifest_path);
    if (static_cast<int>(report.per_sample.size()) != manifest.num_graphs) {
      throw ShapeError("report covers " + std::to_string(report.per_sample.size()) + " graphs, manifest " +
                       std::to_string(manifest.num_graphs));
    }
    if (tau) apply_threshold(report, *tau);
    const Metrics m = evaluate_detection(report.flags(), report.scores(), manifest.truth());
    Json j = {{"accuracy", m.accuracy},
              {"auc", m.auc ? Json(*m.auc) : Json(nullptr)},
              {"precision", m.precision ? Json(*m.precision) : Json(nullptr)},
              {"n_flagged", m.num_flagged},
              {"n_poisoned", m.num_poisoned},
              {"tau", report.config.tau}};
    io_detail::write_text(out_path("metrics.json"), j.dump(2) + "\n");
    print_metrics(m);
    return 0;
  }

  int cmd_experiment(const std::string& dir) {
    ExperimentSpec spec = experiment_spec_from_json(cfg_.experiment, cfg_.attack, cfg_.detection);
    if (!dir.empty()) spec.dataset_dir = dir;
    if (g_.seed) spec.base_seed = *g_.seed;
    if (spec.dataset_dir.empty()) throw ConfigError("experiment: pass --dataset or set experiment.dataset");
    if (!std::filesystem::is_directory(spec.dataset_dir)) {
      throw ParseError("dataset directory not found: " + spec.dataset_dir);
    }
    spec.validate();
    const auto rows = run_experiment(spec);
    write_experiment(g_.out_dir, rows);
    int failed = 0;
    for (const auto& r : rows) failed += !r.ok();
    info() << aggregate_csv(aggregate(rows));
    info() << rows.size() << " runs, " << failed << " failed; wrote " << out_path("runs.csv").string() << "\n";
    return 0;
  }

  int cmd_selftest() {
    const std::uint64_t seed = g_.seed.value_or(0);
    bool ok = true;
    auto line = [&](bool pass, const std::string& name, const std::string& detail) {
      ok = ok && pass;
      out_ << (pass ? "PASS " : "FAIL ") << name << " " << detail << "\n";
    };
    for (auto kind : {checks::GradientKind::standard, checks::GradientKind::trap, checks::GradientKind::edge_mask}) {
      const auto r = checks::check_gradients(kind, 50, seed);
      line(r.max_relative_error < 1e-4, "gradient/" + checks::to_string(kind),
           "max_rel_err=" + format_double(r.max_relative_error) + " over " + std::to_string(r.checked));
    }
    const double auc_gap = checks::check_auc(200, seed);
    line(auc_gap < 1e-12, "auc/pairwise", "max_abs_diff=" + format_double(auc_gap));
    const double er_gap = checks::check_er_frequency(8, 0.8, 10000);
    line(er_gap <= 0.02, "erdos_renyi/edge_frequency", "max_dev=" + format_double(er_gap));
    const auto ex = checks::check_explainer(30, 12, 200, 0.95, seed);
    line(ex.fraction() >= 0.8, "explainer/oracle",
         std::to_string(ex.within) + "/" + std::to_string(ex.graphs) + " within 95%");
    return ok ? 0 : 1;
  }

  void print_metrics(const Metrics& m) {
    auto opt = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string(); };
    out_ << "accuracy,auc,precision,n_flagged,n_poisoned\n"
         << format_double(m.accuracy) << "," << opt(m.auc) << "," << opt(m.precision) << "," << m.num_flagged
         << "," << m.num_poisoned << "\n";
  }

  std::ostream& out_;
  std::ostream& err_;
  std::ostream null_{nullptr};
  Globals g_;
  std::optional<std::uint64_t> seed_opt_;
  Config cfg_;
};

inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return Runner(out, err).run(argc, argv);
}

}  // namespace xgbd::cli
