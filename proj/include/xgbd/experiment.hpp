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
#include <chrono>
#include <iomanip>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xgbd/attack.hpp"
#include "xgbd/detect.hpp"
#include "xgbd/json_io.hpp"
#include "xgbd/metrics.hpp"
#include "xgbd/parallel.hpp"
#include "xgbd/tu_format.hpp"

namespace xgbd {

enum class Detector { xgbd, loss_isolation, abl };

inline std::string to_string(Detector d) {
  switch (d) {
    case Detector::loss_isolation: return "loss_isolation";
    case Detector::abl: return "abl";
    default: return "xgbd";
  }
}

inline Detector parse_detector(const std::string& s) {
  if (s == "xgbd") return Detector::xgbd;
  if (s == "loss_isolation") return Detector::loss_isolation;
  if (s == "abl") return Detector::abl;
  throw ConfigError("unknown detector '" + s + "'");
}

struct Sweep {
  std::string parameter;
  std::vector<double> values;
};

inline bool is_sweep_parameter(const std::string& p) {
  return p == "trigger_size" || p == "trigger_density" || p == "injection_ratio" || p == "tau" ||
         p == "gamma";
}

struct ExperimentSpec {
  /// Directory holding <name>_A.txt etc.; the name is the directory's own name.
  std::string dataset_dir;
  AttackConfig attack;
  DetectionConfig detection;
  std::optional<Sweep> sweep;
  std::vector<Detector> detectors{Detector::xgbd};
  int repeats = 5;
  std::uint64_t base_seed = 0;
  /// Sweep cells evaluated concurrently.
  int cell_jobs = 1;

  void validate() const {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (detectors.empty()) throw ConfigError("at least one detector is required");
    if (cell_jobs < 1) throw ConfigError("cell_jobs must be >= 1");
    if (sweep) {
      if (!is_sweep_parameter(sweep->parameter)) {
        throw ConfigError("unknown sweep parameter '" + sweep->parameter + "'");
      }
      if (sweep->values.empty()) throw ConfigError("sweep needs at least one value");
    }
    detection.validate();
  }
};

/// Reads the "experiment" block of a config file. Attack and detection
/// settings come from the file's own blocks.
inline ExperimentSpec experiment_spec_from_json(const Json& j, const AttackConfig& attack,
                                                const DetectionConfig& detection) {
  io_detail::check_keys(j, {"dataset", "sweep", "detectors", "repeats", "base_seed", "cell_jobs"},
                        "experiment config");
  ExperimentSpec s;
  s.attack = attack;
  s.detection = detection;
  io_detail::read_opt(j, "dataset", s.dataset_dir);
  if (j.contains("sweep")) {
    const Json& sw = j.at("sweep");
    io_detail::check_keys(sw, {"parameter", "values"}, "sweep");
    Sweep sweep;
    io_detail::read_opt(sw, "parameter", sweep.parameter);
    io_detail::read_opt(sw, "values", sweep.values);
    s.sweep = std::move(sweep);
  }
  if (j.contains("detectors")) {
    s.detectors.clear();
    for (const auto& d : j.at("detectors")) s.detectors.push_back(parse_detector(d.get<std::string>()));
  }
  io_detail::read_opt(j, "repeats", s.repeats);
  io_detail::read_opt(j, "base_seed", s.base_seed);
  io_detail::read_opt(j, "cell_jobs", s.cell_jobs);
  return s;
}

/// One row of the per-run CSV. Metric fields are empty for failed runs.
struct RunRow {
  std::string run_id;
  std::string dataset;
  std::string attack;
  std::string detector;
  std::string sweep_param;
  std::optional<double> sweep_value;
  std::uint64_t seed = 0;
  std::optional<double> accuracy;
  std::optional<double> auc;
  std::optional<double> precision;
  int n_flagged = 0;
  int n_poisoned = 0;
  double wall_seconds = 0.0;
  std::string error;

  [[nodiscard]] bool ok() const { return error.empty(); }
};

/// Poisons `ds` with the configured attack. ExA trains its own surrogate.
inline PoisonedDataset poison_dataset(const Dataset& ds, const AttackConfig& attack,
                                      ModelConfig surrogate_config = {}) {
  if (attack.method == AttackMethod::exa) {
    surrogate_config.seed = derive_seed(attack.seed, 0x5u);
    return inject_exa(ds, attack, train_exa_surrogate(ds, surrogate_config));
  }
  return inject_badgraph(ds, attack);
}

namespace experiment_detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline void fill_metrics(RunRow& row, const std::vector<bool>& flags, const std::vector<double>& scores,
                         const std::vector<bool>& truth) {
  const Metrics m = evaluate_detection(flags, scores, truth);
  row.accuracy = m.accuracy;
  row.auc = m.auc;
  row.precision = m.precision;
  row.n_flagged = m.num_flagged;
  row.n_poisoned = m.num_poisoned;
}

inline void apply_sweep(const std::string& p, double v, AttackConfig& a, DetectionConfig& d) {
  if (p == "trigger_size") a.trigger_size = v;
  else if (p == "trigger_density") a.trigger_density = v;
  else if (p == "injection_ratio") a.injection_ratio = v;
  else if (p == "gamma") d.gamma = v;
  else if (p == "tau") d.tau = v;
}

}  // namespace experiment_detail

/// All rows for one repeat: every detector, and every tau value when tau is
/// swept (those share one trained pipeline and only re-threshold).
inline std::vector<RunRow> run_repeat(const Dataset& ds, const ExperimentSpec& spec,
                                      std::optional<double> sweep_value, int repeat) {
  using namespace experiment_detail;
  const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(repeat);
  AttackConfig attack = spec.attack;
  DetectionConfig det = spec.detection;
  const std::string param = spec.sweep ? spec.sweep->parameter : "";
  const bool tau_sweep = param == "tau";
  if (sweep_value && !tau_sweep) apply_sweep(param, *sweep_value, attack, det);
  attack.seed = seed;
  det.seed = seed;
  det.model_config.seed = seed;

  std::vector<double> taus;
  if (tau_sweep) taus = spec.sweep->values;

  auto base_row = [&](Detector d, std::optional<double> value) {
    RunRow row;
    row.dataset = ds.name;
    row.attack = to_string(attack.method);
    row.detector = to_string(d);
    row.sweep_param = param;
    row.sweep_value = value;
    row.seed = seed;
    std::ostringstream id;
    id << to_string(d) << "-" << (param.empty() ? "none" : param) << "-"
       << (value ? format_double(*value) : "na") << "-s" << seed;
    row.run_id = id.str();
    return row;
  };

  std::vector<RunRow> rows;
  auto t0 = Clock::now();
  PoisonedDataset pd;
  std::string poison_error;
  try {
    pd = poison_dataset(ds, attack, det.model_config);
  } catch (const std::exception& e) {
    poison_error = e.what();
  }
  const double poison_seconds = seconds_since(t0);

  for (Detector d : spec.detectors) {
    const std::vector<std::optional<double>> values =
        tau_sweep ? std::vector<std::optional<double>>(taus.begin(), taus.end())
                  : std::vector<std::optional<double>>{sweep_value};
    if (!poison_error.empty()) {
      for (const auto& v : values) {
        RunRow row = base_row(d, v);
        row.error = "poison: " + poison_error;
        rows.push_back(std::move(row));
      }
      continue;
    }
    const std::vector<bool> truth = pd.truth();
    const auto t1 = Clock::now();
    try {
      if (d == Detector::xgbd) {
        const DetectionReport report = run_xgbd(pd.dataset, det);
        const double wall = poison_seconds + seconds_since(t1);
        for (const auto& v : values) {
          RunRow row = base_row(d, v);
          const DetectionReport r = v && tau_sweep ? rethreshold(report, *v) : report;
          fill_metrics(row, r.flags(), r.scores(), truth);
          row.wall_seconds = wall;
          rows.push_back(std::move(row));
        }
      } else {
        const BaselineResult b = d == Detector::abl
                                     ? baseline_abl(pd.dataset, det.model_config, det.gamma, attack.injection_ratio)
                                     : baseline_loss_isolation(pd.dataset, det.model_config, attack.injection_ratio);
        const double wall = poison_seconds + seconds_since(t1);
        for (const auto& v : values) {
          RunRow row = base_row(d, v);
          fill_metrics(row, b.flags(), b.scores(), truth);
          row.wall_seconds = wall;
          rows.push_back(std::move(row));
        }
      }
    } catch (const std::exception& e) {
      for (const auto& v : values) {
        RunRow row = base_row(d, v);
        row.error = e.what();
        row.wall_seconds = poison_seconds + seconds_since(t1);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

inline std::vector<RunRow> run_experiment(const Dataset& ds, const ExperimentSpec& spec) {
  spec.validate();
  std::vector<std::optional<double>> cell_values{std::nullopt};
  if (spec.sweep && spec.sweep->parameter != "tau") {
    cell_values.assign(spec.sweep->values.begin(), spec.sweep->values.end());
  }
  const int n_cells = static_cast<int>(cell_values.size()) * spec.repeats;
  auto per_cell = parallel_map(n_cells, spec.cell_jobs, [&](int c) {
    return run_repeat(ds, spec, cell_values[c / spec.repeats], c % spec.repeats);
  });
  std::vector<RunRow> rows;
  for (auto& cell : per_cell) rows.insert(rows.end(), cell.begin(), cell.end());
  return rows;
}

/// Dataset name of a TU directory: its last path component.
inline std::string tu_name(const std::filesystem::path& dir) {
  auto p = dir;
  if (!p.has_filename()) p = p.parent_path();
  return p.filename().string();
}

inline Dataset load_tu_dir(const std::filesystem::path& dir) { return parse_tu_dataset(dir, tu_name(dir)); }

inline std::vector<RunRow> run_experiment(const ExperimentSpec& spec) {
  if (spec.dataset_dir.empty()) throw ConfigError("experiment needs a dataset directory");
  return run_experiment(load_tu_dir(spec.dataset_dir), spec);
}

// ---- CSV ----

inline constexpr const char* kRunCsvHeader =
    "run_id,dataset,attack,sweep_param,sweep_value,seed,accuracy,auc,precision,n_flagged,n_poisoned,"
    "wall_seconds";

namespace experiment_detail {

inline std::string opt_field(const std::optional<double>& x) { return x ? format_double(*x) : ""; }

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace experiment_detail

inline std::string runs_csv(const std::vector<RunRow>& rows) {
  using experiment_detail::opt_field;
  std::string out = std::string(kRunCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += r.run_id + "," + r.dataset + "," + r.attack + "," + r.sweep_param + "," + opt_field(r.sweep_value) +
           "," + std::to_string(r.seed) + "," + opt_field(r.accuracy) + "," + opt_field(r.auc) + "," +
           opt_field(r.precision) + "," + std::to_string(r.n_flagged) + "," + std::to_string(r.n_poisoned) + "," +
           format_double(r.wall_seconds) + "\n";
  }
  return out;
}

/// Reads rows written by runs_csv. Detector and error are recovered from the
/// run id and the empty accuracy field.
inline std::vector<RunRow> parse_runs_csv(const std::string& text) {
  using namespace experiment_detail;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (split_csv_line(line) != split_csv_line(kRunCsvHeader)) throw ParseError("unexpected run CSV header");
  std::vector<RunRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 12) throw ParseError("run CSV row has " + std::to_string(f.size()) + " fields");
    RunRow r;
    r.run_id = f[0];
    r.dataset = f[1];
    r.attack = f[2];
    r.detector = r.run_id.substr(0, r.run_id.find('-'));
    r.sweep_param = f[3];
    r.sweep_value = parse_opt(f[4]);
    r.seed = std::stoull(f[5]);
    r.accuracy = parse_opt(f[6]);
    r.auc = parse_opt(f[7]);
    r.precision = parse_opt(f[8]);
    r.n_flagged = std::stoi(f[9]);
    r.n_poisoned = std::stoi(f[10]);
    r.wall_seconds = std::stod(f[11]);
    if (!r.accuracy) r.error = "failed";
    rows.push_back(std::move(r));
  }
  return rows;
}

struct AggregateRow {
  std::string dataset;
  std::string attack;
  std::string detector;
  std::string sweep_param;
  std::optional<double> sweep_value;
  int n_runs = 0;
  int n_failed = 0;
  MeanStd accuracy;
  MeanStd auc;
  MeanStd precision;
  double wall_seconds_mean = 0.0;
};

/// Groups rows by (dataset, attack, detector, sweep value) in first-seen order.
/// Statistics cover successful runs only.
inline std::vector<AggregateRow> aggregate(const std::vector<RunRow>& rows) {
  struct Acc {
    AggregateRow row;
    std::vector<double> acc, auc, prec, wall;
  };
  std::vector<Acc> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Acc& g) {
      return g.row.dataset == r.dataset && g.row.attack == r.attack && g.row.detector == r.detector &&
             g.row.sweep_param == r.sweep_param && g.row.sweep_value == r.sweep_value;
    });
    if (it == groups.end()) {
      Acc a;
      a.row.dataset = r.dataset;
      a.row.attack = r.attack;
      a.row.detector = r.detector;
      a.row.sweep_param = r.sweep_param;
      a.row.sweep_value = r.sweep_value;
      groups.push_back(std::move(a));
      it = std::prev(groups.end());
    }
    it->row.n_runs += 1;
    if (!r.ok()) {
      it->row.n_failed += 1;
      continue;
    }
    it->acc.push_back(*r.accuracy);
    if (r.auc) it->auc.push_back(*r.auc);
    if (r.precision) it->prec.push_back(*r.precision);
    it->wall.push_back(r.wall_seconds);
  }
  std::vector<AggregateRow> out;
  for (auto& g : groups) {
    g.row.accuracy = mean_std(g.acc);
    g.row.auc = mean_std(g.auc);
    g.row.precision = mean_std(g.prec);
    g.row.wall_seconds_mean = mean_std(g.wall).mean;
    out.push_back(std::move(g.row));
  }
  return out;
}

/// "0.98±0.02" style cell.
inline std::string pm(const MeanStd& m) {
  if (m.count == 0) return "";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << m.mean << "±" << m.std;
  return os.str();
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  using experiment_detail::opt_field;
  std::string out =
      "dataset,attack,detector,sweep_param,sweep_value,n_runs,n_failed,accuracy_mean,accuracy_std,auc_mean,"
      "auc_std,precision_mean,precision_std,wall_seconds_mean,accuracy_pm,auc_pm\n";
  auto ms = [](const MeanStd& m) {
    return m.count == 0 ? std::string(",") : format_double(m.mean) + "," + format_double(m.std);
  };
  for (const auto& r : rows) {
    out += r.dataset + "," + r.attack + "," + r.detector + "," + r.sweep_param + "," + opt_field(r.sweep_value) +
           "," + std::to_string(r.n_runs) + "," + std::to_string(r.n_failed) + "," + ms(r.accuracy) + "," +
           ms(r.auc) + "," + ms(r.precision) + "," + format_double(r.wall_seconds_mean) + "," + pm(r.accuracy) +
           "," + pm(r.auc) + "\n";
  }
  return out;
}

/// Writes runs.csv, aggregate.csv and (when any run failed) failures.txt.
inline void write_experiment(const std::filesystem::path& out_dir, const std::vector<RunRow>& rows) {
  io_detail::write_text(out_dir / "runs.csv", runs_csv(rows));
  io_detail::write_text(out_dir / "aggregate.csv", aggregate_csv(aggregate(rows)));
  std::string failures;
  for (const auto& r : rows) {
    if (!r.ok()) failures += r.run_id + ": " + r.error + "\n";
  }
  if (!failures.empty()) io_detail::write_text(out_dir / "failures.txt", failures);
}

}  // namespace xgbd
