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
// Acceptance run: one PASS/FAIL/BLOCKED line per criterion, then INFO lines
// with supporting measurements. Exit status is 0 only when every criterion
// passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "xgbd/checks.hpp"
#include "xgbd/experiment.hpp"

namespace {

using namespace xgbd;
using Clock = std::chrono::steady_clock;

constexpr int kSeeds = 5;
constexpr double kLossSplit = 0.005;
constexpr double kHeldOutFraction = 0.2;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << x;
  return os.str();
}

struct Outcome {
  int id;
  std::string name;
  std::string status;  // PASS, FAIL or BLOCKED
  std::string detail;
};

std::vector<Outcome> outcomes;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  outcomes.push_back({id, name, pass ? "PASS" : "FAIL", detail});
}

void info(const std::string& line) { std::cout << "INFO " << line << std::endl; }

double opt_or_zero(const std::optional<double>& x) { return x.value_or(0.0); }

// ---- 9: parser fidelity ----

std::vector<std::string> normalized_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    std::string t;
    for (char c : line) {
      if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    }
    if (!t.empty()) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void parser_fidelity(const Dataset& mutag, const std::filesystem::path& src) {
  const bool counts = mutag.size() == 188 && mutag.num_classes == 2;
  const bool means = std::abs(mutag.mean_nodes() - 17.93) <= 0.01 && std::abs(mutag.mean_edges() - 19.79) <= 0.01;
  const auto dir = std::filesystem::temp_directory_path() / "xgbd_acceptance_tu";
  std::filesystem::remove_all(dir);
  write_tu_dataset(mutag, dir, "MUTAG");
  bool files_equal = true;
  std::string mismatched;
  for (const char* suffix : {"A", "graph_indicator", "graph_labels", "node_labels"}) {
    const std::string f = std::string("MUTAG_") + suffix + ".txt";
    if (normalized_lines(src / f) != normalized_lines(dir / f)) {
      files_equal = false;
      mismatched += " " + f;
    }
  }
  const bool reparsed = parse_tu_dataset(dir, "MUTAG").graphs == mutag.graphs;
  report(9, "parser fidelity", counts && means && files_equal && reparsed,
         "graphs=" + std::to_string(mutag.size()) + " classes=" + std::to_string(mutag.num_classes) +
             " mean_nodes=" + fmt(mutag.mean_nodes()) + " mean_edges=" + fmt(mutag.mean_edges()) +
             " roundtrip_files=" + (files_equal ? "equal" : "differ:" + mismatched) +
             " reparse=" + (reparsed ? "equal" : "differs"));
}

// ---- 6, 7, 8: oracles ----

void gradient_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string parts;
  for (auto kind : {checks::GradientKind::standard, checks::GradientKind::trap, checks::GradientKind::edge_mask}) {
    const auto r = checks::check_gradients(kind, 50, 0);
    worst = std::max(worst, r.max_relative_error);
    parts += " " + checks::to_string(kind) + "=" + format_double(r.max_relative_error) + "/" +
             std::to_string(r.checked);
  }
  const double secs = since(t0);
  report(6, "gradient oracle", worst < 1e-4 && secs < 60.0,
         "max_rel_err" + parts + " seconds=" + fmt(secs, 2));
}

void explainer_oracle() {
  const auto t0 = Clock::now();
  const auto r = checks::check_explainer(30, 12, 200, 0.95, 0);
  const double secs = since(t0);
  report(7, "explainer oracle", r.fraction() >= 0.8 && secs < 300.0,
         std::to_string(r.within) + "/" + std::to_string(r.graphs) + " within 95% of brute force, seconds=" +
             fmt(secs, 2));
}

void statistical_oracles() {
  const double auc_gap = checks::check_auc(1000, 0);
  const double er_dense = checks::check_er_frequency(8, 0.8, 10000);
  const double er_sparse = checks::check_er_frequency(10, 0.35, 10000);
  report(8, "statistical oracles", auc_gap < 1e-12 && er_dense <= 0.02 && er_sparse <= 0.02,
         "auc_max_diff=" + format_double(auc_gap) + " er_max_dev(d=0.8)=" + fmt(er_dense) +
             " er_max_dev(d=0.35)=" + fmt(er_sparse));
}

// ---- 10: attack efficacy ----

bool attack_efficacy(const Dataset& mutag) {
  int hits = 0, stamped = 0;
  std::string per_seed;
  for (int s = 0; s < kSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    Rng rng = make_rng(derive_seed(seed, 0xa11));
    std::vector<int> order(static_cast<std::size_t>(mutag.size()));
    for (int i = 0; i < mutag.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const int n_held = round_half_up(kHeldOutFraction * mutag.size());
    Dataset train_part = mutag, held = mutag;
    train_part.graphs.clear();
    held.graphs.clear();
    for (int k = 0; k < mutag.size(); ++k) {
      const Graph& g = mutag.graphs[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
      (k < n_held ? held : train_part).graphs.push_back(g);
    }
    AttackConfig attack;
    attack.seed = seed;
    const PoisonedDataset pd = inject_badgraph(train_part, attack);
    ModelConfig mc;
    mc.seed = seed;
    mc.num_classes = mutag.num_classes;
    const GinParams model = train_standard(pd.dataset, mc).params;
    int h = 0, n = 0;
    for (std::size_t i = 0; i < held.graphs.size(); ++i) {
      const Graph& g = held.graphs[i];
      if (g.label() == attack.target_label) continue;
      const Graph p = stamp_trigger(g, pd.trigger, attack.target_label, derive_seed(seed, 0xb00 + i));
      h += predict(model, p) == attack.target_label;
      ++n;
    }
    hits += h;
    stamped += n;
    per_seed += " s" + std::to_string(s) + "=" + std::to_string(h) + "/" + std::to_string(n);
  }
  const double asr = stamped ? static_cast<double>(hits) / stamped : 0.0;
  report(10, "attack efficacy", asr >= 0.9, "held_out_asr=" + fmt(asr) + per_seed);
  return asr >= 0.9;
}

// ---- 1-5: detection on poisoned MUTAG ----

struct SeedRun {
  std::vector<bool> truth;
  DetectionReport full;
  Metrics full_m, induced_m, expanded_m, naive_m, abl_m;
  double seconds = 0.0;
  // diagnostics under the standard-trained (backdoored) model
  int recovered = 0;
  int trigger_loss_low = 0;
  int poisoned = 0;
};

SeedRun run_seed(const Dataset& mutag, int s, int jobs) {
  const auto t0 = Clock::now();
  const auto seed = static_cast<std::uint64_t>(s);
  SeedRun out;
  AttackConfig attack;
  attack.seed = seed;
  const PoisonedDataset pd = poison_dataset(mutag, attack);
  const Dataset& ds = pd.dataset;
  out.truth = pd.truth();

  DetectionConfig det;
  det.seed = seed;
  det.model_config.seed = seed;
  det.jobs = jobs;
  out.full = run_xgbd(ds, det);
  out.full_m = evaluate_detection(out.full.flags(), out.full.scores(), out.truth);

  DetectionConfig std_det = det;
  std_det.trap_loss = false;
  const GinParams backdoored = train_detector(ds, std_det).params;
  const auto ex = explain_dataset(ds, backdoored, std_det);
  const DetectionReport expanded = score_samples(ds, backdoored, std_det, &ex);
  std_det.expand = false;
  const DetectionReport induced = score_samples(ds, backdoored, std_det, &ex);
  out.expanded_m = evaluate_detection(expanded.flags(), expanded.scores(), out.truth);
  out.induced_m = evaluate_detection(induced.flags(), induced.scores(), out.truth);

  const BaselineResult naive = baseline_loss_isolation(ds, det.model_config, attack.injection_ratio);
  out.naive_m = evaluate_detection(naive.flags(), naive.scores(), out.truth);
  const BaselineResult abl = baseline_abl(ds, det.model_config, det.gamma, attack.injection_ratio);
  out.abl_m = evaluate_detection(abl.flags(), abl.scores(), out.truth);

  const int need = static_cast<int>(std::ceil(0.75 * pd.trigger.size()));
  for (const auto& r : pd.records) {
    const Graph& g = ds.graphs[static_cast<std::size_t>(r.graph_index)];
    const NodeSet& found = ex[static_cast<std::size_t>(r.graph_index)].node_set;
    out.recovered += found.set_intersection(r.poisoned_nodes).size() >= need;
    out.trigger_loss_low +=
        subgraph_loss(backdoored, expand_one_hop(g, r.poisoned_nodes), g.label()) < kLossSplit;
    ++out.poisoned;
  }
  out.seconds = since(t0);
  return out;
}

void detection_criteria(const Dataset& mutag, int jobs, bool unblocked) {
  std::vector<SeedRun> runs;
  for (int s = 0; s < kSeeds; ++s) {
    runs.push_back(run_seed(mutag, s, jobs));
    const SeedRun& r = runs.back();
    info("seed " + std::to_string(s) + ": full acc=" + fmt(r.full_m.accuracy) + " auc=" + fmt(opt_or_zero(r.full_m.auc)) +
         " prec=" + fmt(opt_or_zero(r.full_m.precision)) + " flagged=" + std::to_string(r.full_m.num_flagged) +
         " | induced acc=" + fmt(r.induced_m.accuracy) + " | expanded acc=" + fmt(r.expanded_m.accuracy) +
         " | naive acc=" + fmt(r.naive_m.accuracy) + " prec=" + fmt(opt_or_zero(r.naive_m.precision)) +
         " | abl auc=" + fmt(opt_or_zero(r.abl_m.auc)) + " | seconds=" + fmt(r.seconds, 1));
  }
  auto mean_of = [&](auto get) {
    double t = 0.0;
    for (const auto& r : runs) t += get(r);
    return t / static_cast<double>(runs.size());
  };

  // 1
  const double acc = mean_of([](const SeedRun& r) { return r.full_m.accuracy; });
  const double auc = mean_of([](const SeedRun& r) { return opt_or_zero(r.full_m.auc); });
  double total_seconds = 0.0;
  for (const auto& r : runs) total_seconds += r.seconds;
  report(1, "end-to-end detection", acc >= 0.90 && auc >= 0.85,
         "mean_accuracy=" + fmt(acc) + " mean_auc=" + fmt(auc) + " seconds=" + fmt(total_seconds, 1));

  // 2
  int p_low = 0, p_n = 0, c_high = 0, c_n = 0;
  for (const auto& r : runs) {
    for (const auto& s : r.full.per_sample) {
      if (r.truth[static_cast<std::size_t>(s.graph_index)]) {
        ++p_n;
        p_low += s.subgraph_loss < kLossSplit;
      } else {
        ++c_n;
        c_high += s.subgraph_loss >= kLossSplit;
      }
    }
  }
  const double p_frac = static_cast<double>(p_low) / p_n, c_frac = static_cast<double>(c_high) / c_n;
  report(2, "loss separation", p_frac >= 0.9 && c_frac >= 0.9,
         "poisoned_below=" + std::to_string(p_low) + "/" + std::to_string(p_n) + " clean_at_or_above=" +
             std::to_string(c_high) + "/" + std::to_string(c_n));

  // 3
  int prec_wins = 0, auc_wins = 0;
  for (const auto& r : runs) {
    prec_wins += opt_or_zero(r.naive_m.precision) < opt_or_zero(r.full_m.precision);
    auc_wins += opt_or_zero(r.abl_m.auc) < opt_or_zero(r.full_m.auc);
  }
  report(3, "baseline ordering", prec_wins >= 4 && auc_wins >= 4,
         "isolation_precision_below=" + std::to_string(prec_wins) + "/5 abl_auc_below=" + std::to_string(auc_wins) +
             "/5");

  // 4
  const double a_naive = mean_of([](const SeedRun& r) { return r.naive_m.accuracy; });
  const double a_ind = mean_of([](const SeedRun& r) { return r.induced_m.accuracy; });
  const double a_exp = mean_of([](const SeedRun& r) { return r.expanded_m.accuracy; });
  report(4, "component ablation", a_naive <= a_ind && a_ind <= a_exp && a_exp <= acc,
         "naive=" + fmt(a_naive) + " explainer_only=" + fmt(a_ind) + " with_expansion=" + fmt(a_exp) +
             " full=" + fmt(acc));

  if (!unblocked) {
    for (auto& o : outcomes) {
      if (o.id >= 1 && o.id <= 4) {
        o.status = "BLOCKED";
        o.detail += " (attack efficacy precondition not met)";
      }
    }
  }

  // 5
  double lo = 1.0, hi = 0.0;
  std::string cells;
  for (double tau : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2}) {
    const DetectionReport r = rethreshold(runs[0].full, tau);
    const double a = evaluate_detection(r.flags(), r.scores(), runs[0].truth).accuracy;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    cells += " " + format_double(tau) + ":" + fmt(a);
  }
  report(5, "tau stability", hi - lo < 0.05, "spread=" + fmt(hi - lo) + cells);

  // derived measurements on the same runs
  int rec = 0, low = 0, pois = 0;
  for (const auto& r : runs) {
    rec += r.recovered;
    low += r.trigger_loss_low;
    pois += r.poisoned;
  }
  info("trigger recovery (>= 3 of 4 trigger nodes in the explanation, backdoored model): " + std::to_string(rec) + "/" +
       std::to_string(pois) + " = " + fmt(static_cast<double>(rec) / pois) + " (example target 0.80)");
  info("expanded true-trigger subgraph loss < 0.005 (backdoored model): " + std::to_string(low) + "/" +
       std::to_string(pois) + " = " + fmt(static_cast<double>(low) / pois) + " (example target 0.95)");
  const double naive_prec = mean_of([](const SeedRun& r) { return opt_or_zero(r.naive_m.precision); });
  info("loss-isolation mean precision: " + fmt(naive_prec) + " (example target < 0.6)");
}

void clean_false_positives(const Dataset& mutag, int jobs) {
  DetectionConfig det;
  det.jobs = jobs;
  const DetectionReport r = run_xgbd(mutag, det);
  info("clean MUTAG flagged at defaults: " + std::to_string(r.flagged_set.size()) + "/" +
       std::to_string(mutag.size()) + " (example target <= 2%)");
}

}  // namespace

int main(int argc, char** argv) {
  int jobs = 1;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--jobs" && i + 1 < argc) {
      jobs = std::max(1, std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--jobs N]\n";
      return 2;
    }
  }
  const auto t0 = Clock::now();
  const std::filesystem::path src = std::filesystem::path(XGBD_DATA_DIR) / "MUTAG";
  const Dataset mutag = load_tu_dir(src);

  parser_fidelity(mutag, src);
  statistical_oracles();
  gradient_oracle();
  explainer_oracle();
  const bool unblocked = attack_efficacy(mutag);
  detection_criteria(mutag, jobs, unblocked);
  clean_false_positives(mutag, jobs);

  std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  int passed = 0;
  for (const auto& o : outcomes) {
    std::cout << o.status << " " << o.id << " " << o.name << ": " << o.detail << "\n";
    passed += o.status == "PASS";
  }
  std::cout << passed << "/" << outcomes.size() << " criteria passed in " << fmt(since(t0), 1) << " s\n";
  return passed == static_cast<int>(outcomes.size()) ? 0 : 1;
}
