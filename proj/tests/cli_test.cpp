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
#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"
#include "xgbd/cli.hpp"

namespace xgbd {
namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "xgbd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// A TU directory named "tiny" plus a fast config, written once per test.
class CliPipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = testing::scratch_dir(std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    Dataset ds;
    ds.name = "tiny";
    ds.num_classes = 2;
    ds.feature_dim = 3;
    ds.node_label_values = {0, 1, 2};
    for (int i = 0; i < 24; ++i) ds.graphs.push_back(testing::random_connected(10 + i % 4, 0.3, 3, 50 + i, i % 2));
    write_tu_dataset(ds, root_ / "tiny", "tiny");
    testing::write_file(root_ / "config.json", R"({
  "version": 1,
  "attack": {"trigger_size": 0.2},
  "detection": {
    "tau": 0.001,
    "model": {"epochs": 3, "hidden_dim": 8},
    "explainer_config": {"mcts_rollouts": 8, "shapley_samples": 10}
  },
  "experiment": {"repeats": 2, "detectors": ["xgbd", "loss_isolation"]}
})");
  }

  std::string dataset() const { return (root_ / "tiny").string(); }
  std::string config() const { return (root_ / "config.json").string(); }
  std::string out(const std::string& sub) const { return (root_ / sub).string(); }

  std::filesystem::path root_;
};

TEST(CliUsage, NoSubcommandIsUsageError) { EXPECT_EQ(run({}).code, 2); }

TEST(CliUsage, HelpExitsZero) {
  const Result r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("poison"), std::string::npos);
  EXPECT_NE(r.out.find("selftest"), std::string::npos);
}

TEST(CliUsage, UnknownFlagOrSubcommand) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"selftest", "--fast"}).code, 2);
  EXPECT_EQ(run({"train", "--dataset", "x", "--mode", "fancy"}).code, 2);
  EXPECT_EQ(run({"poison"}).code, 2);
  EXPECT_EQ(run({"--jobs", "0", "selftest"}).code, 2);
  EXPECT_EQ(run({"--seed", "abc", "selftest"}).code, 2);
}

TEST(CliUsage, MissingConfigFileIsUsageError) {
  EXPECT_EQ(run({"--config", "/nonexistent/config.json", "selftest"}).code, 2);
}

TEST(CliUsage, UnknownConfigKeyIsUsageError) {
  const auto dir = testing::scratch_dir("cli_badkey");
  testing::write_file(dir / "c.json", R"({"detection": {"tua": 0.1}})");
  const Result r = run({"--config", (dir / "c.json").string(), "poison", "--dataset", "x"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown key 'tua'"), std::string::npos) << r.err;
  testing::write_file(dir / "v.json", R"({"version": 9})");
  EXPECT_EQ(run({"--config", (dir / "v.json").string(), "poison", "--dataset", "x"}).code, 2);
  testing::write_file(dir / "e.json", R"({"experiment": {"repeatz": 1}})");
  EXPECT_EQ(run({"--config", (dir / "e.json").string(), "poison", "--dataset", "x"}).code, 2);
}

TEST(CliUsage, ConfigFromJsonBlocks) {
  const cli::Config c = cli::config_from_json(Json{{"attack", {{"injection_ratio", 0.2}}},
                                                   {"detection", {{"gamma", 0.3}}}});
  EXPECT_DOUBLE_EQ(c.attack.injection_ratio, 0.2);
  EXPECT_DOUBLE_EQ(c.detection.gamma, 0.3);
  EXPECT_THROW(cli::config_from_json(Json{{"attacks", Json::object()}}), ConfigError);
}

TEST(CliRuntime, MissingDatasetIsRuntimeError) {
  const Result r = run({"poison", "--dataset", "/nonexistent/DATA"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/nonexistent/DATA"), std::string::npos) << r.err;
}

TEST(CliRuntime, BadValueOnCommandLineIsRuntimeError) {
  EXPECT_EQ(run({"detect", "--dataset", "x", "--tau", "-1"}).code, 1);
}

TEST_F(CliPipeline, PoisonTrainExplainDetectEval) {
  const std::string o = out("run");
  Result r = run({"--config", config(), "--seed", "3", "--out", o, "--quiet", "poison", "--dataset", dataset()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "");
  const PoisonManifest m = load_manifest(root_ / "run" / "manifest.json");
  EXPECT_EQ(m.num_graphs, 24);
  EXPECT_EQ(m.config.seed, 3u);
  EXPECT_EQ(m.records.size(), 2u);
  const std::string poisoned = (root_ / "run" / "tiny").string();
  EXPECT_EQ(load_tu_dir(poisoned).size(), 24);

  r = run({"--config", config(), "--seed", "3", "--out", o, "train", "--dataset", poisoned, "--mode", "standard"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("trained (standard) for 3 epochs"), std::string::npos) << r.out;
  const Checkpoint ck = load_checkpoint(root_ / "run" / "model.json");
  EXPECT_EQ(ck.config.epochs, 3);
  EXPECT_EQ(ck.params.input_dim(), 3);
  const std::string trace = testing::read_file(root_ / "run" / "loss_trace.csv");
  EXPECT_EQ(trace.rfind("epoch,graph_index,loss\n", 0), 0u);

  const std::string model = (root_ / "run" / "model.json").string();
  r = run({"--config", config(), "--seed", "3", "--out", o, "--jobs", "2", "explain", "--dataset", poisoned,
           "--model", model});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto records = load_explanations(root_ / "run" / "explanations.jsonl");
  ASSERT_EQ(records.size(), 24u);
  EXPECT_EQ(records[5].seed, sample_seed(3, 5));
  EXPECT_EQ(records[0].explanation.method, "subgraphx");

  // Detection from stored explanations equals scoring from scratch.
  const std::string ex = (root_ / "run" / "explanations.jsonl").string();
  const std::string manifest = (root_ / "run" / "manifest.json").string();
  r = run({"--config", config(), "--seed", "3", "--out", out("staged"), "detect", "--dataset", poisoned, "--model",
           model, "--explanations", ex, "--attack-manifest", manifest});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("accuracy,auc,precision,n_flagged,n_poisoned"), std::string::npos);
  r = run({"--config", config(), "--seed", "3", "--out", out("direct"), "detect", "--dataset", poisoned,
           "--model", model, "--attack-manifest", manifest});
  ASSERT_EQ(r.code, 0) << r.err;
  const DetectionReport staged = load_report(root_ / "staged" / "report.json");
  const DetectionReport direct = load_report(root_ / "direct" / "report.json");
  EXPECT_EQ(report_csv(staged), report_csv(direct));
  const std::string csv = testing::read_file(root_ / "staged" / "report.csv");
  EXPECT_EQ(csv.rfind("graph_index,loss,flagged,is_poisoned\n", 0), 0u);

  r = run({"--out", out("eval"), "eval", "--report", (root_ / "staged" / "report.json").string(), "--manifest",
           manifest, "--tau", "1000"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json metrics = io_detail::read_json_file(root_ / "eval" / "metrics.json");
  EXPECT_EQ(metrics.at("n_flagged").get<int>(), 24);
  EXPECT_EQ(metrics.at("n_poisoned").get<int>(), 2);
  EXPECT_DOUBLE_EQ(metrics.at("accuracy").get<double>(), 2.0 / 24.0);
  EXPECT_DOUBLE_EQ(metrics.at("tau").get<double>(), 1000.0);
}

TEST_F(CliPipeline, DetectTrainsWhenNoModelGiven) {
  const Result r = run({"--config", config(), "--out", out("d"), "--quiet", "detect", "--dataset", dataset(),
                        "--tau", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(root_ / "d" / "model.json"));
  const DetectionReport rep = load_report(root_ / "d" / "report.json");
  EXPECT_DOUBLE_EQ(rep.config.tau, 0.5);
  EXPECT_TRUE(rep.config.trap_loss);
  EXPECT_EQ(testing::read_file(root_ / "d" / "report.csv").rfind("graph_index,loss,flagged\n", 0), 0u);
}

TEST_F(CliPipeline, ExplanationsNeedModel) {
  testing::write_file(root_ / "ex.jsonl", "");
  const Result r = run({"--config", config(), "--out", out("d"), "detect", "--dataset", dataset(),
                        "--explanations", (root_ / "ex.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--model"), std::string::npos);
}

TEST_F(CliPipeline, ManifestSizeMismatch) {
  ASSERT_EQ(run({"--config", config(), "--out", out("p"), "--quiet", "poison", "--dataset", dataset()}).code, 0);
  Dataset other;
  other.name = "other";
  other.num_classes = 2;
  other.feature_dim = 3;
  other.node_label_values = {0, 1, 2};
  for (int i = 0; i < 5; ++i) other.graphs.push_back(testing::random_connected(6, 0.5, 3, i, i % 2));
  write_tu_dataset(other, root_ / "other", "other");
  const Result r = run({"--config", config(), "--out", out("d"), "detect", "--dataset", (root_ / "other").string(),
                        "--attack-manifest", (root_ / "p" / "manifest.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("manifest covers 24 graphs"), std::string::npos) << r.err;
}

TEST_F(CliPipeline, TooSmallTriggerIsRuntimeError) {
  const Result r = run({"--config", config(), "--out", out("p"), "poison", "--dataset", dataset(), "--method",
                        "badgraph"});
  ASSERT_EQ(r.code, 0) << r.err;
  testing::write_file(root_ / "small.json", R"({"attack": {"trigger_size": 0.05}})");
  const Result bad = run({"--config", (root_ / "small.json").string(), "--out", out("q"), "poison", "--dataset",
                          dataset()});
  EXPECT_EQ(bad.code, 1);
}

TEST_F(CliPipeline, ExperimentWritesRunsAndAggregate) {
  const Result r = run({"--config", config(), "--seed", "4", "--out", out("exp"), "--quiet", "experiment",
                        "--dataset", dataset()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_runs_csv(testing::read_file(root_ / "exp" / "runs.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].seed, 4u);
  EXPECT_EQ(rows[3].seed, 5u);
  EXPECT_EQ(rows[1].detector, "loss_isolation");
  EXPECT_TRUE(std::filesystem::exists(root_ / "exp" / "aggregate.csv"));
  EXPECT_FALSE(std::filesystem::exists(root_ / "exp" / "failures.txt"));
}

TEST(CliRuntime, ExperimentNeedsDataset) {
  EXPECT_EQ(run({"--out", testing::scratch_dir("cli_exp").string(), "experiment"}).code, 1);
}

TEST(CliSelftest, OneLinePerCheckAndExitMatches) {
  const Result r = run({"selftest"});
  std::istringstream in(r.out);
  int lines = 0, failed = 0;
  for (std::string l; std::getline(in, l);) {
    ++lines;
    ASSERT_TRUE(l.rfind("PASS ", 0) == 0 || l.rfind("FAIL ", 0) == 0) << l;
    failed += l.rfind("FAIL ", 0) == 0;
  }
  EXPECT_EQ(lines, 6);
  EXPECT_EQ(r.code, failed ? 1 : 0);
  EXPECT_NE(r.out.find("PASS gradient/standard"), std::string::npos);
  EXPECT_NE(r.out.find("PASS gradient/trap"), std::string::npos);
  EXPECT_NE(r.out.find("PASS gradient/edge_mask"), std::string::npos);
  EXPECT_NE(r.out.find("PASS auc/pairwise"), std::string::npos);
}

}  // namespace
}  // namespace xgbd
