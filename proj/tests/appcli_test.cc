// Copyright 2026 The kpirl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kpirl/appcli/commands.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kpirl/appcli/formats.h"
#include "kpirl/dynmodel/checkpoint.h"
#include "kpirl/rng.h"

namespace kpirl {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "kpirl");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void Spit(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

// Fresh directory with a small config file.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::path(::testing::TempDir()) / (std::string("kpirl_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = nlohmann::json{{"out_dir", (dir_ / "run").string()},
                             {"demos", 3},
                             {"dyn_transitions", 600},
                             {"expert_transitions", 100},
                             {"eval_scenarios", 2},
                             {"dynamics", {{"epochs", 3}}},
                             {"irl", {{"iterations", 4}}},
                             {"airl", {{"iterations", 2}, {"episode_length", 3},
                                       {"discriminator_steps", 2}}},
                             {"eval", {{"max_steps", 3}}}};
    WriteConfig();
  }
  void WriteConfig() { Spit(ConfigPath(), config_.dump()); }
  std::string ConfigPath() const { return (dir_ / "config.json").string(); }
  std::string Run(const std::string& name) const { return (dir_ / "run" / name).string(); }
  CliRun Do(std::vector<std::string> args) {
    args.push_back("--config");
    args.push_back(ConfigPath());
    return Cli(args);
  }

  fs::path dir_;
  nlohmann::json config_;
};

TEST(FormatTest, DoublesRoundTrip) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.Uniform(-1, 1), static_cast<int>(rng.Below(80)) - 40);
    EXPECT_EQ(std::stod(FormatDouble(v)), v);
  }
}

TEST(FormatTest, ConfigHashTracksContent) {
  RunConfig a, b;
  EXPECT_EQ(ConfigHash(a), ConfigHash(b));
  EXPECT_EQ(ConfigHash(a).size(), 16u);
  b.seed = 1;
  EXPECT_NE(ConfigHash(a), ConfigHash(b));
  EXPECT_EQ(ConfigHash(ConfigFromJson(ConfigToJson(b))), ConfigHash(b));
}

TEST(FormatTest, DefaultsFollowProtocol) {
  const RunConfig c;
  EXPECT_EQ(c.demos, 20);
  EXPECT_EQ(c.eval_scenarios, 10);
  EXPECT_EQ(c.irl.eta, 0.001);
  EXPECT_EQ(c.irl.alpha, 0.01);
  EXPECT_EQ(c.irl.iterations, 500);
  EXPECT_EQ(c.airl.eta_v, 1e-2);
  EXPECT_EQ(c.airl.gamma, 0.99);
}

TEST_F(CliTest, BadConfigIsExitTwo) {
  config_["no_such_key"] = 1;
  WriteConfig();
  CliRun r = Do({"collect"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no_such_key"), std::string::npos);
  config_.erase("no_such_key");
  config_["demos"] = "many";
  WriteConfig();
  EXPECT_EQ(Do({"collect"}).code, 2);
  EXPECT_EQ(Cli({"collect", "--bogus"}).code, 2);
  EXPECT_EQ(Cli({}).code, 2);
  config_["demos"] = 3;
  WriteConfig();
  EXPECT_EQ(Do({"train-irl", "--variant", "quartic"}).code, 2);
}

TEST_F(CliTest, CollectWritesDatasets) {
  CliRun r = Do({"collect"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(ReadDemosJsonl(Run("demos.jsonl")).size(), 3u);
  EXPECT_EQ(ReadTransitionsJsonl(Run("transitions.jsonl")).size(), 600u);
  const nlohmann::json h = ReadJsonlHeader(Run("demos.jsonl"));
  RunConfig cfg = LoadConfig(ConfigPath());
  EXPECT_EQ(h["config_hash"], ConfigHash(cfg));
  EXPECT_EQ(h["seed"], 0);
  // refuses to clobber, then obeys --overwrite
  EXPECT_EQ(Do({"collect"}).code, 4);
  EXPECT_EQ(Do({"collect", "--overwrite"}).code, 0);
}

TEST_F(CliTest, DefaultDemoCount) {
  config_.erase("demos");
  WriteConfig();
  ASSERT_EQ(Do({"collect"}).code, 0);
  EXPECT_EQ(ReadJsonlHeader(Run("demos.jsonl"))["demos"], 20);
  EXPECT_EQ(ReadDemosJsonl(Run("demos.jsonl")).size(), 20u);
}

TEST_F(CliTest, ZeroDemosLeavesHeaderOnly) {
  config_["demos"] = 0;
  WriteConfig();
  ASSERT_EQ(Do({"collect"}).code, 0);
  const std::string text = Slurp(Run("demos.jsonl"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_TRUE(ReadDemosJsonl(Run("demos.jsonl")).empty());
}

TEST_F(CliTest, DemosRoundTripExactly) {
  ASSERT_EQ(Do({"collect"}).code, 0);
  const std::vector<Demonstration> d = ReadDemosJsonl(Run("demos.jsonl"));
  const std::string again = DemosJsonl(d, ReadJsonlHeader(Run("demos.jsonl")));
  EXPECT_EQ(again, Slurp(Run("demos.jsonl")));
}

// Every command twice into two directories: byte-identical outputs.
TEST_F(CliTest, EveryCommandIsDeterministic) {
  const std::vector<std::vector<std::string>> steps = {
      {"collect"}, {"train-dynamics"}, {"train-irl"},
      {"train-irl", "--baseline", "feature-matching"},
      {"train-airl"}, {"eval"}};
  for (const char* sub : {"a", "b"}) {
    for (auto args : steps) {
      args.push_back("--out");
      args.push_back((dir_ / sub).string());
      CliRun r = Do(args);
      ASSERT_EQ(r.code, 0) << args[0] << ": " << r.err;
    }
    CliRun r = Do({"plot-export", (dir_ / sub / "irl_weighted_curve.csv").string(),
                   (dir_ / sub / "fm_weighted_curve.csv").string(), "--out",
                   (dir_ / sub).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
    const fs::path other = dir_ / "b" / entry.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(Slurp(entry.path().string()), Slurp(other.string()))
        << entry.path().filename();
    ++files;
  }
  EXPECT_EQ(files, 13);
}

TEST_F(CliTest, OneIterationGivesOneRecord) {
  config_["irl"]["iterations"] = 1;
  WriteConfig();
  ASSERT_EQ(Do({"collect"}).code, 0);
  ASSERT_EQ(Do({"train-dynamics"}).code, 0);
  ASSERT_EQ(Do({"train-irl"}).code, 0);
  EXPECT_EQ(ReadCurveCsv(Run("irl_weighted_curve.csv")).rows.size(), 1u);
  const std::string text = Slurp(Run("irl_weighted_curve.csv"));
  EXPECT_EQ(text.rfind("# config_hash=", 0), 0u);
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  ASSERT_EQ(Do({"collect"}).code, 0);
  ASSERT_EQ(Do({"train-dynamics"}).code, 0);
  for (const char* variant : {"weighted", "rbf"}) {
    config_["irl"]["iterations"] = 8;
    WriteConfig();
    ASSERT_EQ(Do({"train-irl", "--variant", variant, "--overwrite"}).code, 0);
    const std::string full = Slurp(Run(std::string("irl_") + variant + "_curve.csv"));
    config_["irl"]["iterations"] = 3;
    WriteConfig();
    ASSERT_EQ(Do({"train-irl", "--variant", variant, "--overwrite"}).code, 0);
    fs::rename(Run(std::string("irl_") + variant + ".ckpt"), Run("partial.ckpt"));
    config_["irl"]["iterations"] = 8;
    WriteConfig();
    CliRun r = Do({"train-irl", "--variant", variant, "--overwrite", "--resume",
                   Run("partial.ckpt")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(Slurp(Run(std::string("irl_") + variant + "_curve.csv")), full) << variant;
  }
  CliRun bad = Do({"train-irl", "--variant", "timeweighted", "--overwrite", "--resume",
                   Run("partial.ckpt")});
  EXPECT_EQ(bad.code, 2);
}

// Demos planned by the inner planner itself under a known weight vector.
TEST_F(CliTest, SelfConsistentDemosAreRecovered) {
  config_["dyn_transitions"] = 3000;
  config_["dynamics"]["epochs"] = 30;
  config_["irl"]["iterations"] = 500;
  WriteConfig();
  ASSERT_EQ(Do({"collect"}).code, 0);
  ASSERT_EQ(Do({"train-dynamics"}).code, 0);
  const RunConfig cfg = LoadConfig(ConfigPath());
  MlpDynamics model(GetMlp(LoadCheckpoint(Run("dynamics.ckpt")), "dynamics"));
  CostParams truth = InitCostParams(CostVariant::kWeightedKeypoint, 10, -2.0, 0);
  truth.rho(2) = truth.rho(3) = 0.0;  // end-effector dominates
  std::vector<Demonstration> demos = ReadDemosJsonl(Run("demos.jsonl"));
  for (Demonstration& d : demos) {
    const IrlDemo base = PrepareDemo(d, cfg.irl.horizon);
    PlannerConfig pc;
    pc.horizon = base.horizon();
    const Plan plan = PlanGradient(model, MakeCostFn(truth, FrameXy(base.goal)), base.s0, pc);
    Demonstration out;
    out.seed = d.seed;
    out.scenario_id = d.scenario_id;
    for (const Tensor& s : plan.trajectory) {
      out.frames.push_back(UnflattenFrame(s.col(0)));
      WorldState w = d.states.front();
      w.q = s.col(0).segment<kDof>(kQIndex);
      w.q_dot = s.col(0).segment<kDof>(kQDotIndex);
      out.states.push_back(w);
    }
    d = out;
  }
  fs::remove(Run("demos.jsonl"));
  WriteFileAtomic(Run("demos.jsonl"), DemosJsonl(demos, ReadJsonlHeader(Run("transitions.jsonl"))));
  CliRun r = Do({"train-irl"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = Slurp(Run("irl_weighted_curve.csv"));
  const size_t at = text.find("initial_mean_loss=");
  ASSERT_NE(at, std::string::npos);
  const double initial = std::stod(text.substr(at + 18));
  const Curve c = ReadCurveCsv(Run("irl_weighted_curve.csv"));
  const double final_smoothed = c.rows.back()[2];
  std::printf("self-consistent CLI run: initial %.4f final %.4f\n", initial, final_smoothed);
  EXPECT_LT(final_smoothed, 0.2 * initial);
}

TEST_F(CliTest, EvalBoundaries) {
  config_["eval_scenarios"] = 0;
  config_["eval"]["cost"] = "reference";
  config_["eval"]["dynamics"] = "kinematic";
  WriteConfig();
  CliRun r = Do({"eval"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("undefined"), std::string::npos);
  const nlohmann::json rep = nlohmann::json::parse(Slurp(Run("eval_report.json")));
  EXPECT_TRUE(rep["success_rate"].is_null());
  EXPECT_FALSE(rep["success_rate_defined"].get<bool>());
  EXPECT_TRUE(rep["scenarios"].empty());
  EXPECT_EQ(rep["success_threshold_m"], 0.05);
  config_["eval"]["cost"] = "learned";
  config_["eval"]["dynamics"] = "learned";
  WriteConfig();
  EXPECT_EQ(Do({"eval", "--overwrite"}).code, 4);  // no checkpoints yet
}

TEST_F(CliTest, ReferenceRunSucceeds) {
  config_["eval_scenarios"] = 10;
  config_["eval"] = {{"cost", "reference"}, {"dynamics", "kinematic"}, {"max_steps", 100}};
  WriteConfig();
  CliRun r = Do({"eval"});
  ASSERT_EQ(r.code, 0) << r.err;
  const nlohmann::json rep = nlohmann::json::parse(Slurp(Run("eval_report.json")));
  EXPECT_GE(rep["success_rate"].get<double>(), 0.9) << r.out;
}

TEST_F(CliTest, PlotExport) {
  fs::create_directories(dir_ / "run");
  Spit(Run("a.csv"), "# x\niteration,loss\n0,1.5\n1,0.25\n");
  Spit(Run("b.csv"), "iteration,loss\n0,2\n1,1\n2,0.5\n");
  ASSERT_EQ(Do({"plot-export", Run("a.csv"), "--output", Run("one.csv")}).code, 0);
  EXPECT_EQ(Slurp(Run("one.csv")).substr(Slurp(Run("one.csv")).find('\n') + 1),
            "label,iteration,loss\na,0,1.5\na,1,0.25\n");
  ASSERT_EQ(Do({"plot-export", Run("a.csv"), Run("b.csv"), "--output", Run("two.csv")}).code, 0);
  const Curve merged_rows = [&] {
    Curve c;
    std::istringstream ss(Slurp(Run("two.csv")));
    std::string line;
    while (std::getline(ss, line)) c.columns.push_back(line);
    return c;
  }();
  EXPECT_EQ(merged_rows.columns.size(), 2u + 5u);
  EXPECT_EQ(merged_rows.columns[3], "a,1,0.25");
  EXPECT_EQ(merged_rows.columns[4], "b,0,2");
  Spit(Run("bad.csv"), "iteration,loss\n0,1\n1,oops\n");
  CliRun r = Do({"plot-export", Run("bad.csv"), "--output", Run("x.csv")});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find(":3:"), std::string::npos) << r.err;
  Spit(Run("short.csv"), "iteration,loss\n0,1\n1\n");
  r = Do({"plot-export", Run("short.csv"), "--output", Run("x.csv")});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find(":3:"), std::string::npos) << r.err;
}

TEST_F(CliTest, CorruptedFixturesMapToExitCodes) {
  ASSERT_EQ(Do({"collect"}).code, 0);
  // missing inputs
  EXPECT_EQ(Do({"train-irl"}).code, 4);
  // malformed JSONL record names its line
  std::string text = Slurp(Run("transitions.jsonl"));
  const size_t third = text.find('\n', text.find('\n', text.find('\n') + 1) + 1);
  Spit(Run("transitions.jsonl"), text.substr(0, third + 1) + "{\"s\": [1,2]}\n" +
                                     text.substr(third + 1));
  CliRun r = Do({"train-dynamics"});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find(":4:"), std::string::npos) << r.err;
  // truncated checkpoint
  Spit(Run("transitions.jsonl"), text);
  ASSERT_EQ(Do({"train-dynamics"}).code, 0);
  const std::string ck = Slurp(Run("dynamics.ckpt"));
  Spit(Run("dynamics.ckpt"), ck.substr(0, ck.size() - 9));
  EXPECT_EQ(Do({"train-irl"}).code, 4);
  // NaN weights: divergence
  Spit(Run("dynamics.ckpt"), ck);
  Checkpoint poisoned = LoadCheckpoint(Run("dynamics.ckpt"));
  for (auto& [name, t] : poisoned.tensors) {
    if (name == "dynamics.layer0.bias") t(0, 0) = std::nan("");
  }
  SaveCheckpoint(Run("dynamics.ckpt"), poisoned);
  r = Do({"train-irl"});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("iteration 0"), std::string::npos) << r.err;
}

}  // namespace
}  // namespace kpirl
