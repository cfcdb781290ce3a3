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

#include <filesystem>
#include <fstream>
#include <memory>

#include "CLI11.hpp"
#include "kpirl/appcli/formats.h"
#include "kpirl/dynmodel/checkpoint.h"
#include "kpirl/irl/evaluation.h"

namespace kpirl {
namespace {

using nlohmann::json;

json Header(const RunConfig& cfg) {
  return {{"config_hash", ConfigHash(cfg)}, {"seed", cfg.seed}};
}

Checkpoint Stamped(const RunConfig& cfg, const char* kind) {
  Checkpoint ck;
  ck.meta["kind"] = kind;
  ck.meta["config_hash"] = ConfigHash(cfg);
  ck.meta["seed"] = cfg.seed;
  return ck;
}

Checkpoint LoadKind(const std::string& path, const char* kind) {
  if (!std::filesystem::exists(path)) {
    Fail(ErrorKind::kIo, "missing checkpoint '" + path + "'");
  }
  Checkpoint ck = LoadCheckpoint(path);
  if (ck.meta.value("kind", "") != kind) {
    Fail(ErrorKind::kFormat, "'" + path + "' is not a " + kind + " checkpoint");
  }
  return ck;
}

void RequireInput(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    Fail(ErrorKind::kIo, "missing input '" + path + "'; run the producing command first");
  }
}

Tensor Column(const std::vector<double>& v) {
  Tensor t(static_cast<Eigen::Index>(v.size()), 1);
  for (size_t i = 0; i < v.size(); ++i) t(static_cast<Eigen::Index>(i), 0) = v[i];
  return t;
}

std::vector<double> Values(const Tensor& t) {
  return std::vector<double>(t.data(), t.data() + t.size());
}

std::unique_ptr<DynamicsModel> LoadDynamics(const RunConfig& cfg,
                                            const std::string& which) {
  if (which == "kinematic") return std::make_unique<KinematicDynamics>(CameraModel{});
  const Checkpoint ck = LoadKind(OutputPath(cfg, cfg.paths.dynamics), "dynamics");
  return std::make_unique<MlpDynamics>(GetMlp(ck, "dynamics"));
}

std::vector<IrlDemo> LoadIrlDemos(const RunConfig& cfg) {
  const std::string path = OutputPath(cfg, cfg.paths.demos);
  RequireInput(path);
  const CameraModel camera;
  std::vector<IrlDemo> demos;
  for (const Demonstration& d : ReadDemosJsonl(path)) {
    const Demonstration use =
        cfg.irl.relative ? MakeRelative(d, ObserveKeypoints(d.states.front(), camera))
                         : d;
    demos.push_back(PrepareDemo(use, cfg.irl.horizon));
  }
  if (demos.empty()) Fail(ErrorKind::kInput, "'" + path + "' holds no demos");
  return demos;
}

void SaveIrlState(const std::string& path, const RunConfig& cfg,
                  const IrlCommand& cmd, const IrlState& st) {
  Checkpoint ck = Stamped(cfg, "irl");
  ck.meta["feature_matching"] = cmd.feature_matching;
  ck.meta["iteration"] = st.iteration;
  ck.meta["has_best"] = st.has_best;
  ck.meta["best_score"] = st.best_score;
  PutCostParams(ck, "best", st.best);
  PutCostParams(ck, "cost", st.params);
  ck.tensors.emplace_back("curve", Column(st.curve));
  ck.tensors.emplace_back("grad_norm", Column(st.grad_norm));
  SaveCheckpoint(path, ck);
}

IrlState LoadIrlState(const std::string& path, const RunConfig& cfg,
                      const IrlCommand& cmd) {
  const Checkpoint ck = LoadKind(path, "irl");
  if (ck.meta.value("feature_matching", false) != cmd.feature_matching) {
    Fail(ErrorKind::kConfig, "resume checkpoint was trained with a different method");
  }
  IrlState st;
  st.params = GetCostParams(ck, "cost");
  st.best = GetCostParams(ck, "best");
  if (st.params.variant != cfg.irl.variant) {
    Fail(ErrorKind::kConfig, "resume checkpoint holds a different cost variant");
  }
  st.iteration = ck.meta.value("iteration", 0);
  st.has_best = ck.meta.value("has_best", false);
  st.best_score = ck.meta.value("best_score", 0.0);
  st.curve = Values(ck.Get("curve"));
  st.grad_norm = Values(ck.Get("grad_norm"));
  if (static_cast<int>(st.curve.size()) != st.iteration ||
      st.grad_norm.size() != st.curve.size()) {
    Fail(ErrorKind::kFormat, "resume checkpoint curve does not match its iteration");
  }
  return st;
}

}  // namespace

int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDivergence:
    case ErrorKind::kNumericalDomain:
      return 3;
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
    case ErrorKind::kShape:
      return 4;
    default:
      return 2;
  }
}

std::string OutputPath(const RunConfig& cfg, const std::string& name) {
  const std::filesystem::path p(name);
  if (p.is_absolute()) return name;
  return (std::filesystem::path(cfg.out_dir) / p).string();
}

std::string Provenance(const RunConfig& cfg) {
  return "config_hash=" + ConfigHash(cfg) + " seed=" + std::to_string(cfg.seed) +
         " desk-scale: " + std::to_string(cfg.irl.iterations) +
         " outer iterations (reference protocol 5000); planar 2-link arm"
         " (reference robot 7-DoF Panda)";
}

void CmdCollect(const RunConfig& cfg, bool overwrite, std::ostream& log) {
  const std::string demos_path = OutputPath(cfg, cfg.paths.demos);
  const std::string trans_path = OutputPath(cfg, cfg.paths.transitions);
  const std::string expert_path = OutputPath(cfg, cfg.paths.expert_transitions);
  for (const std::string& p : {demos_path, trans_path, expert_path}) {
    CheckOutput(p, overwrite);
  }
  const CameraModel camera;
  const Task task = ParseTask(cfg.task);
  const DemoSet demos = CollectDemos(cfg.demos, StageSeed(cfg, Stage::kDemos), camera, task);
  const std::vector<Transition> data = CollectDynData(
      cfg.dyn_transitions, StageSeed(cfg, Stage::kTransitions), cfg.dyn_mix, camera, task);
  const std::vector<Transition> expert =
      CollectDynData(cfg.expert_transitions, StageSeed(cfg, Stage::kExpert), 1.0,
                     camera, cfg.airl.task);
  json h = Header(cfg);
  h["task"] = cfg.task;
  h["resamples"] = demos.resamples;
  WriteFileAtomic(demos_path, DemosJsonl(demos.demos, h));
  h.erase("resamples");
  h["mix"] = FormatDouble(cfg.dyn_mix);
  WriteFileAtomic(trans_path, TransitionsJsonl(data, h));
  h["task"] = TaskName(cfg.airl.task);
  h["mix"] = "1";
  WriteFileAtomic(expert_path, TransitionsJsonl(expert, h));
  log << "demos " << demos.demos.size() << " (resamples " << demos.resamples
      << "), transitions " << data.size() << ", expert transitions "
      << expert.size() << "\n";
}

void CmdTrainDynamics(const RunConfig& cfg, bool overwrite, std::ostream& log) {
  const std::string in = OutputPath(cfg, cfg.paths.transitions);
  const std::string ck_path = OutputPath(cfg, cfg.paths.dynamics);
  const std::string csv_path = OutputPath(cfg, cfg.paths.dynamics_curve);
  CheckOutput(ck_path, overwrite);
  CheckOutput(csv_path, overwrite);
  RequireInput(in);
  const std::vector<Transition> data = ReadTransitionsJsonl(in);
  DynTrainConfig dc = cfg.dynamics;
  dc.seed = StageSeed(cfg, Stage::kDynamics);
  const DynTrainResult r = TrainDynamics(data, dc);
  Checkpoint ck = Stamped(cfg, "dynamics");
  PutMlp(ck, "dynamics", r.params);
  Curve curve{{"iteration", "train_mse", "validation_mse"}, {}};
  for (size_t e = 0; e < r.train_mse.size(); ++e) {
    curve.rows.push_back({static_cast<double>(e), r.train_mse[e],
                          e < r.validation_mse.size() ? r.validation_mse[e] : 0.0});
  }
  SaveCheckpoint(ck_path, ck);
  WriteFileAtomic(csv_path, CurveCsv(curve, Provenance(cfg)));
  log << "dynamics: " << data.size() << " transitions, " << r.train_mse.size()
      << " epochs";
  if (!r.validation_mse.empty()) log << ", validation mse " << FormatDouble(r.validation_mse.back());
  log << "\n";
}

std::string IrlStem(const RunConfig& cfg, const IrlCommand& cmd) {
  return cmd.feature_matching ? std::string("fm_weighted")
                              : std::string("irl_") + CostVariantName(cfg.irl.variant);
}

void CmdTrainIrl(const RunConfig& cfg, const IrlCommand& cmd, bool overwrite,
                 std::ostream& log) {
  if (cmd.feature_matching && cfg.irl.variant != CostVariant::kWeightedKeypoint) {
    Fail(ErrorKind::kConfig, "feature matching supports --variant weighted only");
  }
  const std::string stem = IrlStem(cfg, cmd);
  const std::string ck_path = OutputPath(cfg, stem + ".ckpt");
  const std::string csv_path = OutputPath(cfg, stem + "_curve.csv");
  CheckOutput(ck_path, overwrite);
  CheckOutput(csv_path, overwrite);
  const std::vector<IrlDemo> demos = LoadIrlDemos(cfg);
  const std::unique_ptr<DynamicsModel> model = LoadDynamics(cfg, "learned");
  IrlTrainConfig tc = cfg.irl;
  tc.seed = StageSeed(cfg, Stage::kIrl);
  IrlState st = cmd.resume.empty() ? InitIrlState(tc) : LoadIrlState(cmd.resume, cfg, cmd);
  const CameraModel camera;
  if (cmd.feature_matching) {
    FeatureMatchingSteps(st, demos, *model, tc, tc.iterations, camera);
  } else {
    TrainIrlSteps(st, demos, *model, tc, tc.iterations, camera);
  }
  const double initial = MeanPlanLoss(InitIrlState(tc).params, demos, *model, tc, camera);
  const std::vector<double> smooth = Smooth(st.curve, tc.smoothing_window);
  Curve curve{{"iteration", "loss", "smoothed_loss", "grad_norm"}, {}};
  for (size_t i = 0; i < st.curve.size(); ++i) {
    curve.rows.push_back({static_cast<double>(i), st.curve[i], smooth[i], st.grad_norm[i]});
  }
  SaveIrlState(ck_path, cfg, cmd, st);
  WriteFileAtomic(csv_path, CurveCsv(curve, Provenance(cfg) + " initial_mean_loss=" +
                                                FormatDouble(initial)));
  log << stem << ": " << st.curve.size() << " iterations, initial mean loss "
      << FormatDouble(initial);
  if (!smooth.empty()) {
    log << ", final smoothed loss " << FormatDouble(smooth.back()) << ", ratio "
        << FormatDouble(smooth.back() / initial);
  }
  log << "\n";
}

void CmdTrainAirl(const RunConfig& cfg, bool overwrite, std::ostream& log) {
  const std::string in = OutputPath(cfg, cfg.paths.expert_transitions);
  const std::string ck_path = OutputPath(cfg, cfg.paths.airl);
  const std::string csv_path = OutputPath(cfg, cfg.paths.airl_curve);
  CheckOutput(ck_path, overwrite);
  CheckOutput(csv_path, overwrite);
  RequireInput(in);
  const std::vector<Transition> expert = ReadTransitionsJsonl(in);
  const std::unique_ptr<DynamicsModel> model = LoadDynamics(cfg, cfg.airl_dynamics);
  AirlConfig ac = cfg.airl;
  ac.seed = StageSeed(cfg, Stage::kAirl);
  const AirlResult r = AirlTrain(expert, *model, ac);
  Checkpoint ck = Stamped(cfg, "airl");
  PutAirlNets(ck, r.nets);
  ck.meta["iterations_run"] = r.iterations_run;
  ck.meta["converged"] = r.converged;
  SaveCheckpoint(ck_path, ck);
  const AirlCurves& c = r.curves;
  Curve curve{{"iteration", "discriminator_loss", "mean_td_error", "learned_reward",
               "task_reward", "policy_loss"},
              {}};
  for (size_t i = 0; i < c.task_reward.size(); ++i) {
    curve.rows.push_back({static_cast<double>(i), c.discriminator_loss[i],
                          c.mean_td_error[i], c.learned_reward[i], c.task_reward[i],
                          c.policy_loss[i]});
  }
  WriteFileAtomic(csv_path, CurveCsv(curve, Provenance(cfg)));
  log << "airl: " << r.iterations_run << " iterations"
      << (r.converged ? ", reached the reward threshold" : "") << "\n";
}

void CmdEval(const RunConfig& cfg, bool overwrite, std::ostream& log) {
  const std::string out = OutputPath(cfg, cfg.paths.eval_report);
  CheckOutput(out, overwrite);
  const std::unique_ptr<DynamicsModel> model = LoadDynamics(cfg, cfg.eval.dynamics);
  CostParams cost;
  if (cfg.eval.cost == "reference") {
    cost = ReferenceCost();
  } else {
    cost = GetCostParams(LoadKind(OutputPath(cfg, cfg.paths.cost), "irl"), "best");
  }
  const PlannerKind kind =
      cfg.eval.planner == "cem" ? PlannerKind::kCem : PlannerKind::kGradient;
  const EvalReport r = EvaluateMpc(*model, cost, kind, cfg.planner, cfg.eval_scenarios,
                                   StageSeed(cfg, Stage::kEval), cfg.eval.max_steps);
  json report = Header(cfg);
  report["provenance"] = Provenance(cfg);
  report["success_threshold_m"] = r.threshold;
  report["dynamics"] = cfg.eval.dynamics;
  report["cost"] = cfg.eval.cost;
  report["planner"] = cfg.eval.planner;
  report["scenarios"] = json::array();
  for (const ScenarioResult& s : r.scenarios) {
    report["scenarios"].push_back({{"cube_start", {s.cube_start.x(), s.cube_start.y()}},
                                   {"success", s.success},
                                   {"final_distance_m", s.final_distance},
                                   {"steps", s.steps}});
  }
  report["successes"] = r.successes;
  const bool defined = !r.scenarios.empty();
  report["success_rate_defined"] = defined;
  report["success_rate"] =
      defined ? json(static_cast<double>(r.successes) / r.scenarios.size()) : json(nullptr);
  WriteFileAtomic(out, report.dump(2) + "\n");
  log << "eval: " << r.successes << "/" << r.scenarios.size() << " successes";
  if (defined) {
    log << ", success rate " << FormatDouble(static_cast<double>(r.successes) / r.scenarios.size());
  } else {
    log << ", success rate undefined (0 scenarios)";
  }
  log << " (threshold " << r.threshold << " m)\n";
}

void CmdPlotExport(const RunConfig& cfg, const std::vector<std::string>& inputs,
                   const std::string& output, bool overwrite, std::ostream& log) {
  if (inputs.empty()) Fail(ErrorKind::kConfig, "plot-export needs at least one CSV");
  CheckOutput(output, overwrite);
  std::vector<std::pair<std::string, Curve>> runs;
  for (const std::string& in : inputs) {
    RequireInput(in);
    runs.emplace_back(std::filesystem::path(in).stem().string(), ReadCurveCsv(in));
  }
  WriteFileAtomic(output, MergeCurvesCsv(runs, Provenance(cfg)));
  log << "merged " << runs.size() << " curve(s) into " << output << "\n";
}

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-based inverse reinforcement learning from keypoints"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool overwrite = false;
  app.add_option("--config", config_path, "JSON run config");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--overwrite", overwrite, "replace existing outputs");

  auto* collect = app.add_subcommand("collect", "collect demos and dynamics data");
  auto* train_dyn = app.add_subcommand("train-dynamics", "fit the keypoint dynamics model");
  auto* train_irl = app.add_subcommand("train-irl", "learn cost weights");
  std::string variant, baseline, resume;
  train_irl->add_option("--variant", variant, "weighted|timeweighted|rbf");
  train_irl->add_option("--baseline", baseline, "feature-matching");
  train_irl->add_option("--resume", resume, "continue from a train-irl checkpoint");
  auto* train_airl = app.add_subcommand("train-airl", "adversarial IRL on the reach task");
  auto* eval = app.add_subcommand("eval", "MPC evaluation over random scenarios");
  auto* plot = app.add_subcommand("plot-export", "merge curve CSVs with run labels");
  std::vector<std::string> inputs;
  std::string output;
  plot->add_option("inputs", inputs, "curve CSVs")->required();
  plot->add_option("--output", output, "merged CSV (default <out>/curves_merged.csv)");
  for (CLI::App* sub : {collect, train_dyn, train_irl, train_airl, eval, plot}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : LoadConfig(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!variant.empty()) {
      try {
        cfg.irl.variant = ParseCostVariant(variant);
      } catch (const Error&) {
        Fail(ErrorKind::kConfig, "--variant must be weighted, timeweighted or rbf");
      }
    }
    if (!baseline.empty() && baseline != "feature-matching") {
      Fail(ErrorKind::kConfig, "--baseline supports feature-matching only");
    }
    ValidateConfig(cfg);
    if (*collect) CmdCollect(cfg, overwrite, out);
    if (*train_dyn) CmdTrainDynamics(cfg, overwrite, out);
    if (*train_irl) {
      CmdTrainIrl(cfg, IrlCommand{!baseline.empty(), resume}, overwrite, out);
    }
    if (*train_airl) CmdTrainAirl(cfg, overwrite, out);
    if (*eval) CmdEval(cfg, overwrite, out);
    if (*plot) {
      CmdPlotExport(cfg, inputs,
                    output.empty() ? OutputPath(cfg, "curves_merged.csv") : output,
                    overwrite, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace kpirl
