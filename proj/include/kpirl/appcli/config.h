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

#ifndef KPIRL_APPCLI_CONFIG_H_
#define KPIRL_APPCLI_CONFIG_H_

#include <cstdint>
#include <string>

#include "json.hpp"
#include "kpirl/airl/airl.h"
#include "kpirl/dynmodel/dynamics.h"
#include "kpirl/irl/irl.h"
#include "kpirl/planner/planner.h"

namespace kpirl {

struct EvalConfig {
  std::string dynamics = "learned";  // learned | kinematic
  std::string cost = "learned";      // learned | reference
  std::string planner = "cem";       // cem | gradient
  int max_steps = kMaxDemoSteps;
};

struct PathConfig {
  std::string demos = "demos.jsonl";
  std::string transitions = "transitions.jsonl";
  std::string expert_transitions = "expert_transitions.jsonl";
  std::string dynamics = "dynamics.ckpt";
  std::string dynamics_curve = "dynamics_curve.csv";
  std::string cost = "irl_weighted.ckpt";  // cost read by eval
  std::string airl = "airl.ckpt";
  std::string airl_curve = "airl_curve.csv";
  std::string eval_report = "eval_report.json";
};

struct RunConfig {
  std::string task = "pickplace";
  std::uint64_t seed = 0;
  std::string out_dir = "run";
  int demos = 20;
  int eval_scenarios = 10;
  int dyn_transitions = 20000;
  double dyn_mix = 0.5;
  int expert_transitions = 2000;
  std::string airl_dynamics = "kinematic";  // learned | kinematic
  DynTrainConfig dynamics;
  PlannerConfig planner;
  IrlTrainConfig irl;
  AirlConfig airl;
  EvalConfig eval;
  PathConfig paths;
};

Task ParseTask(const std::string& name);
const char* TaskName(Task task);

nlohmann::json ConfigToJson(const RunConfig& cfg);
// Unknown keys and mistyped values are config errors; missing keys keep
// their defaults.
RunConfig ConfigFromJson(const nlohmann::json& j);
RunConfig LoadConfig(const std::string& path);
void ValidateConfig(const RunConfig& cfg);

// FNV-1a 64 over the canonical dump of the resolved config minus out_dir,
// as 16 hex digits.
std::string ConfigHash(const RunConfig& cfg);

// Stream seeds for the pipeline stages.
enum class Stage : std::uint64_t {
  kDemos = 1, kTransitions, kExpert, kDynamics, kIrl, kAirl, kEval
};
std::uint64_t StageSeed(const RunConfig& cfg, Stage stage);

}  // namespace kpirl

#endif  // KPIRL_APPCLI_CONFIG_H_
