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

#include "kpirl/appcli/config.h"

#include <cstdio>
#include <fstream>
#include <set>

#include "kpirl/error.h"
#include "kpirl/rng.h"

namespace kpirl {
namespace {

using nlohmann::json;

// Reads fields from one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) Fail(ErrorKind::kConfig, where_ + " must be an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        Fail(ErrorKind::kConfig, "unknown config key '" + where_ + it.key() + "'");
      }
    }
  }

  template <typename T>
  void Get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw json::type_error::create(302, "not a boolean", nullptr);
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) {
          throw json::type_error::create(302, "not an integer", nullptr);
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw json::type_error::create(302, "not a number", nullptr);
      }
      out = it->get<T>();
    } catch (const json::exception&) {
      Fail(ErrorKind::kConfig, "config key '" + where_ + key + "' has the wrong type");
    }
  }

  const json* Child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json DynToJson(const DynTrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs}, {"hidden", c.hidden},
          {"validation_fraction", c.validation_fraction}};
}

void DynFromJson(const json& j, DynTrainConfig& c) {
  Fields f(j, "dynamics.");
  f.Get("learning_rate", c.learning_rate);
  f.Get("batch_size", c.batch_size);
  f.Get("epochs", c.epochs);
  f.Get("hidden", c.hidden);
  f.Get("validation_fraction", c.validation_fraction);
}

json PlannerToJson(const PlannerConfig& c) {
  return {{"horizon", c.horizon}, {"alpha", c.alpha},
          {"inner_steps", c.inner_steps}, {"population", c.population},
          {"elite_fraction", c.elite_fraction},
          {"cem_iterations", c.cem_iterations}, {"init_std", c.init_std},
          {"warm_start", c.warm_start}};
}

void PlannerFromJson(const json& j, PlannerConfig& c) {
  Fields f(j, "planner.");
  f.Get("horizon", c.horizon);
  f.Get("alpha", c.alpha);
  f.Get("inner_steps", c.inner_steps);
  f.Get("population", c.population);
  f.Get("elite_fraction", c.elite_fraction);
  f.Get("cem_iterations", c.cem_iterations);
  f.Get("init_std", c.init_std);
  f.Get("warm_start", c.warm_start);
}

json IrlToJson(const IrlTrainConfig& c) {
  return {{"variant", CostVariantName(c.variant)}, {"eta", c.eta},
          {"alpha", c.alpha}, {"inner_steps", c.inner_steps},
          {"iterations", c.iterations}, {"horizon", c.horizon},
          {"demos_per_batch", c.demos_per_batch}, {"init_rho", c.init_rho},
          {"grad_clip", c.grad_clip}, {"smoothing_window", c.smoothing_window},
          {"relative", c.relative}};
}

void IrlFromJson(const json& j, IrlTrainConfig& c) {
  Fields f(j, "irl.");
  std::string variant = CostVariantName(c.variant);
  f.Get("variant", variant);
  try {
    c.variant = ParseCostVariant(variant);
  } catch (const Error&) {
    Fail(ErrorKind::kConfig, "irl.variant must be weighted, timeweighted or rbf");
  }
  f.Get("eta", c.eta);
  f.Get("alpha", c.alpha);
  f.Get("inner_steps", c.inner_steps);
  f.Get("iterations", c.iterations);
  f.Get("horizon", c.horizon);
  f.Get("demos_per_batch", c.demos_per_batch);
  f.Get("init_rho", c.init_rho);
  f.Get("grad_clip", c.grad_clip);
  f.Get("smoothing_window", c.smoothing_window);
  f.Get("relative", c.relative);
}

json AirlToJson(const AirlConfig& c) {
  json threshold = std::isfinite(c.reward_threshold) ? json(c.reward_threshold)
                                                      : json(nullptr);
  return {{"eta_d", c.eta_d}, {"eta_pi", c.eta_pi}, {"eta_v", c.eta_v},
          {"gamma", c.gamma}, {"batch_size", c.batch_size},
          {"horizon", c.horizon}, {"iterations", c.iterations},
          {"reward_threshold", threshold}, {"hidden", c.hidden},
          {"episode_length", c.episode_length},
          {"episodes_per_iteration", c.episodes_per_iteration},
          {"discriminator_steps", c.discriminator_steps},
          {"plan_batch", c.plan_batch},
          {"imitation_weight", c.imitation_weight},
          {"exploration_std", c.exploration_std},
          {"act_with_planner", c.act_with_planner},
          {"population", c.population}, {"elite_count", c.elite_count},
          {"cem_iterations", c.cem_iterations}, {"init_std", c.init_std},
          {"task", TaskName(c.task)}};
}

void AirlFromJson(const json& j, AirlConfig& c) {
  Fields f(j, "airl.");
  f.Get("eta_d", c.eta_d);
  f.Get("eta_pi", c.eta_pi);
  f.Get("eta_v", c.eta_v);
  f.Get("gamma", c.gamma);
  f.Get("batch_size", c.batch_size);
  f.Get("horizon", c.horizon);
  f.Get("iterations", c.iterations);
  if (const json* t = f.Child("reward_threshold")) {
    if (t->is_null()) {
      c.reward_threshold = std::numeric_limits<double>::infinity();
    } else if (t->is_number()) {
      c.reward_threshold = t->get<double>();
    } else {
      Fail(ErrorKind::kConfig, "airl.reward_threshold must be a number or null");
    }
  }
  f.Get("hidden", c.hidden);
  f.Get("episode_length", c.episode_length);
  f.Get("episodes_per_iteration", c.episodes_per_iteration);
  f.Get("discriminator_steps", c.discriminator_steps);
  f.Get("plan_batch", c.plan_batch);
  f.Get("imitation_weight", c.imitation_weight);
  f.Get("exploration_std", c.exploration_std);
  f.Get("act_with_planner", c.act_with_planner);
  f.Get("population", c.population);
  f.Get("elite_count", c.elite_count);
  f.Get("cem_iterations", c.cem_iterations);
  f.Get("init_std", c.init_std);
  std::string task = TaskName(c.task);
  f.Get("task", task);
  c.task = ParseTask(task);
}

}  // namespace

Task ParseTask(const std::string& name) {
  if (name == "pickplace") return Task::kPickPlace;
  if (name == "reach") return Task::kReach;
  Fail(ErrorKind::kConfig, "unknown task '" + name + "'");
}

const char* TaskName(Task task) {
  return task == Task::kReach ? "reach" : "pickplace";
}

nlohmann::json ConfigToJson(const RunConfig& c) {
  const PathConfig& p = c.paths;
  return {{"task", c.task}, {"seed", c.seed}, {"out_dir", c.out_dir},
          {"demos", c.demos}, {"eval_scenarios", c.eval_scenarios},
          {"dyn_transitions", c.dyn_transitions}, {"dyn_mix", c.dyn_mix},
          {"expert_transitions", c.expert_transitions},
          {"airl_dynamics", c.airl_dynamics},
          {"dynamics", DynToJson(c.dynamics)},
          {"planner", PlannerToJson(c.planner)}, {"irl", IrlToJson(c.irl)},
          {"airl", AirlToJson(c.airl)},
          {"eval", {{"dynamics", c.eval.dynamics}, {"cost", c.eval.cost},
                    {"planner", c.eval.planner}, {"max_steps", c.eval.max_steps}}},
          {"paths", {{"demos", p.demos}, {"transitions", p.transitions},
                     {"expert_transitions", p.expert_transitions},
                     {"dynamics", p.dynamics}, {"dynamics_curve", p.dynamics_curve},
                     {"cost", p.cost}, {"airl", p.airl}, {"airl_curve", p.airl_curve},
                     {"eval_report", p.eval_report}}}};
}

RunConfig ConfigFromJson(const nlohmann::json& j) {
  RunConfig c;
  {
    Fields f(j, "");
    f.Get("task", c.task);
    f.Get("seed", c.seed);
    f.Get("out_dir", c.out_dir);
    f.Get("demos", c.demos);
    f.Get("eval_scenarios", c.eval_scenarios);
    f.Get("dyn_transitions", c.dyn_transitions);
    f.Get("dyn_mix", c.dyn_mix);
    f.Get("expert_transitions", c.expert_transitions);
    f.Get("airl_dynamics", c.airl_dynamics);
    if (const json* d = f.Child("dynamics")) DynFromJson(*d, c.dynamics);
    if (const json* d = f.Child("planner")) PlannerFromJson(*d, c.planner);
    if (const json* d = f.Child("irl")) IrlFromJson(*d, c.irl);
    if (const json* d = f.Child("airl")) AirlFromJson(*d, c.airl);
    if (const json* d = f.Child("eval")) {
      Fields e(*d, "eval.");
      e.Get("dynamics", c.eval.dynamics);
      e.Get("cost", c.eval.cost);
      e.Get("planner", c.eval.planner);
      e.Get("max_steps", c.eval.max_steps);
    }
    if (const json* d = f.Child("paths")) {
      Fields e(*d, "paths.");
      PathConfig& p = c.paths;
      e.Get("demos", p.demos);
      e.Get("transitions", p.transitions);
      e.Get("expert_transitions", p.expert_transitions);
      e.Get("dynamics", p.dynamics);
      e.Get("dynamics_curve", p.dynamics_curve);
      e.Get("cost", p.cost);
      e.Get("airl", p.airl);
      e.Get("airl_curve", p.airl_curve);
      e.Get("eval_report", p.eval_report);
    }
  }
  ValidateConfig(c);
  return c;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kConfig, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return ConfigFromJson(j);
}

void ValidateConfig(const RunConfig& c) {
  ParseTask(c.task);
  auto one_of = [](const std::string& v, const char* a, const char* b, const char* key) {
    if (v != a && v != b) {
      Fail(ErrorKind::kConfig, std::string(key) + " must be " + a + " or " + b);
    }
  };
  one_of(c.eval.dynamics, "learned", "kinematic", "eval.dynamics");
  one_of(c.eval.cost, "learned", "reference", "eval.cost");
  one_of(c.eval.planner, "cem", "gradient", "eval.planner");
  one_of(c.airl_dynamics, "learned", "kinematic", "airl_dynamics");
  if (c.demos < 0 || c.eval_scenarios < 0 || c.dyn_transitions < 0 ||
      c.expert_transitions < 0 || c.eval.max_steps < 0) {
    Fail(ErrorKind::kConfig, "counts must be non-negative");
  }
  if (!(c.dyn_mix >= 0.0 && c.dyn_mix <= 1.0)) {
    Fail(ErrorKind::kConfig, "dyn_mix must lie in [0, 1]");
  }
  if (c.out_dir.empty()) Fail(ErrorKind::kConfig, "out_dir must not be empty");
  if (!(c.irl.eta > 0.0) || !(c.irl.alpha > 0.0) || c.irl.iterations < 1) {
    Fail(ErrorKind::kConfig, "irl needs eta > 0, alpha > 0 and iterations >= 1");
  }
  if (!(c.dynamics.learning_rate > 0.0) || c.dynamics.batch_size < 1 ||
      c.dynamics.epochs < 0 || !(c.dynamics.validation_fraction >= 0.0 &&
                                 c.dynamics.validation_fraction < 1.0)) {
    Fail(ErrorKind::kConfig, "invalid dynamics config");
  }
  ValidatePlannerConfig(c.planner);
  ValidateAirlConfig(c.airl);
}

std::string ConfigHash(const RunConfig& cfg) {
  // where the outputs go is not part of the experiment
  nlohmann::json j = ConfigToJson(cfg);
  j.erase("out_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t StageSeed(const RunConfig& cfg, Stage stage) {
  return SplitSeed(cfg.seed, static_cast<std::uint64_t>(stage));
}

}  // namespace kpirl
