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

#include "kpirl/planner/planner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kpirl/error.h"

namespace kpirl {
namespace {

constexpr double kStdFloor = 1e-3;

Tensor ClampActions(Tensor u) {
  return u.cwiseMax(kActionLow).cwiseMin(kActionHigh);
}

Tensor Replicate(const Tensor& column, int n) {
  return column.col(0).replicate(1, n);
}

// Sum of the 1 x N cost row; N = 1 in the gradient planner.
Var TotalCost(Tape& tape, const CostFn& cost, const std::vector<Var>& states,
              const Var& u) {
  Var c = cost(tape, states, u);
  if (c.rows() != 1 || c.cols() != u.cols()) {
    Fail(ErrorKind::kShape, "cost must return 1x" + std::to_string(u.cols()) +
                                ", got " + std::to_string(c.rows()) + "x" +
                                std::to_string(c.cols()));
  }
  return Sum(c);
}

}  // namespace

int PlannerConfig::elite_count() const {
  return std::max(1, static_cast<int>(std::lround(elite_fraction * population)));
}

void ValidatePlannerConfig(const PlannerConfig& cfg) {
  if (cfg.horizon < 1) Fail(ErrorKind::kConfig, "planner horizon must be >= 1");
  if (!(cfg.alpha > 0.0)) Fail(ErrorKind::kConfig, "planner alpha must be > 0");
  if (cfg.inner_steps < 0) Fail(ErrorKind::kConfig, "negative inner steps");
  if (cfg.population < 1 || cfg.cem_iterations < 0 ||
      !(cfg.elite_fraction > 0.0) || cfg.elite_fraction > 1.0 ||
      !(cfg.init_std >= 0.0)) {
    Fail(ErrorKind::kConfig, "invalid CEM settings");
  }
}

GraphPlan PlanGradientGraph(Tape& tape, BoundDynamics& model,
                            const CostFn& cost, const Var& s0,
                            const Var& u_init, const PlannerConfig& cfg) {
  ValidatePlannerConfig(cfg);
  const Eigen::Index rows = u_init.rows();
  const Tensor lo = Tensor::Constant(rows, 1, kActionLow);
  const Tensor hi = Tensor::Constant(rows, 1, kActionHigh);
  Var u = u_init;
  for (int step = 0; step < cfg.inner_steps; ++step) {
    std::vector<Var> traj = Rollout(model, s0, u, cfg.horizon);
    Var c = TotalCost(tape, cost, traj, u);
    if (!std::isfinite(c.scalar())) {
      Fail(ErrorKind::kDivergence,
           "planner cost is not finite at inner step " + std::to_string(step));
    }
    Var g = GradAsGraph(c, std::vector<Var>{u})[0];
    if (!g.value().allFinite()) {
      Fail(ErrorKind::kDivergence, "planner gradient is not finite at inner step " +
                                       std::to_string(step));
    }
    u = Clamp(u - cfg.alpha * g, lo, hi);
  }
  GraphPlan plan;
  plan.u = u;
  plan.trajectory = Rollout(model, s0, u, cfg.horizon);
  return plan;
}

Plan PlanGradient(const DynamicsModel& model, const CostFn& cost,
                  const Tensor& s0, const PlannerConfig& cfg,
                  const Tensor* u_init, int action_dim) {
  Tape tape;
  auto bound = model.Bind(tape);
  const Tensor init = u_init != nullptr
                          ? *u_init
                          : Tensor::Zero(action_dim * cfg.horizon, 1);
  GraphPlan g = PlanGradientGraph(tape, *bound, cost, tape.Constant(s0),
                                  tape.Constant(init), cfg);
  Plan plan;
  plan.u = g.u.value();
  for (const Var& s : g.trajectory) plan.trajectory.push_back(s.value());
  plan.cost = TotalCost(tape, cost, g.trajectory, g.u).scalar();
  return plan;
}

Plan PlanCem(const DynamicsModel& model, const CostFn& cost, const Tensor& s0,
             const PlannerConfig& cfg, Rng& rng, const Tensor* mean_init,
             CemTrace* trace, int action_dim) {
  ValidatePlannerConfig(cfg);
  const int rows = action_dim * cfg.horizon;
  const int pop = cfg.population;
  const int n_elite = std::min(cfg.elite_count(), pop);
  Tensor mean = mean_init != nullptr ? *mean_init : Tensor::Zero(rows, 1);
  if (mean.rows() != rows || mean.cols() != 1) {
    Fail(ErrorKind::kShape, "CEM mean must be " + std::to_string(rows) + "x1");
  }
  Tensor std_dev = Tensor::Constant(rows, 1, cfg.init_std);
  double best_cost = std::numeric_limits<double>::infinity();
  Tensor best_u = ClampActions(mean);
  const Tensor s_batch = Replicate(s0, pop);

  for (int iter = 0; iter < cfg.cem_iterations; ++iter) {
    Tensor samples(rows, pop);
    for (int c = 0; c < pop; ++c) {
      for (int r = 0; r < rows; ++r) {
        samples(r, c) = mean(r, 0) + std_dev(r, 0) * rng.Normal();
      }
    }
    samples = ClampActions(samples);
    Tensor costs;
    {
      Tape tape;
      auto bound = model.Bind(tape);
      Var u = tape.Constant(samples);
      std::vector<Var> traj =
          Rollout(*bound, tape.Constant(s_batch), u, cfg.horizon);
      Var c = cost(tape, traj, u);
      if (c.rows() != 1 || c.cols() != pop) {
        Fail(ErrorKind::kShape, "cost must return 1x" + std::to_string(pop));
      }
      costs = c.value();
    }
    std::vector<int> order(pop);
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](int i) {
      const double v = costs(0, i);
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    if (std::none_of(order.begin(), order.end(),
                     [&](int i) { return std::isfinite(costs(0, i)); })) {
      Fail(ErrorKind::kDivergence, "every CEM sample has a non-finite cost at "
                                   "iteration " + std::to_string(iter));
    }
    // stable: ties keep the lower sample index first
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return key(a) < key(b); });
    if (key(order[0]) < best_cost) {
      best_cost = key(order[0]);
      best_u = samples.col(order[0]);
    }
    Tensor elite_mean = Tensor::Zero(rows, 1);
    for (int e = 0; e < n_elite; ++e) elite_mean += samples.col(order[e]);
    elite_mean /= n_elite;
    Tensor elite_var = Tensor::Zero(rows, 1);
    for (int e = 0; e < n_elite; ++e) {
      elite_var += (samples.col(order[e]) - elite_mean).cwiseAbs2();
    }
    elite_var /= n_elite;
    mean = elite_mean;
    std_dev = elite_var.cwiseSqrt().cwiseMax(kStdFloor);
    if (trace != nullptr) {
      trace->best_ever.push_back(best_cost);
      trace->elite_indices.emplace_back(order.begin(), order.begin() + n_elite);
      trace->means.push_back(mean);
    }
  }

  Plan plan;
  plan.u = best_u;
  Tape tape;
  auto bound = model.Bind(tape);
  Var u = tape.Constant(best_u);
  std::vector<Var> traj = Rollout(*bound, tape.Constant(s0), u, cfg.horizon);
  for (const Var& s : traj) plan.trajectory.push_back(s.value());
  plan.cost = TotalCost(tape, cost, traj, u).scalar();
  return plan;
}

Tensor ShiftPlan(const Tensor& u, int action_dim) {
  Tensor out = Tensor::Zero(u.rows(), u.cols());
  const Eigen::Index keep = u.rows() - action_dim;
  if (keep > 0) out.topRows(keep) = u.bottomRows(keep);
  return out;
}

MpcResult MpcExecute(const WorldState& start, const DynamicsModel& model,
                     const CostProvider& cost, PlannerKind kind,
                     const PlannerConfig& cfg, int max_steps, Task task,
                     const CameraModel& camera) {
  ValidatePlannerConfig(cfg);
  Rng rng(cfg.seed);
  MpcResult result;
  WorldState s = start;
  result.states.push_back(s);
  result.goal_distance.push_back(GoalDistance(s, task));
  Tensor warm = Tensor::Zero(kActionDim * cfg.horizon, 1);
  for (int step = 0; step < max_steps; ++step) {
    if (IsSuccess(s, task)) break;
    const Eigen::VectorXd latent = Latent(s, camera);
    const CostFn c = cost(latent);
    const Tensor* init = cfg.warm_start ? &warm : nullptr;
    Plan plan = kind == PlannerKind::kCem
                    ? PlanCem(model, c, latent, cfg, rng, init)
                    : PlanGradient(model, c, latent, cfg, init);
    const Eigen::Vector3d a = plan.u.topRows(kActionDim).col(0);
    s = StepEnv(s, a);
    result.actions.push_back(a);
    result.planned.push_back(plan.trajectory[1].col(0));
    result.realized.push_back(Latent(s, camera));
    result.states.push_back(s);
    result.goal_distance.push_back(GoalDistance(s, task));
    if (cfg.warm_start) warm = ShiftPlan(plan.u);
  }
  result.success = IsSuccess(s, task);
  return result;
}

}  // namespace kpirl
