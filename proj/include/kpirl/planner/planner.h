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

// Inner-loop action optimization over a dynamics model: the single-step
// gradient planner, the cross-entropy method and receding-horizon execution.

#ifndef KPIRL_PLANNER_PLANNER_H_
#define KPIRL_PLANNER_PLANNER_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "kpirl/diffcore/tape.h"
#include "kpirl/dynmodel/dynamics.h"
#include "kpirl/planarworld/world.h"
#include "kpirl/rng.h"

namespace kpirl {

constexpr double kActionLow = -1.0;
constexpr double kActionHigh = 1.0;

// Cost of N candidate trajectories. states holds s_0 ... s_T (each
// state_dim x N), u is (action_dim * T) x N. Returns 1 x N.
using CostFn = std::function<Var(Tape& tape, const std::vector<Var>& states,
                                 const Var& u)>;

struct PlannerConfig {
  int horizon = 10;
  double alpha = 0.01;
  int inner_steps = 1;
  int population = 64;
  double elite_fraction = 0.125;
  int cem_iterations = 10;
  double init_std = 0.3;
  bool warm_start = true;
  std::uint64_t seed = 0;

  int elite_count() const;
};

void ValidatePlannerConfig(const PlannerConfig& cfg);

struct Plan {
  Tensor u;                        // (action_dim * T) x 1
  std::vector<Tensor> trajectory;  // s_0 ... s_T
  double cost = 0.0;               // cost of the returned trajectory
};

// Tape-resident result of the gradient planner.
struct GraphPlan {
  Var u;
  std::vector<Var> trajectory;
};

// N_inner steps of u <- clamp(u - alpha * grad_u C), then a re-rollout.
// Every step is recorded with GradAsGraph, so u and the trajectory stay
// differentiable with respect to anything the cost or u_init depends on.
GraphPlan PlanGradientGraph(Tape& tape, BoundDynamics& model,
                            const CostFn& cost, const Var& s0,
                            const Var& u_init, const PlannerConfig& cfg);

// Numeric version; u_init defaults to zeros.
Plan PlanGradient(const DynamicsModel& model, const CostFn& cost,
                  const Tensor& s0, const PlannerConfig& cfg,
                  const Tensor* u_init = nullptr, int action_dim = kActionDim);

struct CemTrace {
  std::vector<double> best_ever;               // after each iteration
  std::vector<std::vector<int>> elite_indices;  // per iteration
  std::vector<Tensor> means;                    // after each refit
};

// Diagonal-Gaussian CEM over the action sequence. mean_init defaults to
// zeros. Returns the best sample ever evaluated and its rollout.
Plan PlanCem(const DynamicsModel& model, const CostFn& cost, const Tensor& s0,
             const PlannerConfig& cfg, Rng& rng,
             const Tensor* mean_init = nullptr, CemTrace* trace = nullptr,
             int action_dim = kActionDim);

enum class PlannerKind { kGradient, kCem };

// Produces the cost for the next replan from the currently observed latent.
using CostProvider = std::function<CostFn(const Eigen::VectorXd& latent)>;

struct MpcResult {
  std::vector<WorldState> states;        // s_0 ... s_n
  std::vector<Eigen::Vector3d> actions;  // n applied actions
  std::vector<Eigen::VectorXd> planned;  // model prediction for each step
  std::vector<Eigen::VectorXd> realized;  // observed latent after each step
  std::vector<double> goal_distance;      // for s_0 ... s_n
  bool success = false;
};

MpcResult MpcExecute(const WorldState& start, const DynamicsModel& model,
                     const CostProvider& cost, PlannerKind kind,
                     const PlannerConfig& cfg, int max_steps, Task task,
                     const CameraModel& camera);

// Shifts a plan by one step and pads with zeros.
Tensor ShiftPlan(const Tensor& u, int action_dim = kActionDim);

}  // namespace kpirl

#endif  // KPIRL_PLANNER_PLANNER_H_
