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

#ifndef KPIRL_AIRL_AIRL_H_
#define KPIRL_AIRL_AIRL_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "kpirl/diffcore/tape.h"
#include "kpirl/dynmodel/checkpoint.h"
#include "kpirl/dynmodel/dynamics.h"
#include "kpirl/dynmodel/mlp.h"
#include "kpirl/planarworld/world.h"
#include "kpirl/planner/planner.h"

namespace kpirl {

constexpr double kLogitClamp = 20.0;

struct AirlConfig {
  double eta_d = 1e-3;
  double eta_pi = 1e-3;
  double eta_v = 1e-2;
  double gamma = 0.99;
  int batch_size = 64;
  int horizon = 10;
  int iterations = 100;
  // Stop once the mean task reward of an iteration's episodes exceeds this.
  double reward_threshold = std::numeric_limits<double>::infinity();
  std::vector<int> hidden = {64, 64};
  int episode_length = 20;
  int episodes_per_iteration = 1;
  int discriminator_steps = 50;  // minibatch steps per iteration
  int plan_batch = 4;  // start states planned per policy update
  double imitation_weight = 0.5;
  double exploration_std = 0.1;
  bool act_with_planner = true;
  int population = 64;
  int elite_count = 8;
  int cem_iterations = 5;
  double init_std = 0.3;
  Task task = Task::kReach;
  std::uint64_t seed = 0;
};

void ValidateAirlConfig(const AirlConfig& cfg);

struct AirlNets {
  MlpParams discriminator;  // [s, a] -> logit
  MlpParams value;          // s -> V
  MlpParams policy;         // s -> pre-tanh action
};

// Fixed input scaling: pixels around the frame center, joints by pi.
MlpParams MakeAirlNet(int input_dim, int output_dim,
                      const std::vector<int>& hidden, Rng& rng,
                      const CameraModel& camera = {});
AirlNets InitAirlNets(const AirlConfig& cfg, const CameraModel& camera = {});

// Columns are samples.
struct SaBatch {
  Tensor s;  // kLatentDim x N
  Tensor a;  // kActionDim x N
  Eigen::Index size() const { return s.cols(); }
};

Var DiscriminatorLogit(const MlpVars& d, const Var& s, const Var& a);
Tensor DiscriminatorProb(const MlpParams& d, const Tensor& s, const Tensor& a);

// r = log D - log(1 - D), i.e. the clamped logit; 1 x N.
Tensor Reward(const MlpParams& d, const Tensor& s, const Tensor& a);

using RewardFn = std::function<Var(Tape&, const Var& s, const Var& a)>;
RewardFn DiscriminatorReward(const MlpParams& d);

Var DiscriminatorLoss(const MlpVars& d, Tape& tape, const SaBatch& expert,
                      const SaBatch& policy);
// One gradient-descent step; returns the loss before the step.
double DiscriminatorUpdate(MlpParams& d, const SaBatch& expert,
                           const SaBatch& policy, double eta);
double DiscriminatorAccuracy(const MlpParams& d, const SaBatch& expert,
                             const SaBatch& policy);

// Semi-gradient TD(0): phi += eta * delta * grad V(s); returns delta.
double ValueTdUpdate(MlpParams& v, const Tensor& s, const Tensor& a,
                     const Tensor& s_next, const RewardFn& reward,
                     double gamma, double eta);
Tensor ValueEval(const MlpParams& v, const Tensor& s);

Var PolicyOnTape(const MlpVars& pi, const Var& s);
Tensor PolicyAction(const MlpParams& pi, const Tensor& s);

// J(u) = -sum_t gamma^t r(s_t, u_t) - gamma^H V(s_H).
CostFn TdMpcObjective(const RewardFn& reward, const MlpParams& v,
                      double gamma);
// Policy proposal rolled through the model, packed like a plan.
Tensor PolicyProposal(const MlpParams& pi, const DynamicsModel& model,
                      const Tensor& s0, int horizon);

struct PolicyUpdateResult {
  std::vector<Plan> plans;
  double reward_term = 0.0;     // -E[r(s, pi(s))] before the step
  double imitation_term = 0.0;  // E[|pi(s) - a_plan|^2] before the step
};

PolicyUpdateResult PolicyUpdateTdmpc(MlpParams& pi, const RewardFn& reward,
                                     const MlpParams& v,
                                     const DynamicsModel& model,
                                     const Tensor& starts,
                                     const AirlConfig& cfg, Rng& rng);

struct AirlCurves {
  std::vector<double> discriminator_loss;
  std::vector<double> mean_td_error;
  std::vector<double> learned_reward;  // mean r over the iteration's episodes
  std::vector<double> task_reward;     // mean of -goal distance per step
  std::vector<double> policy_loss;
};

struct AirlResult {
  AirlNets nets;
  AirlCurves curves;
  int iterations_run = 0;
  bool converged = false;
};

// Expert transitions carry scripted-expert actions.
AirlResult AirlTrain(const std::vector<Transition>& expert,
                     const DynamicsModel& model, const AirlConfig& cfg,
                     const CameraModel& camera = {});

void PutAirlNets(Checkpoint& checkpoint, const AirlNets& nets);
AirlNets GetAirlNets(const Checkpoint& checkpoint);

}  // namespace kpirl

#endif  // KPIRL_AIRL_AIRL_H_
