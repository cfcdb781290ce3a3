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

#ifndef KPIRL_IRL_EVALUATION_H_
#define KPIRL_IRL_EVALUATION_H_

#include <cstdint>
#include <vector>

#include "kpirl/irl/irl.h"

namespace kpirl {

// Goal frame for MPC from the current observation: end-effector to the cube
// until the cube rides with it, then to the target; cube to the target;
// elbow at the inverse-kinematics elbow on the branch nearest the current q.
KeypointFrame StagedGoal(const Eigen::VectorXd& latent,
                         const CameraModel& camera = {});

CostProvider StagedCostProvider(const CostParams& params,
                                const CameraModel& camera = {});

// Hand-set reference weights for the upper-bound run.
CostParams ReferenceCost();

struct ScenarioResult {
  Eigen::Vector2d cube_start = Eigen::Vector2d::Zero();
  bool success = false;
  double final_distance = 0.0;
  int steps = 0;
};

struct EvalReport {
  std::vector<ScenarioResult> scenarios;
  int successes = 0;
  double threshold = kSuccessRadius;
};

EvalReport EvaluateMpc(const DynamicsModel& model, const CostParams& cost,
                       PlannerKind kind, const PlannerConfig& cfg,
                       int scenarios, std::uint64_t seed, int max_steps,
                       const CameraModel& camera = {});

}  // namespace kpirl

#endif  // KPIRL_IRL_EVALUATION_H_
