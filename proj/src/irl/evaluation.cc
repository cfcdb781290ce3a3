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

#include "kpirl/irl/evaluation.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "kpirl/error.h"
#include "kpirl/rng.h"

namespace kpirl {
namespace {

Eigen::Vector2d Px(const Eigen::VectorXd& latent, int k) {
  return latent.segment<2>(3 * k);
}

Eigen::Vector2d IkElbow(const Eigen::Vector2d& ee, const Eigen::Vector2d& q_ref) {
  const double c2 = std::clamp((ee.squaredNorm() - 2.0 * kLinkLength * kLinkLength) /
                                   (2.0 * kLinkLength * kLinkLength),
                               -1.0, 1.0);
  Eigen::Vector2d best_q = q_ref;
  double best_d = 1e300;
  for (double sign : {1.0, -1.0}) {
    const double q2 = sign * std::acos(c2);
    const double q1 = std::atan2(ee.y(), ee.x()) -
                      std::atan2(std::sin(q2), 1.0 + std::cos(q2));
    const double d = std::abs(WrapAngle(q2 - q_ref.y()));
    if (d < best_d) {
      best_d = d;
      best_q = {q1, q2};
    }
  }
  return ForwardKinematics(best_q).first;
}

double SoftplusInverse(double y) { return std::log(std::expm1(y)); }

}  // namespace

KeypointFrame StagedGoal(const Eigen::VectorXd& latent,
                         const CameraModel& camera) {
  if (latent.size() != kLatentDim) {
    Fail(ErrorKind::kInput, "latent has " + std::to_string(latent.size()) +
                                " entries, expected " + std::to_string(kLatentDim));
  }
  const Eigen::Vector2d ee = Px(latent, kEndEffector);
  const Eigen::Vector2d cube = Px(latent, kCube);
  const Eigen::Vector2d target = Px(latent, kTarget);
  const bool carried = (ee - cube).norm() < 1e-6;
  const Eigen::Vector2d ee_goal = carried ? target : cube;
  const Eigen::Vector2d elbow = camera.ToPixel(
      IkElbow(camera.ToWorld(ee_goal), latent.segment<kDof>(kQIndex)));
  KeypointFrame g = UnflattenFrame(latent.head(kFrameDim));
  g[kElbow].x = elbow.x();
  g[kElbow].y = elbow.y();
  g[kEndEffector].x = ee_goal.x();
  g[kEndEffector].y = ee_goal.y();
  g[kCube].x = target.x();
  g[kCube].y = target.y();
  return g;
}

CostProvider StagedCostProvider(const CostParams& params,
                                const CameraModel& camera) {
  return [params, camera](const Eigen::VectorXd& latent) {
    return MakeCostFn(params, FrameXy(StagedGoal(latent, camera)), camera);
  };
}

CostParams ReferenceCost() {
  CostParams p;
  p.variant = CostVariant::kWeightedKeypoint;
  p.rho.resize(kXyDim, 1);
  const double w[kNumKeypoints] = {0.1, 1.0, 0.2, 0.0};
  for (int k = 0; k < kNumKeypoints; ++k) {
    // the target keypoint never moves; its weight only needs to be tiny
    const double r = w[k] > 0.0 ? SoftplusInverse(w[k]) : -30.0;
    p.rho(2 * k, 0) = p.rho(2 * k + 1, 0) = r;
  }
  return p;
}

EvalReport EvaluateMpc(const DynamicsModel& model, const CostParams& cost,
                       PlannerKind kind, const PlannerConfig& cfg,
                       int scenarios, std::uint64_t seed, int max_steps,
                       const CameraModel& camera) {
  if (scenarios < 0 || max_steps < 0) {
    Fail(ErrorKind::kConfig, "scenario and step counts must be non-negative");
  }
  EvalReport report;
  const CostProvider provider = StagedCostProvider(cost, camera);
  for (int i = 0; i < scenarios; ++i) {
    Rng spawn(SplitSeed(seed, static_cast<std::uint64_t>(i)));
    ScenarioResult r;
    r.cube_start = SpawnCube(spawn);
    PlannerConfig pc = cfg;
    pc.seed = SplitSeed(seed ^ 0x5bd1e995u, static_cast<std::uint64_t>(i));
    const MpcResult run = MpcExecute(InitialState(r.cube_start), model, provider,
                                     kind, pc, max_steps, Task::kPickPlace, camera);
    r.success = run.success;
    r.final_distance = run.goal_distance.back();
    r.steps = static_cast<int>(run.actions.size());
    report.successes += r.success ? 1 : 0;
    report.scenarios.push_back(r);
  }
  return report;
}

}  // namespace kpirl
