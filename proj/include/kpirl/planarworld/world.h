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

// Planar two-link arm with a graspable cube, a fixed target and a synthetic
// keypoint observer.

#ifndef KPIRL_PLANARWORLD_WORLD_H_
#define KPIRL_PLANARWORLD_WORLD_H_

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "kpirl/rng.h"

namespace kpirl {

constexpr int kNumKeypoints = 4;  // elbow, end-effector, cube, target
constexpr int kDof = 2;
constexpr int kActionDim = 3;  // two joint velocities, gripper
constexpr int kFrameDim = 3 * kNumKeypoints;
constexpr int kLatentDim = kFrameDim + 2 * kDof;
constexpr int kQIndex = kFrameDim;
constexpr int kQDotIndex = kFrameDim + kDof;

constexpr double kLinkLength = 1.0;
constexpr double kControlDt = 0.2;   // 5 Hz
constexpr double kExpertDt = 1.0 / 30.0;
constexpr int kSubsample = 6;
constexpr double kMaxJointVelocity = 1.0;
constexpr double kGraspRadius = 0.1;
constexpr double kSuccessRadius = 0.05;
constexpr int kMaxDemoSteps = 100;

enum KeypointIndex { kElbow = 0, kEndEffector = 1, kCube = 2, kTarget = 3 };

enum class Task { kPickPlace, kReach };

struct WorldState {
  Eigen::Vector2d q = Eigen::Vector2d::Zero();
  Eigen::Vector2d q_dot = Eigen::Vector2d::Zero();
  bool gripper_closed = false;
  Eigen::Vector2d cube_pos = Eigen::Vector2d::Zero();
  Eigen::Vector2d target_pos = Eigen::Vector2d::Zero();
  bool attached = false;
  int time_index = 0;
};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double m = 0.0;
};

using KeypointFrame = std::array<Keypoint, kNumKeypoints>;

struct CameraModel {
  double scale = 16.0;
  Eigen::Vector2d offset{32.0, 32.0};
  double frame = 64.0;

  Eigen::Vector2d ToPixel(const Eigen::Vector2d& p) const {
    return offset + scale * p;
  }
  Eigen::Vector2d ToWorld(const Eigen::Vector2d& px) const {
    return (px - offset) / scale;
  }
};

// Default scenario layout.
Eigen::Vector2d DefaultTarget();
Eigen::Vector2d DefaultStartJoints();

double WrapAngle(double a);
// (elbow, end-effector)
std::pair<Eigen::Vector2d, Eigen::Vector2d> ForwardKinematics(
    const Eigen::Vector2d& q);
Eigen::Matrix2d Jacobian(const Eigen::Vector2d& q);

WorldState InitialState(const Eigen::Vector2d& cube_pos);

WorldState StepEnv(const WorldState& state, const Eigen::Vector3d& action,
                   double dt = kControlDt);

KeypointFrame ObserveKeypoints(const WorldState& state,
                               const CameraModel& camera);

// Flattened [x, y, m] per keypoint.
Eigen::VectorXd FlattenFrame(const KeypointFrame& frame);
KeypointFrame UnflattenFrame(const Eigen::VectorXd& z);

// [z, q, q_dot]
Eigen::VectorXd Latent(const WorldState& state, const CameraModel& camera);

bool IsSuccess(const WorldState& state, Task task = Task::kPickPlace);
double GoalDistance(const WorldState& state, Task task = Task::kPickPlace);

// Damped-least-squares joint velocity moving the end-effector along `error`.
Eigen::Vector2d IkVelocity(const Eigen::Vector2d& q,
                           const Eigen::Vector2d& error);

Eigen::Vector3d ScriptedExpert(const WorldState& state);
// Drives the end-effector onto the cube with the gripper open.
Eigen::Vector3d ReachExpert(const WorldState& state);
Eigen::Vector3d ExpertAction(const WorldState& state, Task task);

// Cube position uniform over the reachable annulus, away from the target.
Eigen::Vector2d SpawnCube(Rng& rng);

struct Demonstration {
  std::vector<KeypointFrame> frames;  // 5 Hz
  std::vector<WorldState> states;     // world state behind every frame
  // Effective 5 Hz command between consecutive frames: mean joint command
  // over the six expert substeps and the last gripper command.
  std::vector<Eigen::Vector3d> actions;
  Eigen::Vector2d q0 = Eigen::Vector2d::Zero();
  Eigen::Vector2d q_dot0 = Eigen::Vector2d::Zero();
  KeypointFrame z_goal{};
  std::uint64_t seed = 0;
  int scenario_id = 0;
};

struct DemoSet {
  std::vector<Demonstration> demos;
  int resamples = 0;  // failed scenarios that were redrawn
};

// Rolls the expert out at 30 Hz from `start`, recording every sixth state
// until success or max_steps 5 Hz steps. Returns the demo and its success.
std::pair<Demonstration, bool> RecordDemo(const WorldState& start,
                                          const CameraModel& camera,
                                          Task task = Task::kPickPlace,
                                          int max_steps = kMaxDemoSteps);

DemoSet CollectDemos(int n, std::uint64_t seed, const CameraModel& camera,
                     Task task = Task::kPickPlace);

struct Transition {
  Eigen::VectorXd s;
  Eigen::Vector3d a;
  Eigen::VectorXd s_next;
  bool expert = false;
};

constexpr int kDynEpisodeLength = 40;

std::vector<Transition> CollectDynData(int n_steps, std::uint64_t seed,
                                       double mix, const CameraModel& camera,
                                       Task task = Task::kPickPlace);

}  // namespace kpirl

#endif  // KPIRL_PLANARWORLD_WORLD_H_
