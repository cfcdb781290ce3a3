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

#include "kpirl/planarworld/world.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/LU>

#include "kpirl/error.h"

namespace kpirl {
namespace {

constexpr double kIkGain = 2.0;
constexpr double kIkDamping = 0.1;
constexpr double kSingularDet = 1e-3;
constexpr double kFallbackElbowVelocity = 0.2;
constexpr double kSpawnMinRadius = 0.5;
constexpr double kSpawnMaxRadius = 1.8;
constexpr double kSpawnTargetClearance = 0.3;
constexpr int kMaxResamples = 1000;

Eigen::Vector2d ClampVelocity(const Eigen::Vector2d& u) {
  return u.cwiseMax(-kMaxJointVelocity).cwiseMin(kMaxJointVelocity);
}

}  // namespace

Eigen::Vector2d DefaultTarget() { return {-1.0, 1.0}; }
Eigen::Vector2d DefaultStartJoints() { return {0.0, std::numbers::pi / 2}; }

double WrapAngle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  return a - two_pi * std::floor((a + std::numbers::pi) / two_pi);
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> ForwardKinematics(
    const Eigen::Vector2d& q) {
  const Eigen::Vector2d elbow(kLinkLength * std::cos(q[0]),
                              kLinkLength * std::sin(q[0]));
  const Eigen::Vector2d ee = elbow + Eigen::Vector2d(
                                         kLinkLength * std::cos(q[0] + q[1]),
                                         kLinkLength * std::sin(q[0] + q[1]));
  return {elbow, ee};
}

Eigen::Matrix2d Jacobian(const Eigen::Vector2d& q) {
  const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
  const double s12 = std::sin(q[0] + q[1]), c12 = std::cos(q[0] + q[1]);
  Eigen::Matrix2d j;
  j << -kLinkLength * s1 - kLinkLength * s12, -kLinkLength * s12,
      kLinkLength * c1 + kLinkLength * c12, kLinkLength * c12;
  return j;
}

WorldState InitialState(const Eigen::Vector2d& cube_pos) {
  WorldState s;
  s.q = DefaultStartJoints();
  s.cube_pos = cube_pos;
  s.target_pos = DefaultTarget();
  return s;
}

WorldState StepEnv(const WorldState& state, const Eigen::Vector3d& action,
                   double dt) {
  if (!action.allFinite()) Fail(ErrorKind::kInput, "non-finite action");
  WorldState next = state;
  const Eigen::Vector2d u = ClampVelocity(action.head<2>());
  next.q = Eigen::Vector2d(WrapAngle(state.q[0] + u[0] * dt),
                           WrapAngle(state.q[1] + u[1] * dt));
  next.q_dot = u;
  next.gripper_closed = action[2] > 0.0;
  const Eigen::Vector2d ee = ForwardKinematics(next.q).second;
  if (next.gripper_closed) {
    next.attached =
        state.attached || (ee - state.cube_pos).norm() < kGraspRadius;
  } else {
    next.attached = false;
  }
  if (next.attached) next.cube_pos = ee;
  next.time_index = state.time_index + 1;
  return next;
}

KeypointFrame ObserveKeypoints(const WorldState& state,
                               const CameraModel& camera) {
  const auto [elbow, ee] = ForwardKinematics(state.q);
  const std::array<Eigen::Vector2d, kNumKeypoints> points = {
      elbow, ee, state.cube_pos, state.target_pos};
  KeypointFrame frame;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Eigen::Vector2d px = camera.ToPixel(points[k]);
    const bool inside = px[0] >= 0.0 && px[0] <= camera.frame &&
                        px[1] >= 0.0 && px[1] <= camera.frame;
    frame[k] = {px[0], px[1], inside ? 1.0 : 0.0};
  }
  return frame;
}

Eigen::VectorXd FlattenFrame(const KeypointFrame& frame) {
  Eigen::VectorXd z(kFrameDim);
  for (int k = 0; k < kNumKeypoints; ++k) {
    z[3 * k] = frame[k].x;
    z[3 * k + 1] = frame[k].y;
    z[3 * k + 2] = frame[k].m;
  }
  return z;
}

KeypointFrame UnflattenFrame(const Eigen::VectorXd& z) {
  if (z.size() < kFrameDim) {
    Fail(ErrorKind::kInput, "keypoint vector of length " +
                                std::to_string(z.size()));
  }
  KeypointFrame frame;
  for (int k = 0; k < kNumKeypoints; ++k) {
    frame[k] = {z[3 * k], z[3 * k + 1], z[3 * k + 2]};
  }
  return frame;
}

Eigen::VectorXd Latent(const WorldState& state, const CameraModel& camera) {
  Eigen::VectorXd s(kLatentDim);
  s.head(kFrameDim) = FlattenFrame(ObserveKeypoints(state, camera));
  s.segment<kDof>(kQIndex) = state.q;
  s.segment<kDof>(kQDotIndex) = state.q_dot;
  return s;
}

double GoalDistance(const WorldState& state, Task task) {
  if (task == Task::kReach) {
    return (ForwardKinematics(state.q).second - state.cube_pos).norm();
  }
  return (state.cube_pos - state.target_pos).norm();
}

bool IsSuccess(const WorldState& state, Task task) {
  return GoalDistance(state, task) < kSuccessRadius;
}

Eigen::Vector2d IkVelocity(const Eigen::Vector2d& q,
                           const Eigen::Vector2d& error) {
  const Eigen::Matrix2d j = Jacobian(q);
  if (std::abs(j.determinant()) < kSingularDet) {
    return {0.0, kFallbackElbowVelocity};
  }
  const Eigen::Matrix2d damped =
      j * j.transpose() + kIkDamping * kIkDamping * Eigen::Matrix2d::Identity();
  const Eigen::Vector2d dq =
      j.transpose() * damped.partialPivLu().solve(kIkGain * error);
  return ClampVelocity(dq);
}

Eigen::Vector3d ScriptedExpert(const WorldState& state) {
  const Eigen::Vector2d ee = ForwardKinematics(state.q).second;
  Eigen::Vector3d a;
  if (state.attached) {
    if ((ee - state.target_pos).norm() < kSuccessRadius) return {0.0, 0.0, -1.0};
    a << IkVelocity(state.q, state.target_pos - ee), 1.0;
    return a;
  }
  if ((ee - state.cube_pos).norm() < kGraspRadius) {
    // close while still closing in on the cube
    a << IkVelocity(state.q, state.cube_pos - ee), 1.0;
    return a;
  }
  if (IsSuccess(state)) return {0.0, 0.0, -1.0};
  a << IkVelocity(state.q, state.cube_pos - ee), -1.0;
  return a;
}

Eigen::Vector3d ReachExpert(const WorldState& state) {
  const Eigen::Vector2d ee = ForwardKinematics(state.q).second;
  if (IsSuccess(state, Task::kReach)) return {0.0, 0.0, -1.0};
  Eigen::Vector3d a;
  a << IkVelocity(state.q, state.cube_pos - ee), -1.0;
  return a;
}

Eigen::Vector3d ExpertAction(const WorldState& state, Task task) {
  return task == Task::kReach ? ReachExpert(state) : ScriptedExpert(state);
}

Eigen::Vector2d SpawnCube(Rng& rng) {
  while (true) {
    const double r = rng.Uniform(kSpawnMinRadius, kSpawnMaxRadius);
    const double th = rng.Uniform(-std::numbers::pi, std::numbers::pi);
    const Eigen::Vector2d c(r * std::cos(th), r * std::sin(th));
    if ((c - DefaultTarget()).norm() > kSpawnTargetClearance) return c;
  }
}

std::pair<Demonstration, bool> RecordDemo(const WorldState& start,
                                          const CameraModel& camera,
                                          Task task, int max_steps) {
  Demonstration demo;
  demo.q0 = start.q;
  demo.q_dot0 = start.q_dot;
  WorldState s = start;
  demo.frames.push_back(ObserveKeypoints(s, camera));
  demo.states.push_back(s);
  bool success = IsSuccess(s, task);
  for (int k = 0; k < max_steps && !success; ++k) {
    Eigen::Vector3d effective = Eigen::Vector3d::Zero();
    for (int j = 0; j < kSubsample; ++j) {
      const Eigen::Vector3d a = ExpertAction(s, task);
      effective.head<2>() += a.head<2>() / kSubsample;
      effective[2] = a[2];
      s = StepEnv(s, a, kExpertDt);
    }
    demo.actions.push_back(effective);
    demo.frames.push_back(ObserveKeypoints(s, camera));
    demo.states.push_back(s);
    success = IsSuccess(s, task);
  }
  demo.z_goal = demo.frames.back();
  return {std::move(demo), success};
}

DemoSet CollectDemos(int n, std::uint64_t seed, const CameraModel& camera,
                     Task task) {
  if (n < 0) Fail(ErrorKind::kConfig, "negative demo count");
  DemoSet set;
  Rng rng(seed);
  int scenario = 0;
  while (static_cast<int>(set.demos.size()) < n) {
    const WorldState start = InitialState(SpawnCube(rng));
    auto [demo, success] = RecordDemo(start, camera, task);
    // a demo needs at least one transition
    if (success && demo.frames.size() >= 2) {
      demo.seed = seed;
      demo.scenario_id = scenario;
      set.demos.push_back(std::move(demo));
    } else if (++set.resamples > kMaxResamples) {
      Fail(ErrorKind::kEnvironment,
           "more than " + std::to_string(kMaxResamples) +
               " failed demo scenarios");
    }
    ++scenario;
  }
  return set;
}

std::vector<Transition> CollectDynData(int n_steps, std::uint64_t seed,
                                       double mix, const CameraModel& camera,
                                       Task task) {
  if (mix < 0.0 || mix > 1.0) Fail(ErrorKind::kConfig, "mix outside [0, 1]");
  std::vector<Transition> data;
  data.reserve(std::max(n_steps, 0));
  Rng rng(seed);
  while (static_cast<int>(data.size()) < n_steps) {
    WorldState s = InitialState(SpawnCube(rng));
    for (int k = 0; k < kDynEpisodeLength &&
                    static_cast<int>(data.size()) < n_steps;
         ++k) {
      Transition t;
      t.expert = rng.Uniform() < mix;
      if (t.expert) {
        t.a = ExpertAction(s, task);
      } else {
        t.a = Eigen::Vector3d(rng.Uniform(-1.0, 1.0), rng.Uniform(-1.0, 1.0),
                              rng.Uniform(-1.0, 1.0));
      }
      const WorldState next = StepEnv(s, t.a);
      t.s = Latent(s, camera);
      t.s_next = Latent(next, camera);
      data.push_back(std::move(t));
      s = next;
    }
  }
  return data;
}

}  // namespace kpirl
