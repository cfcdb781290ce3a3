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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "kpirl/error.h"

namespace kpirl {
namespace {

const CameraModel kCamera;

TEST(WorldTest, ZeroActionKeepsState) {
  WorldState s = InitialState({1.0, 0.5});
  WorldState n = StepEnv(s, Eigen::Vector3d::Zero());
  EXPECT_EQ(n.q, s.q);
  EXPECT_EQ(n.cube_pos, s.cube_pos);
  EXPECT_FALSE(n.gripper_closed);
  EXPECT_EQ(n.time_index, s.time_index + 1);
}

TEST(WorldTest, VelocityIsClampedBeforeIntegration) {
  WorldState s = InitialState({1.0, 0.5});
  s.q = Eigen::Vector2d::Zero();
  WorldState n = StepEnv(s, {std::numbers::pi / 4 * 5, 0.0, -1.0});
  EXPECT_DOUBLE_EQ(n.q[0], 0.2);
  EXPECT_DOUBLE_EQ(n.q[1], 0.0);
  EXPECT_DOUBLE_EQ(n.q_dot[0], 1.0);
}

TEST(WorldTest, StraightArmKinematics) {
  auto [e0, ee0] = ForwardKinematics({0.0, 0.0});
  EXPECT_NEAR(ee0[0], 2.0, 1e-15);
  EXPECT_NEAR(ee0[1], 0.0, 1e-15);
  auto [e1, ee1] = ForwardKinematics({std::numbers::pi / 2, 0.0});
  EXPECT_NEAR(ee1[0], 0.0, 1e-15);
  EXPECT_NEAR(ee1[1], 2.0, 1e-15);
}

TEST(WorldTest, NonFiniteActionIsInputError) {
  WorldState s = InitialState({1.0, 0.5});
  try {
    StepEnv(s, {NAN, 0.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInput);
  }
}

TEST(WorldTest, WrapStaysInRange) {
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double w = WrapAngle(a);
    EXPECT_GE(w, -std::numbers::pi);
    EXPECT_LE(w, std::numbers::pi);
    EXPECT_NEAR(std::remainder(w - a, 2 * std::numbers::pi), 0.0, 1e-12);
  }
}

TEST(WorldTest, Projection) {
  WorldState s = InitialState({0.0, 0.0});
  s.q = Eigen::Vector2d::Zero();
  KeypointFrame f = ObserveKeypoints(s, kCamera);
  EXPECT_DOUBLE_EQ(f[kEndEffector].x, 64.0);
  EXPECT_DOUBLE_EQ(f[kEndEffector].y, 32.0);
  EXPECT_DOUBLE_EQ(f[kEndEffector].m, 1.0);
  EXPECT_DOUBLE_EQ(f[kCube].x, 32.0);
  EXPECT_DOUBLE_EQ(f[kCube].y, 32.0);
  s.cube_pos = {(100.0 - 32.0) / 16.0, 0.0};
  f = ObserveKeypoints(s, kCamera);
  EXPECT_DOUBLE_EQ(f[kCube].x, 100.0);
  EXPECT_DOUBLE_EQ(f[kCube].m, 0.0);
}

TEST(WorldTest, ProjectionIsAffine) {
  WorldState s = InitialState({0.3, -0.4});
  WorldState t = s;
  t.cube_pos *= 2.0;
  const KeypointFrame a = ObserveKeypoints(s, kCamera);
  const KeypointFrame b = ObserveKeypoints(t, kCamera);
  EXPECT_NEAR(b[kCube].x - 32.0, 2.0 * (a[kCube].x - 32.0), 1e-12);
  EXPECT_NEAR(b[kCube].y - 32.0, 2.0 * (a[kCube].y - 32.0), 1e-12);
}

TEST(WorldTest, TerminalPhaseOpensGripper) {
  WorldState s = InitialState({0.0, 0.0});
  s.target_pos = ForwardKinematics(s.q).second;
  s.cube_pos = s.target_pos;
  s.attached = true;
  s.gripper_closed = true;
  EXPECT_EQ(ScriptedExpert(s), Eigen::Vector3d(0.0, 0.0, -1.0));
}

TEST(WorldTest, ExpertMovesTowardCube) {
  WorldState s = InitialState({0.0, 0.0});
  s.q = {0.3, 1.2};
  const Eigen::Vector2d ee = ForwardKinematics(s.q).second;
  s.cube_pos = ee + Eigen::Vector2d(0.5, 0.0);
  const Eigen::Vector3d a = ScriptedExpert(s);
  // numerical Jacobian
  Eigen::Matrix2d j;
  const double h = 1e-6;
  for (int c = 0; c < 2; ++c) {
    Eigen::Vector2d qp = s.q, qm = s.q;
    qp[c] += h;
    qm[c] -= h;
    j.col(c) = (ForwardKinematics(qp).second - ForwardKinematics(qm).second) /
               (2 * h);
  }
  const Eigen::Vector2d direction = j.transpose() * (s.cube_pos - ee);
  EXPECT_GT(a.head<2>().dot(direction), 0.0);
  EXPECT_LT(a[2], 0.0);
}

TEST(WorldTest, ExpertClosesNearCube) {
  WorldState s = InitialState({0.0, 0.0});
  s.cube_pos = ForwardKinematics(s.q).second + Eigen::Vector2d(0.05, 0.0);
  EXPECT_GT(ScriptedExpert(s)[2], 0.0);
}

TEST(WorldTest, AttachedCubeFollowsEndEffector) {
  WorldState s = InitialState({0.0, 0.0});
  s.cube_pos = ForwardKinematics(s.q).second + Eigen::Vector2d(0.05, 0.0);
  s = StepEnv(s, {0.3, -0.2, 1.0});
  ASSERT_TRUE(s.attached);
  for (int k = 0; k < 5; ++k) {
    s = StepEnv(s, {0.5, 0.5, 1.0});
    EXPECT_TRUE(s.attached && s.gripper_closed);
    const KeypointFrame f = ObserveKeypoints(s, kCamera);
    EXPECT_EQ(f[kCube].x, f[kEndEffector].x);
    EXPECT_EQ(f[kCube].y, f[kEndEffector].y);
  }
  s = StepEnv(s, {0.0, 0.0, -1.0});
  EXPECT_FALSE(s.attached);
}

TEST(WorldTest, StepIgnoresTimeIndex) {
  WorldState a = InitialState({1.0, 1.0});
  WorldState b = a;
  b.time_index = 57;
  WorldState na = StepEnv(a, {0.4, -0.7, 1.0});
  WorldState nb = StepEnv(b, {0.4, -0.7, 1.0});
  EXPECT_EQ(na.q, nb.q);
  EXPECT_EQ(na.cube_pos, nb.cube_pos);
  EXPECT_EQ(nb.time_index, 58);
}

TEST(WorldTest, DemosAreDeterministicAndSuccessful) {
  DemoSet a = CollectDemos(20, 42, kCamera);
  DemoSet b = CollectDemos(20, 42, kCamera);
  ASSERT_EQ(a.demos.size(), 20u);
  for (size_t i = 0; i < a.demos.size(); ++i) {
    const Demonstration& d = a.demos[i];
    ASSERT_GE(d.frames.size(), 2u);
    ASSERT_EQ(d.frames.size(), b.demos[i].frames.size());
    EXPECT_EQ(d.actions.size(), d.frames.size() - 1);
    for (size_t t = 0; t < d.frames.size(); ++t) {
      for (int k = 0; k < kNumKeypoints; ++k) {
        EXPECT_EQ(d.frames[t][k].x, b.demos[i].frames[t][k].x);
        EXPECT_EQ(d.frames[t][k].y, b.demos[i].frames[t][k].y);
      }
    }
    EXPECT_LT((d.states.back().cube_pos - d.states.back().target_pos).norm(),
              kSuccessRadius);
  }
}

TEST(WorldTest, CubeAtStartGivesShortDemo) {
  const Eigen::Vector2d ee = ForwardKinematics(DefaultStartJoints()).second;
  auto [demo, success] = RecordDemo(InitialState(ee), kCamera);
  EXPECT_TRUE(success);
  auto [far_demo, far_success] = RecordDemo(InitialState({1.5, -0.5}), kCamera);
  EXPECT_TRUE(far_success);
  EXPECT_LT(demo.frames.size(), far_demo.frames.size());
}

TEST(WorldTest, ExpertSuccessRate) {
  Rng rng(2024);
  int ok = 0;
  for (int i = 0; i < 200; ++i) {
    ok += RecordDemo(InitialState(SpawnCube(rng)), kCamera).second ? 1 : 0;
  }
  EXPECT_GE(ok, 190);
}

TEST(WorldTest, DynDataMixBoundaries) {
  auto random = CollectDynData(300, 1, 0.0, kCamera);
  for (const Transition& t : random) {
    EXPECT_FALSE(t.expert);
    EXPECT_LE(t.a.cwiseAbs().maxCoeff(), 1.0);
  }
  auto expert = CollectDynData(300, 1, 1.0, kCamera);
  for (const Transition& t : expert) EXPECT_TRUE(t.expert);
  auto mixed = CollectDynData(5000, 3, 0.5, kCamera);
  int n_expert = 0;
  bool grasped = false;
  for (const Transition& t : mixed) {
    n_expert += t.expert;
    grasped |= t.s[3 * kCube] == t.s[3 * kEndEffector] &&
               t.s[3 * kCube + 1] == t.s[3 * kEndEffector + 1];
  }
  EXPECT_NEAR(n_expert / 5000.0, 0.5, 0.05);
  EXPECT_TRUE(grasped);
}

}  // namespace
}  // namespace kpirl
