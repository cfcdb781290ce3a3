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

#include "kpirl/airl/airl.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kpirl/error.h"
#include "kpirl/rng.h"

namespace kpirl {
namespace {

// Zero last layer with a chosen bias: constant output.
MlpParams ConstantNet(MlpParams p, double bias) {
  p.weights.back().setZero();
  p.biases.back().setConstant(bias);
  return p;
}

AirlNets Nets(std::uint64_t seed = 1) {
  AirlConfig cfg;
  cfg.seed = seed;
  return InitAirlNets(cfg);
}

Tensor RandomStates(Rng& rng, int n) {
  Tensor s(kLatentDim, n);
  for (int i = 0; i < n; ++i) {
    WorldState w = InitialState(SpawnCube(rng));
    w.q = {rng.Uniform(-3, 3), rng.Uniform(-3, 3)};
    w.q_dot = {rng.Uniform(-1, 1), rng.Uniform(-1, 1)};
    s.col(i) = Latent(w, CameraModel{});
  }
  return s;
}

Tensor RandomActions(Rng& rng, int n) {
  Tensor a(kActionDim, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.Uniform(-1, 1);
  return a;
}

TEST(DiscriminatorTest, IgnorantLossIsTwoLogTwo) {
  Rng rng(2);
  MlpParams d = ConstantNet(Nets().discriminator, 0.0);
  SaBatch e{RandomStates(rng, 7), RandomActions(rng, 7)};
  SaBatch p{RandomStates(rng, 5), RandomActions(rng, 5)};
  EXPECT_NEAR(DiscriminatorUpdate(d, e, p, 0.0), 2.0 * std::log(2.0), 1e-15);
}

TEST(DiscriminatorTest, RewardIsLogit) {
  Rng rng(3);
  const Tensor s = RandomStates(rng, 1), a = RandomActions(rng, 1);
  EXPECT_EQ(Reward(ConstantNet(Nets().discriminator, 0.0), s, a)(0, 0), 0.0);
  const MlpParams one = ConstantNet(Nets().discriminator, 1.0);
  EXPECT_NEAR(DiscriminatorProb(one, s, a)(0, 0), std::exp(1.0) / (1.0 + std::exp(1.0)),
              1e-15);
  EXPECT_NEAR(Reward(one, s, a)(0, 0), 1.0, 1e-15);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const MlpParams d = Nets(100 + trial).discriminator;
    const Tensor ss = RandomStates(rng, 16), aa = RandomActions(rng, 16);
    const Tensor r = Reward(d, ss, aa);
    const Tensor dp = DiscriminatorProb(d, ss, aa);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      worst = std::max(worst, std::abs(r(i) - (std::log(dp(i)) - std::log1p(-dp(i)))));
    }
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(DiscriminatorTest, LogitsAreClamped) {
  Rng rng(4);
  const Tensor s = RandomStates(rng, 1), a = RandomActions(rng, 1);
  const MlpParams hot = ConstantNet(Nets().discriminator, 100.0);
  EXPECT_EQ(Reward(hot, s, a)(0, 0), kLogitClamp);
  EXPECT_LT(DiscriminatorProb(hot, s, a)(0, 0), 1.0);
  EXPECT_EQ(Reward(ConstantNet(Nets().discriminator, -100.0), s, a)(0, 0), -kLogitClamp);
}

TEST(DiscriminatorTest, SeparatesCraftedSet) {
  Rng rng(5);
  Tensor ea = RandomActions(rng, 64), pa = RandomActions(rng, 64);
  ea.row(0) = ea.row(0).cwiseAbs().array() + 0.1;
  pa.row(0) = -(pa.row(0).cwiseAbs().array() + 0.1);
  SaBatch e{RandomStates(rng, 64), ea}, p{RandomStates(rng, 64), pa};
  MlpParams d = Nets().discriminator;
  for (int k = 0; k < 300; ++k) DiscriminatorUpdate(d, e, p, 0.05);
  EXPECT_GT(DiscriminatorAccuracy(d, e, p), 0.95);
  // held-out draws from the same classes
  Tensor ha = RandomActions(rng, 64), hb = RandomActions(rng, 64);
  ha.row(0) = ha.row(0).cwiseAbs().array() + 0.1;
  hb.row(0) = -(hb.row(0).cwiseAbs().array() + 0.1);
  EXPECT_GT(DiscriminatorAccuracy(d, {RandomStates(rng, 64), ha},
                                  {RandomStates(rng, 64), hb}),
            0.95);
}

TEST(DiscriminatorTest, ZeroRateKeepsWeights) {
  Rng rng(6);
  MlpParams d = Nets().discriminator;
  const MlpParams before = d;
  DiscriminatorUpdate(d, {RandomStates(rng, 3), RandomActions(rng, 3)},
                      {RandomStates(rng, 3), RandomActions(rng, 3)}, 0.0);
  for (size_t i = 0; i < d.weights.size(); ++i) {
    EXPECT_EQ(d.weights[i], before.weights[i]);
    EXPECT_EQ(d.biases[i], before.biases[i]);
  }
  try {
    DiscriminatorUpdate(d, {Tensor(kLatentDim, 0), Tensor(kActionDim, 0)},
                        {RandomStates(rng, 3), RandomActions(rng, 3)}, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInput);
  }
}

RewardFn ConstantReward(double r) {
  return [r](Tape& tape, const Var& s, const Var&) {
    return tape.Constant(Tensor::Constant(1, s.cols(), r));
  };
}

TEST(ValueTest, ColdStartDelta) {
  Rng rng(7);
  MlpParams v = ConstantNet(Nets().value, 0.0);
  const Tensor s = RandomStates(rng, 1);
  EXPECT_EQ(ValueTdUpdate(v, s, RandomActions(rng, 1), RandomStates(rng, 1),
                          ConstantReward(1.0), 0.5, 0.0),
            1.0);
}

TEST(ValueTest, SelfLoopConvergesToGeometricSum) {
  Rng rng(8);
  MlpParams v = Nets().value;
  const Tensor s = RandomStates(rng, 1), a = RandomActions(rng, 1);
  const double gamma = 0.9;
  for (int k = 0; k < 5000; ++k) {
    ValueTdUpdate(v, s, a, s, ConstantReward(1.0), gamma, 1e-2);
  }
  EXPECT_NEAR(ValueEval(v, s)(0, 0), 1.0 / (1.0 - gamma), 1e-3);
}

TEST(ValueTest, ZeroRateStillReportsDelta) {
  Rng rng(9);
  MlpParams v = Nets().value;
  const MlpParams before = v;
  const Tensor s = RandomStates(rng, 1), s2 = RandomStates(rng, 1);
  const double want = 2.0 + 0.5 * ValueEval(v, s2)(0, 0) - ValueEval(v, s)(0, 0);
  EXPECT_NEAR(ValueTdUpdate(v, s, RandomActions(rng, 1), s2, ConstantReward(2.0), 0.5, 0.0),
              want, 1e-15);
  EXPECT_EQ(v.weights[0], before.weights[0]);
}

// The update must equal eta * delta * grad V(s), with V(s') held fixed.
TEST(ValueTest, SemiGradient) {
  Rng rng(10);
  MlpParams v = Nets().value;
  const Tensor s = RandomStates(rng, 1), s2 = RandomStates(rng, 1);
  const double gamma = 0.9, eta = 0.01;
  const double delta = 1.5 + gamma * ValueEval(v, s2)(0, 0) - ValueEval(v, s)(0, 0);
  Tape tape;
  MlpVars vars = BindMlp(tape, v, true);
  const std::vector<Tensor> g = Grad(MlpForward(vars, tape.Constant(s)), vars.Trainable());
  MlpParams updated = v;
  ValueTdUpdate(updated, s, RandomActions(rng, 1), s2, ConstantReward(1.5), gamma, eta);
  const std::vector<Tensor*> before = TrainableTensors(v);
  const std::vector<Tensor*> after = TrainableTensors(updated);
  double worst = 0.0;
  for (size_t i = 0; i < g.size(); ++i) {
    worst = std::max(worst, ((*after[i] - *before[i]) - eta * delta * g[i]).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-15);
}

TEST(PolicyTest, OutputsStayInBounds) {
  Rng rng(11);
  MlpParams pi = Nets().policy;
  for (Tensor& w : pi.weights) w *= 50.0;
  const Tensor a = PolicyAction(pi, RandomStates(rng, 100) * 10.0);
  EXPECT_LE(a.maxCoeff(), kActionHigh);
  EXPECT_GE(a.minCoeff(), kActionLow);
}

AirlConfig SmallPlanner() {
  AirlConfig cfg;
  cfg.horizon = 3;
  cfg.population = 32;
  cfg.elite_count = 4;
  cfg.cem_iterations = 3;
  return cfg;
}

TEST(PolicyTest, DegenerateRewardLeavesOnlyImitation) {
  Rng rng(12);
  KinematicDynamics model(CameraModel{});
  AirlConfig cfg = SmallPlanner();
  cfg.eta_pi = 0.05;
  MlpParams pi = Nets().policy;
  const MlpParams v = ConstantNet(Nets().value, 0.0);
  const Tensor starts = RandomStates(rng, 4);
  Rng plan_rng(3);
  PolicyUpdateResult r =
      PolicyUpdateTdmpc(pi, ConstantReward(0.0), v, model, starts, cfg, plan_rng);
  EXPECT_EQ(r.reward_term, 0.0);
  for (const Plan& p : r.plans) EXPECT_EQ(p.cost, 0.0);
  Tensor targets(kActionDim, 4);
  for (int b = 0; b < 4; ++b) targets.col(b) = r.plans[b].u.topRows(kActionDim);
  const double after = (PolicyAction(pi, starts) - targets).squaredNorm() / 4.0;
  EXPECT_LT(after, r.imitation_term);
}

TEST(PolicyTest, PeakedRewardIsLearned) {
  Rng rng(13);
  KinematicDynamics model(CameraModel{});
  AirlConfig cfg = SmallPlanner();
  cfg.eta_pi = 0.05;
  Tensor star(kActionDim, 1);
  star << 0.3, -0.5, 0.6;
  RewardFn peaked = [star](Tape& tape, const Var& s, const Var& a) {
    Tensor target = star.replicate(1, s.cols());
    return -MatMul(tape.Constant(Tensor::Ones(1, kActionDim)),
                   Square(a - tape.Constant(target)));
  };
  MlpParams pi = Nets().policy;
  const MlpParams v = ConstantNet(Nets().value, 0.0);
  for (int k = 0; k < 1500; ++k) {
    PolicyUpdateTdmpc(pi, peaked, v, model, RandomStates(rng, 4), cfg, rng);
  }
  const Tensor a = PolicyAction(pi, RandomStates(rng, 20));
  const double worst = (a.colwise() - star.col(0)).cwiseAbs().maxCoeff();
  EXPECT_LT(worst, 0.05);
}

TEST(PolicyTest, ZeroRateKeepsWeights) {
  Rng rng(14);
  KinematicDynamics model(CameraModel{});
  AirlConfig cfg = SmallPlanner();
  cfg.eta_pi = 0.0;
  MlpParams pi = Nets().policy;
  const MlpParams before = pi;
  AirlNets n = Nets();
  PolicyUpdateTdmpc(pi, DiscriminatorReward(n.discriminator), n.value, model,
                    RandomStates(rng, 2), cfg, rng);
  for (size_t i = 0; i < pi.weights.size(); ++i) EXPECT_EQ(pi.weights[i], before.weights[i]);
}

std::vector<Transition> ReachExperts() {
  return CollectDynData(400, 5, 1.0, CameraModel{}, Task::kReach);
}

TEST(AirlTrainTest, ZeroIterations) {
  KinematicDynamics model(CameraModel{});
  AirlConfig cfg;
  cfg.iterations = 0;
  AirlResult r = AirlTrain(ReachExperts(), model, cfg);
  EXPECT_EQ(r.iterations_run, 0);
  EXPECT_TRUE(r.curves.task_reward.empty());
  EXPECT_EQ(r.nets.policy.weights[0], InitAirlNets(cfg).policy.weights[0]);
}

TEST(AirlTrainTest, Deterministic) {
  KinematicDynamics model(CameraModel{});
  AirlConfig cfg = SmallPlanner();
  cfg.iterations = 3;
  cfg.episode_length = 5;
  cfg.discriminator_steps = 2;
  cfg.seed = 4;
  const auto experts = ReachExperts();
  AirlResult a = AirlTrain(experts, model, cfg);
  AirlResult b = AirlTrain(experts, model, cfg);
  EXPECT_EQ(a.curves.task_reward, b.curves.task_reward);
  EXPECT_EQ(a.curves.discriminator_loss, b.curves.discriminator_loss);
  EXPECT_EQ(a.curves.policy_loss, b.curves.policy_loss);
  EXPECT_EQ(a.nets.value.weights[1], b.nets.value.weights[1]);
}

// Smoothed task reward on reach rises from iteration 10 to the end.
TEST(AirlTrainTest, ReachRewardTrendsUp) {
  KinematicDynamics model(CameraModel{});
  AirlConfig cfg;
  cfg.iterations = 60;
  const AirlResult r =
      AirlTrain(CollectDynData(2000, 5, 1.0, CameraModel{}, Task::kReach), model, cfg);
  ASSERT_EQ(r.iterations_run, 60);
  const auto& c = r.curves.task_reward;
  auto smoothed = [&](int end) {
    double sum = 0.0;
    const int begin = std::max(0, end - 19);
    for (int i = begin; i <= end; ++i) sum += c[i];
    return sum / (end - begin + 1);
  };
  std::printf("task reward smoothed: it10 %.4f final %.4f\n", smoothed(10), smoothed(59));
  EXPECT_GT(smoothed(59), smoothed(10));
}

TEST(AirlTrainTest, InvalidConfig) {
  KinematicDynamics model(CameraModel{});
  AirlConfig cfg;
  cfg.gamma = 1.0;
  try {
    AirlTrain(ReachExperts(), model, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(AirlCheckpointTest, RoundTrip) {
  const AirlNets n = Nets(9);
  Checkpoint ck;
  PutAirlNets(ck, n);
  const std::string path = ::testing::TempDir() + "/airl.ckpt";
  SaveCheckpoint(path, ck);
  const AirlNets m = GetAirlNets(LoadCheckpoint(path));
  for (size_t i = 0; i < n.policy.weights.size(); ++i) {
    EXPECT_EQ(m.policy.weights[i], n.policy.weights[i]);
    EXPECT_EQ(m.discriminator.biases[i], n.discriminator.biases[i]);
    EXPECT_EQ(m.value.weights[i], n.value.weights[i]);
  }
  EXPECT_EQ(m.policy.input_scale, n.policy.input_scale);
}

}  // namespace
}  // namespace kpirl
