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

#include "kpirl/irl/irl.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "kpirl/error.h"
#include "kpirl/rng.h"

namespace kpirl {
namespace {

// s' = s + B u on the keypoint x,y rows; other rows untouched.
class KeypointShift : public DynamicsModel {
 public:
  KeypointShift() : b_(Tensor::Zero(kLatentDim, kActionDim)) {
    b_(3, 0) = 4.0;  // ee x
    b_(4, 1) = 4.0;  // ee y
    b_(6, 0) = 1.0;  // cube x follows a little
    b_(0, 2) = 2.0;  // elbow x
    b_(1, 0) = 1.0;
  }
  std::unique_ptr<BoundDynamics> Bind(Tape& tape) const override {
    return std::make_unique<Bound>(tape.Constant(b_));
  }

 private:
  class Bound : public BoundDynamics {
   public:
    explicit Bound(Var b) : b_(b) {}
    Var Predict(const Var& s, const Var& u) override {
      return s + MatMul(b_, u);
    }

   private:
    Var b_;
  };
  Tensor b_;
};

KeypointFrame FrameAt(double x, double y) {
  KeypointFrame f{};
  for (int k = 0; k < kNumKeypoints; ++k) f[k] = {x + 3.0 * k, y - 2.0 * k, 1.0};
  return f;
}

IrlDemo StartDemo() {
  IrlDemo d;
  d.s0 = Tensor::Zero(kLatentDim, 1);
  d.s0.col(0).head(kFrameDim) = FlattenFrame(FrameAt(30.0, 20.0));
  return d;
}

// Demo produced by the planner itself under a known weight vector.
IrlDemo GeneratedDemo(const DynamicsModel& model, const CostParams& truth,
                      const IrlTrainConfig& cfg, const KeypointFrame& goal) {
  IrlDemo d = StartDemo();
  PlannerConfig pc;
  pc.horizon = cfg.horizon;
  pc.alpha = cfg.alpha;
  Plan plan = PlanGradient(model, MakeCostFn(truth, FrameXy(goal)), d.s0, pc);
  for (const Tensor& s : plan.trajectory) {
    d.frames.push_back(UnflattenFrame(s.col(0)));
  }
  d.goal = goal;
  return d;
}

double FdLoss(CostParams p, const IrlDemo& demo, const DynamicsModel& model,
              const IrlTrainConfig& cfg, size_t which, Eigen::Index k, double h) {
  p.Trainable()[which]->data()[k] += h;
  return PlanLoss(p, demo, model, cfg);
}

TEST(CostTest, ZeroAtGoal) {
  const KeypointFrame g = FrameAt(10.0, 5.0);
  for (CostVariant v : {CostVariant::kWeightedKeypoint, CostVariant::kTimeWeighted}) {
    CostParams p = InitCostParams(v, 3, 0.3, 1);
    EXPECT_EQ(CostEval(p, {g, g, g}, g), 0.0);
  }
}

TEST(CostTest, SingleKeypointThreeFourFive) {
  CostParams p = InitCostParams(CostVariant::kWeightedKeypoint, 1, 0.0, 1);
  // unit weight on ee only
  p.rho.setConstant(-800.0);
  p.rho(2, 0) = p.rho(3, 0) = std::log(std::exp(1.0) - 1.0);
  KeypointFrame goal{}, z{};
  z[kEndEffector] = {3.0, 4.0, 1.0};
  EXPECT_NEAR(CostEval(p, {z}, goal), 25.0, 1e-12);
}

TEST(CostTest, MatchesManualSum) {
  Rng rng(4);
  CostParams p = InitCostParams(CostVariant::kTimeWeighted, 3, 0.0, 1);
  for (Eigen::Index i = 0; i < p.rho.size(); ++i) p.rho(i) = rng.Uniform(-2, 2);
  for (Eigen::Index i = 0; i < p.rho_t.size(); ++i) p.rho_t(i) = rng.Uniform(-2, 2);
  std::vector<KeypointFrame> traj(3);
  KeypointFrame goal{};
  for (auto& f : traj) {
    for (auto& k : f) k = {rng.Uniform(0, 64), rng.Uniform(0, 64), 1.0};
  }
  for (auto& k : goal) k = {rng.Uniform(0, 64), rng.Uniform(0, 64), 1.0};
  const Tensor phi = p.Phi();
  double want = 0.0;
  for (int t = 0; t < 3; ++t) {
    const double pt = std::log1p(std::exp(p.rho_t(t)));
    for (int k = 0; k < kNumKeypoints; ++k) {
      want += pt * phi(2 * k) * std::pow(traj[t][k].x - goal[k].x, 2);
      want += pt * phi(2 * k + 1) * std::pow(traj[t][k].y - goal[k].y, 2);
    }
  }
  EXPECT_NEAR(CostEval(p, traj, goal), want, 1e-9 * want);
}

TEST(CostTest, WeightsStayPositive) {
  CostParams p = InitCostParams(CostVariant::kWeightedKeypoint, 1, 0.0, 1);
  p.rho << -30, -5, -1, 0, 1, 5, 30, 700;
  const Tensor phi = p.Phi();
  EXPECT_TRUE(phi.allFinite());
  EXPECT_GT(phi.minCoeff(), 0.0);
}

TEST(CostTest, ShortGoalIsInputError) {
  Tape tape;
  CostVars v = BindCost(tape, InitCostParams(CostVariant::kWeightedKeypoint, 1, 0, 1), false);
  Var s = tape.Constant(Tensor::Zero(kLatentDim, 1));
  try {
    CostOnTape(tape, v, {s}, Tensor::Zero(6, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInput);
  }
}

// Doubling phi doubles C; the brute-force argmin over a 1-D action grid
// stays put.
TEST(CostTest, ScalingKeepsArgmin) {
  KeypointShift model;
  const KeypointFrame goal = FrameAt(33.0, 21.0);
  CostParams p = InitCostParams(CostVariant::kWeightedKeypoint, 2, 0.0, 1);
  CostParams p2 = p;
  Tensor phi2 = 2.0 * p.Phi();
  for (Eigen::Index i = 0; i < phi2.size(); ++i) {
    p2.rho(i) = std::log(std::expm1(phi2(i)));
  }
  const IrlDemo d = StartDemo();
  int best1 = -1, best2 = -1;
  double c1min = 1e300, c2min = 1e300;
  for (int i = 0; i <= 200; ++i) {
    const double a = -1.0 + 0.01 * i;
    Tensor u(kActionDim, 1);
    u << a, 0.0, 0.0;
    Tensor s1 = PredictValues(model, d.s0, u);
    std::vector<KeypointFrame> traj{UnflattenFrame(s1.col(0))};
    const double c1 = CostEval(p, traj, goal), c2 = CostEval(p2, traj, goal);
    EXPECT_NEAR(c2, 2.0 * c1, 1e-9 * std::max(1.0, c1));
    if (c1 < c1min) { c1min = c1; best1 = i; }
    if (c2 < c2min) { c2min = c2; best2 = i; }
  }
  EXPECT_EQ(best1, best2);
}

TEST(IrlLossTest, Examples) {
  KeypointFrame a{}, b{};
  a[0] = {1.0, 2.0, 1.0};
  b[0] = {1.0, 4.0, 0.0};
  EXPECT_EQ(IrlLoss({a}, {a}), 0.0);
  EXPECT_EQ(IrlLoss({a}, {b}), 4.0);
  try {
    IrlLoss({a, a}, {a});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInput);
  }
}

TEST(IrlLossTest, MatchesBruteForce) {
  Rng rng(9);
  std::vector<KeypointFrame> x(5), y(5);
  double want = 0.0;
  for (int t = 0; t < 5; ++t) {
    for (int k = 0; k < kNumKeypoints; ++k) {
      x[t][k] = {rng.Uniform(0, 64), rng.Uniform(0, 64), rng.Uniform()};
      y[t][k] = {rng.Uniform(0, 64), rng.Uniform(0, 64), rng.Uniform()};
      want += std::pow(x[t][k].x - y[t][k].x, 2) + std::pow(x[t][k].y - y[t][k].y, 2);
    }
  }
  EXPECT_NEAR(IrlLoss(x, y), want, 1e-9 * want);
  Tape tape;
  std::vector<Var> vy;
  for (auto& f : y) vy.push_back(tape.Constant(Tensor(FlattenFrame(f))));
  EXPECT_NEAR(IrlLossOnTape(tape, x, vy).scalar(), want, 1e-9 * want);
}

// z1 = z0 + u, C = psi (z1 - g)^2, one inner step at rate 0.1.
TEST(OuterGradTest, ScalarOracle) {
  Tape tape;
  Var psi = tape.Variable(Tensor::Constant(1, 1, 1.0));
  Var z0 = tape.Constant(Tensor::Zero(1, 1));
  Var u0 = tape.Variable(Tensor::Zero(1, 1));
  Var c = psi * Square(z0 + u0 - tape.Constant(1.0));
  Var gu = GradAsGraph(c, std::vector<Var>{u0})[0];
  Var u = u0 - 0.1 * gu;
  Var l = Square(z0 + u - tape.Constant(1.0));
  EXPECT_NEAR(u.scalar(), 0.2, 1e-15);
  EXPECT_NEAR(l.scalar(), 0.64, 1e-15);
  EXPECT_NEAR(Grad(l, std::vector<Var>{psi})[0](0, 0), -0.32, 1e-15);
}

TEST(OuterGradTest, ZeroWhenDemoIsThePlan) {
  KeypointShift model;
  IrlTrainConfig cfg;
  cfg.horizon = 3;
  CostParams truth = InitCostParams(CostVariant::kWeightedKeypoint, 3, 0.0, 1);
  const IrlDemo demo = GeneratedDemo(model, truth, cfg, FrameAt(40.0, 10.0));
  OuterGradResult r = OuterGrad(truth, demo, model, cfg);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_TRUE(r.grad[0].isZero());
}

class OuterGradFd
    : public ::testing::TestWithParam<std::tuple<CostVariant, int>> {};

TEST_P(OuterGradFd, MatchesFiniteDifferences) {
  const auto [variant, horizon] = GetParam();
  Rng rng(21);
  MlpParams mp = MakeDynamicsParams({8}, rng);
  for (Tensor& w : mp.weights) w *= 0.3;
  MlpDynamics model(mp);
  IrlTrainConfig cfg;
  cfg.variant = variant;
  cfg.horizon = horizon;
  CostParams p = InitCostParams(variant, horizon, -4.0, 3);
  for (Tensor* t : p.Trainable()) {
    for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] += rng.Uniform(-1, 1);
  }
  if (variant == CostVariant::kRbfNet) p.centers *= 4.0;  // bumps reach the residuals
  IrlDemo demo = StartDemo();
  Tensor s = demo.s0;
  for (int t = 0; t <= horizon; ++t) {
    KeypointFrame f = UnflattenFrame(s.col(0));
    for (auto& k : f) { k.x += rng.Uniform(-2, 2); k.y += rng.Uniform(-2, 2); }
    demo.frames.push_back(f);
  }
  demo.goal = FrameAt(45.0, 30.0);
  OuterGradResult r = OuterGrad(p, demo, model, cfg);
  EXPECT_NEAR(r.loss, PlanLoss(p, demo, model, cfg), 1e-9 * r.loss);
  const double h = 1e-5;
  double worst = 0.0;
  for (size_t w = 0; w < r.grad.size(); ++w) {
    for (Eigen::Index k = 0; k < r.grad[w].size(); ++k) {
      const double fd = (FdLoss(p, demo, model, cfg, w, k, h) -
                         FdLoss(p, demo, model, cfg, w, k, -h)) / (2 * h);
      worst = std::max(worst, std::abs(fd - r.grad[w](k)) / std::max(1.0, std::abs(fd)));
    }
  }
  EXPECT_LT(worst, 1e-5);
  EXPECT_GT(r.grad[0].norm(), 0.0);
  EXPECT_GT(r.grad.back().norm(), 0.0);
}

INSTANTIATE_TEST_SUITE_P(
    AllVariants, OuterGradFd,
    ::testing::Combine(::testing::Values(CostVariant::kWeightedKeypoint,
                                         CostVariant::kTimeWeighted,
                                         CostVariant::kRbfNet),
                       ::testing::Values(1, 3, 5)));

TEST(TrainIrlTest, RecoversSelfConsistentDemo) {
  KeypointShift model;
  IrlTrainConfig cfg;
  cfg.horizon = 5;
  cfg.iterations = 500;
  CostParams truth = InitCostParams(CostVariant::kWeightedKeypoint, 5, 0.0, 1);
  truth.rho << -3, -3, 1, 0.5, -2, -2, -6, -6;
  const std::vector<IrlDemo> demos{
      GeneratedDemo(model, truth, cfg, FrameAt(40.0, 10.0)),
      GeneratedDemo(model, truth, cfg, FrameAt(22.0, 30.0))};
  const IrlState init = InitIrlState(cfg);
  const double initial = MeanPlanLoss(init.params, demos, model, cfg);
  IrlState st = TrainIrl(demos, model, cfg);
  const double final_loss = MeanPlanLoss(st.best, demos, model, cfg);
  std::printf("self-consistency: initial %.4f final %.6f\n", initial, final_loss);
  EXPECT_LT(final_loss, 0.1 * initial);
  EXPECT_EQ(st.curve.size(), 500u);
}

TEST(TrainIrlTest, ZeroRateIsFlat) {
  KeypointShift model;
  IrlTrainConfig cfg;
  cfg.horizon = 3;
  cfg.iterations = 30;
  cfg.eta = 0.0;
  CostParams truth = InitCostParams(CostVariant::kWeightedKeypoint, 3, 0.0, 1);
  const std::vector<IrlDemo> demos{GeneratedDemo(model, truth, cfg, FrameAt(40.0, 10.0))};
  IrlState st = TrainIrl(demos, model, cfg);
  EXPECT_EQ(st.params.rho, InitIrlState(cfg).params.rho);
  for (double l : st.curve) EXPECT_EQ(l, st.curve.front());
}

TEST(TrainIrlTest, DeterministicAndResumable) {
  KeypointShift model;
  IrlTrainConfig cfg;
  cfg.variant = CostVariant::kRbfNet;
  cfg.horizon = 3;
  cfg.iterations = 40;
  cfg.seed = 5;
  CostParams truth = InitCostParams(CostVariant::kWeightedKeypoint, 3, 0.0, 1);
  const std::vector<IrlDemo> demos{
      GeneratedDemo(model, truth, cfg, FrameAt(40.0, 10.0)),
      GeneratedDemo(model, truth, cfg, FrameAt(20.0, 35.0))};
  IrlState a = TrainIrl(demos, model, cfg);
  IrlState b = TrainIrl(demos, model, cfg);
  EXPECT_EQ(a.curve, b.curve);
  IrlState c = InitIrlState(cfg);
  TrainIrlSteps(c, demos, model, cfg, 15);
  TrainIrlSteps(c, demos, model, cfg, 40);
  EXPECT_EQ(a.curve, c.curve);
  EXPECT_EQ(a.params.rbf_w, c.params.rbf_w);
  const std::vector<double> sm = Smooth(a.curve, cfg.smoothing_window);
  double best = 1e300;
  for (double v : sm) best = std::min(best, v);
  EXPECT_EQ(a.best_score, best);
}

TEST(TrainIrlTest, DivergenceNamesIteration) {
  KeypointShift model;
  IrlTrainConfig cfg;
  cfg.horizon = 2;
  IrlDemo d = StartDemo();
  d.frames.assign(3, FrameAt(1.0, 1.0));
  d.frames[1][0].x = std::nan("");
  d.goal = FrameAt(1.0, 1.0);
  IrlState st = InitIrlState(cfg);
  try {
    TrainIrlSteps(st, {d}, model, cfg, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDivergence);
    EXPECT_NE(std::string(e.what()).find("iteration 0"), std::string::npos);
  }
}

TEST(FeatureMatchingTest, MatchedFeaturesGiveZeroUpdate) {
  KeypointShift model;
  IrlTrainConfig cfg;
  cfg.horizon = 3;
  cfg.iterations = 5;
  const std::vector<IrlDemo> demos{
      GeneratedDemo(model, InitIrlState(cfg).params, cfg, FrameAt(40.0, 10.0))};
  IrlState st = FeatureMatchingBaseline(demos, model, cfg);
  EXPECT_EQ(st.params.rho, InitIrlState(cfg).params.rho);
}

// Demo moves the ee toward the goal in x only; the planner (weak weights)
// barely moves, so the x gap is positive and the x weight rises.
TEST(FeatureMatchingTest, XWeightGrows) {
  KeypointShift model;
  IrlTrainConfig cfg;
  cfg.horizon = 3;
  cfg.iterations = 20;
  IrlDemo d = StartDemo();
  KeypointFrame f = UnflattenFrame(d.s0.col(0));
  const KeypointFrame goal = [&] {
    KeypointFrame g = f;
    g[kEndEffector].x += 8.0;
    return g;
  }();
  for (int t = 0; t <= 3; ++t) {
    KeypointFrame ft = f;
    ft[kEndEffector].x += 8.0 * t / 3.0;
    d.frames.push_back(ft);
  }
  d.goal = goal;
  IrlState a = FeatureMatchingBaseline({d}, model, cfg);
  IrlState b = FeatureMatchingBaseline({d}, model, cfg);
  EXPECT_EQ(a.curve, b.curve);
  const double gx = a.params.rho(2) - cfg.init_rho;
  const double gy = a.params.rho(3) - cfg.init_rho;
  EXPECT_GT(gx, 0.0);
  EXPECT_GT(gx, gy);
  try {
    IrlTrainConfig bad = cfg;
    bad.variant = CostVariant::kRbfNet;
    FeatureMatchingBaseline({d}, model, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

Demonstration ShortDemo() {
  Demonstration d;
  for (int t = 0; t < 4; ++t) d.frames.push_back(FrameAt(10.0 + t, 20.0 - 2 * t));
  d.z_goal = d.frames.back();
  return d;
}

TEST(MakeRelativeTest, Properties) {
  const Demonstration d = ShortDemo();
  Demonstration same = MakeRelative(d, d.frames.front());
  for (size_t t = 0; t < d.frames.size(); ++t) {
    for (int k = 0; k < kNumKeypoints; ++k) {
      EXPECT_EQ(same.frames[t][k].x, d.frames[t][k].x);
      EXPECT_EQ(same.frames[t][k].y, d.frames[t][k].y);
      EXPECT_EQ(same.frames[t][k].m, d.frames[t][k].m);
    }
  }
  Demonstration shifted = d;
  for (auto& f : shifted.frames) for (auto& k : f) { k.x += 7.5; k.y -= 3.25; }
  Demonstration back = MakeRelative(shifted, d.frames.front());
  const KeypointFrame robot = FrameAt(1.0, 2.0);
  Demonstration moved = MakeRelative(d, robot);
  for (size_t t = 0; t < d.frames.size(); ++t) {
    for (int k = 0; k < kNumKeypoints; ++k) {
      EXPECT_NEAR(back.frames[t][k].x, d.frames[t][k].x, 1e-12);
      EXPECT_NEAR(back.frames[t][k].y, d.frames[t][k].y, 1e-12);
    }
  }
  for (int k = 0; k < kNumKeypoints; ++k) {
    EXPECT_EQ(moved.frames[0][k].x, robot[k].x);
    EXPECT_EQ(moved.frames[0][k].y, robot[k].y);
  }
}

TEST(PrepareDemoTest, TruncatesAndTakesFinalGoal) {
  Demonstration d = ShortDemo();
  IrlDemo a = PrepareDemo(d, 2);
  EXPECT_EQ(a.horizon(), 2);
  EXPECT_EQ(a.goal[0].x, d.frames[2][0].x);
  IrlDemo b = PrepareDemo(d, 10);
  EXPECT_EQ(b.horizon(), 3);
  EXPECT_EQ(b.s0.rows(), kLatentDim);
}

TEST(CostCheckpointTest, RoundTrip) {
  for (CostVariant v : {CostVariant::kWeightedKeypoint, CostVariant::kTimeWeighted,
                        CostVariant::kRbfNet}) {
    CostParams p = InitCostParams(v, 4, -1.5, 8);
    Checkpoint ck;
    PutCostParams(ck, "cost", p);
    const std::string path = ::testing::TempDir() + "/cost.ckpt";
    SaveCheckpoint(path, ck);
    CostParams q = GetCostParams(LoadCheckpoint(path), "cost");
    EXPECT_EQ(q.variant, v);
    EXPECT_EQ(q.rho, p.rho);
    EXPECT_EQ(q.rho_t, p.rho_t);
    EXPECT_EQ(q.rbf_w, p.rbf_w);
    EXPECT_EQ(q.centers, p.centers);
  }
}

}  // namespace
}  // namespace kpirl
