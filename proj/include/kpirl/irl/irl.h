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

// Cost learning by differentiating through the inner planning step.

#ifndef KPIRL_IRL_IRL_H_
#define KPIRL_IRL_IRL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "kpirl/diffcore/tape.h"
#include "kpirl/dynmodel/checkpoint.h"
#include "kpirl/dynmodel/dynamics.h"
#include "kpirl/planarworld/world.h"
#include "kpirl/planner/planner.h"

namespace kpirl {

constexpr int kXyDim = 2 * kNumKeypoints;
constexpr int kRbfCenters = 16;
constexpr double kRbfWidth = 0.5;  // meters

enum class CostVariant { kWeightedKeypoint, kTimeWeighted, kRbfNet };

const char* CostVariantName(CostVariant v);
CostVariant ParseCostVariant(const std::string& name);

// Raw parameters. Realized weights are softplus(raw) > 0.
struct CostParams {
  CostVariant variant = CostVariant::kWeightedKeypoint;
  Tensor rho;      // kXyDim x 1: x and y weight per keypoint, keypoint-major
  Tensor rho_t;    // horizon x 1, time-weighted only
  Tensor rbf_w;    // kRbfCenters x 1, rbf only
  Tensor centers;  // kXyDim x kRbfCenters residual centers (m), fixed

  Tensor Phi() const;
  // Trainable tensors in a fixed order (rho, then rho_t or rbf_w).
  std::vector<Tensor*> Trainable();
  std::vector<const Tensor*> Trainable() const;
};

CostParams InitCostParams(CostVariant variant, int horizon, double init_rho,
                          std::uint64_t seed);

struct CostVars {
  CostVariant variant;
  Var rho, rho_t, rbf_w;
  Var phi, phi_t;
  Tensor centers;
  double pixel_scale = 1.0;

  std::vector<Var> Trainable() const;
};

CostVars BindCost(Tape& tape, const CostParams& params, bool as_variables,
                  const CameraModel& camera = {});

// x, y rows of the K keypoints from a latent or frame column block.
Var KeypointXy(const Var& s);

// Stage-summed cost over predicted frames (each with the keypoint block in
// its first kFrameDim rows, N columns). Returns 1 x N.
Var CostOnTape(Tape& tape, const CostVars& cost,
               const std::vector<Var>& frames, const Tensor& goal_xy);

// Cost for the planner over s_1 ... s_T.
CostFn MakeCostFn(const CostVars& cost, const Tensor& goal_xy);
// Binds params as constants on whichever tape the planner passes in.
CostFn MakeCostFn(const CostParams& params, const Tensor& goal_xy,
                  const CameraModel& camera = {});

Tensor FrameXy(const KeypointFrame& frame);

double CostEval(const CostParams& params,
                const std::vector<KeypointFrame>& trajectory,
                const KeypointFrame& goal, const CameraModel& camera = {});

// Sum over aligned frames of squared x, y differences.
double IrlLoss(const std::vector<KeypointFrame>& demo,
               const std::vector<KeypointFrame>& predicted);
Var IrlLossOnTape(Tape& tape, const std::vector<KeypointFrame>& demo,
                  const std::vector<Var>& predicted);

// Demo as seen by the learner: s0 = [z_0, q_0, q_dot_0], frames truncated to
// horizon + 1, goal = final kept frame.
struct IrlDemo {
  Tensor s0;
  std::vector<KeypointFrame> frames;
  KeypointFrame goal;

  int horizon() const { return static_cast<int>(frames.size()) - 1; }
};

IrlDemo PrepareDemo(const Demonstration& demo, int horizon);

Demonstration MakeRelative(const Demonstration& demo,
                           const KeypointFrame& robot_start);

struct IrlTrainConfig {
  CostVariant variant = CostVariant::kWeightedKeypoint;
  double eta = 0.001;
  double alpha = 0.01;
  int inner_steps = 1;
  int iterations = 500;
  int horizon = 10;
  int demos_per_batch = 1;
  double init_rho = -5.0;
  // Outer gradients are rescaled to at most this norm; <= 0 disables.
  double grad_clip = 100.0;
  int smoothing_window = 20;
  bool relative = false;
  std::uint64_t seed = 0;
};

struct OuterGradResult {
  std::vector<Tensor> grad;  // matches CostParams::Trainable()
  double loss = 0.0;
  std::vector<KeypointFrame> planned;
};

OuterGradResult OuterGrad(const CostParams& params, const IrlDemo& demo,
                          const DynamicsModel& model, const IrlTrainConfig& cfg,
                          const CameraModel& camera = {});

// Loss of the plan under params for one demo, without gradients.
double PlanLoss(const CostParams& params, const IrlDemo& demo,
                const DynamicsModel& model, const IrlTrainConfig& cfg,
                const CameraModel& camera = {});
double MeanPlanLoss(const CostParams& params, const std::vector<IrlDemo>& demos,
                    const DynamicsModel& model, const IrlTrainConfig& cfg,
                    const CameraModel& camera = {});

struct IrlState {
  CostParams params;
  CostParams best;
  double best_score = 0.0;  // smoothed loss at which best was taken
  bool has_best = false;
  int iteration = 0;        // next iteration to run
  std::vector<double> curve;  // loss per completed iteration
  std::vector<double> grad_norm;  // before clipping
};

IrlState InitIrlState(const IrlTrainConfig& cfg);

// Runs iterations [state.iteration, until) in place.
void TrainIrlSteps(IrlState& state, const std::vector<IrlDemo>& demos,
                   const DynamicsModel& model, const IrlTrainConfig& cfg,
                   int until, const CameraModel& camera = {});

IrlState TrainIrl(const std::vector<IrlDemo>& demos, const DynamicsModel& model,
                  const IrlTrainConfig& cfg, const CameraModel& camera = {});

// Feature-matching baseline: raw weights move along the gap between planned
// and demonstrated mean squared distance-to-goal per keypoint axis.
void FeatureMatchingSteps(IrlState& state, const std::vector<IrlDemo>& demos,
                          const DynamicsModel& model,
                          const IrlTrainConfig& cfg, int until,
                          const CameraModel& camera = {});
IrlState FeatureMatchingBaseline(const std::vector<IrlDemo>& demos,
                                 const DynamicsModel& model,
                                 const IrlTrainConfig& cfg,
                                 const CameraModel& camera = {});

// Mean over t >= 1 of (z_t - goal)^2 per keypoint axis, kXyDim x 1.
Tensor FeatureExpectation(const std::vector<KeypointFrame>& frames,
                          const KeypointFrame& goal);

// Trailing moving average; entry i averages curve[max(0, i-w+1) .. i].
std::vector<double> Smooth(const std::vector<double>& curve, int window);

void PutCostParams(Checkpoint& checkpoint, const std::string& prefix,
                   const CostParams& params);
CostParams GetCostParams(const Checkpoint& checkpoint,
                         const std::string& prefix);

}  // namespace kpirl

#endif  // KPIRL_IRL_IRL_H_
