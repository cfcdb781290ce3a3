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

// One-step latent dynamics s' = f(s, u) over batches of column samples, and
// open-loop rollouts.

#ifndef KPIRL_DYNMODEL_DYNAMICS_H_
#define KPIRL_DYNMODEL_DYNAMICS_H_

#include <memory>
#include <string>
#include <vector>

#include "kpirl/diffcore/tape.h"
#include "kpirl/dynmodel/mlp.h"
#include "kpirl/planarworld/world.h"

namespace kpirl {

// A model bound to one tape. s is kLatentDim x N, u is kActionDim x N.
class BoundDynamics {
 public:
  virtual ~BoundDynamics() = default;
  virtual Var Predict(const Var& s, const Var& u) = 0;
  virtual int action_dim() const { return kActionDim; }
};

class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  // The model's own parameters enter the tape as constants.
  virtual std::unique_ptr<BoundDynamics> Bind(Tape& tape) const = 0;
};

// Residual network on [s, u, ee - cube]: s' = s + output_scale * mlp(...),
// intensity channels clamped to [0, 1].
class MlpDynamics : public DynamicsModel {
 public:
  explicit MlpDynamics(MlpParams params);
  std::unique_ptr<BoundDynamics> Bind(Tape& tape) const override;
  const MlpParams& params() const { return params_; }

 private:
  MlpParams params_;
};

// The environment's own kinematics written with tape primitives. Grasp,
// gripper, angle-wrap and in-frame decisions are taken on the forward values
// and enter as constants.
class KinematicDynamics : public DynamicsModel {
 public:
  explicit KinematicDynamics(CameraModel camera = {}) : camera_(camera) {}
  std::unique_ptr<BoundDynamics> Bind(Tape& tape) const override;

 private:
  CameraModel camera_;
};

constexpr int kDynFeatureDim = kLatentDim + kActionDim + 2;

// [s, u, ee - cube] in pixels.
Var DynFeatures(const Var& s, const Var& u);
// Per-row intensity clamp applied after every prediction.
Var ClampIntensities(const Var& s);

MlpParams MakeDynamicsParams(const std::vector<int>& hidden, Rng& rng,
                             bool zero_last = false);

Tensor PredictValues(const DynamicsModel& model, const Tensor& s,
                     const Tensor& u);

// u is (action_dim * T) x N with step t in rows [t * action_dim, (t + 1) *
// action_dim). Returns s_0 ... s_T.
std::vector<Var> Rollout(BoundDynamics& model, const Var& s0, const Var& u,
                         int horizon);
std::vector<Tensor> RolloutValues(const DynamicsModel& model, const Tensor& s0,
                                  const Tensor& u, int horizon);

struct DynTrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 200;
  std::vector<int> hidden = {64, 64};
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct DynTrainResult {
  MlpParams params;
  // mean squared error per epoch in normalized delta units
  std::vector<double> train_mse;
  std::vector<double> validation_mse;
};

// Delta target with angle-wrapped joint differences.
Eigen::VectorXd DeltaTarget(const Transition& t);

DynTrainResult TrainDynamics(const std::vector<Transition>& data,
                             const DynTrainConfig& cfg);

// Mean squared error in normalized delta units over `data`.
double DynamicsMse(const MlpParams& params,
                   const std::vector<Transition>& data);

}  // namespace kpirl

#endif  // KPIRL_DYNMODEL_DYNAMICS_H_
