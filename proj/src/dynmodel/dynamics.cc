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

#include "kpirl/dynmodel/dynamics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kpirl/dynmodel/adam.h"
#include "kpirl/error.h"

namespace kpirl {
namespace {

constexpr double kScaleFloor = 1e-8;
// cube and end-effector keypoints coincide exactly while attached
constexpr double kAttachTolerance = 1e-9;

Tensor IntensityLower() {
  Tensor lo = Tensor::Constant(kLatentDim, 1,
                               -std::numeric_limits<double>::infinity());
  for (int k = 0; k < kNumKeypoints; ++k) lo(3 * k + 2, 0) = 0.0;
  return lo;
}

Tensor IntensityUpper() {
  Tensor hi = Tensor::Constant(kLatentDim, 1,
                               std::numeric_limits<double>::infinity());
  for (int k = 0; k < kNumKeypoints; ++k) hi(3 * k + 2, 0) = 1.0;
  return hi;
}

void CheckShapes(const Var& s, const Var& u) {
  if (s.rows() != kLatentDim || u.rows() != kActionDim ||
      s.cols() != u.cols()) {
    Fail(ErrorKind::kInput,
         "dynamics expects " + std::to_string(kLatentDim) + "xN state and " +
             std::to_string(kActionDim) + "xN action, got " +
             std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
             " and " + std::to_string(u.rows()) + "x" +
             std::to_string(u.cols()));
  }
}

class BoundMlpDynamics : public BoundDynamics {
 public:
  BoundMlpDynamics(Tape& tape, const MlpParams& params)
      : vars_(BindMlp(tape, params, false)) {}

  Var Predict(const Var& s, const Var& u) override {
    CheckShapes(s, u);
    return ClampIntensities(s + MlpForward(vars_, DynFeatures(s, u)));
  }

 private:
  MlpVars vars_;
};

class BoundKinematics : public BoundDynamics {
 public:
  BoundKinematics(Tape& tape, const CameraModel& camera)
      : tape_(tape), camera_(camera) {}

  Var Predict(const Var& s, const Var& u) override {
    CheckShapes(s, u);
    const Eigen::Index n = s.cols();
    Var q_dot = Clamp(SliceRows(u, 0, kDof), -kMaxJointVelocity,
                      kMaxJointVelocity);
    Var q_raw = SliceRows(s, kQIndex, kDof) + kControlDt * q_dot;
    Tensor wrap_offset(kDof, n);
    for (Eigen::Index k = 0; k < wrap_offset.size(); ++k) {
      const double a = q_raw.value().data()[k];
      wrap_offset.data()[k] = WrapAngle(a) - a;
    }
    Var q = q_raw + tape_.Constant(wrap_offset);

    Var q1 = SliceRows(q, 0, 1);
    Var q12 = q1 + SliceRows(q, 1, 1);
    Var scale = tape_.Constant(camera_.scale * kLinkLength);
    Var ox = tape_.Constant(camera_.offset[0]);
    Var oy = tape_.Constant(camera_.offset[1]);
    Var elbow_x = ox + scale * Cos(q1);
    Var elbow_y = oy + scale * Sin(q1);
    Var ee_x = elbow_x + scale * Cos(q12);
    Var ee_y = elbow_y + scale * Sin(q12);

    const Tensor& sv = s.value();
    const Tensor& uv = u.value();
    Tensor attach(2, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const bool closing = uv(2, c) > 0.0;
      const bool held =
          std::abs(sv(3 * kCube, c) - sv(3 * kEndEffector, c)) <=
              kAttachTolerance &&
          std::abs(sv(3 * kCube + 1, c) - sv(3 * kEndEffector + 1, c)) <=
              kAttachTolerance;
      const double dx =
          (ee_x.value()(0, c) - sv(3 * kCube, c)) / camera_.scale;
      const double dy =
          (ee_y.value()(0, c) - sv(3 * kCube + 1, c)) / camera_.scale;
      const bool near = std::sqrt(dx * dx + dy * dy) < kGraspRadius;
      attach.col(c).setConstant(closing && (held || near) ? 1.0 : 0.0);
    }
    Var mask = tape_.Constant(attach);
    Var keep = tape_.Constant(Tensor::Ones(2, n) - attach);
    std::vector<Var> ee_parts{ee_x, ee_y};
    Var ee = ConcatRows(ee_parts);
    Var cube = mask * ee + keep * SliceRows(s, 3 * kCube, 2);

    std::vector<Var> elbow_parts{elbow_x, elbow_y};
    Var elbow = ConcatRows(elbow_parts);
    std::vector<Var> rows;
    for (const Var& p : {elbow, ee, cube}) {
      rows.push_back(p);
      rows.push_back(InFrame(p.value()));
    }
    rows.push_back(SliceRows(s, 3 * kTarget, 3));
    rows.push_back(q);
    rows.push_back(q_dot);
    return ConcatRows(rows);
  }

 private:
  Var InFrame(const Tensor& px) {
    Tensor m(1, px.cols());
    for (Eigen::Index c = 0; c < px.cols(); ++c) {
      const bool inside = px(0, c) >= 0.0 && px(0, c) <= camera_.frame &&
                          px(1, c) >= 0.0 && px(1, c) <= camera_.frame;
      m(0, c) = inside ? 1.0 : 0.0;
    }
    return tape_.Constant(m);
  }

  Tape& tape_;
  CameraModel camera_;
};

Tensor Columns(const std::vector<Transition>& data,
               const std::vector<int>& index, int begin, int end,
               int which) {
  const int rows = which == 1 ? kActionDim : kLatentDim;
  Tensor out(rows, end - begin);
  for (int c = begin; c < end; ++c) {
    const Transition& t = data[index[c]];
    if (which == 0) {
      out.col(c - begin) = t.s;
    } else if (which == 1) {
      out.col(c - begin) = t.a;
    } else {
      out.col(c - begin) = DeltaTarget(t);
    }
  }
  return out;
}

// Squared error in normalized units: (raw - target / output_scale)^2, averaged.
Var NormalizedLoss(const MlpVars& vars, Tape& tape, const Tensor& s,
                   const Tensor& u, const Tensor& delta) {
  Var raw = MlpRaw(vars, DynFeatures(tape.Constant(s), tape.Constant(u)));
  Var target = tape.Constant(delta) / vars.output_scale;
  return Mean(Square(raw - target));
}

Tensor FeatureValues(const Tensor& s, const Tensor& u) {
  Tape tape;
  return DynFeatures(tape.Constant(s), tape.Constant(u)).value();
}

void ColumnStats(const Tensor& x, Tensor& mean, Tensor& scale) {
  mean = x.rowwise().mean();
  scale.resize(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double var = (x.row(r).array() - mean(r, 0)).square().mean();
    const double sd = std::sqrt(var);
    scale(r, 0) = sd > kScaleFloor ? sd : 1.0;
  }
}

}  // namespace

Var DynFeatures(const Var& s, const Var& u) {
  Var rel = SliceRows(s, 3 * kEndEffector, 2) - SliceRows(s, 3 * kCube, 2);
  std::vector<Var> parts{s, u, rel};
  return ConcatRows(parts);
}

Var ClampIntensities(const Var& s) {
  static const Tensor lo = IntensityLower();
  static const Tensor hi = IntensityUpper();
  return Clamp(s, lo, hi);
}

MlpDynamics::MlpDynamics(MlpParams params) : params_(std::move(params)) {
  ValidateMlp(params_);
  if (params_.input_dim() != kDynFeatureDim ||
      params_.output_dim() != kLatentDim) {
    Fail(ErrorKind::kShape, "dynamics network must map " +
                                std::to_string(kDynFeatureDim) + " -> " +
                                std::to_string(kLatentDim));
  }
}

std::unique_ptr<BoundDynamics> MlpDynamics::Bind(Tape& tape) const {
  return std::make_unique<BoundMlpDynamics>(tape, params_);
}

std::unique_ptr<BoundDynamics> KinematicDynamics::Bind(Tape& tape) const {
  return std::make_unique<BoundKinematics>(tape, camera_);
}

MlpParams MakeDynamicsParams(const std::vector<int>& hidden, Rng& rng,
                             bool zero_last) {
  std::vector<int> sizes{kDynFeatureDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(kLatentDim);
  return InitMlp(sizes, rng, zero_last);
}

Tensor PredictValues(const DynamicsModel& model, const Tensor& s,
                     const Tensor& u) {
  Tape tape;
  auto bound = model.Bind(tape);
  return bound->Predict(tape.Constant(s), tape.Constant(u)).value();
}

std::vector<Var> Rollout(BoundDynamics& model, const Var& s0, const Var& u,
                         int horizon) {
  const int dim = model.action_dim();
  if (horizon < 1 || u.rows() != dim * horizon) {
    Fail(ErrorKind::kInput, "rollout of horizon " + std::to_string(horizon) +
                                " needs " + std::to_string(dim * horizon) +
                                " action rows, got " +
                                std::to_string(u.rows()));
  }
  std::vector<Var> states{s0};
  for (int t = 0; t < horizon; ++t) {
    states.push_back(model.Predict(states.back(), SliceRows(u, dim * t, dim)));
  }
  return states;
}

std::vector<Tensor> RolloutValues(const DynamicsModel& model, const Tensor& s0,
                                  const Tensor& u, int horizon) {
  Tape tape;
  auto bound = model.Bind(tape);
  std::vector<Var> states =
      Rollout(*bound, tape.Constant(s0), tape.Constant(u), horizon);
  std::vector<Tensor> out;
  for (const Var& s : states) out.push_back(s.value());
  return out;
}

Eigen::VectorXd DeltaTarget(const Transition& t) {
  Eigen::VectorXd d = t.s_next - t.s;
  for (int j = 0; j < kDof; ++j) d[kQIndex + j] = WrapAngle(d[kQIndex + j]);
  return d;
}

double DynamicsMse(const MlpParams& params,
                   const std::vector<Transition>& data) {
  if (data.empty()) return 0.0;
  std::vector<int> index(data.size());
  std::iota(index.begin(), index.end(), 0);
  const int n = static_cast<int>(data.size());
  Tape tape;
  MlpVars vars = BindMlp(tape, params, false);
  return NormalizedLoss(vars, tape, Columns(data, index, 0, n, 0),
                        Columns(data, index, 0, n, 1),
                        Columns(data, index, 0, n, 2))
      .scalar();
}

DynTrainResult TrainDynamics(const std::vector<Transition>& data,
                             const DynTrainConfig& cfg) {
  if (data.size() < 2) Fail(ErrorKind::kInput, "need at least 2 transitions");
  if (!(cfg.learning_rate > 0.0) || !(cfg.validation_fraction > 0.0) ||
      !(cfg.validation_fraction < 1.0) || cfg.batch_size < 1 ||
      cfg.epochs < 0) {
    Fail(ErrorKind::kConfig, "invalid dynamics training config");
  }
  Rng rng(cfg.seed);
  const int n = static_cast<int>(data.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.Below(static_cast<std::uint64_t>(i) + 1)]);
  }
  const int n_val = std::clamp(
      static_cast<int>(std::lround(cfg.validation_fraction * n)), 1, n - 1);
  const int n_train = n - n_val;
  std::vector<int> train(order.begin(), order.begin() + n_train);
  std::vector<int> val(order.begin() + n_train, order.end());

  DynTrainResult result;
  // zero output layer: training starts from the identity model
  result.params = MakeDynamicsParams(cfg.hidden, rng, true);
  {
    const Tensor s = Columns(data, train, 0, n_train, 0);
    const Tensor u = Columns(data, train, 0, n_train, 1);
    ColumnStats(FeatureValues(s, u), result.params.input_mean,
                result.params.input_scale);
    Tensor delta_mean;
    ColumnStats(Columns(data, train, 0, n_train, 2), delta_mean,
                result.params.output_scale);
  }
  const Tensor val_s = Columns(data, val, 0, n_val, 0);
  const Tensor val_u = Columns(data, val, 0, n_val, 1);
  const Tensor val_d = Columns(data, val, 0, n_val, 2);

  Adam adam(cfg.learning_rate);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n_train - 1; i > 0; --i) {
      std::swap(train[i], train[rng.Below(static_cast<std::uint64_t>(i) + 1)]);
    }
    double epoch_loss = 0.0;
    int seen = 0;
    for (int begin = 0; begin < n_train; begin += cfg.batch_size) {
      const int end = std::min(n_train, begin + cfg.batch_size);
      Tape tape;
      MlpVars vars = BindMlp(tape, result.params, true);
      Var loss = NormalizedLoss(vars, tape, Columns(data, train, begin, end, 0),
                                Columns(data, train, begin, end, 1),
                                Columns(data, train, begin, end, 2));
      if (!std::isfinite(loss.scalar())) {
        Fail(ErrorKind::kDivergence,
             "dynamics loss is not finite at epoch " + std::to_string(epoch));
      }
      std::vector<Var> trainable = vars.Trainable();
      std::vector<Tensor> grads = Grad(loss, trainable);
      adam.Step(TrainableTensors(result.params), grads);
      epoch_loss += loss.scalar() * (end - begin);
      seen += end - begin;
    }
    Tape tape;
    MlpVars vars = BindMlp(tape, result.params, false);
    const double val_loss =
        NormalizedLoss(vars, tape, val_s, val_u, val_d).scalar();
    if (!std::isfinite(val_loss)) {
      Fail(ErrorKind::kDivergence, "dynamics validation loss is not finite at epoch " +
                                       std::to_string(epoch));
    }
    result.train_mse.push_back(epoch_loss / seen);
    result.validation_mse.push_back(val_loss);
  }
  return result;
}

}  // namespace kpirl
