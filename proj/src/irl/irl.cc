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

#include <algorithm>
#include <cmath>
#include <string>

#include "kpirl/error.h"
#include "kpirl/rng.h"

namespace kpirl {
namespace {

double SoftplusValue(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Tensor SoftplusTensor(const Tensor& t) {
  Tensor out(t.rows(), t.cols());
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    out.data()[k] = SoftplusValue(t.data()[k]);
  }
  return out;
}

double SquaredNorm(const std::vector<Tensor>& tensors) {
  double s = 0.0;
  for (const Tensor& t : tensors) s += t.squaredNorm();
  return s;
}

PlannerConfig InnerConfig(const IrlTrainConfig& cfg, int horizon) {
  PlannerConfig pc;
  pc.horizon = horizon;
  pc.alpha = cfg.alpha;
  pc.inner_steps = cfg.inner_steps;
  return pc;
}

std::vector<KeypointFrame> FramesOf(const std::vector<Tensor>& states) {
  std::vector<KeypointFrame> out;
  for (const Tensor& s : states) out.push_back(UnflattenFrame(s.col(0)));
  return out;
}

void ValidateTrainConfig(const IrlTrainConfig& cfg) {
  if (!(cfg.eta >= 0.0) || !(cfg.alpha > 0.0) || cfg.iterations < 0 ||
      cfg.horizon < 1 || cfg.demos_per_batch < 1 || cfg.smoothing_window < 1 ||
      cfg.inner_steps < 0) {
    Fail(ErrorKind::kConfig, "invalid IRL training config");
  }
}

// Best-so-far bookkeeping on the trailing smoothed loss.
void TrackBest(IrlState& state, const CostParams& evaluated, int window) {
  const int n = static_cast<int>(state.curve.size());
  const int w = std::min(window, n);
  double avg = 0.0;
  for (int i = n - w; i < n; ++i) avg += state.curve[i];
  avg /= w;
  if (!state.has_best || avg < state.best_score) {
    state.best = evaluated;
    state.best_score = avg;
    state.has_best = true;
  }
}

}  // namespace

const char* CostVariantName(CostVariant v) {
  switch (v) {
    case CostVariant::kWeightedKeypoint: return "weighted";
    case CostVariant::kTimeWeighted: return "timeweighted";
    case CostVariant::kRbfNet: return "rbf";
  }
  return "?";
}

CostVariant ParseCostVariant(const std::string& name) {
  if (name == "weighted") return CostVariant::kWeightedKeypoint;
  if (name == "timeweighted") return CostVariant::kTimeWeighted;
  if (name == "rbf") return CostVariant::kRbfNet;
  Fail(ErrorKind::kConfig, "unknown cost variant '" + name + "'");
}

Tensor CostParams::Phi() const { return SoftplusTensor(rho); }

std::vector<Tensor*> CostParams::Trainable() {
  std::vector<Tensor*> out{&rho};
  if (variant == CostVariant::kTimeWeighted) out.push_back(&rho_t);
  if (variant == CostVariant::kRbfNet) out.push_back(&rbf_w);
  return out;
}

std::vector<const Tensor*> CostParams::Trainable() const {
  std::vector<const Tensor*> out{&rho};
  if (variant == CostVariant::kTimeWeighted) out.push_back(&rho_t);
  if (variant == CostVariant::kRbfNet) out.push_back(&rbf_w);
  return out;
}

CostParams InitCostParams(CostVariant variant, int horizon, double init_rho,
                          std::uint64_t seed) {
  CostParams p;
  p.variant = variant;
  p.rho = Tensor::Constant(kXyDim, 1, init_rho);
  if (variant == CostVariant::kTimeWeighted) {
    // softplus(rho_t) = 1 at start
    p.rho_t = Tensor::Constant(horizon, 1, std::log(std::exp(1.0) - 1.0));
  }
  if (variant == CostVariant::kRbfNet) {
    p.rbf_w = Tensor::Zero(kRbfCenters, 1);
    Rng rng(seed);
    p.centers.resize(kXyDim, kRbfCenters);
    for (Eigen::Index k = 0; k < p.centers.size(); ++k) {
      p.centers.data()[k] = kRbfWidth * rng.Normal();
    }
  }
  return p;
}

std::vector<Var> CostVars::Trainable() const {
  std::vector<Var> out{rho};
  if (variant == CostVariant::kTimeWeighted) out.push_back(rho_t);
  if (variant == CostVariant::kRbfNet) out.push_back(rbf_w);
  return out;
}

CostVars BindCost(Tape& tape, const CostParams& params, bool as_variables,
                  const CameraModel& camera) {
  auto bind = [&](const Tensor& t) {
    return as_variables ? tape.Variable(t) : tape.Constant(t);
  };
  CostVars v;
  v.variant = params.variant;
  if (params.rho.rows() != kXyDim || params.rho.cols() != 1) {
    Fail(ErrorKind::kShape, "cost weights must be " + std::to_string(kXyDim) + "x1");
  }
  v.rho = bind(params.rho);
  v.phi = Softplus(v.rho);
  if (params.variant == CostVariant::kTimeWeighted) {
    v.rho_t = bind(params.rho_t);
    v.phi_t = Softplus(v.rho_t);
  }
  if (params.variant == CostVariant::kRbfNet) {
    v.rbf_w = bind(params.rbf_w);
    v.centers = params.centers;
  }
  v.pixel_scale = camera.scale;
  return v;
}

Var KeypointXy(const Var& s) {
  std::vector<Var> parts;
  for (int k = 0; k < kNumKeypoints; ++k) parts.push_back(SliceRows(s, 3 * k, 2));
  return ConcatRows(parts);
}

Var CostOnTape(Tape& tape, const CostVars& cost, const std::vector<Var>& frames,
               const Tensor& goal_xy) {
  if (frames.empty()) Fail(ErrorKind::kInput, "cost of an empty trajectory");
  if (goal_xy.rows() != kXyDim) {
    Fail(ErrorKind::kInput, "goal has " + std::to_string(goal_xy.rows() / 2) +
                                " keypoints, expected " +
                                std::to_string(kNumKeypoints));
  }
  if (cost.variant == CostVariant::kTimeWeighted &&
      static_cast<Eigen::Index>(frames.size()) > cost.phi_t.rows()) {
    Fail(ErrorKind::kInput, "trajectory longer than the time weights");
  }
  Var goal = tape.Constant(goal_xy);
  Var phi_row = Transpose(cost.phi);
  Var ones = tape.Constant(Tensor::Ones(1, kXyDim));
  Var total;
  for (size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].rows() < kFrameDim) {
      Fail(ErrorKind::kInput, "frame has " + std::to_string(frames[t].rows()) +
                                  " rows, expected at least " +
                                  std::to_string(kFrameDim));
    }
    Var residual = KeypointXy(frames[t]) - goal;
    Var stage = MatMul(phi_row, Square(residual));
    if (cost.variant == CostVariant::kTimeWeighted) {
      stage = stage * SliceRows(cost.phi_t, static_cast<int>(t), 1);
    }
    if (cost.variant == CostVariant::kRbfNet) {
      Var meters = Scale(residual, 1.0 / cost.pixel_scale);
      for (int j = 0; j < kRbfCenters; ++j) {
        Var d = meters - tape.Constant(Tensor(cost.centers.col(j)));
        Var bump = Exp(Scale(MatMul(ones, Square(d)),
                             -0.5 / (kRbfWidth * kRbfWidth)));
        stage = stage + SliceRows(cost.rbf_w, j, 1) * bump;
      }
    }
    total = t == 0 ? stage : total + stage;
  }
  return total;
}

CostFn MakeCostFn(const CostVars& cost, const Tensor& goal_xy) {
  return [cost, goal_xy](Tape& tape, const std::vector<Var>& states,
                         const Var&) {
    std::vector<Var> frames(states.begin() + 1, states.end());
    return CostOnTape(tape, cost, frames, goal_xy);
  };
}

CostFn MakeCostFn(const CostParams& params, const Tensor& goal_xy,
                  const CameraModel& camera) {
  return [params, goal_xy, camera](Tape& tape, const std::vector<Var>& states,
                                   const Var&) {
    CostVars vars = BindCost(tape, params, false, camera);
    std::vector<Var> frames(states.begin() + 1, states.end());
    return CostOnTape(tape, vars, frames, goal_xy);
  };
}

Tensor FrameXy(const KeypointFrame& frame) {
  Tensor xy(kXyDim, 1);
  for (int k = 0; k < kNumKeypoints; ++k) {
    xy(2 * k, 0) = frame[k].x;
    xy(2 * k + 1, 0) = frame[k].y;
  }
  return xy;
}

double CostEval(const CostParams& params,
                const std::vector<KeypointFrame>& trajectory,
                const KeypointFrame& goal, const CameraModel& camera) {
  Tape tape;
  CostVars vars = BindCost(tape, params, false, camera);
  std::vector<Var> frames;
  for (const KeypointFrame& f : trajectory) {
    frames.push_back(tape.Constant(Tensor(FlattenFrame(f))));
  }
  return CostOnTape(tape, vars, frames, FrameXy(goal)).scalar();
}

double IrlLoss(const std::vector<KeypointFrame>& demo,
               const std::vector<KeypointFrame>& predicted) {
  if (demo.size() != predicted.size()) {
    Fail(ErrorKind::kInput, "demo has " + std::to_string(demo.size()) +
                                " frames, prediction has " +
                                std::to_string(predicted.size()));
  }
  double loss = 0.0;
  for (size_t t = 0; t < demo.size(); ++t) {
    loss += (FrameXy(demo[t]) - FrameXy(predicted[t])).squaredNorm();
  }
  return loss;
}

Var IrlLossOnTape(Tape& tape, const std::vector<KeypointFrame>& demo,
                  const std::vector<Var>& predicted) {
  if (demo.size() != predicted.size()) {
    Fail(ErrorKind::kInput, "demo has " + std::to_string(demo.size()) +
                                " frames, prediction has " +
                                std::to_string(predicted.size()));
  }
  Var loss;
  for (size_t t = 0; t < demo.size(); ++t) {
    Var term = Sum(Square(KeypointXy(predicted[t]) -
                          tape.Constant(FrameXy(demo[t]))));
    loss = t == 0 ? term : loss + term;
  }
  return loss;
}

IrlDemo PrepareDemo(const Demonstration& demo, int horizon) {
  if (demo.frames.size() < 2) Fail(ErrorKind::kInput, "demo needs 2 frames");
  IrlDemo d;
  const size_t keep = std::min(demo.frames.size(),
                               static_cast<size_t>(horizon) + 1);
  d.frames.assign(demo.frames.begin(), demo.frames.begin() + keep);
  d.goal = d.frames.back();
  d.s0.resize(kLatentDim, 1);
  d.s0.col(0).head(kFrameDim) = FlattenFrame(d.frames.front());
  d.s0.col(0).segment<kDof>(kQIndex) = demo.q0;
  d.s0.col(0).segment<kDof>(kQDotIndex) = demo.q_dot0;
  return d;
}

Demonstration MakeRelative(const Demonstration& demo,
                           const KeypointFrame& robot_start) {
  if (demo.frames.empty()) Fail(ErrorKind::kInput, "empty demo");
  Demonstration out = demo;
  const KeypointFrame first = demo.frames.front();
  for (KeypointFrame& f : out.frames) {
    for (int k = 0; k < kNumKeypoints; ++k) {
      f[k].x = f[k].x - first[k].x + robot_start[k].x;
      f[k].y = f[k].y - first[k].y + robot_start[k].y;
    }
  }
  out.z_goal = out.frames.back();
  return out;
}

OuterGradResult OuterGrad(const CostParams& params, const IrlDemo& demo,
                          const DynamicsModel& model, const IrlTrainConfig& cfg,
                          const CameraModel& camera) {
  Tape tape;
  CostVars vars = BindCost(tape, params, true, camera);
  auto bound = model.Bind(tape);
  const int horizon = demo.horizon();
  GraphPlan plan = PlanGradientGraph(
      tape, *bound, MakeCostFn(vars, FrameXy(demo.goal)),
      tape.Constant(demo.s0), tape.Constant(Tensor::Zero(kActionDim * horizon, 1)),
      InnerConfig(cfg, horizon));
  Var loss = IrlLossOnTape(tape, demo.frames, plan.trajectory);
  OuterGradResult r;
  r.loss = loss.scalar();
  if (!std::isfinite(r.loss)) {
    Fail(ErrorKind::kDivergence, "IRL loss is not finite");
  }
  r.grad = Grad(loss, vars.Trainable());
  for (const Var& s : plan.trajectory) {
    r.planned.push_back(UnflattenFrame(s.value().col(0)));
  }
  return r;
}

double PlanLoss(const CostParams& params, const IrlDemo& demo,
                const DynamicsModel& model, const IrlTrainConfig& cfg,
                const CameraModel& camera) {
  const int horizon = demo.horizon();
  Plan plan = PlanGradient(model, MakeCostFn(params, FrameXy(demo.goal), camera),
                           demo.s0,
                           InnerConfig(cfg, horizon));
  return IrlLoss(demo.frames, FramesOf(plan.trajectory));
}

double MeanPlanLoss(const CostParams& params, const std::vector<IrlDemo>& demos,
                    const DynamicsModel& model, const IrlTrainConfig& cfg,
                    const CameraModel& camera) {
  double total = 0.0;
  for (const IrlDemo& d : demos) total += PlanLoss(params, d, model, cfg, camera);
  return demos.empty() ? 0.0 : total / static_cast<double>(demos.size());
}

IrlState InitIrlState(const IrlTrainConfig& cfg) {
  ValidateTrainConfig(cfg);
  IrlState s;
  s.params = InitCostParams(cfg.variant, cfg.horizon, cfg.init_rho, cfg.seed);
  s.best = s.params;
  return s;
}

void TrainIrlSteps(IrlState& state, const std::vector<IrlDemo>& demos,
                   const DynamicsModel& model, const IrlTrainConfig& cfg,
                   int until, const CameraModel& camera) {
  ValidateTrainConfig(cfg);
  if (demos.empty()) Fail(ErrorKind::kInput, "IRL training needs a demo");
  const int n = static_cast<int>(demos.size());
  for (int it = state.iteration; it < until; ++it) {
    std::vector<Tensor> grad;
    double loss = 0.0;
    for (int j = 0; j < cfg.demos_per_batch; ++j) {
      const IrlDemo& demo = demos[(it * cfg.demos_per_batch + j) % n];
      OuterGradResult r;
      try {
        r = OuterGrad(state.params, demo, model, cfg, camera);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDivergence) throw;
        Fail(ErrorKind::kDivergence, std::string(e.what()) + " at iteration " +
                                         std::to_string(it));
      }
      if (grad.empty()) {
        grad = r.grad;
      } else {
        for (size_t i = 0; i < grad.size(); ++i) grad[i] += r.grad[i];
      }
      loss += r.loss;
    }
    for (Tensor& g : grad) g /= cfg.demos_per_batch;
    loss /= cfg.demos_per_batch;
    const double norm = std::sqrt(SquaredNorm(grad));
    if (!std::isfinite(norm)) {
      Fail(ErrorKind::kDivergence,
           "IRL gradient is not finite at iteration " + std::to_string(it));
    }
    const double factor =
        cfg.grad_clip > 0.0 && norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;
    const CostParams evaluated = state.params;
    std::vector<Tensor*> params = state.params.Trainable();
    for (size_t i = 0; i < params.size(); ++i) {
      *params[i] -= (cfg.eta * factor) * grad[i];
    }
    state.curve.push_back(loss);
    state.grad_norm.push_back(norm);
    TrackBest(state, evaluated, cfg.smoothing_window);
    state.iteration = it + 1;
  }
}

IrlState TrainIrl(const std::vector<IrlDemo>& demos, const DynamicsModel& model,
                  const IrlTrainConfig& cfg, const CameraModel& camera) {
  IrlState state = InitIrlState(cfg);
  TrainIrlSteps(state, demos, model, cfg, cfg.iterations, camera);
  return state;
}

Tensor FeatureExpectation(const std::vector<KeypointFrame>& frames,
                          const KeypointFrame& goal) {
  Tensor f = Tensor::Zero(kXyDim, 1);
  if (frames.size() < 2) return f;
  const Tensor g = FrameXy(goal);
  for (size_t t = 1; t < frames.size(); ++t) {
    f += (FrameXy(frames[t]) - g).cwiseAbs2();
  }
  return f / static_cast<double>(frames.size() - 1);
}

void FeatureMatchingSteps(IrlState& state, const std::vector<IrlDemo>& demos,
                          const DynamicsModel& model, const IrlTrainConfig& cfg,
                          int until, const CameraModel& camera) {
  ValidateTrainConfig(cfg);
  if (cfg.variant != CostVariant::kWeightedKeypoint) {
    Fail(ErrorKind::kConfig, "feature matching supports the weighted variant only");
  }
  if (demos.empty()) Fail(ErrorKind::kInput, "IRL training needs a demo");
  const int n = static_cast<int>(demos.size());
  for (int it = state.iteration; it < until; ++it) {
    Tensor step = Tensor::Zero(kXyDim, 1);
    double loss = 0.0;
    for (int j = 0; j < cfg.demos_per_batch; ++j) {
      const IrlDemo& demo = demos[(it * cfg.demos_per_batch + j) % n];
      Plan plan = PlanGradient(model,
                               MakeCostFn(state.params, FrameXy(demo.goal), camera),
                               demo.s0, InnerConfig(cfg, demo.horizon()));
      const std::vector<KeypointFrame> planned = FramesOf(plan.trajectory);
      loss += IrlLoss(demo.frames, planned);
      step += FeatureExpectation(planned, demo.goal) -
              FeatureExpectation(demo.frames, demo.goal);
    }
    step /= cfg.demos_per_batch;
    loss /= cfg.demos_per_batch;
    if (!std::isfinite(loss) || !step.allFinite()) {
      Fail(ErrorKind::kDivergence, "feature matching diverged at iteration " +
                                       std::to_string(it));
    }
    const double norm = step.norm();
    const double factor =
        cfg.grad_clip > 0.0 && norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;
    const CostParams evaluated = state.params;
    // a planned feature above the demo's raises that weight
    state.params.rho += (cfg.eta * factor) * step;
    state.curve.push_back(loss);
    state.grad_norm.push_back(norm);
    TrackBest(state, evaluated, cfg.smoothing_window);
    state.iteration = it + 1;
  }
}

IrlState FeatureMatchingBaseline(const std::vector<IrlDemo>& demos,
                                 const DynamicsModel& model,
                                 const IrlTrainConfig& cfg,
                                 const CameraModel& camera) {
  IrlState state = InitIrlState(cfg);
  FeatureMatchingSteps(state, demos, model, cfg, cfg.iterations, camera);
  return state;
}

std::vector<double> Smooth(const std::vector<double>& curve, int window) {
  std::vector<double> out;
  double sum = 0.0;
  for (size_t i = 0; i < curve.size(); ++i) {
    sum += curve[i];
    if (i >= static_cast<size_t>(window)) sum -= curve[i - window];
    const size_t count = std::min(i + 1, static_cast<size_t>(window));
    out.push_back(sum / static_cast<double>(count));
  }
  return out;
}

void PutCostParams(Checkpoint& checkpoint, const std::string& prefix,
                   const CostParams& params) {
  checkpoint.meta["costs"][prefix] = CostVariantName(params.variant);
  checkpoint.tensors.emplace_back(prefix + ".rho", params.rho);
  if (params.variant == CostVariant::kTimeWeighted) {
    checkpoint.tensors.emplace_back(prefix + ".rho_t", params.rho_t);
  }
  if (params.variant == CostVariant::kRbfNet) {
    checkpoint.tensors.emplace_back(prefix + ".rbf_w", params.rbf_w);
    checkpoint.tensors.emplace_back(prefix + ".centers", params.centers);
  }
}

CostParams GetCostParams(const Checkpoint& checkpoint,
                         const std::string& prefix) {
  const auto costs = checkpoint.meta.find("costs");
  if (costs == checkpoint.meta.end() || !costs->contains(prefix)) {
    Fail(ErrorKind::kFormat, "checkpoint has no cost '" + prefix + "'");
  }
  CostParams p;
  p.variant = ParseCostVariant((*costs)[prefix].get<std::string>());
  p.rho = checkpoint.Get(prefix + ".rho");
  if (p.rho.rows() != kXyDim || p.rho.cols() != 1) {
    Fail(ErrorKind::kShape, "cost '" + prefix + "' weights have wrong shape");
  }
  if (p.variant == CostVariant::kTimeWeighted) {
    p.rho_t = checkpoint.Get(prefix + ".rho_t");
  }
  if (p.variant == CostVariant::kRbfNet) {
    p.rbf_w = checkpoint.Get(prefix + ".rbf_w");
    p.centers = checkpoint.Get(prefix + ".centers");
    if (p.rbf_w.rows() != kRbfCenters || p.centers.rows() != kXyDim ||
        p.centers.cols() != kRbfCenters) {
      Fail(ErrorKind::kShape, "cost '" + prefix + "' rbf tensors have wrong shape");
    }
  }
  return p;
}

}  // namespace kpirl
