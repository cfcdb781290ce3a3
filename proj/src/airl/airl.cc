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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kpirl/error.h"
#include "kpirl/rng.h"

namespace kpirl {
namespace {

void StepParams(std::vector<Tensor*> params, const std::vector<Tensor>& grads,
                double scale) {
  for (size_t i = 0; i < params.size(); ++i) *params[i] += scale * grads[i];
}

void CheckBatch(const SaBatch& b, const char* what) {
  if (b.size() == 0) Fail(ErrorKind::kInput, std::string(what) + " batch is empty");
  if (b.s.rows() != kLatentDim || b.a.rows() != kActionDim ||
      b.a.cols() != b.s.cols()) {
    Fail(ErrorKind::kShape, std::string(what) + " batch has the wrong shape");
  }
}

Tensor Column(const Eigen::VectorXd& v) { return Tensor(v); }

PlannerConfig CemConfig(const AirlConfig& cfg, std::uint64_t seed) {
  PlannerConfig pc;
  pc.horizon = cfg.horizon;
  pc.population = cfg.population;
  pc.elite_fraction = static_cast<double>(cfg.elite_count) / cfg.population;
  pc.cem_iterations = cfg.cem_iterations;
  pc.init_std = cfg.init_std;
  pc.warm_start = false;
  pc.seed = seed;
  return pc;
}

SaBatch SampleBatch(const std::vector<Transition>& data, int n, Rng& rng) {
  SaBatch b{Tensor(kLatentDim, n), Tensor(kActionDim, n)};
  for (int i = 0; i < n; ++i) {
    const Transition& t = data[rng.Below(data.size())];
    b.s.col(i) = t.s;
    b.a.col(i) = t.a;
  }
  return b;
}

}  // namespace

void ValidateAirlConfig(const AirlConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) {
    Fail(ErrorKind::kConfig, "discount must lie in (0, 1)");
  }
  if (!(cfg.eta_d >= 0.0 && cfg.eta_pi >= 0.0 && cfg.eta_v >= 0.0)) {
    Fail(ErrorKind::kConfig, "learning rates must be non-negative");
  }
  if (cfg.batch_size < 1 || cfg.horizon < 1 || cfg.iterations < 0 ||
      cfg.episode_length < 1 || cfg.episodes_per_iteration < 1 ||
      cfg.discriminator_steps < 0 || cfg.plan_batch < 1 ||
      cfg.population < 1 || cfg.elite_count < 1 ||
      cfg.elite_count > cfg.population || cfg.cem_iterations < 1 ||
      !(cfg.exploration_std >= 0.0) || !(cfg.init_std > 0.0)) {
    Fail(ErrorKind::kConfig, "invalid AIRL config");
  }
}

MlpParams MakeAirlNet(int input_dim, int output_dim,
                      const std::vector<int>& hidden, Rng& rng,
                      const CameraModel& camera) {
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_dim);
  MlpParams p = InitMlp(sizes, rng);
  p.input_mean = Tensor::Zero(input_dim, 1);
  p.input_scale = Tensor::Ones(input_dim, 1);
  for (int i = 0; i < std::min(input_dim, kLatentDim); ++i) {
    if (i < kFrameDim) {
      if (i % 3 == 2) {
        p.input_mean(i) = 0.5;
        p.input_scale(i) = 0.5;
      } else {
        p.input_mean(i) = camera.offset(i % 3);
        p.input_scale(i) = camera.scale;
      }
    } else if (i < kQDotIndex) {
      p.input_scale(i) = std::numbers::pi;
    }
  }
  p.output_scale = Tensor::Ones(output_dim, 1);
  return p;
}

AirlNets InitAirlNets(const AirlConfig& cfg, const CameraModel& camera) {
  Rng rng(cfg.seed);
  AirlNets n;
  n.discriminator = MakeAirlNet(kLatentDim + kActionDim, 1, cfg.hidden, rng, camera);
  n.value = MakeAirlNet(kLatentDim, 1, cfg.hidden, rng, camera);
  n.policy = MakeAirlNet(kLatentDim, kActionDim, cfg.hidden, rng, camera);
  return n;
}

Var DiscriminatorLogit(const MlpVars& d, const Var& s, const Var& a) {
  const Var sa[] = {s, a};
  return Clamp(MlpForward(d, ConcatRows(sa)), -kLogitClamp, kLogitClamp);
}

Tensor DiscriminatorProb(const MlpParams& d, const Tensor& s, const Tensor& a) {
  Tape tape;
  MlpVars v = BindMlp(tape, d, false);
  return Sigmoid(DiscriminatorLogit(v, tape.Constant(s), tape.Constant(a))).value();
}

Tensor Reward(const MlpParams& d, const Tensor& s, const Tensor& a) {
  Tape tape;
  MlpVars v = BindMlp(tape, d, false);
  return DiscriminatorLogit(v, tape.Constant(s), tape.Constant(a)).value();
}

RewardFn DiscriminatorReward(const MlpParams& d) {
  return [d](Tape& tape, const Var& s, const Var& a) {
    return DiscriminatorLogit(BindMlp(tape, d, false), s, a);
  };
}

// -log D = softplus(-l), -log(1 - D) = softplus(l)
Var DiscriminatorLoss(const MlpVars& d, Tape& tape, const SaBatch& expert,
                      const SaBatch& policy) {
  Var le = DiscriminatorLogit(d, tape.Constant(expert.s), tape.Constant(expert.a));
  Var lp = DiscriminatorLogit(d, tape.Constant(policy.s), tape.Constant(policy.a));
  return Mean(Softplus(-le)) + Mean(Softplus(lp));
}

double DiscriminatorUpdate(MlpParams& d, const SaBatch& expert,
                           const SaBatch& policy, double eta) {
  CheckBatch(expert, "expert");
  CheckBatch(policy, "policy");
  Tape tape;
  MlpVars v = BindMlp(tape, d, true);
  Var loss = DiscriminatorLoss(v, tape, expert, policy);
  const double value = loss.scalar();
  if (!std::isfinite(value)) {
    Fail(ErrorKind::kDivergence, "discriminator loss is not finite");
  }
  StepParams(TrainableTensors(d), Grad(loss, v.Trainable()), -eta);
  return value;
}

double DiscriminatorAccuracy(const MlpParams& d, const SaBatch& expert,
                             const SaBatch& policy) {
  const Tensor pe = DiscriminatorProb(d, expert.s, expert.a);
  const Tensor pp = DiscriminatorProb(d, policy.s, policy.a);
  const double correct = (pe.array() > 0.5).count() + (pp.array() < 0.5).count();
  return correct / static_cast<double>(pe.size() + pp.size());
}

Tensor ValueEval(const MlpParams& v, const Tensor& s) { return MlpEval(v, s); }

double ValueTdUpdate(MlpParams& v, const Tensor& s, const Tensor& a,
                     const Tensor& s_next, const RewardFn& reward,
                     double gamma, double eta) {
  Tape tape;
  MlpVars vars = BindMlp(tape, v, true);
  Var vs = MlpForward(vars, tape.Constant(s));
  const Tensor r = reward(tape, tape.Constant(s), tape.Constant(a)).value();
  const Tensor v_next = ValueEval(v, s_next);
  const Tensor delta = r + gamma * v_next - vs.value();
  if (!delta.allFinite()) Fail(ErrorKind::kDivergence, "TD error is not finite");
  // the target is a constant: only V(s) is differentiated
  Var weighted = Mean(tape.Constant(delta) * vs);
  StepParams(TrainableTensors(v), Grad(weighted, vars.Trainable()), eta);
  return delta.mean();
}

Var PolicyOnTape(const MlpVars& pi, const Var& s) { return Tanh(MlpForward(pi, s)); }

Tensor PolicyAction(const MlpParams& pi, const Tensor& s) {
  Tape tape;
  return PolicyOnTape(BindMlp(tape, pi, false), tape.Constant(s)).value();
}

CostFn TdMpcObjective(const RewardFn& reward, const MlpParams& v, double gamma) {
  return [reward, v, gamma](Tape& tape, const std::vector<Var>& states,
                             const Var& u) {
    const int horizon = static_cast<int>(states.size()) - 1;
    double discount = 1.0;
    Var total;
    for (int t = 0; t < horizon; ++t) {
      Var r = reward(tape, states[t], SliceRows(u, kActionDim * t, kActionDim));
      total = t == 0 ? Scale(r, -discount) : total - discount * r;
      discount *= gamma;
    }
    MlpVars vv = BindMlp(tape, v, false);
    return total - discount * MlpForward(vv, states[horizon]);
  };
}

Tensor PolicyProposal(const MlpParams& pi, const DynamicsModel& model,
                      const Tensor& s0, int horizon) {
  Tensor u(kActionDim * horizon, s0.cols());
  Tensor s = s0;
  for (int t = 0; t < horizon; ++t) {
    const Tensor a = PolicyAction(pi, s);
    u.middleRows(kActionDim * t, kActionDim) = a;
    if (t + 1 < horizon) s = PredictValues(model, s, a);
  }
  return u;
}

PolicyUpdateResult PolicyUpdateTdmpc(MlpParams& pi, const RewardFn& reward,
                                     const MlpParams& v,
                                     const DynamicsModel& model,
                                     const Tensor& starts,
                                     const AirlConfig& cfg, Rng& rng) {
  ValidateAirlConfig(cfg);
  if (starts.rows() != kLatentDim || starts.cols() == 0) {
    Fail(ErrorKind::kShape, "policy update needs kLatentDim x N start states");
  }
  PolicyUpdateResult result;
  const CostFn objective = TdMpcObjective(reward, v, cfg.gamma);
  const PlannerConfig pc = CemConfig(cfg, rng.Next());
  Tensor targets(kActionDim, starts.cols());
  for (Eigen::Index b = 0; b < starts.cols(); ++b) {
    const Tensor s0 = starts.col(b);
    const Tensor proposal = PolicyProposal(pi, model, s0, cfg.horizon);
    result.plans.push_back(PlanCem(model, objective, s0, pc, rng, &proposal));
    targets.col(b) = result.plans.back().u.topRows(kActionDim);
  }
  Tape tape;
  MlpVars vars = BindMlp(tape, pi, true);
  Var s = tape.Constant(starts);
  Var a = PolicyOnTape(vars, s);
  Var reward_term = -Mean(reward(tape, s, a));
  Var imitation = Scale(Sum(Square(a - tape.Constant(targets))),
                        1.0 / static_cast<double>(starts.cols()));
  Var loss = reward_term + cfg.imitation_weight * imitation;
  result.reward_term = reward_term.scalar();
  result.imitation_term = imitation.scalar();
  if (!std::isfinite(loss.scalar())) {
    Fail(ErrorKind::kDivergence, "policy loss is not finite");
  }
  StepParams(TrainableTensors(pi), Grad(loss, vars.Trainable()), -cfg.eta_pi);
  return result;
}

AirlResult AirlTrain(const std::vector<Transition>& expert,
                     const DynamicsModel& model, const AirlConfig& cfg,
                     const CameraModel& camera) {
  ValidateAirlConfig(cfg);
  if (expert.empty()) Fail(ErrorKind::kInput, "AIRL needs expert transitions");
  AirlResult result;
  result.nets = InitAirlNets(cfg, camera);
  AirlNets& nets = result.nets;
  Rng rng(SplitSeed(cfg.seed, 1));
  std::vector<Transition> buffer;
  for (int it = 0; it < cfg.iterations; ++it) {
    // 1. sample trajectories with the current actor
    std::vector<Transition> fresh;
    double task_reward = 0.0, learned_reward = 0.0;
    const RewardFn acting_reward = DiscriminatorReward(nets.discriminator);
    const CostFn objective = TdMpcObjective(acting_reward, nets.value, cfg.gamma);
    for (int e = 0; e < cfg.episodes_per_iteration; ++e) {
      WorldState w = InitialState(SpawnCube(rng));
      for (int k = 0; k < cfg.episode_length; ++k) {
        const Tensor s = Column(Latent(w, camera));
        Tensor a;
        if (cfg.act_with_planner) {
          const Tensor proposal = PolicyProposal(nets.policy, model, s, cfg.horizon);
          a = PlanCem(model, objective, s, CemConfig(cfg, rng.Next()), rng, &proposal)
                  .u.topRows(kActionDim);
        } else {
          a = PolicyAction(nets.policy, s);
          for (Eigen::Index i = 0; i < a.size(); ++i) {
            a(i) = std::clamp(a(i) + cfg.exploration_std * rng.Normal(), kActionLow,
                              kActionHigh);
          }
        }
        Transition t;
        t.s = s.col(0);
        t.a = a.col(0);
        w = StepEnv(w, t.a);
        t.s_next = Latent(w, camera);
        learned_reward += Reward(nets.discriminator, s, a)(0, 0);
        task_reward -= GoalDistance(w, cfg.task);
        fresh.push_back(t);
      }
    }
    const double steps = static_cast<double>(fresh.size());
    buffer.insert(buffer.end(), fresh.begin(), fresh.end());

    // 2. discriminator: expert vs. everything the actor produced so far
    double d_loss = 0.0;
    for (int k = 0; k < cfg.discriminator_steps; ++k) {
      const SaBatch eb = SampleBatch(expert, cfg.batch_size, rng);
      const SaBatch pb = SampleBatch(buffer, cfg.batch_size, rng);
      d_loss += DiscriminatorUpdate(nets.discriminator, eb, pb, cfg.eta_d);
    }
    if (cfg.discriminator_steps > 0) d_loss /= cfg.discriminator_steps;

    // 3. value: TD(0) over the fresh transitions
    const RewardFn reward = DiscriminatorReward(nets.discriminator);
    double td = 0.0;
    for (const Transition& t : fresh) {
      td += ValueTdUpdate(nets.value, Column(t.s), Column(t.a), Column(t.s_next),
                          reward, cfg.gamma, cfg.eta_v);
    }

    // 4. policy: plan from fresh states, then the reward + imitation step
    Tensor starts(kLatentDim, cfg.plan_batch);
    for (int b = 0; b < cfg.plan_batch; ++b) {
      starts.col(b) = fresh[rng.Below(fresh.size())].s;
    }
    const PolicyUpdateResult pu = PolicyUpdateTdmpc(
        nets.policy, reward, nets.value, model, starts, cfg, rng);

    result.curves.discriminator_loss.push_back(d_loss);
    result.curves.mean_td_error.push_back(td / steps);
    result.curves.learned_reward.push_back(learned_reward / steps);
    result.curves.task_reward.push_back(task_reward / steps);
    result.curves.policy_loss.push_back(pu.reward_term +
                                        cfg.imitation_weight * pu.imitation_term);
    result.iterations_run = it + 1;
    if (task_reward / steps > cfg.reward_threshold) {
      result.converged = true;
      break;
    }
  }
  return result;
}

void PutAirlNets(Checkpoint& checkpoint, const AirlNets& nets) {
  PutMlp(checkpoint, "discriminator", nets.discriminator);
  PutMlp(checkpoint, "value", nets.value);
  PutMlp(checkpoint, "policy", nets.policy);
}

AirlNets GetAirlNets(const Checkpoint& checkpoint) {
  AirlNets nets;
  nets.discriminator = GetMlp(checkpoint, "discriminator");
  nets.value = GetMlp(checkpoint, "value");
  nets.policy = GetMlp(checkpoint, "policy");
  return nets;
}

}  // namespace kpirl
