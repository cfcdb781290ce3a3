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

// Fully connected network shared by the dynamics model, the discriminator,
// the value function and the policy.

#ifndef KPIRL_DYNMODEL_MLP_H_
#define KPIRL_DYNMODEL_MLP_H_

#include <string>
#include <vector>

#include "kpirl/diffcore/tape.h"
#include "kpirl/rng.h"

namespace kpirl {

struct MlpParams {
  std::vector<int> sizes;       // input, hidden..., output
  std::vector<Tensor> weights;  // sizes[i+1] x sizes[i]
  std::vector<Tensor> biases;   // sizes[i+1] x 1
  std::string activation = "tanh";
  // x_normalized = (x - input_mean) / input_scale; y = output_scale * raw
  Tensor input_mean;    // sizes[0] x 1
  Tensor input_scale;   // sizes[0] x 1
  Tensor output_scale;  // sizes.back() x 1

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }
};

// Glorot-uniform weights, zero biases, identity normalization. With
// zero_last the final layer starts at exactly zero.
MlpParams InitMlp(const std::vector<int>& sizes, Rng& rng,
                  bool zero_last = false);

// Throws a shape error naming the first inconsistent layer.
void ValidateMlp(const MlpParams& params);

// Parameters bound to one tape, as variables or as constants.
struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
  Var input_mean, input_scale, output_scale;
  std::string activation;

  // weights then biases, layer by layer
  std::vector<Var> Trainable() const;
};

MlpVars BindMlp(Tape& tape, const MlpParams& params, bool as_variables);

// Columns of x are samples. Returns the network output before output scaling.
Var MlpRaw(const MlpVars& vars, const Var& x);
// MlpRaw scaled by output_scale.
Var MlpForward(const MlpVars& vars, const Var& x);

// Numeric forward on a scratch tape.
Tensor MlpEval(const MlpParams& params, const Tensor& x);

// Flat views for optimizers and checkpoints: weights then biases per layer.
std::vector<Tensor*> TrainableTensors(MlpParams& params);
std::vector<const Tensor*> TrainableTensors(const MlpParams& params);

}  // namespace kpirl

#endif  // KPIRL_DYNMODEL_MLP_H_
