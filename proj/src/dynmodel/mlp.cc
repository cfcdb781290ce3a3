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

#include "kpirl/dynmodel/mlp.h"

#include <cmath>
#include <string>

#include "kpirl/error.h"

namespace kpirl {
namespace {

std::string Shape(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

Var Activate(const std::string& activation, const Var& x) {
  if (activation == "tanh") return Tanh(x);
  if (activation == "relu") return Relu(x);
  Fail(ErrorKind::kConfig, "unknown activation '" + activation + "'");
}

}  // namespace

MlpParams InitMlp(const std::vector<int>& sizes, Rng& rng, bool zero_last) {
  if (sizes.size() < 2) Fail(ErrorKind::kConfig, "mlp needs two sizes");
  MlpParams p;
  p.sizes = sizes;
  for (size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i], out = sizes[i + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    Tensor w(out, in);
    // column-major fill order is part of the seed contract
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      w.data()[k] = rng.Uniform(-limit, limit);
    }
    const bool last = i + 2 == sizes.size();
    if (last && zero_last) w.setZero();
    p.weights.push_back(w);
    p.biases.push_back(Tensor::Zero(out, 1));
  }
  p.input_mean = Tensor::Zero(sizes.front(), 1);
  p.input_scale = Tensor::Ones(sizes.front(), 1);
  p.output_scale = Tensor::Ones(sizes.back(), 1);
  return p;
}

void ValidateMlp(const MlpParams& p) {
  if (p.sizes.size() < 2 || p.weights.size() + 1 != p.sizes.size() ||
      p.biases.size() != p.weights.size()) {
    Fail(ErrorKind::kShape, "mlp layer count does not match sizes");
  }
  for (size_t i = 0; i < p.weights.size(); ++i) {
    const int in = p.sizes[i], out = p.sizes[i + 1];
    if (p.weights[i].rows() != out || p.weights[i].cols() != in) {
      Fail(ErrorKind::kShape, "layer " + std::to_string(i) + " weight is " +
                                  Shape(p.weights[i]) + ", expected " +
                                  std::to_string(out) + "x" +
                                  std::to_string(in));
    }
    if (p.biases[i].rows() != out || p.biases[i].cols() != 1) {
      Fail(ErrorKind::kShape, "layer " + std::to_string(i) + " bias is " +
                                  Shape(p.biases[i]) + ", expected " +
                                  std::to_string(out) + "x1");
    }
  }
  auto check_column = [](const Tensor& t, int rows, const char* name) {
    if (t.rows() != rows || t.cols() != 1) {
      Fail(ErrorKind::kShape, std::string(name) + " is " + Shape(t));
    }
  };
  check_column(p.input_mean, p.sizes.front(), "input_mean");
  check_column(p.input_scale, p.sizes.front(), "input_scale");
  check_column(p.output_scale, p.sizes.back(), "output_scale");
}

std::vector<Var> MlpVars::Trainable() const {
  std::vector<Var> out;
  for (size_t i = 0; i < weights.size(); ++i) {
    out.push_back(weights[i]);
    out.push_back(biases[i]);
  }
  return out;
}

MlpVars BindMlp(Tape& tape, const MlpParams& params, bool as_variables) {
  ValidateMlp(params);
  MlpVars v;
  for (size_t i = 0; i < params.weights.size(); ++i) {
    if (as_variables) {
      v.weights.push_back(tape.Variable(params.weights[i]));
      v.biases.push_back(tape.Variable(params.biases[i]));
    } else {
      v.weights.push_back(tape.Constant(params.weights[i]));
      v.biases.push_back(tape.Constant(params.biases[i]));
    }
  }
  v.activation = params.activation;
  v.input_mean = tape.Constant(params.input_mean);
  v.input_scale = tape.Constant(params.input_scale);
  v.output_scale = tape.Constant(params.output_scale);
  return v;
}

Var MlpRaw(const MlpVars& vars, const Var& x) {
  if (x.rows() != vars.input_mean.rows()) {
    Fail(ErrorKind::kInput, "mlp input has " + std::to_string(x.rows()) +
                                " rows, expected " +
                                std::to_string(vars.input_mean.rows()));
  }
  Var h = (x - vars.input_mean) / vars.input_scale;
  const size_t n = vars.weights.size();
  for (size_t i = 0; i < n; ++i) {
    h = MatMul(vars.weights[i], h) + vars.biases[i];
    if (i + 1 < n) h = Activate(vars.activation, h);
  }
  return h;
}

Var MlpForward(const MlpVars& vars, const Var& x) {
  return MlpRaw(vars, x) * vars.output_scale;
}

Tensor MlpEval(const MlpParams& params, const Tensor& x) {
  Tape tape;
  MlpVars vars = BindMlp(tape, params, false);
  return MlpForward(vars, tape.Constant(x)).value();
}

std::vector<Tensor*> TrainableTensors(MlpParams& params) {
  std::vector<Tensor*> out;
  for (size_t i = 0; i < params.weights.size(); ++i) {
    out.push_back(&params.weights[i]);
    out.push_back(&params.biases[i]);
  }
  return out;
}

std::vector<const Tensor*> TrainableTensors(const MlpParams& params) {
  std::vector<const Tensor*> out;
  for (size_t i = 0; i < params.weights.size(); ++i) {
    out.push_back(&params.weights[i]);
    out.push_back(&params.biases[i]);
  }
  return out;
}

}  // namespace kpirl
