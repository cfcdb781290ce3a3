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

#ifndef KPIRL_DYNMODEL_ADAM_H_
#define KPIRL_DYNMODEL_ADAM_H_

#include <cmath>
#include <vector>

#include "kpirl/diffcore/tape.h"

namespace kpirl {

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void Step(const std::vector<Tensor*>& params,
            const std::vector<Tensor>& grads) {
    if (m_.empty()) {
      for (const Tensor* p : params) {
        m_.push_back(Tensor::Zero(p->rows(), p->cols()));
        v_.push_back(Tensor::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      const Tensor& g = grads[i];
      Tensor& p = *params[i];
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double gk = g.data()[k];
        m.data()[k] = beta1_ * m.data()[k] + (1.0 - beta1_) * gk;
        v.data()[k] = beta2_ * v.data()[k] + (1.0 - beta2_) * gk * gk;
        const double mhat = m.data()[k] / c1;
        const double vhat = v.data()[k] / c2;
        p.data()[k] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace kpirl

#endif  // KPIRL_DYNMODEL_ADAM_H_
