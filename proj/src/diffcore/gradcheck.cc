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

#include "kpirl/diffcore/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "kpirl/error.h"

namespace kpirl {
namespace {

double Evaluate(const ScalarFunction& f, const Tensor& point) {
  Tape tape;
  Var x = tape.Variable(point);
  const double y = f(tape, x).scalar();
  if (!std::isfinite(y)) {
    Fail(ErrorKind::kNumericalDomain, "function value is not finite");
  }
  return y;
}

}  // namespace

Tensor FiniteDifferenceGrad(const ScalarFunction& f, const Tensor& point,
                            double h) {
  Tensor fd(point.rows(), point.cols());
  Tensor probe = point;
  for (Eigen::Index k = 0; k < point.size(); ++k) {
    const double x0 = point.data()[k];
    probe.data()[k] = x0 + h;
    const double up = Evaluate(f, probe);
    probe.data()[k] = x0 - h;
    const double down = Evaluate(f, probe);
    probe.data()[k] = x0;
    fd.data()[k] = (up - down) / (2.0 * h);
  }
  return fd;
}

double CheckGradFd(const ScalarFunction& f, const Tensor& point, double h) {
  Tape tape;
  Var x = tape.Variable(point);
  Var y = f(tape, x);
  if (!std::isfinite(y.scalar())) {
    Fail(ErrorKind::kNumericalDomain, "function value is not finite");
  }
  const Tensor ad = Grad(y, std::span<const Var>(&x, 1))[0];
  const Tensor fd = FiniteDifferenceGrad(f, point, h);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < point.size(); ++k) {
    const double c = fd.data()[k];
    worst = std::max(worst, std::abs(ad.data()[k] - c) /
                                std::max(1.0, std::abs(c)));
  }
  return worst;
}

}  // namespace kpirl
