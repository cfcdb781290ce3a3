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

#ifndef KPIRL_DIFFCORE_GRADCHECK_H_
#define KPIRL_DIFFCORE_GRADCHECK_H_

#include <functional>

#include "kpirl/diffcore/tape.h"

namespace kpirl {

// Builds a scalar expression of x on the given tape.
using ScalarFunction = std::function<Var(Tape& tape, const Var& x)>;

// Max over coordinates of |autodiff - central difference| /
// max(1, |central difference|). Every evaluation uses a fresh tape.
double CheckGradFd(const ScalarFunction& f, const Tensor& point, double h);

// Central-difference gradient of f at point.
Tensor FiniteDifferenceGrad(const ScalarFunction& f, const Tensor& point,
                            double h);

}  // namespace kpirl

#endif  // KPIRL_DIFFCORE_GRADCHECK_H_
