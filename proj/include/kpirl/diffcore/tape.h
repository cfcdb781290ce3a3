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

// Reverse-mode automatic differentiation over an append-only tape.
//
// Every value produced by a primitive is recorded as a node holding its
// operands and its forward value. Grad() performs a numeric reverse sweep.
// GradAsGraph() records the reverse sweep itself onto the same tape, so the
// returned gradients are ordinary nodes that can be differentiated again
// (backward-of-backward). Both sweeps apply the same rules in the same order
// and produce bitwise-identical values.

#ifndef KPIRL_DIFFCORE_TAPE_H_
#define KPIRL_DIFFCORE_TAPE_H_

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace kpirl {

using Tensor = Eigen::MatrixXd;

enum class OpCode : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kMatMul,
  kTranspose,
  kTanh,
  kRelu,
  kSigmoid,
  kSoftplus,
  kLog,
  kExp,
  kSquare,
  kSin,
  kCos,
  kSum,
  kMean,
  kRowSum,
  kConcatRows,
  kSliceRows,
  kClamp,
};

const char* OpName(OpCode op);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // value of a 1x1 node
  double scalar() const;

  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  friend class TapeAccess;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

struct Node {
  OpCode op = OpCode::kConstant;
  std::vector<int> args;
  double param = 0.0;       // kScale factor
  int begin = 0;            // kSliceRows
  int count = 0;            // kSliceRows
  Tensor lower, upper;      // kClamp per-row bounds (rows x 1)
  Tensor value;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable leaf.
  Var Variable(Tensor value);
  Var Constant(Tensor value);
  Var Constant(double value);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_[id]; }
  bool Contains(const Var& v) const {
    return v.tape() == this && v.id() >= 0 && v.id() < size();
  }

  // Recomputes every non-leaf node from its operands and compares against the
  // cached value bit for bit.
  bool ReplayMatches() const;

  // Appends a node after validating operand shapes. Used by the primitives.
  Var Record(Node node);

 private:
  // References into nodes_ must stay valid while GradAsGraph appends.
  std::deque<Node> nodes_;
};

// Primitives. Binary elementwise ops accept equal shapes, a 1x1 operand
// (scalar broadcast) or an r x 1 operand against r x c (column broadcast).
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Div(const Var& a, const Var& b);
Var Scale(const Var& a, double factor);
Var MatMul(const Var& a, const Var& b);
Var Transpose(const Var& a);
Var Tanh(const Var& a);
Var Relu(const Var& a);
Var Sigmoid(const Var& a);
Var Softplus(const Var& a);
Var Log(const Var& a);
Var Exp(const Var& a);
Var Square(const Var& a);
Var Sin(const Var& a);
Var Cos(const Var& a);
Var Sum(const Var& a);
Var Mean(const Var& a);
// r x c -> r x 1
Var RowSum(const Var& a);
Var ConcatRows(std::span<const Var> parts);
Var SliceRows(const Var& a, int begin, int count);
Var Clamp(const Var& a, double lower, double upper);
// Per-row bounds, each rows(a) x 1.
Var Clamp(const Var& a, const Tensor& lower, const Tensor& upper);

inline Var operator+(const Var& a, const Var& b) { return Add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return Sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return Mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return Div(a, b); }
inline Var operator*(double c, const Var& a) { return Scale(a, c); }
inline Var operator*(const Var& a, double c) { return Scale(a, c); }
inline Var operator-(const Var& a) { return Scale(a, -1.0); }

struct SweepStats {
  int visited = 0;  // nodes whose adjoint rule was applied
};

// d(output)/d(input) for each input. Inputs not reachable from output get
// zero tensors of the input's shape.
std::vector<Tensor> Grad(const Var& output, std::span<const Var> inputs,
                         SweepStats* stats = nullptr);

// Same as Grad, but the gradients are recorded on the tape.
std::vector<Var> GradAsGraph(const Var& output, std::span<const Var> inputs,
                             SweepStats* stats = nullptr);

}  // namespace kpirl

#endif  // KPIRL_DIFFCORE_TAPE_H_
