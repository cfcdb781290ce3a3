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

#include "kpirl/diffcore/tape.h"

#include <cmath>
#include <cstring>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>

#include "kpirl/error.h"

namespace kpirl {
namespace {

std::string ShapeString(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

enum class Broadcast { kSame, kScalarLeft, kScalarRight, kColumnLeft, kColumnRight };

Broadcast ResolveBroadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (a.rows() == 1 && a.cols() == 1) return Broadcast::kScalarLeft;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalarRight;
  if (a.cols() == 1 && a.rows() == b.rows()) return Broadcast::kColumnLeft;
  if (b.cols() == 1 && a.rows() == b.rows()) return Broadcast::kColumnRight;
  Fail(ErrorKind::kShape, std::string(op) + ": cannot broadcast " +
                              ShapeString(a) + " with " + ShapeString(b));
}

template <class F>
Tensor Elementwise(const Tensor& a, const Tensor& b, const char* op, F f) {
  const Broadcast kind = ResolveBroadcast(a, b, op);
  const Tensor& shape = (kind == Broadcast::kScalarLeft ||
                         kind == Broadcast::kColumnLeft)
                            ? b
                            : a;
  Tensor out(shape.rows(), shape.cols());
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      double x = 0.0, y = 0.0;
      switch (kind) {
        case Broadcast::kSame: x = a(i, j); y = b(i, j); break;
        case Broadcast::kScalarLeft: x = a(0, 0); y = b(i, j); break;
        case Broadcast::kScalarRight: x = a(i, j); y = b(0, 0); break;
        case Broadcast::kColumnLeft: x = a(i, 0); y = b(i, j); break;
        case Broadcast::kColumnRight: x = a(i, j); y = b(i, 0); break;
      }
      out(i, j) = f(x, y);
    }
  }
  return out;
}

template <class F>
Tensor Unary(const Tensor& a, F f) {
  Tensor out(a.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.size(); ++k) out.data()[k] = f(a.data()[k]);
  return out;
}

double SigmoidScalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double SoftplusScalar(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Forward kernels, shared by recording, replay and the numeric reverse sweep.
Tensor EvalAdd(const Tensor& a, const Tensor& b) {
  return Elementwise(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor EvalSub(const Tensor& a, const Tensor& b) {
  return Elementwise(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor EvalMul(const Tensor& a, const Tensor& b) {
  return Elementwise(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor EvalDiv(const Tensor& a, const Tensor& b) {
  return Elementwise(a, b, "div", [](double x, double y) { return x / y; });
}
Tensor EvalScale(const Tensor& a, double c) {
  return Unary(a, [c](double x) { return x * c; });
}
Tensor EvalMatMul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    Fail(ErrorKind::kShape,
         "matmul: " + ShapeString(a) + " times " + ShapeString(b));
  }
  Tensor out = a * b;
  return out;
}
Tensor EvalTranspose(const Tensor& a) { return a.transpose(); }
Tensor EvalTanh(const Tensor& a) {
  return Unary(a, [](double x) { return std::tanh(x); });
}
Tensor EvalRelu(const Tensor& a) {
  return Unary(a, [](double x) { return x > 0.0 ? x : 0.0; });
}
Tensor EvalSigmoid(const Tensor& a) { return Unary(a, SigmoidScalar); }
Tensor EvalSoftplus(const Tensor& a) { return Unary(a, SoftplusScalar); }
Tensor EvalLog(const Tensor& a) {
  return Unary(a, [](double x) { return std::log(x); });
}
Tensor EvalExp(const Tensor& a) {
  return Unary(a, [](double x) { return std::exp(x); });
}
Tensor EvalSquare(const Tensor& a) {
  return Unary(a, [](double x) { return x * x; });
}
Tensor EvalSin(const Tensor& a) {
  return Unary(a, [](double x) { return std::sin(x); });
}
Tensor EvalCos(const Tensor& a) {
  return Unary(a, [](double x) { return std::cos(x); });
}
Tensor EvalSum(const Tensor& a) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) s += a.data()[k];
  return Tensor::Constant(1, 1, s);
}
Tensor EvalMean(const Tensor& a) {
  if (a.size() == 0) Fail(ErrorKind::kShape, "mean of an empty tensor");
  Tensor s = EvalSum(a);
  s(0, 0) /= static_cast<double>(a.size());
  return s;
}
Tensor EvalRowSum(const Tensor& a) {
  Tensor out = Tensor::Zero(a.rows(), 1);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, 0) += a(i, j);
  }
  return out;
}
Tensor EvalConcatRows(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) Fail(ErrorKind::kShape, "concat of zero tensors");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front()->cols();
  for (const Tensor* p : parts) {
    if (p->cols() != cols) {
      Fail(ErrorKind::kShape, "concat: column mismatch " + ShapeString(*p));
    }
    rows += p->rows();
  }
  Tensor out(rows, cols);
  Eigen::Index offset = 0;
  for (const Tensor* p : parts) {
    out.middleRows(offset, p->rows()) = *p;
    offset += p->rows();
  }
  return out;
}
Tensor EvalSliceRows(const Tensor& a, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    Fail(ErrorKind::kShape, "slice rows [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ") of " +
                                ShapeString(a));
  }
  return a.middleRows(begin, count);
}
Tensor EvalClamp(const Tensor& a, const Tensor& lower, const Tensor& upper) {
  Tensor out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double x = a(i, j);
      out(i, j) = x < lower(i, 0) ? lower(i, 0)
                                  : (x > upper(i, 0) ? upper(i, 0) : x);
    }
  }
  return out;
}
// Inside-bounds indicator, boundary included.
Tensor ClampMask(const Tensor& a, const Tensor& lower, const Tensor& upper) {
  Tensor out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double x = a(i, j);
      out(i, j) = (x >= lower(i, 0) && x <= upper(i, 0)) ? 1.0 : 0.0;
    }
  }
  return out;
}
Tensor ReluMask(const Tensor& a) {
  return Unary(a, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

template <class NodeStore>
Tensor Evaluate(const Node& n, const NodeStore& nodes) {
  auto arg = [&](int k) -> const Tensor& { return nodes[n.args[k]].value; };
  switch (n.op) {
    case OpCode::kLeaf:
    case OpCode::kConstant: return n.value;
    case OpCode::kAdd: return EvalAdd(arg(0), arg(1));
    case OpCode::kSub: return EvalSub(arg(0), arg(1));
    case OpCode::kMul: return EvalMul(arg(0), arg(1));
    case OpCode::kDiv: return EvalDiv(arg(0), arg(1));
    case OpCode::kScale: return EvalScale(arg(0), n.param);
    case OpCode::kMatMul: return EvalMatMul(arg(0), arg(1));
    case OpCode::kTranspose: return EvalTranspose(arg(0));
    case OpCode::kTanh: return EvalTanh(arg(0));
    case OpCode::kRelu: return EvalRelu(arg(0));
    case OpCode::kSigmoid: return EvalSigmoid(arg(0));
    case OpCode::kSoftplus: return EvalSoftplus(arg(0));
    case OpCode::kLog: return EvalLog(arg(0));
    case OpCode::kExp: return EvalExp(arg(0));
    case OpCode::kSquare: return EvalSquare(arg(0));
    case OpCode::kSin: return EvalSin(arg(0));
    case OpCode::kCos: return EvalCos(arg(0));
    case OpCode::kSum: return EvalSum(arg(0));
    case OpCode::kMean: return EvalMean(arg(0));
    case OpCode::kRowSum: return EvalRowSum(arg(0));
    case OpCode::kConcatRows: {
      std::vector<const Tensor*> parts;
      parts.reserve(n.args.size());
      for (int a : n.args) parts.push_back(&nodes[a].value);
      return EvalConcatRows(parts);
    }
    case OpCode::kSliceRows: return EvalSliceRows(arg(0), n.begin, n.count);
    case OpCode::kClamp: return EvalClamp(arg(0), n.lower, n.upper);
  }
  Fail(ErrorKind::kInput, "unknown opcode");
}

Tape& CommonTape(std::initializer_list<const Var*> vars) {
  Tape* tape = nullptr;
  for (const Var* v : vars) {
    if (!v->valid()) Fail(ErrorKind::kUnknownNode, "operand is not recorded");
    if (tape == nullptr) tape = v->tape();
    if (v->tape() != tape || !tape->Contains(*v)) {
      Fail(ErrorKind::kUnknownNode, "operands recorded on different tapes");
    }
  }
  return *tape;
}

Var RecordUnary(OpCode op, const Var& a) {
  Tape& tape = CommonTape({&a});
  Node n;
  n.op = op;
  n.args = {a.id()};
  return tape.Record(std::move(n));
}

Var RecordBinary(OpCode op, const Var& a, const Var& b) {
  Tape& tape = CommonTape({&a, &b});
  Node n;
  n.op = op;
  n.args = {a.id(), b.id()};
  return tape.Record(std::move(n));
}

// ---------------------------------------------------------------------------
// Reverse sweep. The adjoint rules are written once against a backend so the
// numeric and the recorded sweeps execute identical arithmetic.

class EagerBackend {
 public:
  using Value = Tensor;

  explicit EagerBackend(const Tape& tape) : tape_(tape) {}

  const Tensor& Operand(int id) const { return tape_.node(id).value; }
  const Tensor& Self(int id) const { return tape_.node(id).value; }
  static const Tensor& ValueOf(const Tensor& v) { return v; }

  Tensor Constant(Tensor t) { return t; }
  Tensor Add(const Tensor& a, const Tensor& b) { return EvalAdd(a, b); }
  Tensor Sub(const Tensor& a, const Tensor& b) { return EvalSub(a, b); }
  Tensor Mul(const Tensor& a, const Tensor& b) { return EvalMul(a, b); }
  Tensor Div(const Tensor& a, const Tensor& b) { return EvalDiv(a, b); }
  Tensor Scale(const Tensor& a, double c) { return EvalScale(a, c); }
  Tensor MatMul(const Tensor& a, const Tensor& b) { return EvalMatMul(a, b); }
  Tensor Transpose(const Tensor& a) { return EvalTranspose(a); }
  Tensor Square(const Tensor& a) { return EvalSquare(a); }
  Tensor Sigmoid(const Tensor& a) { return EvalSigmoid(a); }
  Tensor Sin(const Tensor& a) { return EvalSin(a); }
  Tensor Cos(const Tensor& a) { return EvalCos(a); }
  Tensor Sum(const Tensor& a) { return EvalSum(a); }
  Tensor RowSum(const Tensor& a) { return EvalRowSum(a); }
  Tensor SliceRows(const Tensor& a, int begin, int count) {
    return EvalSliceRows(a, begin, count);
  }
  Tensor ConcatRows(const std::vector<Tensor>& parts) {
    std::vector<const Tensor*> ptrs;
    for (const Tensor& p : parts) ptrs.push_back(&p);
    return EvalConcatRows(ptrs);
  }

 private:
  const Tape& tape_;
};

class GraphBackend {
 public:
  using Value = Var;

  explicit GraphBackend(Tape& tape) : tape_(tape) {}

  Var Operand(int id) const { return Handle(id); }
  Var Self(int id) const { return Handle(id); }
  static const Tensor& ValueOf(const Var& v) { return v.value(); }

  Var Constant(Tensor t) { return tape_.Constant(std::move(t)); }
  Var Add(const Var& a, const Var& b) { return kpirl::Add(a, b); }
  Var Sub(const Var& a, const Var& b) { return kpirl::Sub(a, b); }
  Var Mul(const Var& a, const Var& b) { return kpirl::Mul(a, b); }
  Var Div(const Var& a, const Var& b) { return kpirl::Div(a, b); }
  Var Scale(const Var& a, double c) { return kpirl::Scale(a, c); }
  Var MatMul(const Var& a, const Var& b) { return kpirl::MatMul(a, b); }
  Var Transpose(const Var& a) { return kpirl::Transpose(a); }
  Var Square(const Var& a) { return kpirl::Square(a); }
  Var Sigmoid(const Var& a) { return kpirl::Sigmoid(a); }
  Var Sin(const Var& a) { return kpirl::Sin(a); }
  Var Cos(const Var& a) { return kpirl::Cos(a); }
  Var Sum(const Var& a) { return kpirl::Sum(a); }
  Var RowSum(const Var& a) { return kpirl::RowSum(a); }
  Var SliceRows(const Var& a, int begin, int count) {
    return kpirl::SliceRows(a, begin, count);
  }
  Var ConcatRows(const std::vector<Var>& parts) {
    return kpirl::ConcatRows(parts);
  }

 private:
  Var Handle(int id) const;

  Tape& tape_;
};

}  // namespace

const Tensor& Var::value() const {
  if (tape_ == nullptr) Fail(ErrorKind::kUnknownNode, "empty variable handle");
  return tape_->node(id_).value;
}

double Var::scalar() const {
  const Tensor& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    Fail(ErrorKind::kShape, "scalar() on " + ShapeString(v));
  }
  return v(0, 0);
}

class TapeAccess {
 public:
  static Var Make(Tape* tape, int id) { return Var(tape, id); }
};

namespace {

Var GraphBackend::Handle(int id) const { return TapeAccess::Make(&tape_, id); }

template <class Backend>
typename Backend::Value ReduceTo(Backend& be, const typename Backend::Value& g,
                                 const Tensor& target) {
  const Tensor& gv = Backend::ValueOf(g);
  if (gv.rows() == target.rows() && gv.cols() == target.cols()) return g;
  if (target.rows() == 1 && target.cols() == 1) return be.Sum(g);
  return be.RowSum(g);
}

template <class Backend>
struct Sweep {
  using Value = typename Backend::Value;

  Backend& be;
  const Tape& tape;
  const std::vector<char>& needs;
  std::vector<std::optional<Value>>& adjoint;

  void Accumulate(int id, Value contribution) {
    if (!needs[id]) return;
    if (adjoint[id].has_value()) {
      adjoint[id] = be.Add(*adjoint[id], contribution);
    } else {
      adjoint[id] = std::move(contribution);
    }
  }

  bool Needs(int id) const { return needs[id] != 0; }

  void Apply(int id, const Value& g) {
    const Node& n = tape.node(id);
    const std::vector<int>& args = n.args;
    switch (n.op) {
      case OpCode::kLeaf:
      case OpCode::kConstant:
        return;
      case OpCode::kAdd:
        if (Needs(args[0])) {
          Accumulate(args[0], ReduceTo(be, g, tape.node(args[0]).value));
        }
        if (Needs(args[1])) {
          Accumulate(args[1], ReduceTo(be, g, tape.node(args[1]).value));
        }
        return;
      case OpCode::kSub:
        if (Needs(args[0])) {
          Accumulate(args[0], ReduceTo(be, g, tape.node(args[0]).value));
        }
        if (Needs(args[1])) {
          Accumulate(args[1],
                     be.Scale(ReduceTo(be, g, tape.node(args[1]).value), -1.0));
        }
        return;
      case OpCode::kMul:
        if (Needs(args[0])) {
          Accumulate(args[0], ReduceTo(be, be.Mul(g, be.Operand(args[1])),
                                       tape.node(args[0]).value));
        }
        if (Needs(args[1])) {
          Accumulate(args[1], ReduceTo(be, be.Mul(g, be.Operand(args[0])),
                                       tape.node(args[1]).value));
        }
        return;
      case OpCode::kDiv: {
        Value g_over_b = be.Div(g, be.Operand(args[1]));
        if (Needs(args[1])) {
          // d(a/b)/db = -(a/b)/b
          Accumulate(args[1],
                     be.Scale(ReduceTo(be, be.Mul(g_over_b, be.Self(id)),
                                       tape.node(args[1]).value),
                              -1.0));
        }
        if (Needs(args[0])) {
          Accumulate(args[0], ReduceTo(be, g_over_b, tape.node(args[0]).value));
        }
        return;
      }
      case OpCode::kScale:
        Accumulate(args[0], be.Scale(g, n.param));
        return;
      case OpCode::kMatMul:
        if (Needs(args[0])) {
          Accumulate(args[0],
                     be.MatMul(g, be.Transpose(be.Operand(args[1]))));
        }
        if (Needs(args[1])) {
          Accumulate(args[1],
                     be.MatMul(be.Transpose(be.Operand(args[0])), g));
        }
        return;
      case OpCode::kTranspose:
        Accumulate(args[0], be.Transpose(g));
        return;
      case OpCode::kTanh: {
        Value one = be.Constant(Tensor::Ones(1, 1));
        Accumulate(args[0],
                   be.Mul(g, be.Sub(one, be.Square(be.Self(id)))));
        return;
      }
      case OpCode::kRelu:
        Accumulate(args[0],
                   be.Mul(g, be.Constant(ReluMask(tape.node(args[0]).value))));
        return;
      case OpCode::kSigmoid: {
        Value one = be.Constant(Tensor::Ones(1, 1));
        Value y = be.Self(id);
        Accumulate(args[0], be.Mul(g, be.Mul(y, be.Sub(one, y))));
        return;
      }
      case OpCode::kSoftplus:
        Accumulate(args[0], be.Mul(g, be.Sigmoid(be.Operand(args[0]))));
        return;
      case OpCode::kLog:
        Accumulate(args[0], be.Div(g, be.Operand(args[0])));
        return;
      case OpCode::kExp:
        Accumulate(args[0], be.Mul(g, be.Self(id)));
        return;
      case OpCode::kSquare:
        Accumulate(args[0], be.Mul(g, be.Scale(be.Operand(args[0]), 2.0)));
        return;
      case OpCode::kSin:
        Accumulate(args[0], be.Mul(g, be.Cos(be.Operand(args[0]))));
        return;
      case OpCode::kCos:
        Accumulate(args[0],
                   be.Mul(g, be.Scale(be.Sin(be.Operand(args[0])), -1.0)));
        return;
      case OpCode::kSum: {
        const Tensor& a = tape.node(args[0]).value;
        Accumulate(args[0],
                   be.Mul(be.Constant(Tensor::Ones(a.rows(), a.cols())), g));
        return;
      }
      case OpCode::kMean: {
        const Tensor& a = tape.node(args[0]).value;
        Accumulate(args[0],
                   be.Mul(be.Constant(Tensor::Ones(a.rows(), a.cols())),
                          be.Scale(g, 1.0 / static_cast<double>(a.size()))));
        return;
      }
      case OpCode::kRowSum: {
        const Tensor& a = tape.node(args[0]).value;
        Accumulate(args[0],
                   be.Mul(be.Constant(Tensor::Ones(a.rows(), a.cols())), g));
        return;
      }
      case OpCode::kConcatRows: {
        int offset = 0;
        for (int part : args) {
          const int rows = static_cast<int>(tape.node(part).value.rows());
          if (Needs(part)) Accumulate(part, be.SliceRows(g, offset, rows));
          offset += rows;
        }
        return;
      }
      case OpCode::kSliceRows: {
        const Tensor& a = tape.node(args[0]).value;
        const Eigen::Index cols = a.cols();
        std::vector<Value> parts;
        if (n.begin > 0) parts.push_back(be.Constant(Tensor::Zero(n.begin, cols)));
        parts.push_back(g);
        const Eigen::Index tail = a.rows() - n.begin - n.count;
        if (tail > 0) parts.push_back(be.Constant(Tensor::Zero(tail, cols)));
        Accumulate(args[0], parts.size() == 1 ? g : be.ConcatRows(parts));
        return;
      }
      case OpCode::kClamp:
        Accumulate(args[0],
                   be.Mul(g, be.Constant(ClampMask(tape.node(args[0]).value,
                                                   n.lower, n.upper))));
        return;
    }
  }
};

void ValidateSweep(const Var& output, std::span<const Var> inputs) {
  if (!output.valid() || !output.tape()->Contains(output)) {
    Fail(ErrorKind::kUnknownNode, "output is not on a tape");
  }
  const Tensor& v = output.value();
  if (v.rows() != 1 || v.cols() != 1) {
    Fail(ErrorKind::kShape, "gradient of non-scalar output " + ShapeString(v));
  }
  for (const Var& in : inputs) {
    if (!in.valid() || in.tape() != output.tape() ||
        !output.tape()->Contains(in)) {
      Fail(ErrorKind::kUnknownNode,
           "input node " + std::to_string(in.id()) + " is not on the tape");
    }
  }
}

// Marks nodes up to `last` that depend on any input and are ancestors of
// `last`.
std::vector<char> RelevantNodes(const Tape& tape, int last,
                                std::span<const Var> inputs) {
  std::vector<char> depends(last + 1, 0);
  for (const Var& in : inputs) {
    if (in.id() <= last) depends[in.id()] = 1;
  }
  for (int i = 0; i <= last; ++i) {
    if (depends[i]) continue;
    for (int a : tape.node(i).args) {
      if (depends[a]) {
        depends[i] = 1;
        break;
      }
    }
  }
  std::vector<char> relevant(last + 1, 0);
  if (depends[last]) relevant[last] = 1;
  for (int i = last; i >= 0; --i) {
    if (!relevant[i]) continue;
    for (int a : tape.node(i).args) {
      if (depends[a]) relevant[a] = 1;
    }
  }
  return relevant;
}

template <class Backend>
std::vector<std::optional<typename Backend::Value>> RunSweep(
    Backend& be, const Tape& tape, const Var& output,
    std::span<const Var> inputs, typename Backend::Value seed,
    SweepStats* stats) {
  const int last = output.id();
  std::vector<char> needs = RelevantNodes(tape, last, inputs);
  std::vector<std::optional<typename Backend::Value>> adjoint(last + 1);
  Sweep<Backend> sweep{be, tape, needs, adjoint};
  if (needs[last]) adjoint[last] = std::move(seed);
  int visited = 0;
  for (int i = last; i >= 0; --i) {
    if (!needs[i] || !adjoint[i].has_value()) continue;
    const OpCode op = tape.node(i).op;
    if (op == OpCode::kLeaf || op == OpCode::kConstant) continue;
    // Copy: Apply may overwrite adjoint entries of operands, never of i.
    const typename Backend::Value g = *adjoint[i];
    sweep.Apply(i, g);
    ++visited;
  }
  if (stats != nullptr) stats->visited = visited;
  return adjoint;
}

}  // namespace

const char* OpName(OpCode op) {
  switch (op) {
    case OpCode::kLeaf: return "leaf";
    case OpCode::kConstant: return "constant";
    case OpCode::kAdd: return "add";
    case OpCode::kSub: return "sub";
    case OpCode::kMul: return "mul";
    case OpCode::kDiv: return "div";
    case OpCode::kScale: return "scale";
    case OpCode::kMatMul: return "matmul";
    case OpCode::kTranspose: return "transpose";
    case OpCode::kTanh: return "tanh";
    case OpCode::kRelu: return "relu";
    case OpCode::kSigmoid: return "sigmoid";
    case OpCode::kSoftplus: return "softplus";
    case OpCode::kLog: return "log";
    case OpCode::kExp: return "exp";
    case OpCode::kSquare: return "square";
    case OpCode::kSin: return "sin";
    case OpCode::kCos: return "cos";
    case OpCode::kSum: return "sum";
    case OpCode::kMean: return "mean";
    case OpCode::kRowSum: return "rowsum";
    case OpCode::kConcatRows: return "concat";
    case OpCode::kSliceRows: return "slice";
    case OpCode::kClamp: return "clamp";
  }
  return "?";
}

Var Tape::Variable(Tensor value) {
  Node n;
  n.op = OpCode::kLeaf;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

Var Tape::Constant(Tensor value) {
  Node n;
  n.op = OpCode::kConstant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

Var Tape::Constant(double value) { return Constant(Tensor::Constant(1, 1, value)); }

Var Tape::Record(Node node) {
  for (int a : node.args) {
    if (a < 0 || a >= size()) {
      Fail(ErrorKind::kUnknownNode, "operand " + std::to_string(a));
    }
  }
  node.value = Evaluate(node, nodes_);
  nodes_.push_back(std::move(node));
  return Var(this, size() - 1);
}

bool Tape::ReplayMatches() const {
  for (const Node& n : nodes_) {
    if (n.op == OpCode::kLeaf || n.op == OpCode::kConstant) continue;
    const Tensor replay = Evaluate(n, nodes_);
    if (replay.rows() != n.value.rows() || replay.cols() != n.value.cols()) {
      return false;
    }
    for (Eigen::Index k = 0; k < replay.size(); ++k) {
      const double x = replay.data()[k];
      const double y = n.value.data()[k];
      // bitwise, NaN-aware
      if (std::memcmp(&x, &y, sizeof(double)) != 0) return false;
    }
  }
  return true;
}

Var Add(const Var& a, const Var& b) { return RecordBinary(OpCode::kAdd, a, b); }
Var Sub(const Var& a, const Var& b) { return RecordBinary(OpCode::kSub, a, b); }
Var Mul(const Var& a, const Var& b) { return RecordBinary(OpCode::kMul, a, b); }
Var Div(const Var& a, const Var& b) { return RecordBinary(OpCode::kDiv, a, b); }
Var MatMul(const Var& a, const Var& b) {
  return RecordBinary(OpCode::kMatMul, a, b);
}
Var Scale(const Var& a, double factor) {
  Tape& tape = CommonTape({&a});
  Node n;
  n.op = OpCode::kScale;
  n.args = {a.id()};
  n.param = factor;
  return tape.Record(std::move(n));
}
Var Transpose(const Var& a) { return RecordUnary(OpCode::kTranspose, a); }
Var Tanh(const Var& a) { return RecordUnary(OpCode::kTanh, a); }
Var Relu(const Var& a) { return RecordUnary(OpCode::kRelu, a); }
Var Sigmoid(const Var& a) { return RecordUnary(OpCode::kSigmoid, a); }
Var Softplus(const Var& a) { return RecordUnary(OpCode::kSoftplus, a); }
Var Log(const Var& a) { return RecordUnary(OpCode::kLog, a); }
Var Exp(const Var& a) { return RecordUnary(OpCode::kExp, a); }
Var Square(const Var& a) { return RecordUnary(OpCode::kSquare, a); }
Var Sin(const Var& a) { return RecordUnary(OpCode::kSin, a); }
Var Cos(const Var& a) { return RecordUnary(OpCode::kCos, a); }
Var Sum(const Var& a) { return RecordUnary(OpCode::kSum, a); }
Var Mean(const Var& a) { return RecordUnary(OpCode::kMean, a); }
Var RowSum(const Var& a) { return RecordUnary(OpCode::kRowSum, a); }

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) Fail(ErrorKind::kShape, "concat of zero tensors");
  Tape* tape = parts.front().tape();
  Node n;
  n.op = OpCode::kConcatRows;
  for (const Var& p : parts) {
    if (!p.valid() || p.tape() != tape || !tape->Contains(p)) {
      Fail(ErrorKind::kUnknownNode, "concat operands on different tapes");
    }
    n.args.push_back(p.id());
  }
  return tape->Record(std::move(n));
}

Var SliceRows(const Var& a, int begin, int count) {
  Tape& tape = CommonTape({&a});
  Node n;
  n.op = OpCode::kSliceRows;
  n.args = {a.id()};
  n.begin = begin;
  n.count = count;
  return tape.Record(std::move(n));
}

Var Clamp(const Var& a, double lower, double upper) {
  const Eigen::Index rows = a.value().rows();
  return Clamp(a, Tensor::Constant(rows, 1, lower),
               Tensor::Constant(rows, 1, upper));
}

Var Clamp(const Var& a, const Tensor& lower, const Tensor& upper) {
  Tape& tape = CommonTape({&a});
  if (lower.rows() != a.rows() || upper.rows() != a.rows() ||
      lower.cols() != 1 || upper.cols() != 1) {
    Fail(ErrorKind::kShape, "clamp bounds must be " +
                                std::to_string(a.rows()) + "x1");
  }
  Node n;
  n.op = OpCode::kClamp;
  n.args = {a.id()};
  n.lower = lower;
  n.upper = upper;
  return tape.Record(std::move(n));
}

std::vector<Tensor> Grad(const Var& output, std::span<const Var> inputs,
                         SweepStats* stats) {
  ValidateSweep(output, inputs);
  const Tape& tape = *output.tape();
  EagerBackend be(tape);
  auto adjoint =
      RunSweep(be, tape, output, inputs, Tensor::Ones(1, 1), stats);
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.id() <= output.id() && adjoint[in.id()].has_value()) {
      out.push_back(*adjoint[in.id()]);
    } else {
      out.push_back(Tensor::Zero(in.rows(), in.cols()));
    }
  }
  return out;
}

std::vector<Var> GradAsGraph(const Var& output, std::span<const Var> inputs,
                             SweepStats* stats) {
  ValidateSweep(output, inputs);
  Tape& tape = *output.tape();
  GraphBackend be(tape);
  auto adjoint = RunSweep(be, tape, output, inputs,
                          tape.Constant(Tensor::Ones(1, 1)), stats);
  std::vector<Var> out;
  out.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.id() <= output.id() && adjoint[in.id()].has_value()) {
      out.push_back(*adjoint[in.id()]);
    } else {
      out.push_back(tape.Constant(Tensor::Zero(in.rows(), in.cols())));
    }
  }
  return out;
}

}  // namespace kpirl
