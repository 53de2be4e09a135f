#include "metaloss/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace metaloss::ad {

bool Tensor::all_finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

const Tensor& Var::value() const { return tape->node(idx).val; }
Shape Var::shape() const { return value().shape(); }

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return int(nodes_.size()) - 1;
}

Var Tape::input(Tensor t) {
  Node n;
  n.op = Op::Input;
  n.val = std::move(t);
  return {this, push(std::move(n))};
}

Var Tape::constant(Tensor t) {
  Node n;
  n.op = Op::Const;
  n.val = std::move(t);
  return {this, push(std::move(n))};
}

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("autodiff: vars live on different tapes");
}

Shape broadcast_shape(Shape a, Shape b) {
  auto dim = [](int x, int y, const char* which) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw std::invalid_argument(std::string("autodiff: shape mismatch in ") + which);
  };
  return {dim(a.rows, b.rows, "rows"), dim(a.cols, b.cols, "cols")};
}

// Reads with stride-0 semantics for broadcast dimensions.
inline double bget(const Tensor& t, int r, int c) {
  return t.v[size_t(t.rows == 1 ? 0 : r) * t.cols + (t.cols == 1 ? 0 : c)];
}

template <class F>
Tensor ew_binary(const Tensor& a, const Tensor& b, F f) {
  Shape s = broadcast_shape(a.shape(), b.shape());
  Tensor out(s.rows, s.cols);
  for (int r = 0; r < s.rows; ++r)
    for (int c = 0; c < s.cols; ++c) out.at(r, c) = f(bget(a, r, c), bget(b, r, c));
  return out;
}

template <class F>
Tensor ew_unary(const Tensor& a, F f) {
  Tensor out(a.rows, a.cols);
  for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = f(a.v[i]);
  return out;
}

double stable_softplus(double x) {
  // log(1 + e^x) without overflow: max(x,0) + log1p(exp(-|x|))
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double sign_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

Var binary(Op op, Var a, Var b, double attr0 = 0.0) {
  require_same_tape(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  Tensor out;
  switch (op) {
    case Op::Add: out = ew_binary(ta, tb, [](double x, double y) { return x + y; }); break;
    case Op::Sub: out = ew_binary(ta, tb, [](double x, double y) { return x - y; }); break;
    case Op::Mul: out = ew_binary(ta, tb, [](double x, double y) { return x * y; }); break;
    case Op::Div: out = ew_binary(ta, tb, [](double x, double y) { return x / y; }); break;
    case Op::Aq:
      out = ew_binary(ta, tb, [](double x, double y) { return x / std::sqrt(1.0 + y * y); });
      break;
    case Op::Min: out = ew_binary(ta, tb, [](double x, double y) { return x <= y ? x : y; }); break;
    case Op::Max: out = ew_binary(ta, tb, [](double x, double y) { return x >= y ? x : y; }); break;
    case Op::CmpLe: out = ew_binary(ta, tb, [](double x, double y) { return x <= y ? 1.0 : 0.0; }); break;
    case Op::CmpGe: out = ew_binary(ta, tb, [](double x, double y) { return x >= y ? 1.0 : 0.0; }); break;
    default: throw std::logic_error("binary: bad op");
  }
  Node n;
  n.op = op;
  n.a = a.idx;
  n.b = b.idx;
  n.attr0 = attr0;
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var unary(Op op, Var a, double attr0 = 0.0, double attr1 = 0.0) {
  const Tensor& ta = a.value();
  Tensor out;
  switch (op) {
    case Op::Neg: out = ew_unary(ta, [](double x) { return -x; }); break;
    case Op::Square: out = ew_unary(ta, [](double x) { return x * x; }); break;
    case Op::Abs: out = ew_unary(ta, [](double x) { return std::fabs(x); }); break;
    case Op::PLog:
      out = ew_unary(ta, [](double x) { return std::log(std::fabs(x) + kProtectEps); });
      break;
    case Op::PSqrt:
      out = ew_unary(ta, [](double x) { return std::sqrt(std::fabs(x) + kProtectEps); });
      break;
    case Op::Tanh: out = ew_unary(ta, [](double x) { return std::tanh(x); }); break;
    case Op::Sign: out = ew_unary(ta, sign_of); break;
    case Op::Exp: out = ew_unary(ta, [](double x) { return std::exp(x); }); break;
    case Op::Softplus: out = ew_unary(ta, stable_softplus); break;
    case Op::Sigmoid: out = ew_unary(ta, stable_sigmoid); break;
    case Op::Relu: out = ew_unary(ta, [](double x) { return x > 0 ? x : 0.0; }); break;
    case Op::LeakyRelu:
      out = ew_unary(ta, [attr0](double x) { return x > 0 ? x : attr0 * x; });
      break;
    case Op::SmoothLeakyRelu:
      // (1/beta) * log(e^{beta x} + 1) * (1 - gamma) + gamma * x
      out = ew_unary(ta, [attr0, attr1](double x) {
        return (1.0 - attr0) / attr1 * stable_softplus(attr1 * x) + attr0 * x;
      });
      break;
    case Op::PowConst: out = ew_unary(ta, [attr0](double x) { return std::pow(x, attr0); }); break;
    case Op::CmpGt0: out = ew_unary(ta, [](double x) { return x > 0 ? 1.0 : 0.0; }); break;
    default: throw std::logic_error("unary: bad op");
  }
  Node n;
  n.op = op;
  n.a = a.idx;
  n.attr0 = attr0;
  n.attr1 = attr1;
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var cmp_le(Var a, Var b) { return binary(Op::CmpLe, a, b); }
Var cmp_ge(Var a, Var b) { return binary(Op::CmpGe, a, b); }
Var cmp_gt0(Var a) { return unary(Op::CmpGt0, a); }

Var ones_like_const(Tape& t, Shape s) { return t.constant(Tensor(s.rows, s.cols, 1.0)); }

// Sum-reduce g down to shape s (undoes forward broadcasting).
Var reduce_to_shape(Var g, Shape s) {
  Shape gs = g.shape();
  if (gs == s) return g;
  if (s.is_scalar()) return sum(g);
  if (s.rows == gs.rows && s.cols == 1) return row_sum(g);
  if (s.rows == 1 && s.cols == gs.cols) return col_sum(g);
  throw std::logic_error("autodiff: cannot reduce gradient to operand shape");
}

}  // namespace

Var add(Var a, Var b) { return binary(Op::Add, a, b); }
Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }
Var div(Var a, Var b) { return binary(Op::Div, a, b); }
Var aq(Var a, Var b) { return binary(Op::Aq, a, b); }
Var vmin(Var a, Var b) { return binary(Op::Min, a, b); }
Var vmax(Var a, Var b) { return binary(Op::Max, a, b); }
Var neg(Var a) { return unary(Op::Neg, a); }
Var square(Var a) { return unary(Op::Square, a); }
Var vabs(Var a) { return unary(Op::Abs, a); }
Var plog(Var a) { return unary(Op::PLog, a); }
Var psqrt(Var a) { return unary(Op::PSqrt, a); }
Var vtanh(Var a) { return unary(Op::Tanh, a); }
Var vsign(Var a) { return unary(Op::Sign, a); }
Var vexp(Var a) { return unary(Op::Exp, a); }
Var softplus(Var a) { return unary(Op::Softplus, a); }
Var sigmoid(Var a) { return unary(Op::Sigmoid, a); }
Var relu(Var a) { return unary(Op::Relu, a); }
Var leaky_relu(Var a, double slope) { return unary(Op::LeakyRelu, a, slope); }
Var slrelu(Var a, double gamma, double beta) {
  if (beta <= 0) throw std::invalid_argument("slrelu: beta must be positive");
  return unary(Op::SmoothLeakyRelu, a, gamma, beta);
}
Var powc(Var a, double p) { return unary(Op::PowConst, a, p); }

Var logsumexp(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.rows, 1);
  for (int r = 0; r < ta.rows; ++r) {
    double m = ta.at(r, 0);
    for (int c = 1; c < ta.cols; ++c) m = std::max(m, ta.at(r, c));
    double s = 0.0;
    for (int c = 0; c < ta.cols; ++c) s += std::exp(ta.at(r, c) - m);
    out.at(r, 0) = m + std::log(s);
  }
  Node n;
  n.op = Op::LogSumExp;
  n.a = a.idx;
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var log_softmax(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.rows, ta.cols);
  for (int r = 0; r < ta.rows; ++r) {
    double m = ta.at(r, 0);
    for (int c = 1; c < ta.cols; ++c) m = std::max(m, ta.at(r, c));
    double s = 0.0;
    for (int c = 0; c < ta.cols; ++c) s += std::exp(ta.at(r, c) - m);
    double lse = m + std::log(s);
    for (int c = 0; c < ta.cols; ++c) out.at(r, c) = ta.at(r, c) - lse;
  }
  Node n;
  n.op = Op::LogSoftmax;
  n.a = a.idx;
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var row_sum(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.rows, 1);
  for (int r = 0; r < ta.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < ta.cols; ++c) s += ta.at(r, c);
    out.at(r, 0) = s;
  }
  Node n;
  n.op = Op::RowSum;
  n.a = a.idx;
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var col_sum(Var a) {
  const Tensor& ta = a.value();
  Tensor out(1, ta.cols);
  for (int c = 0; c < ta.cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < ta.rows; ++r) s += ta.at(r, c);
    out.at(0, c) = s;
  }
  Node n;
  n.op = Op::ColSum;
  n.a = a.idx;
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var sum(Var a) {
  const Tensor& ta = a.value();
  double s = 0.0;
  for (double x : ta.v) s += x;
  Node n;
  n.op = Op::Sum;
  n.a = a.idx;
  n.val = Tensor::scalar(s);
  return {a.tape, a.tape->push(std::move(n))};
}

Var mean(Var a) {
  const Tensor& ta = a.value();
  double s = 0.0;
  for (double x : ta.v) s += x;
  Node n;
  n.op = Op::Mean;
  n.a = a.idx;
  n.val = Tensor::scalar(s / double(ta.count()));
  return {a.tape, a.tape->push(std::move(n))};
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.cols != tb.rows) throw std::invalid_argument("matmul: inner dimensions differ");
  Tensor out(ta.rows, tb.cols);
  for (int r = 0; r < ta.rows; ++r)
    for (int k = 0; k < ta.cols; ++k) {
      double av = ta.at(r, k);
      if (av == 0.0) continue;
      for (int c = 0; c < tb.cols; ++c) out.at(r, c) += av * tb.at(k, c);
    }
  Node n;
  n.op = Op::Matmul;
  n.a = a.idx;
  n.b = b.idx;
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var transpose(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.cols, ta.rows);
  for (int r = 0; r < ta.rows; ++r)
    for (int c = 0; c < ta.cols; ++c) out.at(c, r) = ta.at(r, c);
  Node n;
  n.op = Op::Transpose;
  n.a = a.idx;
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var reshape(Var a, int rows, int cols) {
  const Tensor& ta = a.value();
  if (rows * cols != ta.count()) throw std::invalid_argument("reshape: element count differs");
  Tensor out(rows, cols);
  out.v = ta.v;
  Node n;
  n.op = Op::Reshape;
  n.a = a.idx;
  n.attr0 = ta.rows;  // original shape, for the backward reshape
  n.attr1 = ta.cols;
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var select(Var c, Var a, Var b) {
  require_same_tape(c, a);
  require_same_tape(a, b);
  const Tensor& tc = c.value();
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  Shape s = broadcast_shape(broadcast_shape(tc.shape(), ta.shape()), tb.shape());
  Tensor out(s.rows, s.cols);
  for (int r = 0; r < s.rows; ++r)
    for (int cc = 0; cc < s.cols; ++cc)
      out.at(r, cc) = bget(tc, r, cc) > 0 ? bget(ta, r, cc) : bget(tb, r, cc);
  Node n;
  n.op = Op::Select;
  n.a = c.idx;
  n.b = a.idx;
  n.c = b.idx;
  n.val = std::move(out);
  return {c.tape, c.tape->push(std::move(n))};
}

// --- backward ---------------------------------------------------------------

std::vector<Var> Tape::backward(Var output, const std::vector<Var>& wrt, bool create_graph) {
  (void)create_graph;  // the graph is always recorded; see header
  if (output.tape != this) throw std::invalid_argument("backward: output not on this tape");
  if (!output.shape().is_scalar()) throw std::invalid_argument("backward: output is not scalar");
  for (const Var& w : wrt)
    if (w.tape != this) throw std::invalid_argument("backward: wrt var not on this tape");

  const int out_idx = output.idx;
  std::vector<int> adj(size_t(out_idx) + 1, -1);
  adj[size_t(out_idx)] = constant(Tensor::scalar(1.0)).idx;

  auto acc = [&](int parent, Var contrib) {
    contrib = reduce_to_shape(contrib, Var{this, parent}.shape());
    int& slot = adj[size_t(parent)];
    slot = slot < 0 ? contrib.idx : add(Var{this, slot}, contrib).idx;
  };

  for (int i = out_idx; i >= 0; --i) {
    if (adj[size_t(i)] < 0) continue;
    // Copy indices: nodes_ may reallocate while pushing gradient ops.
    const Op op = nodes_[size_t(i)].op;
    const int pa = nodes_[size_t(i)].a, pb = nodes_[size_t(i)].b, pc = nodes_[size_t(i)].c;
    const double at0 = nodes_[size_t(i)].attr0, at1 = nodes_[size_t(i)].attr1;
    Var g{this, adj[size_t(i)]};
    Var o{this, i};
    Var a{this, pa}, b{this, pb};
    switch (op) {
      case Op::Input:
      case Op::Const:
        break;
      case Op::Add:
        acc(pa, g);
        acc(pb, g);
        break;
      case Op::Sub:
        acc(pa, g);
        acc(pb, neg(g));
        break;
      case Op::Mul:
        acc(pa, mul(g, b));
        acc(pb, mul(g, a));
        break;
      case Op::Div:
        acc(pa, div(g, b));
        acc(pb, neg(div(mul(g, o), b)));
        break;
      case Op::Aq: {
        // d/da = t^{-1/2}, d/db = -a b t^{-3/2}, t = 1 + b^2
        Var t = add(scalar(1.0), square(b));
        Var r = powc(t, -0.5);
        acc(pa, mul(g, r));
        acc(pb, neg(mul(mul(g, mul(a, b)), mul(r, mul(r, r)))));
        break;
      }
      case Op::Min: {
        Var m = cmp_le(a, b);  // first argument wins ties
        acc(pa, mul(g, m));
        acc(pb, mul(g, sub(scalar(1.0), m)));
        break;
      }
      case Op::Max: {
        Var m = cmp_ge(a, b);
        acc(pa, mul(g, m));
        acc(pb, mul(g, sub(scalar(1.0), m)));
        break;
      }
      case Op::Neg:
        acc(pa, neg(g));
        break;
      case Op::Square:
        acc(pa, mul(g, mul(scalar(2.0), a)));
        break;
      case Op::Abs:
        acc(pa, mul(g, vsign(a)));
        break;
      case Op::PLog:
        acc(pa, mul(g, div(vsign(a), add(vabs(a), scalar(kProtectEps)))));
        break;
      case Op::PSqrt:
        acc(pa, mul(g, div(vsign(a), mul(scalar(2.0), o))));
        break;
      case Op::Tanh:
        acc(pa, mul(g, sub(scalar(1.0), square(o))));
        break;
      case Op::Sign:
      case Op::CmpLe:
      case Op::CmpGe:
      case Op::CmpGt0:
        break;  // derivative 0 everywhere
      case Op::Exp:
        acc(pa, mul(g, o));
        break;
      case Op::Softplus:
        acc(pa, mul(g, sigmoid(a)));
        break;
      case Op::Sigmoid:
        acc(pa, mul(g, mul(o, sub(scalar(1.0), o))));
        break;
      case Op::Relu:
        acc(pa, mul(g, cmp_gt0(a)));
        break;
      case Op::LeakyRelu: {
        Var m = cmp_gt0(a);
        acc(pa, mul(g, add(scalar(at0), mul(scalar(1.0 - at0), m))));
        break;
      }
      case Op::SmoothLeakyRelu: {
        // derivative (e^{bx} + g0) / (e^{bx} + 1) = (1 - g0) * sigmoid(b x) + g0
        Var s = sigmoid(mul(scalar(at1), a));
        acc(pa, mul(g, add(scalar(at0), mul(scalar(1.0 - at0), s))));
        break;
      }
      case Op::PowConst:
        acc(pa, mul(g, mul(scalar(at0), powc(a, at0 - 1.0))));
        break;
      case Op::LogSumExp:
        acc(pa, mul(g, vexp(sub(a, o))));
        break;
      case Op::LogSoftmax:
        acc(pa, sub(g, mul(vexp(o), row_sum(g))));
        break;
      case Op::RowSum:
        acc(pa, mul(g, ones_like_const(*this, a.shape())));
        break;
      case Op::ColSum:
        acc(pa, mul(g, ones_like_const(*this, a.shape())));
        break;
      case Op::Sum:
        acc(pa, mul(g, ones_like_const(*this, a.shape())));
        break;
      case Op::Mean:
        acc(pa, mul(mul(g, scalar(1.0 / double(a.shape().count()))),
                    ones_like_const(*this, a.shape())));
        break;
      case Op::Matmul:
        acc(pa, matmul(g, transpose(b)));
        acc(pb, matmul(transpose(a), g));
        break;
      case Op::Transpose:
        acc(pa, transpose(g));
        break;
      case Op::Reshape:
        acc(pa, reshape(g, int(at0), int(at1)));
        break;
      case Op::Select: {
        Var cnd{this, pa};
        Var x{this, pb}, y{this, pc};
        Var m = cmp_gt0(cnd);
        acc(pb, mul(g, m));
        acc(pc, mul(g, sub(scalar(1.0), m)));
        (void)x;
        (void)y;
        break;
      }
      default:
        throw std::logic_error("backward: unhandled op");
    }
  }

  std::vector<Var> grads;
  grads.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.idx <= out_idx && adj[size_t(w.idx)] >= 0) {
      grads.push_back(Var{this, adj[size_t(w.idx)]});
    } else {
      Shape s = w.shape();
      grads.push_back(constant(Tensor(s.rows, s.cols, 0.0)));
    }
  }
  return grads;
}

// --- record_primitive --------------------------------------------------------

Var record_primitive(std::string_view op_id, const std::vector<Var>& inputs) {
  auto need = [&](size_t n) {
    if (inputs.size() != n)
      throw std::invalid_argument("record_primitive: wrong input count for '" +
                                  std::string(op_id) + "'");
  };
  if (!inputs.empty()) {
    for (size_t i = 1; i < inputs.size(); ++i) require_same_tape(inputs[0], inputs[i]);
  }
  if (op_id == "add") { need(2); return add(inputs[0], inputs[1]); }
  if (op_id == "sub") { need(2); return sub(inputs[0], inputs[1]); }
  if (op_id == "mul") { need(2); return mul(inputs[0], inputs[1]); }
  if (op_id == "analytical-quotient") { need(2); return aq(inputs[0], inputs[1]); }
  if (op_id == "min") { need(2); return vmin(inputs[0], inputs[1]); }
  if (op_id == "max") { need(2); return vmax(inputs[0], inputs[1]); }
  if (op_id == "neg") { need(1); return neg(inputs[0]); }
  if (op_id == "square") { need(1); return square(inputs[0]); }
  if (op_id == "abs") { need(1); return vabs(inputs[0]); }
  if (op_id == "protected-log") { need(1); return plog(inputs[0]); }
  if (op_id == "protected-sqrt") { need(1); return psqrt(inputs[0]); }
  if (op_id == "tanh") { need(1); return vtanh(inputs[0]); }
  if (op_id == "sign") { need(1); return vsign(inputs[0]); }
  if (op_id == "exp") { need(1); return vexp(inputs[0]); }
  if (op_id == "softplus") { need(1); return softplus(inputs[0]); }
  if (op_id == "log-sum-exp") { need(1); return logsumexp(inputs[0]); }
  if (op_id == "matmul") { need(2); return matmul(inputs[0], inputs[1]); }
  if (op_id == "sum") { need(1); return sum(inputs[0]); }
  if (op_id == "mean") { need(1); return mean(inputs[0]); }
  if (op_id == "relu") { need(1); return relu(inputs[0]); }
  if (op_id == "leaky-relu") { need(1); return leaky_relu(inputs[0]); }
  if (op_id == "smooth-leaky-relu") { need(1); return slrelu(inputs[0]); }
  if (op_id == "softmax-log-prob") { need(1); return log_softmax(inputs[0]); }
  if (op_id == "elementwise-select") { need(3); return select(inputs[0], inputs[1], inputs[2]); }
  throw std::invalid_argument("record_primitive: unknown primitive id '" + std::string(op_id) + "'");
}

// --- finite differences ------------------------------------------------------

double finite_diff_check(const std::function<Var(Tape&, Var)>& f,
                         const std::vector<double>& x, double h) {
  if (h <= 0) throw std::invalid_argument("finite_diff_check: h must be positive");

  auto eval = [&](const std::vector<double>& xs) {
    Tape tape;
    Var in = tape.input(Tensor::column(xs));
    Var out = f(tape, in);
    if (!out.shape().is_scalar()) throw std::invalid_argument("finite_diff_check: f is not scalar");
    double v = out.value().scalar_value();
    if (!std::isfinite(v)) throw std::runtime_error("finite_diff_check: f returned non-finite value");
    return v;
  };

  // analytic gradient
  Tape tape;
  Var in = tape.input(Tensor::column(x));
  Var out = f(tape, in);
  if (!out.shape().is_scalar()) throw std::invalid_argument("finite_diff_check: f is not scalar");
  if (!std::isfinite(out.value().scalar_value()))
    throw std::runtime_error("finite_diff_check: f returned non-finite value");
  std::vector<Var> grad = tape.backward(out, {in});
  const Tensor& ga = grad[0].value();

  double worst = 0.0;
  std::vector<double> xs = x;
  for (size_t i = 0; i < x.size(); ++i) {
    double x0 = xs[i];
    xs[i] = x0 + h;
    double fp = eval(xs);
    xs[i] = x0 - h;
    double fm = eval(xs);
    xs[i] = x0;
    double numeric = (fp - fm) / (2.0 * h);
    double analytic = ga.v[i];
    double err = std::fabs(analytic - numeric) / std::max(1.0, std::fabs(analytic));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace metaloss::ad
