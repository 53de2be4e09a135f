#pragma once
// Reverse-mode automatic differentiation over dense double-precision tensors
// (rank <= 2). Gradients are recorded as ordinary tape operations, so calling
// backward on a gradient yields exact second-order derivatives — the property
// the unrolled meta-updates rely on.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metaloss::ad {

struct Shape {
  int rows = 1;
  int cols = 1;
  bool operator==(const Shape&) const = default;
  int count() const { return rows * cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
};

// Row-major dense matrix; scalars are 1x1, column vectors are n x 1.
struct Tensor {
  int rows = 1;
  int cols = 1;
  std::vector<double> v;

  Tensor() : v(1, 0.0) {}
  Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), v(size_t(r) * c, fill) {
    if (r <= 0 || c <= 0) throw std::invalid_argument("Tensor: non-positive dims");
  }
  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
  static Tensor column(const std::vector<double>& xs) {
    Tensor t(int(xs.size()), 1);
    t.v = xs;
    return t;
  }
  static Tensor row(const std::vector<double>& xs) {
    Tensor t(1, int(xs.size()));
    t.v = xs;
    return t;
  }
  Shape shape() const { return {rows, cols}; }
  int count() const { return rows * cols; }
  double& at(int r, int c) { return v[size_t(r) * cols + c]; }
  double at(int r, int c) const { return v[size_t(r) * cols + c]; }
  double scalar_value() const {
    if (rows != 1 || cols != 1) throw std::logic_error("Tensor: not a scalar");
    return v[0];
  }
  bool all_finite() const;
};

enum class Op : std::uint8_t {
  Input, Const,
  // elementwise binary (broadcasting)
  Add, Sub, Mul, Div, Aq, Min, Max,
  // elementwise unary
  Neg, Square, Abs, PLog, PSqrt, Tanh, Sign, Exp, Softplus, Sigmoid,
  Relu, LeakyRelu, SmoothLeakyRelu, PowConst,
  // comparisons (zero-derivative masks)
  CmpLe, CmpGe, CmpGt0,
  // structural / reductions / contractions
  LogSumExp, LogSoftmax, RowSum, ColSum, Sum, Mean,
  Matmul, Transpose, Reshape, Select,
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int idx = -1;
  bool valid() const { return tape != nullptr && idx >= 0; }
  const Tensor& value() const;
  Shape shape() const;
};

struct Node {
  Op op = Op::Const;
  int a = -1, b = -1, c = -1;   // parent node indices
  double attr0 = 0.0, attr1 = 0.0;
  Tensor val;
};

// Append-only record of primitive applications. Topologically ordered by
// construction; replayable bit-for-bit. One tape per worker — not thread-safe.
class Tape {
 public:
  Var input(Tensor t);            // differentiable leaf
  Var constant(Tensor t);         // non-differentiable leaf
  Var scalar(double x) { return constant(Tensor::scalar(x)); }

  size_t size() const { return nodes_.size(); }
  const Node& node(int i) const { return nodes_[size_t(i)]; }

  // d(output)/d(wrt) for a scalar output. The gradient computation is itself
  // recorded on the tape; `create_graph` is accepted for call-site clarity but
  // both settings build the graph (a second backward is always possible).
  std::vector<Var> backward(Var output, const std::vector<Var>& wrt, bool create_graph = false);

  int push(Node n);

 private:
  std::vector<Node> nodes_;
};

// --- primitive builders ---------------------------------------------------
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);                 // true division; callers guarantee b != 0
Var aq(Var a, Var b);                  // analytical quotient x1 / sqrt(1 + x2^2)
Var vmin(Var a, Var b);                // ties route gradient to the first argument
Var vmax(Var a, Var b);
Var neg(Var a);
Var square(Var a);
Var vabs(Var a);                       // d|x|/dx at 0 defined as 0
Var plog(Var a);                       // protected log: log(|x| + 1e-7)
Var psqrt(Var a);                      // protected sqrt: sqrt(|x| + 1e-7)
Var vtanh(Var a);
Var vsign(Var a);                      // derivative 0 everywhere
Var vexp(Var a);
Var softplus(Var a);                   // numerically stable log(1 + e^x)
Var sigmoid(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.01);
Var slrelu(Var a, double gamma = 0.01, double beta = 10.0);  // smooth leaky ReLU
Var powc(Var a, double p);             // x^p for x > 0 (internal helper)
Var logsumexp(Var a);                  // reduces the column dimension: (n,c) -> (n,1)
Var log_softmax(Var a);                // row-wise x - logsumexp(x)
Var row_sum(Var a);                    // (n,c) -> (n,1)
Var col_sum(Var a);                    // (n,c) -> (1,c)
Var sum(Var a);                        // full reduction -> scalar
Var mean(Var a);                       // full reduction -> scalar
Var matmul(Var a, Var b);              // (n,k) x (k,m) -> (n,m)
Var transpose(Var a);
Var reshape(Var a, int rows, int cols);
Var select(Var c, Var a, Var b);       // elementwise: c > 0 ? a : b; no gradient to c

constexpr double kProtectEps = 1e-7;

// Narrow spec-facing entry point: applies one of the named public primitives.
// Throws std::invalid_argument on an unknown id or wrong input arity.
Var record_primitive(std::string_view op_id, const std::vector<Var>& inputs);

// Central-difference gradient check. `f` must deterministically build a scalar
// from a single vector input (passed as an n x 1 Var). Returns
// max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
// Throws std::runtime_error if f produces a non-finite value.
double finite_diff_check(const std::function<Var(Tape&, Var)>& f,
                         const std::vector<double>& x, double h = 1e-6);

}  // namespace metaloss::ad
