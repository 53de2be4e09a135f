#include "metaloss/symbolic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace metaloss::sym {

namespace {
constexpr OpCode kBinaryOps[] = {OpCode::Add, OpCode::Sub, OpCode::Mul,
                                 OpCode::Aq,  OpCode::Min, OpCode::Max};
constexpr OpCode kUnaryOps[] = {OpCode::Sign, OpCode::Square, OpCode::Abs,
                                OpCode::Log,  OpCode::Sqrt,   OpCode::Tanh};
constexpr OpCode kFunctionOps[] = {OpCode::Add,  OpCode::Sub,    OpCode::Mul, OpCode::Aq,
                                   OpCode::Min,  OpCode::Max,    OpCode::Sign,
                                   OpCode::Square, OpCode::Abs,  OpCode::Log,
                                   OpCode::Sqrt, OpCode::Tanh};
constexpr OpCode kTerminals[] = {OpCode::Y, OpCode::F, OpCode::One, OpCode::NegOne};
constexpr double kEps = 1e-7;

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}
}  // namespace

int arity(OpCode op) {
  switch (op) {
    case OpCode::Add: case OpCode::Sub: case OpCode::Mul:
    case OpCode::Aq:  case OpCode::Min: case OpCode::Max:
      return 2;
    case OpCode::Sign: case OpCode::Square: case OpCode::Abs:
    case OpCode::Log:  case OpCode::Sqrt:   case OpCode::Tanh:
      return 1;
    default:
      return 0;
  }
}

std::string_view op_name(OpCode op) {
  switch (op) {
    case OpCode::Add: return "add";
    case OpCode::Sub: return "sub";
    case OpCode::Mul: return "mul";
    case OpCode::Aq: return "aq";
    case OpCode::Min: return "min";
    case OpCode::Max: return "max";
    case OpCode::Sign: return "sign";
    case OpCode::Square: return "square";
    case OpCode::Abs: return "abs";
    case OpCode::Log: return "log";
    case OpCode::Sqrt: return "sqrt";
    case OpCode::Tanh: return "tanh";
    case OpCode::Y: return "y";
    case OpCode::F: return "f";
    case OpCode::One: return "1";
    case OpCode::NegOne: return "-1";
  }
  return "?";
}

int ExprTree::subtree_size(int i) const {
  int need = 1, j = i;
  while (need > 0) {
    if (j >= int(nodes.size())) throw std::logic_error("ExprTree: truncated subtree");
    need += arity(nodes[size_t(j)]) - 1;
    ++j;
  }
  return j - i;
}

int ExprTree::depth() const {
  int maxd = 0, d = 0;
  std::vector<int> remaining;  // children still expected at each open level
  for (OpCode op : nodes) {
    maxd = std::max(maxd, d);
    int a = arity(op);
    if (a > 0) {
      remaining.push_back(a);
      ++d;
    } else {
      while (!remaining.empty() && --remaining.back() == 0) {
        remaining.pop_back();
        --d;
      }
    }
  }
  return maxd;
}

bool ExprTree::contains(OpCode op) const {
  return std::find(nodes.begin(), nodes.end(), op) != nodes.end();
}

bool ExprTree::has_required_arguments() const {
  return contains(OpCode::Y) && contains(OpCode::F);
}

void ExprTree::validate() const {
  if (nodes.empty()) throw std::invalid_argument("ExprTree: empty");
  if (subtree_size(0) != node_count()) throw std::invalid_argument("ExprTree: dangling nodes");
}

void GpConfig::validate() const {
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (population_size < 1) throw std::invalid_argument("GpConfig: population_size < 1");
  if (generations < 0) throw std::invalid_argument("GpConfig: negative generations");
  if (tournament_k < 1) throw std::invalid_argument("GpConfig: tournament_k < 1");
  if (!in01(crossover_rate) || !in01(mutation_rate) || !in01(elitism_rate))
    throw std::invalid_argument("GpConfig: rates must lie in [0,1]");
  if (crossover_rate + mutation_rate > 1.0 + 1e-12)
    throw std::invalid_argument("GpConfig: crossover_rate + mutation_rate > 1");
  if (init_depth_min < 1 || init_depth_max < init_depth_min)
    throw std::invalid_argument("GpConfig: bad init depth range");
  if (max_depth < init_depth_max) throw std::invalid_argument("GpConfig: max_depth < init depth");
}

namespace {

template <class T, size_t N>
T pick(const T (&arr)[N], std::mt19937_64& rng) {
  return arr[std::uniform_int_distribution<size_t>(0, N - 1)(rng)];
}

void gen_full(std::vector<OpCode>& out, int depth, std::mt19937_64& rng) {
  if (depth == 0) {
    out.push_back(pick(kTerminals, rng));
    return;
  }
  OpCode op = pick(kFunctionOps, rng);
  out.push_back(op);
  for (int k = 0; k < arity(op); ++k) gen_full(out, depth - 1, rng);
}

void gen_grow(std::vector<OpCode>& out, int depth, std::mt19937_64& rng) {
  // Uniform over functions + terminals until the depth budget runs out.
  constexpr size_t nf = std::size(kFunctionOps), nt = std::size(kTerminals);
  if (depth == 0 || std::uniform_int_distribution<size_t>(0, nf + nt - 1)(rng) >= nf) {
    out.push_back(pick(kTerminals, rng));
    return;
  }
  OpCode op = pick(kFunctionOps, rng);
  out.push_back(op);
  for (int k = 0; k < arity(op); ++k) gen_grow(out, depth - 1, rng);
}

// depth (in edges) of every node, via an explicit parent-depth walk
std::vector<int> node_depths(const ExprTree& t) {
  std::vector<int> depths(t.nodes.size(), 0);
  std::vector<std::pair<int, int>> stack;  // (remaining children, depth of children)
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    int d = stack.empty() ? 0 : stack.back().second;
    depths[i] = d;
    if (!stack.empty()) --stack.back().first;  // consumed one child slot
    int a = arity(t.nodes[i]);
    if (a > 0) {
      stack.push_back({a, d + 1});
    } else {
      while (!stack.empty() && stack.back().first == 0) stack.pop_back();
    }
  }
  return depths;
}

ExprTree replace_subtree(const ExprTree& t, int at, const ExprTree& repl) {
  int sz = t.subtree_size(at);
  ExprTree out;
  out.nodes.reserve(t.nodes.size() - size_t(sz) + repl.nodes.size());
  out.nodes.insert(out.nodes.end(), t.nodes.begin(), t.nodes.begin() + at);
  out.nodes.insert(out.nodes.end(), repl.nodes.begin(), repl.nodes.end());
  out.nodes.insert(out.nodes.end(), t.nodes.begin() + at + sz, t.nodes.end());
  return out;
}

ExprTree subtree_at(const ExprTree& t, int at) {
  int sz = t.subtree_size(at);
  ExprTree out;
  out.nodes.assign(t.nodes.begin() + at, t.nodes.begin() + at + sz);
  return out;
}

}  // namespace

ExprTree random_tree(const GpConfig& cfg, std::mt19937_64& rng, long index) {
  int depth = std::uniform_int_distribution<int>(cfg.init_depth_min, cfg.init_depth_max)(rng);
  bool grow;
  if (index >= 0) {
    grow = (index % 2 == 0);
  } else {
    grow = std::uniform_int_distribution<int>(0, 1)(rng) == 0;
  }
  ExprTree t;
  if (depth == 1) {
    // a depth-1 tree is one function over terminals; only a binary root can
    // host both required arguments
    OpCode op = pick(kBinaryOps, rng);
    t.nodes.push_back(op);
    for (int k = 0; k < 2; ++k) t.nodes.push_back(pick(kTerminals, rng));
    return t;
  }
  if (grow) {
    // guarantee at least one function node so the ramp minimum is honored
    OpCode op = pick(kFunctionOps, rng);
    t.nodes.push_back(op);
    for (int k = 0; k < arity(op); ++k) gen_grow(t.nodes, depth - 1, rng);
  } else {
    gen_full(t.nodes, depth, rng);
  }
  return t;
}

ExprTree enforce_arguments(ExprTree t, std::mt19937_64& rng) {
  if (t.has_required_arguments()) return t;
  std::vector<int> terminals;
  std::vector<int> depths = node_depths(t);
  std::vector<int> shallow;  // terminals that can grow one level without busting depth 8-ish
  for (int i = 0; i < t.node_count(); ++i) {
    if (arity(t.nodes[size_t(i)]) == 0) terminals.push_back(i);
  }
  // Prefer terminals whose replacement cannot increase the tree depth beyond
  // the deepest existing leaf; fall back to any terminal.
  int tree_depth = t.depth();
  for (int i : terminals)
    if (depths[size_t(i)] + 1 <= std::max(tree_depth, 1)) shallow.push_back(i);
  const std::vector<int>& pool = shallow.empty() ? terminals : shallow;
  int at = pool[std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng)];

  ExprTree repl;
  repl.nodes.push_back(pick(kBinaryOps, rng));
  bool y_first = std::uniform_int_distribution<int>(0, 1)(rng) == 0;
  repl.nodes.push_back(y_first ? OpCode::Y : OpCode::F);
  repl.nodes.push_back(y_first ? OpCode::F : OpCode::Y);
  return replace_subtree(t, at, repl);
}

std::vector<double> evaluate(const ExprTree& t, std::span<const double> y,
                             std::span<const double> f, bool nonneg) {
  if (y.size() != f.size()) throw std::invalid_argument("evaluate: y/f length mismatch");
  const size_t m = y.size();
  size_t cursor = 0;

  // Recursive pre-order evaluation over the whole batch at once.
  auto eval = [&](auto&& self) -> std::vector<double> {
    OpCode op = t.nodes[cursor++];
    switch (op) {
      case OpCode::Y: return std::vector<double>(y.begin(), y.end());
      case OpCode::F: return std::vector<double>(f.begin(), f.end());
      case OpCode::One: return std::vector<double>(m, 1.0);
      case OpCode::NegOne: return std::vector<double>(m, -1.0);
      default: break;
    }
    std::vector<double> a = self(self);
    if (arity(op) == 1) {
      for (double& x : a) {
        switch (op) {
          case OpCode::Sign: x = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); break;
          case OpCode::Square: x = x * x; break;
          case OpCode::Abs: x = std::fabs(x); break;
          case OpCode::Log: x = std::log(std::fabs(x) + kEps); break;
          case OpCode::Sqrt: x = std::sqrt(std::fabs(x) + kEps); break;
          case OpCode::Tanh: x = std::tanh(x); break;
          default: throw std::logic_error("evaluate: bad unary");
        }
      }
      return a;
    }
    std::vector<double> b = self(self);
    for (size_t i = 0; i < m; ++i) {
      double& x = a[i];
      double yv = b[i];
      switch (op) {
        case OpCode::Add: x = x + yv; break;
        case OpCode::Sub: x = x - yv; break;
        case OpCode::Mul: x = x * yv; break;
        case OpCode::Aq: x = x / std::sqrt(1.0 + yv * yv); break;
        case OpCode::Min: x = x <= yv ? x : yv; break;
        case OpCode::Max: x = x >= yv ? x : yv; break;
        default: throw std::logic_error("evaluate: bad binary");
      }
    }
    return a;
  };
  std::vector<double> out = eval(eval);
  if (cursor != t.nodes.size()) throw std::logic_error("evaluate: malformed tree");
  if (nonneg)
    for (double& x : out) x = stable_softplus(x);
  return out;
}

std::string canonical_key(const ExprTree& t) { return to_prefix(t, false); }

std::string to_prefix(const ExprTree& t, bool nonneg) {
  std::string out;
  out.reserve(t.nodes.size() * 5 + 16);
  size_t cursor = 0;
  auto emit = [&](auto&& self) -> void {
    OpCode op = t.nodes[cursor++];
    out += op_name(op);
    int a = arity(op);
    if (a == 0) return;
    out += '(';
    for (int k = 0; k < a; ++k) {
      if (k) out += ',';
      self(self);
    }
    out += ')';
  };
  if (nonneg) {
    out += "softplus(";
    emit(emit);
    out += ')';
  } else {
    emit(emit);
  }
  return out;
}

namespace {

struct Parser {
  std::string_view s;
  size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("from_prefix: " + what + " at offset " + std::to_string(pos));
  }
  void expect(char c) {
    skip_ws();
    if (pos >= s.size() || s[pos] != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }
  std::string_view token() {
    skip_ws();
    size_t start = pos;
    if (pos < s.size() && s[pos] == '-') ++pos;  // the -1 terminal
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '-' || s[pos] == '_'))
      ++pos;
    if (pos == start) fail("expected token");
    return s.substr(start, pos - start);
  }

  void parse_expr(std::vector<OpCode>& out) {
    std::string_view tok = token();
    static const std::pair<std::string_view, OpCode> table[] = {
        {"add", OpCode::Add},   {"sub", OpCode::Sub},     {"mul", OpCode::Mul},
        {"aq", OpCode::Aq},     {"min", OpCode::Min},     {"max", OpCode::Max},
        {"sign", OpCode::Sign}, {"square", OpCode::Square}, {"abs", OpCode::Abs},
        {"log", OpCode::Log},   {"sqrt", OpCode::Sqrt},   {"tanh", OpCode::Tanh},
        {"y", OpCode::Y},       {"f", OpCode::F},         {"1", OpCode::One},
        {"-1", OpCode::NegOne},
    };
    for (const auto& [name, op] : table) {
      if (tok == name) {
        out.push_back(op);
        int a = arity(op);
        if (a > 0) {
          expect('(');
          for (int k = 0; k < a; ++k) {
            if (k) expect(',');
            parse_expr(out);
          }
          expect(')');
        }
        return;
      }
    }
    fail("unknown symbol '" + std::string(tok) + "'");
  }
};

}  // namespace

ExprTree from_prefix(std::string_view text, bool* nonneg_out) {
  Parser p{text};
  bool wrapped = false;
  p.skip_ws();
  if (text.substr(p.pos).starts_with("softplus")) {
    p.pos += 8;
    p.expect('(');
    wrapped = true;
  }
  ExprTree t;
  p.parse_expr(t.nodes);
  if (wrapped) p.expect(')');
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing characters");
  t.validate();
  if (nonneg_out) *nonneg_out = wrapped;
  return t;
}

const ScoredTree& tournament_select(const std::vector<ScoredTree>& pop, int k,
                                    std::mt19937_64& rng) {
  if (pop.empty()) throw std::invalid_argument("tournament_select: empty population");
  if (k < 1) throw std::invalid_argument("tournament_select: k < 1");
  std::uniform_int_distribution<size_t> draw(0, pop.size() - 1);
  size_t best = draw(rng);
  for (int i = 1; i < k; ++i) {
    size_t cand = draw(rng);
    const ScoredTree& c = pop[cand];
    const ScoredTree& b = pop[best];
    bool better = c.fitness < b.fitness ||
                  (c.fitness == b.fitness &&
                   (c.tree.node_count() < b.tree.node_count() ||
                    (c.tree.node_count() == b.tree.node_count() && cand < best)));
    if (better) best = cand;
  }
  return pop[best];
}

namespace {
constexpr int kSpliceAttempts = 32;
}

ExprTree crossover_one_point(const ExprTree& a, const ExprTree& b, const GpConfig& cfg,
                             std::mt19937_64& rng) {
  for (int attempt = 0; attempt < kSpliceAttempts; ++attempt) {
    int i = std::uniform_int_distribution<int>(0, a.node_count() - 1)(rng);
    int j = std::uniform_int_distribution<int>(0, b.node_count() - 1)(rng);
    ExprTree child = replace_subtree(a, i, subtree_at(b, j));
    if (child.depth() > cfg.max_depth) continue;
    child = enforce_arguments(std::move(child), rng);
    if (child.depth() <= cfg.max_depth) return child;
  }
  return enforce_arguments(a, rng);  // parent already satisfies the constraint
}

ExprTree mutate_uniform(const ExprTree& t, const GpConfig& cfg, std::mt19937_64& rng) {
  std::vector<int> depths = node_depths(t);
  for (int attempt = 0; attempt < kSpliceAttempts; ++attempt) {
    int i = std::uniform_int_distribution<int>(0, t.node_count() - 1)(rng);
    int budget = std::max(0, cfg.max_depth - depths[size_t(i)]);
    ExprTree repl;
    gen_grow(repl.nodes, budget, rng);
    ExprTree child = replace_subtree(t, i, repl);
    if (child.depth() > cfg.max_depth) continue;
    child = enforce_arguments(std::move(child), rng);
    if (child.depth() <= cfg.max_depth) return child;
  }
  return enforce_arguments(t, rng);
}

}  // namespace metaloss::sym
