#pragma once
// Expression trees for symbolic loss functions: the 12-primitive function set
// plus terminals {y, f, +1, -1}, random generation (ramped half-and-half),
// genetic operators, the required-arguments constraint, and structural keys.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metaloss::sym {

enum class OpCode : std::uint8_t {
  // arity 2
  Add, Sub, Mul, Aq, Min, Max,
  // arity 1
  Sign, Square, Abs, Log, Sqrt, Tanh,
  // terminals
  Y, F, One, NegOne,
};

int arity(OpCode op);
std::string_view op_name(OpCode op);

// Nodes stored in depth-first pre-order; a subtree is a contiguous range.
struct ExprTree {
  std::vector<OpCode> nodes;

  int node_count() const { return int(nodes.size()); }
  int subtree_size(int i) const;
  int depth() const;  // edge-count convention: a lone terminal has depth 0
  bool contains(OpCode op) const;
  bool has_required_arguments() const;  // both y and f present
  void validate() const;                // arity/shape sanity; throws on corruption
};

struct GpConfig {
  int population_size = 25;
  int generations = 50;
  int tournament_k = 4;
  double crossover_rate = 0.70;
  double mutation_rate = 0.25;
  double elitism_rate = 0.05;
  int init_depth_min = 2;
  int init_depth_max = 6;
  int max_depth = 8;
  std::uint64_t seed = 42;

  void validate() const;  // throws std::invalid_argument
};

// Ramped half-and-half. When `index` >= 0 (population position), even indices
// use the grow method and odd use full; otherwise the method is a coin flip.
ExprTree random_tree(const GpConfig& cfg, std::mt19937_64& rng, long index = -1);

// Guarantees both y and f appear: a random terminal is replaced with a random
// binary node over f and y (argument order randomized). Idempotent.
ExprTree enforce_arguments(ExprTree t, std::mt19937_64& rng);

// Elementwise evaluation; `nonneg` applies the softplus output wrapper.
// Total on finite inputs: protected primitives keep every value finite.
std::vector<double> evaluate(const ExprTree& t, std::span<const double> y,
                             std::span<const double> f, bool nonneg);

// Prefix-notation structural key: equal iff trees are node-for-node identical
// (commutative operands are NOT normalized).
std::string canonical_key(const ExprTree& t);

// Serialization. to_prefix(t, true) wraps the expression in softplus(...);
// from_prefix accepts and strips that wrapper (reported via *nonneg_out).
std::string to_prefix(const ExprTree& t, bool nonneg = false);
ExprTree from_prefix(std::string_view text, bool* nonneg_out = nullptr);

struct ScoredTree {
  ExprTree tree;
  double fitness = 0.0;  // lower is better
};

// k uniform draws (with replacement); best fitness wins, ties broken by
// smaller node count, then earlier index.
const ScoredTree& tournament_select(const std::vector<ScoredTree>& pop, int k,
                                    std::mt19937_64& rng);

// Subtree crossover / uniform mutation. Children always respect arity, the
// depth bound, and the required-arguments constraint (<= 32 resampling
// attempts, then fall back to a copy of the first parent).
ExprTree crossover_one_point(const ExprTree& a, const ExprTree& b, const GpConfig& cfg,
                             std::mt19937_64& rng);
ExprTree mutate_uniform(const ExprTree& t, const GpConfig& cfg, std::mt19937_64& rng);

}  // namespace metaloss::sym
