#pragma once
// Loss networks: a symbolic loss transposed into an edge-weighted DAG whose
// weights are gradient-trainable. The DAG mirrors the source tree 1:1; edge k
// scales the value of pre-order node k+1 as it flows toward its parent.

#include <random>
#include <string>
#include <vector>

#include "metaloss/autodiff.hpp"
#include "metaloss/symbolic.hpp"

namespace metaloss::net {

enum class WeightInit { Unit, Gaussian };  // Gaussian: N(1, sigma = 1e-3)

struct LossNetwork {
  sym::ExprTree tree;           // vertices and connectivity of the source expression
  std::vector<double> weights;  // one per edge, depth-first pre-order (edge k feeds node k+1)
  bool nonneg = false;          // apply the softplus output wrapper
  std::string source_key;       // canonical key of the source tree

  int vertex_count() const { return tree.node_count(); }
  int edge_count() const { return int(weights.size()); }
};

// Transpose-and-parameterize in a single linear pass (Theta(|V| + |E|)).
LossNetwork transition(const sym::ExprTree& t, WeightInit init, std::mt19937_64& rng,
                       bool nonneg = false);

// Differentiable forward pass: elementwise over (y, f), mean-reduced to a
// scalar. `weight_vars` supplies the edge weights as tape vars so that
// d(loss)/d(phi) exists; the convenience overload records them as constants.
ad::Var forward(const LossNetwork& net, ad::Tape& tape, ad::Var y, ad::Var f,
                const std::vector<ad::Var>& weight_vars);
ad::Var forward(const LossNetwork& net, ad::Tape& tape, ad::Var y, ad::Var f);

// Registers each weight as a differentiable tape input, in edge order.
std::vector<ad::Var> weights_as_inputs(const LossNetwork& net, ad::Tape& tape);

// JSON artifact:
//   { "kind": "network", "expression": <prefix>, "weights": [...], "nonneg": bool }
std::string to_json(const LossNetwork& net);
LossNetwork network_from_json(const std::string& text);

}  // namespace metaloss::net
