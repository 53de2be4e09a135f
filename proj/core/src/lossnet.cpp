#include "metaloss/lossnet.hpp"

#include <stdexcept>

#include <json.hpp>

namespace metaloss::net {

LossNetwork transition(const sym::ExprTree& t, WeightInit init, std::mt19937_64& rng,
                       bool nonneg) {
  t.validate();
  if (!t.has_required_arguments())
    throw std::invalid_argument("transition: tree is not constraint-enforced");
  LossNetwork net;
  net.tree = t;
  net.nonneg = nonneg;
  net.source_key = sym::canonical_key(t);
  size_t edges = t.nodes.size() - 1;
  net.weights.resize(edges, 1.0);
  if (init == WeightInit::Gaussian) {
    std::normal_distribution<double> dist(1.0, 1e-3);
    for (double& w : net.weights) w = dist(rng);
  }
  return net;
}

namespace {

using ad::Var;

// Recursive pre-order construction of the weighted expression on the tape.
struct Builder {
  const LossNetwork& net;
  ad::Tape& tape;
  Var y, f, one, neg_one;
  const std::vector<Var>& w;
  size_t cursor = 0;

  Var build() {
    sym::OpCode op = net.tree.nodes[cursor++];
    switch (op) {
      case sym::OpCode::Y: return y;
      case sym::OpCode::F: return f;
      case sym::OpCode::One: return one;
      case sym::OpCode::NegOne: return neg_one;
      default: break;
    }
    Var a = weighted_child();
    if (sym::arity(op) == 1) {
      switch (op) {
        case sym::OpCode::Sign: return ad::vsign(a);
        case sym::OpCode::Square: return ad::square(a);
        case sym::OpCode::Abs: return ad::vabs(a);
        case sym::OpCode::Log: return ad::plog(a);
        case sym::OpCode::Sqrt: return ad::psqrt(a);
        case sym::OpCode::Tanh: return ad::vtanh(a);
        default: throw std::logic_error("lossnet: bad unary");
      }
    }
    Var b = weighted_child();
    switch (op) {
      case sym::OpCode::Add: return ad::add(a, b);
      case sym::OpCode::Sub: return ad::sub(a, b);
      case sym::OpCode::Mul: return ad::mul(a, b);
      case sym::OpCode::Aq: return ad::aq(a, b);
      case sym::OpCode::Min: return ad::vmin(a, b);
      case sym::OpCode::Max: return ad::vmax(a, b);
      default: throw std::logic_error("lossnet: bad binary");
    }
  }

  Var weighted_child() {
    // The child about to be built sits at pre-order index `cursor`; its
    // incoming edge is cursor - 1 in depth-first pre-order edge numbering.
    size_t edge = cursor - 1;
    Var child = build();
    return ad::mul(w[edge], child);
  }
};

}  // namespace

ad::Var forward(const LossNetwork& net, ad::Tape& tape, ad::Var y, ad::Var f,
                const std::vector<ad::Var>& weight_vars) {
  if (y.shape() != f.shape()) throw std::invalid_argument("lossnet forward: y/f shape mismatch");
  if (int(weight_vars.size()) != net.edge_count())
    throw std::invalid_argument("lossnet forward: weight count mismatch");
  Builder b{net, tape, y, f, tape.scalar(1.0), tape.scalar(-1.0), weight_vars};
  Var out = b.build();
  if (net.nonneg) out = ad::softplus(out);
  return ad::mean(out);
}

ad::Var forward(const LossNetwork& net, ad::Tape& tape, ad::Var y, ad::Var f) {
  std::vector<ad::Var> w;
  w.reserve(net.weights.size());
  for (double wi : net.weights) w.push_back(tape.scalar(wi));
  return forward(net, tape, y, f, w);
}

std::vector<ad::Var> weights_as_inputs(const LossNetwork& net, ad::Tape& tape) {
  std::vector<ad::Var> w;
  w.reserve(net.weights.size());
  for (double wi : net.weights) w.push_back(tape.input(ad::Tensor::scalar(wi)));
  return w;
}

std::string to_json(const LossNetwork& net) {
  nlohmann::ordered_json j;
  j["kind"] = "network";
  j["expression"] = sym::to_prefix(net.tree, false);
  j["weights"] = net.weights;
  j["nonneg"] = net.nonneg;
  return j.dump(2);
}

LossNetwork network_from_json(const std::string& text) {
  nlohmann::json j;
  LossNetwork net;
  try {
    j = nlohmann::json::parse(text);
    if (j.value("kind", "") != "network")
      throw std::invalid_argument("network_from_json: kind is not 'network'");
    net.tree = sym::from_prefix(j.at("expression").get<std::string>());
    net.weights = j.at("weights").get<std::vector<double>>();
    net.nonneg = j.at("nonneg").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("network_from_json: ") + e.what());
  }
  net.source_key = sym::canonical_key(net.tree);
  if (int(net.weights.size()) != net.tree.node_count() - 1)
    throw std::invalid_argument("network_from_json: weight count does not match expression");
  return net;
}

}  // namespace metaloss::net
