#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "metaloss/lossnet.hpp"

using namespace metaloss;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using sym::ExprTree;
using sym::OpCode;

namespace {
ExprTree tree(std::initializer_list<OpCode> ops) {
  ExprTree t;
  t.nodes.assign(ops);
  t.validate();
  return t;
}

double forward_value(const net::LossNetwork& n, const std::vector<double>& y,
                     const std::vector<double>& f) {
  Tape tape;
  Var yv = tape.constant(Tensor::column(y));
  Var fv = tape.constant(Tensor::column(f));
  return net::forward(n, tape, yv, fv).value().scalar_value();
}
}  // namespace

TEST_CASE("transition shape: n vertices, n-1 edges") {
  std::mt19937_64 rng(1);
  sym::GpConfig cfg;
  for (int i = 0; i < 50; ++i) {
    ExprTree t = sym::enforce_arguments(sym::random_tree(cfg, rng, i), rng);
    auto n = net::transition(t, net::WeightInit::Unit, rng);
    CHECK(n.vertex_count() == t.node_count());
    CHECK(n.edge_count() == t.node_count() - 1);
    for (double w : n.weights) CHECK(w == 1.0);
    CHECK(n.source_key == sym::canonical_key(t));
  }
}

TEST_CASE("unit-initialized network matches expression evaluation") {
  std::mt19937_64 rng(2);
  sym::GpConfig cfg;
  std::uniform_real_distribution<double> uf(0.01, 0.99);
  std::uniform_real_distribution<double> ur(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    ExprTree t = sym::enforce_arguments(sym::random_tree(cfg, rng, i), rng);
    bool nonneg = (i % 2) == 0;
    auto n = net::transition(t, net::WeightInit::Unit, rng, nonneg);
    bool cls = (i % 4) < 2;
    double y = cls ? double(i % 2) : ur(rng);
    double f = cls ? uf(rng) : ur(rng);
    double expect = sym::evaluate(t, std::vector<double>{y}, std::vector<double>{f}, nonneg)[0];
    double got = forward_value(n, {y}, {f});
    CHECK(std::abs(got - expect) <= 1e-12);
  }
}

TEST_CASE("gaussian init concentrates near 1") {
  std::mt19937_64 rng(3);
  sym::GpConfig cfg;
  long total = 0, within = 0;
  while (total < 10000) {
    ExprTree t = sym::enforce_arguments(sym::random_tree(cfg, rng, total % 25), rng);
    auto n = net::transition(t, net::WeightInit::Gaussian, rng);
    for (double w : n.weights) {
      ++total;
      if (std::abs(w - 1.0) <= 0.01) ++within;
    }
  }
  CHECK(double(within) / double(total) > 0.997);
}

TEST_CASE("edge weights scale values flowing parent-ward") {
  ExprTree t = tree({OpCode::Sub, OpCode::Y, OpCode::F});
  std::mt19937_64 rng(4);
  auto n = net::transition(t, net::WeightInit::Unit, rng);
  CHECK(forward_value(n, {1.0}, {0.0}) == 1.0);

  // edge 0 feeds pre-order node 1, the y terminal
  n.weights[0] = 2.0;
  CHECK(forward_value(n, {1.0}, {0.0}) == 2.0);
  CHECK(forward_value(n, {1.0}, {1.0}) == 1.0);  // 2*1 - 1

  // batch mean reduction: per-row losses (1, 3) -> 2
  n.weights[0] = 1.0;
  CHECK(forward_value(n, {1.0, 3.0}, {0.0, 0.0}) == 2.0);
}

TEST_CASE("gradients w.r.t. edge weights match finite differences") {
  std::mt19937_64 rng(5);
  sym::GpConfig cfg;
  std::uniform_real_distribution<double> uf(0.05, 0.95);
  auto smooth = [](const ExprTree& t) {
    // keep to ops that are smooth everywhere: central differences straddle the
    // kink of abs/min/max/sign, and log/sqrt curvature blows up near 0 (their
    // vjps are covered directly in the autodiff tests)
    return !t.contains(OpCode::Abs) && !t.contains(OpCode::Sign) &&
           !t.contains(OpCode::Min) && !t.contains(OpCode::Max) &&
           !t.contains(OpCode::Log) && !t.contains(OpCode::Sqrt);
  };
  int checked = 0;
  for (int i = 0; checked < 25 && i < 4000; ++i) {
    ExprTree t = sym::enforce_arguments(sym::random_tree(cfg, rng, i), rng);
    if (!smooth(t)) continue;
    auto n = net::transition(t, net::WeightInit::Gaussian, rng, (i % 2) == 0);
    std::vector<double> y = {1.0, 0.0, 1.0};
    std::vector<double> f = {uf(rng), uf(rng), uf(rng)};

    Tape tape;
    std::vector<Var> wv = net::weights_as_inputs(n, tape);
    Var loss = net::forward(n, tape, tape.constant(Tensor::column(y)),
                            tape.constant(Tensor::column(f)), wv);
    auto grads = tape.backward(loss, wv);

    const double h = 1e-6;
    for (size_t k = 0; k < n.weights.size(); ++k) {
      auto perturbed = n;
      perturbed.weights[k] += h;
      double up = forward_value(perturbed, y, f);
      perturbed.weights[k] -= 2 * h;
      double dn = forward_value(perturbed, y, f);
      double numeric = (up - dn) / (2 * h);
      double analytic = grads[k].value().scalar_value();
      double gap = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
      CHECK(gap <= 1e-5);
    }
    ++checked;
  }
  CHECK(checked >= 25);
}

TEST_CASE("json artifact round trip") {
  std::mt19937_64 rng(6);
  sym::GpConfig cfg;
  for (int i = 0; i < 20; ++i) {
    ExprTree t = sym::enforce_arguments(sym::random_tree(cfg, rng, i), rng);
    auto n = net::transition(t, net::WeightInit::Gaussian, rng, (i % 2) == 0);
    auto back = net::network_from_json(net::to_json(n));
    CHECK(back.source_key == n.source_key);
    CHECK(back.nonneg == n.nonneg);
    REQUIRE(back.weights.size() == n.weights.size());
    for (size_t k = 0; k < n.weights.size(); ++k) CHECK(back.weights[k] == n.weights[k]);
  }
  CHECK_THROWS_AS((void)net::network_from_json("{}"), std::invalid_argument);
  CHECK_THROWS_AS((void)net::network_from_json("not json"), std::exception);
}
