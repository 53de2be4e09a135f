// Microbenchmarks for the hot paths: scalar loss evaluation, the
// tree-to-network transition, network forward/backward, and a full
// training step.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "metaloss/autodiff.hpp"
#include "metaloss/harness.hpp"
#include "metaloss/lossnet.hpp"
#include "metaloss/losses.hpp"
#include "metaloss/symbolic.hpp"

using namespace metaloss;

namespace {

std::vector<double> logits_for(int C, int target, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  std::vector<double> z(size_t(C), std::log((1.0 - p) / std::max(1, C - 1)));
  for (double& v : z) v += jitter(rng);
  z[size_t(target)] = std::log(p);
  return z;
}

void bm_lsr_dense(benchmark::State& state) {
  const int C = int(state.range(0));
  std::mt19937_64 rng(1);
  auto z = logits_for(C, C / 2, 0.7, rng);
  for (auto _ : state) benchmark::DoNotOptimize(losses::lsr(C / 2, z, 0.1));
  state.SetComplexityN(C);
}

void bm_lsr_sparse(benchmark::State& state) {
  const int C = int(state.range(0));
  std::mt19937_64 rng(1);
  auto z = logits_for(C, C / 2, 0.7, rng);
  for (auto _ : state) benchmark::DoNotOptimize(losses::sparse_lsr(C / 2, z, 0.1));
  state.SetComplexityN(C);
}

void bm_transition(benchmark::State& state) {
  const int nodes = int(state.range(0));
  sym::ExprTree t;
  t.nodes.assign(size_t(nodes - 3), sym::OpCode::Square);
  t.nodes.push_back(sym::OpCode::Add);
  t.nodes.push_back(sym::OpCode::Y);
  t.nodes.push_back(sym::OpCode::F);
  std::mt19937_64 rng(2);
  for (auto _ : state)
    benchmark::DoNotOptimize(net::transition(t, net::WeightInit::Unit, rng));
  state.SetComplexityN(nodes);
}

void bm_network_forward_backward(benchmark::State& state) {
  const int batch = int(state.range(0));
  sym::GpConfig cfg;
  std::mt19937_64 rng(3);
  sym::ExprTree t = sym::enforce_arguments(sym::random_tree(cfg, rng), rng);
  net::LossNetwork nw = net::transition(t, net::WeightInit::Gaussian, rng, true);
  ad::Tensor y(batch, 1), f(batch, 1);
  std::uniform_real_distribution<double> uf(0.05, 0.95);
  for (int i = 0; i < batch; ++i) {
    y.at(i, 0) = i % 2;
    f.at(i, 0) = uf(rng);
  }
  for (auto _ : state) {
    ad::Tape tape;
    std::vector<ad::Var> wv = net::weights_as_inputs(nw, tape);
    ad::Var loss = net::forward(nw, tape, tape.constant(y), tape.constant(f), wv);
    benchmark::DoNotOptimize(tape.backward(loss, wv));
  }
}

void bm_train_step(benchmark::State& state) {
  harness::Task task = harness::make_two_moons(4);
  harness::MlpModel model = harness::MlpModel::make({2, 16, 2}, 5);
  auto builder = harness::builder_from_spec(losses::parse_loss_name("ce"));
  auto opt = harness::OptimizerState::sgd(0.01);
  harness::TrainConfig tc;
  tc.steps = 1;
  tc.eval_every = 0;
  tc.seed = 6;
  for (auto _ : state) benchmark::DoNotOptimize(harness::train(model, builder, opt, task, tc));
}

}  // namespace

BENCHMARK(bm_lsr_dense)->RangeMultiplier(8)->Range(8, 32768)->Complexity(benchmark::oN);
BENCHMARK(bm_lsr_sparse)->RangeMultiplier(8)->Range(8, 32768)->Complexity(benchmark::o1);
BENCHMARK(bm_transition)->RangeMultiplier(4)->Range(16, 4096)->Complexity(benchmark::oN);
BENCHMARK(bm_network_forward_backward)->Arg(1)->Arg(32)->Arg(256);
BENCHMARK(bm_train_step);

BENCHMARK_MAIN();
