#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "metaloss/evomal.hpp"

using namespace metaloss;
using evomal::MetaConfig;
using sym::ExprTree;
using sym::OpCode;

namespace {
ExprTree tree(std::initializer_list<OpCode> ops) {
  ExprTree t;
  t.nodes.assign(ops);
  t.validate();
  return t;
}

net::LossNetwork unit_net(std::initializer_list<OpCode> ops, bool nonneg = false) {
  std::mt19937_64 rng(1);
  return net::transition(tree(ops), net::WeightInit::Unit, rng, nonneg);
}

// -y * log(f): cross-entropy surrogate over per-output probabilities
net::LossNetwork ce_net() {
  return unit_net({OpCode::Mul, OpCode::NegOne, OpCode::Mul, OpCode::Y, OpCode::Log, OpCode::F});
}

// y * log(f): its negation; minimizing it maximizes the task loss
net::LossNetwork neg_ce_net() {
  return unit_net({OpCode::Mul, OpCode::Y, OpCode::Log, OpCode::F});
}

// (y - f)^2
net::LossNetwork squared_net() {
  return unit_net({OpCode::Square, OpCode::Sub, OpCode::Y, OpCode::F});
}

// 1 - 1: constant, no gradient into the predictions
net::LossNetwork constant_net() {
  return unit_net({OpCode::Mul, OpCode::Sub, OpCode::F, OpCode::F, OpCode::Y});
}

MetaConfig small_cfg() {
  MetaConfig cfg;
  cfg.s_meta = 10;
  cfg.s_testing = 120;
  cfg.batch = 16;
  return cfg;
}

harness::Task blobs(std::uint64_t seed) {
  harness::Task t;
  t.name = "blobs";
  t.kind = harness::Task::Classification;
  t.class_count = 2;
  const int n = 90;
  t.features = ad::Tensor(n, 2);
  t.labels.resize(size_t(n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.5);
  for (int i = 0; i < n; ++i) {
    int cls = i % 2;
    double cx = cls == 0 ? -2.5 : 2.5;
    t.features.at(i, 0) = cx + jitter(rng);
    t.features.at(i, 1) = -cx + jitter(rng);
    t.labels[size_t(i)] = cls;
  }
  for (int i = 0; i < n; ++i) {
    if (i < 54) t.train_idx.push_back(i);
    else if (i < 72) t.valid_idx.push_back(i);
    else t.test_idx.push_back(i);
  }
  return t;
}
}  // namespace

TEST_CASE("local search identities") {
  harness::Task task = harness::make_synthetic_regression(3);
  auto n = squared_net();

  MetaConfig cfg = small_cfg();
  cfg.eta = 0.0;
  auto same = evomal::optimize_loss(n, task, cfg, 7);
  CHECK(same.weights == n.weights);

  MetaConfig cfg0 = small_cfg();
  cfg0.s_meta = 0;
  auto ident = evomal::optimize_loss(n, task, cfg0, 7);
  CHECK(ident.weights == n.weights);

  // with real steps the weights actually move
  MetaConfig cfg1 = small_cfg();
  auto moved = evomal::optimize_loss(n, task, cfg1, 7);
  bool any = false;
  for (size_t i = 0; i < moved.weights.size(); ++i)
    if (moved.weights[i] != n.weights[i]) any = true;
  CHECK(any);

  // determinism
  auto again = evomal::optimize_loss(n, task, cfg1, 7);
  CHECK(again.weights == moved.weights);
}

TEST_CASE("unrolled hypergradient matches finite differences") {
  harness::Task task = harness::make_synthetic_regression(5);
  auto n = squared_net();
  MetaConfig cfg = small_cfg();
  cfg.batch = 8;

  auto probe = evomal::meta_step_probe(n, task, cfg, 11, 0);
  REQUIRE(int(probe.weight_grad.size()) == n.edge_count());
  CHECK(std::isfinite(probe.meta_loss));

  const double h = 1e-5;
  for (size_t k = 0; k < n.weights.size(); ++k) {
    auto up = n, dn = n;
    up.weights[k] += h;
    dn.weights[k] -= h;
    double lu = evomal::meta_step_probe(up, task, cfg, 11, 0).meta_loss;
    double ld = evomal::meta_step_probe(dn, task, cfg, 11, 0).meta_loss;
    double numeric = (lu - ld) / (2 * h);
    double rel = std::abs(probe.weight_grad[k] - numeric) / std::max(1.0, std::abs(numeric));
    CHECK(rel <= 1e-4);
  }
}

TEST_CASE("fitness evaluation") {
  harness::Task task = blobs(9);
  MetaConfig cfg = small_cfg();
  cfg.s_testing = 500;

  double f1 = evomal::evaluate_fitness(ce_net(), task, cfg, 21);
  double f2 = evomal::evaluate_fitness(ce_net(), task, cfg, 21);
  CHECK(f1 == f2);  // determinism
  CHECK(f1 < 0.05);  // separable task trains out under the ce surrogate

  // a constant loss never moves the parameters: fitness is independent of
  // the step budget and equals the untrained model's metric
  MetaConfig one = cfg;
  one.s_testing = 1;
  double c_long = evomal::evaluate_fitness(constant_net(), task, cfg, 21);
  double c_short = evomal::evaluate_fitness(constant_net(), task, one, 21);
  CHECK(c_long == c_short);
  CHECK(c_long > f1);
}

TEST_CASE("rejection protocol") {
  harness::Task cls = blobs(13);
  harness::Task reg = harness::make_synthetic_regression(13);
  MetaConfig cfg = small_cfg();

  auto ce = evomal::rejection_protocol(ce_net(), cls, cfg, 3);
  CHECK(ce.pass);
  CHECK(ce.g > 0.0);

  auto sq = evomal::rejection_protocol(squared_net(), reg, cfg, 3);
  CHECK(sq.pass);
  CHECK(sq.g > 0.0);

  auto flat = evomal::rejection_protocol(constant_net(), cls, cfg, 3);
  CHECK_FALSE(flat.pass);
  CHECK(flat.g == 0.0);

  auto neg = evomal::rejection_protocol(neg_ce_net(), cls, cfg, 3);
  CHECK_FALSE(neg.pass);
  CHECK(neg.g < 0.0);
}

TEST_CASE("gradient signatures") {
  harness::Task task = blobs(17);
  MetaConfig cfg = small_cfg();
  auto probe = evomal::make_probe(task, cfg, 5);
  CHECK(probe.preds.rows == cfg.probe_batch);

  auto a = ce_net();
  auto b = ce_net();
  std::string sa = evomal::gradient_signature(a, probe);
  CHECK(sa == evomal::gradient_signature(b, probe));

  auto scaled = ce_net();
  for (double& w : scaled.weights) w *= 1.5;
  CHECK(evomal::gradient_signature(scaled, probe) != sa);

  // entries are two-significant-digit scientific notation, comma-joined
  size_t entries = 1;
  std::string cur;
  auto check_entry = [](const std::string& e) {
    double v = std::strtod(e.c_str(), nullptr);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1e", v);
    CHECK(e == buf);
  };
  for (char ch : sa) {
    if (ch == ',') {
      ++entries;
      check_entry(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  check_entry(cur);
  CHECK(int(entries) == cfg.probe_batch);
}

TEST_CASE("evolve: generation zero, accounting, elitism, determinism") {
  harness::Task task = harness::make_synthetic_regression(23);

  sym::GpConfig gp;
  gp.population_size = 12;
  gp.generations = 0;
  gp.seed = 3;
  MetaConfig meta = small_cfg();
  meta.s_meta = 2;
  meta.s_testing = 40;

  auto r0 = evomal::evolve(gp, meta, task);
  REQUIRE(r0.generations.size() == 1);
  CHECK(r0.generations[0].generation == 0);
  for (const auto& rec : r0.ranked) CHECK(rec.generation == 0);
  // ranked ascending
  for (size_t i = 1; i < r0.ranked.size(); ++i)
    CHECK(r0.ranked[i - 1].fitness <= r0.ranked[i].fitness);

  sym::GpConfig gp2 = gp;
  gp2.generations = 3;
  auto r = evomal::evolve(gp2, meta, task);
  REQUIRE(r.generations.size() == 4);

  // every candidate either produced a new record or hit a cache
  long produced = 0, hits = 0;
  for (const auto& g : r.generations) {
    produced += g.evaluated + g.rejected + g.grad_dups;
    hits += g.cache_hits;
    CHECK(g.evaluated + g.rejected + g.grad_dups + g.cache_hits == gp.population_size);
  }
  CHECK(produced == long(r.ranked.size()));
  CHECK(produced + hits == long(gp.population_size) * 4);

  // elitism: best fitness never worsens
  for (size_t i = 1; i < r.generations.size(); ++i)
    CHECK(r.generations[i].best_fitness <= r.generations[i - 1].best_fitness);

  // cached fitness is what a fresh evaluation would produce
  REQUIRE(!r.ranked.empty());
  const auto& top = r.ranked.front();
  CHECK(top.verdict == evomal::FitnessRecord::Evaluated);
  CHECK(evomal::evaluate_fitness(top.network, task, meta, gp.seed) == top.fitness);

  // worker count changes nothing observable
  MetaConfig meta4 = meta;
  meta4.workers = 4;
  auto rp = evomal::evolve(gp2, meta4, task);
  CHECK(evomal::ranked_to_json(rp.ranked) == evomal::ranked_to_json(r.ranked));
  CHECK(evomal::generations_to_csv(rp.generations) == evomal::generations_to_csv(r.generations));
}

TEST_CASE("duplicates in a tiny search space hit the key cache") {
  harness::Task task = harness::make_synthetic_regression(31);
  sym::GpConfig gp;
  gp.population_size = 25;
  gp.generations = 2;  // the elite re-enters the pipeline: guaranteed cache hit
  gp.init_depth_min = 1;
  gp.init_depth_max = 1;
  gp.seed = 5;
  MetaConfig meta = small_cfg();
  meta.s_meta = 1;
  meta.s_testing = 20;

  auto r = evomal::evolve(gp, meta, task);
  long hits = 0;
  for (const auto& g : r.generations) hits += g.cache_hits;
  CHECK(hits > 0);
  CHECK(long(r.ranked.size()) + hits == 25 * 3);

  // ranked keys are unique
  std::vector<std::string> keys;
  for (const auto& rec : r.ranked) keys.push_back(rec.key);
  std::sort(keys.begin(), keys.end());
  CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());
}

TEST_CASE("gp-lfl mode never touches the weights") {
  harness::Task task = harness::make_synthetic_regression(37);
  sym::GpConfig gp;
  gp.population_size = 8;
  gp.generations = 1;
  gp.seed = 9;
  MetaConfig meta = small_cfg();
  meta.local_search = false;
  meta.s_testing = 30;

  auto r = evomal::evolve(gp, meta, task);
  for (const auto& rec : r.ranked) {
    // gaussian init concentrates near 1; without local search it stays there
    for (double w : rec.network.weights) CHECK(std::abs(w - 1.0) < 0.01);
  }
}

TEST_CASE("config validation") {
  MetaConfig bad;
  bad.s_testing = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  MetaConfig bad2;
  bad2.workers = 0;
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
  MetaConfig ok;
  CHECK_NOTHROW(ok.validate());
}
