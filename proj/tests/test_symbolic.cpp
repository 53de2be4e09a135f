#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "metaloss/symbolic.hpp"

using namespace metaloss;
using sym::ExprTree;
using sym::GpConfig;
using sym::OpCode;

namespace {
ExprTree tree(std::initializer_list<OpCode> ops) {
  ExprTree t;
  t.nodes.assign(ops);
  t.validate();
  return t;
}
}  // namespace

TEST_CASE("tree structure helpers") {
  ExprTree leaf = tree({OpCode::Y});
  CHECK(leaf.depth() == 0);
  CHECK(leaf.node_count() == 1);
  CHECK_FALSE(leaf.has_required_arguments());

  ExprTree sub = tree({OpCode::Sub, OpCode::Y, OpCode::F});
  CHECK(sub.depth() == 1);
  CHECK(sub.subtree_size(0) == 3);
  CHECK(sub.subtree_size(1) == 1);
  CHECK(sub.has_required_arguments());
  CHECK(sub.contains(OpCode::Sub));
  CHECK_FALSE(sub.contains(OpCode::Log));

  ExprTree broken;
  broken.nodes = {OpCode::Add, OpCode::Y};  // missing second argument
  CHECK_THROWS(broken.validate());
}

TEST_CASE("random_tree depth bounds and determinism") {
  GpConfig cfg;
  cfg.init_depth_min = 1;
  cfg.init_depth_max = 1;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    ExprTree t = sym::random_tree(cfg, rng, i);
    CHECK(t.depth() == 1);
    CHECK(arity(t.nodes[0]) == 2);  // a single binary function over terminals
    CHECK(t.node_count() == 3);
  }

  GpConfig wide;
  wide.init_depth_min = 2;
  wide.init_depth_max = 6;
  std::mt19937_64 r7(7);
  for (int i = 0; i < 25; ++i) {
    ExprTree t = sym::random_tree(wide, r7, i);
    t.validate();
    CHECK(t.depth() <= 6);
    CHECK(t.depth() >= 1);
  }

  std::mt19937_64 ra(99), rb(99);
  for (int i = 0; i < 10; ++i) {
    ExprTree a = sym::random_tree(wide, ra, i);
    ExprTree b = sym::random_tree(wide, rb, i);
    CHECK(sym::canonical_key(a) == sym::canonical_key(b));
  }
}

TEST_CASE("enforce_arguments") {
  std::mt19937_64 rng(5);

  ExprTree sq = tree({OpCode::Square, OpCode::Y});
  ExprTree fixed = sym::enforce_arguments(sq, rng);
  fixed.validate();
  CHECK(fixed.has_required_arguments());

  ExprTree ok = tree({OpCode::Sub, OpCode::Y, OpCode::F});
  ExprTree same = sym::enforce_arguments(ok, rng);
  CHECK(sym::canonical_key(same) == sym::canonical_key(ok));

  ExprTree lone = tree({OpCode::One});
  ExprTree repl = sym::enforce_arguments(lone, rng);
  repl.validate();
  CHECK(repl.node_count() == 3);
  CHECK(arity(repl.nodes[0]) == 2);
  CHECK(repl.has_required_arguments());

  // idempotence
  for (int i = 0; i < 50; ++i) {
    GpConfig cfg;
    ExprTree t = sym::enforce_arguments(sym::random_tree(cfg, rng, i), rng);
    auto key = sym::canonical_key(t);
    ExprTree again = sym::enforce_arguments(t, rng);
    CHECK(sym::canonical_key(again) == key);
  }
}

TEST_CASE("evaluate oracles") {
  ExprTree sqdiff = tree({OpCode::Square, OpCode::Sub, OpCode::Y, OpCode::F});
  auto v1 = sym::evaluate(sqdiff, std::vector<double>{1.0}, std::vector<double>{0.5}, false);
  CHECK(v1[0] == doctest::Approx(0.25).epsilon(1e-15));

  ExprTree logyf = tree({OpCode::Log, OpCode::Mul, OpCode::Y, OpCode::F});
  auto v2 = sym::evaluate(logyf, std::vector<double>{1.0}, std::vector<double>{1.0}, false);
  CHECK(v2[0] == doctest::Approx(9.999999505838704e-08).epsilon(1e-12));

  ExprTree diff = tree({OpCode::Sub, OpCode::Y, OpCode::F});
  auto v3 = sym::evaluate(diff, std::vector<double>{0.0}, std::vector<double>{5.0}, true);
  CHECK(v3[0] == doctest::Approx(0.006715348489118068).epsilon(1e-12));
  CHECK(v3[0] >= 0.0);

  // elementwise over a batch
  auto v4 = sym::evaluate(diff, std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0},
                          false);
  CHECK(v4.size() == 2);
  CHECK(v4[0] == 1.0);
  CHECK(v4[1] == -1.0);
}

TEST_CASE("closure on random constraint-enforced trees") {
  GpConfig cfg;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uf(0.01, 0.99);
  std::uniform_real_distribution<double> ur(-3.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    ExprTree t = sym::enforce_arguments(sym::random_tree(cfg, rng, i), rng);
    std::vector<double> y(8), f(8);
    for (int j = 0; j < 8; ++j) {
      bool cls = (i % 2) == 0;
      y[size_t(j)] = cls ? double(j % 2) : ur(rng);
      f[size_t(j)] = cls ? uf(rng) : ur(rng);
    }
    for (bool nonneg : {false, true}) {
      auto out = sym::evaluate(t, y, f, nonneg);
      for (double v : out) {
        CHECK(std::isfinite(v));
        if (nonneg) CHECK(v >= 0.0);
      }
    }
  }
}

TEST_CASE("canonical keys distinguish structure only") {
  ExprTree ayf = tree({OpCode::Add, OpCode::Y, OpCode::F});
  ExprTree ayf2 = tree({OpCode::Add, OpCode::Y, OpCode::F});
  ExprTree afy = tree({OpCode::Add, OpCode::F, OpCode::Y});
  ExprTree myf = tree({OpCode::Mul, OpCode::Y, OpCode::F});
  CHECK(sym::canonical_key(ayf) == sym::canonical_key(ayf2));
  CHECK(sym::canonical_key(ayf) != sym::canonical_key(afy));
  CHECK(sym::canonical_key(ayf) != sym::canonical_key(myf));
}

TEST_CASE("prefix serialization round trip") {
  ExprTree t = tree({OpCode::Mul, OpCode::Y, OpCode::Log, OpCode::Mul, OpCode::Y, OpCode::F});
  std::string plain = sym::to_prefix(t, false);
  std::string wrapped = sym::to_prefix(t, true);
  CHECK(wrapped.substr(0, 9) == "softplus(");

  bool nonneg = false;
  ExprTree back = sym::from_prefix(plain, &nonneg);
  CHECK_FALSE(nonneg);
  CHECK(sym::canonical_key(back) == sym::canonical_key(t));

  ExprTree back2 = sym::from_prefix(wrapped, &nonneg);
  CHECK(nonneg);
  CHECK(sym::canonical_key(back2) == sym::canonical_key(t));

  GpConfig cfg;
  std::mt19937_64 rng(31);
  for (int i = 0; i < 200; ++i) {
    ExprTree r = sym::enforce_arguments(sym::random_tree(cfg, rng, i), rng);
    ExprTree rt = sym::from_prefix(sym::to_prefix(r, false), nullptr);
    CHECK(sym::canonical_key(rt) == sym::canonical_key(r));
  }

  CHECK_THROWS_AS((void)sym::from_prefix("nonsense(y, f)", nullptr), std::invalid_argument);
}

TEST_CASE("tournament selection") {
  std::vector<sym::ScoredTree> pop;
  pop.push_back({tree({OpCode::Add, OpCode::Y, OpCode::F}), 0.5});
  pop.push_back({tree({OpCode::Square, OpCode::Sub, OpCode::Y, OpCode::F}), 0.5});
  pop.push_back({tree({OpCode::Sub, OpCode::Y, OpCode::F}), 0.5});
  pop.push_back({tree({OpCode::Mul, OpCode::Y, OpCode::F}), 0.5});

  // equal fitness: ties break toward fewer nodes, then the earlier index
  std::mt19937_64 rng(3);
  const auto& win = sym::tournament_select(pop, 64, rng);
  CHECK(win.tree.node_count() == 3);
  CHECK(sym::canonical_key(win.tree) == sym::canonical_key(pop[0].tree));

  // with a clear best and enough draws to hit it, the global best wins
  pop[2].fitness = 0.1;
  std::mt19937_64 rng2(4);
  const auto& best = sym::tournament_select(pop, 64, rng2);
  CHECK(best.fitness == 0.1);

  std::vector<sym::ScoredTree> empty;
  CHECK_THROWS_AS((void)sym::tournament_select(empty, 4, rng), std::invalid_argument);
}

TEST_CASE("genetic operators keep trees valid") {
  GpConfig cfg;
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    ExprTree a = sym::enforce_arguments(sym::random_tree(cfg, rng, i), rng);
    ExprTree b = sym::enforce_arguments(sym::random_tree(cfg, rng, i + 1), rng);
    ExprTree child = sym::crossover_one_point(a, b, cfg, rng);
    child.validate();
    CHECK(child.depth() <= cfg.max_depth);
    CHECK(child.has_required_arguments());

    ExprTree m = sym::mutate_uniform(a, cfg, rng);
    m.validate();
    CHECK(m.depth() <= cfg.max_depth);
    CHECK(m.has_required_arguments());
  }

  // mutation actually changes trees at least some of the time
  ExprTree a = sym::enforce_arguments(sym::random_tree(cfg, rng, 0), rng);
  int changed = 0;
  for (int i = 0; i < 100; ++i) {
    if (sym::canonical_key(sym::mutate_uniform(a, cfg, rng)) != sym::canonical_key(a)) ++changed;
  }
  CHECK(changed > 0);
}

TEST_CASE("config validation") {
  GpConfig bad;
  bad.crossover_rate = 0.9;
  bad.mutation_rate = 0.2;  // sum > 1
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  GpConfig bad2;
  bad2.population_size = 0;
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
  GpConfig ok;
  CHECK_NOTHROW(ok.validate());
}
