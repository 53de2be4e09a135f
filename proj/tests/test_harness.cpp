#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "metaloss/harness.hpp"

using namespace metaloss;
using harness::InitMode;
using harness::MlpModel;
using harness::OptimizerState;
using harness::Task;

namespace {
namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("metaloss_test_" + name);
}

void check_splits(const Task& t) {
  std::set<int> seen;
  for (const auto* split : {&t.train_idx, &t.valid_idx, &t.test_idx}) {
    for (int i : *split) {
      CHECK(i >= 0);
      CHECK(i < t.rows());
      CHECK(seen.insert(i).second);  // disjoint
    }
  }
  CHECK(int(seen.size()) == t.rows());  // exhaustive
}

// two well-separated gaussian blobs: linearly separable by construction
Task separable_task(std::uint64_t seed) {
  Task t;
  t.name = "blobs";
  t.kind = Task::Classification;
  t.class_count = 2;
  const int n = 80;
  t.features = ad::Tensor(n, 2);
  t.labels.resize(size_t(n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.4);
  for (int i = 0; i < n; ++i) {
    int cls = i % 2;
    double cx = cls == 0 ? -3.0 : 3.0;
    t.features.at(i, 0) = cx + jitter(rng);
    t.features.at(i, 1) = cx + jitter(rng);
    t.labels[size_t(i)] = cls;
  }
  for (int i = 0; i < n; ++i) {
    if (i < 48) t.train_idx.push_back(i);
    else if (i < 64) t.valid_idx.push_back(i);
    else t.test_idx.push_back(i);
  }
  return t;
}
}  // namespace

TEST_CASE("seed derivation is deterministic and tag-sensitive") {
  CHECK(harness::derive_seed(42, 1) == harness::derive_seed(42, 1));
  CHECK(harness::derive_seed(42, 1) != harness::derive_seed(42, 2));
  CHECK(harness::derive_seed(42, 1, 7) != harness::derive_seed(42, 1, 8));
  CHECK(harness::derive_seed(1, 5) != harness::derive_seed(2, 5));
}

TEST_CASE("initializer bounds") {
  CHECK(harness::glorot_bound(64, 64, InitMode::Uniform) ==
        doctest::Approx(0.21650635094610965).epsilon(1e-15));
  CHECK(harness::he_bound(3, InitMode::Uniform) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(harness::he_bound(4, InitMode::Normal) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS((void)harness::he_bound(0, InitMode::Uniform), std::invalid_argument);

  std::mt19937_64 rng(3);
  ad::Tensor w = harness::he_init(100, 1000, InitMode::Uniform, rng);
  REQUIRE(w.count() == 100000);
  double bound = harness::he_bound(100, InitMode::Uniform);
  for (double v : w.v) {
    CHECK(v <= bound);
    CHECK(v >= -bound);
  }

  ad::Tensor g = harness::glorot_init(64, 64, InitMode::Uniform, rng);
  double gb = harness::glorot_bound(64, 64, InitMode::Uniform);
  for (double v : g.v) CHECK(std::abs(v) <= gb);
}

TEST_CASE("optimizer update oracles") {
  std::vector<ad::Tensor> params = {ad::Tensor::scalar(1.0)};
  std::vector<ad::Tensor> grads = {ad::Tensor::scalar(2.0)};

  auto sgd = OptimizerState::sgd(0.1);
  sgd.step(params, grads);
  CHECK(params[0].scalar_value() == doctest::Approx(0.8).epsilon(1e-15));

  params[0] = ad::Tensor::scalar(1.0);
  grads[0] = ad::Tensor::scalar(1.0);
  auto mom = OptimizerState::with_momentum(0.1, 0.9);
  mom.step(params, grads);
  CHECK(params[0].scalar_value() == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(mom.m[0].scalar_value() == doctest::Approx(0.1).epsilon(1e-15));
  mom.step(params, grads);
  CHECK(mom.m[0].scalar_value() == doctest::Approx(0.19).epsilon(1e-15));
  CHECK(params[0].scalar_value() == doctest::Approx(0.71).epsilon(1e-15));

  params[0] = ad::Tensor::scalar(1.0);
  auto adam = OptimizerState::adam(0.001);
  adam.step(params, grads);
  // bias-corrected first step moves by alpha/(1 + eps_adam)
  CHECK(1.0 - params[0].scalar_value() ==
        doctest::Approx(0.000999999990000001).epsilon(1e-12));
}

TEST_CASE("synthetic tasks: shape, splits, normalization, determinism") {
  Task reg = harness::make_synthetic_regression(7);
  CHECK(reg.kind == Task::Regression);
  CHECK(reg.rows() == 600);
  CHECK(int(reg.train_idx.size()) == 360);
  CHECK(int(reg.valid_idx.size()) == 120);
  CHECK(int(reg.test_idx.size()) == 120);
  check_splits(reg);

  // z-scored on the train split
  for (int d = 0; d < reg.dim(); ++d) {
    double mean = 0.0;
    for (int i : reg.train_idx) mean += reg.features.at(i, d);
    mean /= double(reg.train_idx.size());
    CHECK(std::abs(mean) < 1e-10);
  }
  double lmean = 0.0;
  for (int i : reg.train_idx) lmean += reg.labels[size_t(i)];
  lmean /= double(reg.train_idx.size());
  CHECK(std::abs(lmean) < 1e-10);

  Task reg2 = harness::make_synthetic_regression(7);
  CHECK(reg.features.v == reg2.features.v);
  CHECK(reg.labels == reg2.labels);

  Task moons = harness::make_two_moons(11);
  CHECK(moons.kind == Task::Classification);
  CHECK(moons.class_count == 2);
  check_splits(moons);

  std::mt19937_64 rng(5);
  harness::Batch b = harness::sample_batch(moons, moons.train_idx, 16, rng);
  CHECK(b.x.rows == 16);
  CHECK(b.x.cols == 2);
  CHECK(b.y.rows == 16);
  CHECK(b.y.cols == 2);  // one-hot
  REQUIRE(b.targets.size() == 16);
  for (int i = 0; i < 16; ++i) {
    CHECK(b.y.at(i, b.targets[size_t(i)]) == 1.0);
    CHECK(b.y.at(i, 1 - b.targets[size_t(i)]) == 0.0);
  }

  harness::Batch full = harness::full_split_batch(reg, reg.valid_idx);
  CHECK(full.x.rows == 120);
  CHECK(full.y.cols == 1);
}

TEST_CASE("csv loader") {
  fs::path p = temp_file("table.csv");
  {
    std::ofstream out(p);
    out << "x0,x1,target\n";
    for (int i = 0; i < 100; ++i)
      out << 0.1 * i << "," << (i % 7) << "," << (i % 3) << "\n";
  }
  Task t = harness::load_csv_task(p.string(), Task::Classification, 5);
  CHECK(t.rows() == 100);
  CHECK(t.dim() == 2);
  CHECK(t.class_count == 3);
  CHECK(int(t.train_idx.size()) == 60);
  CHECK(int(t.valid_idx.size()) == 20);
  CHECK(int(t.test_idx.size()) == 20);
  check_splits(t);
  for (int d = 0; d < t.dim(); ++d) {
    double mean = 0.0;
    for (int i : t.train_idx) mean += t.features.at(i, d);
    mean /= double(t.train_idx.size());
    CHECK(std::abs(mean) < 1e-10);
  }

  fs::path bad = temp_file("bad.csv");
  {
    std::ofstream out(bad);
    out << "x0,x1,label\n1,2,3\n";  // no `target` column
  }
  CHECK_THROWS((void)harness::load_csv_task(bad.string(), Task::Regression, 5));
  CHECK_THROWS((void)harness::load_csv_task("/nonexistent/nope.csv", Task::Regression, 5));
  fs::remove(p);
  fs::remove(bad);
}

TEST_CASE("idx loader") {
  auto put32 = [](std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 8), (unsigned char)v};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  fs::path images = temp_file("tiny-images-idx3-ubyte");
  fs::path labels = temp_file("tiny-labels-idx1-ubyte");
  {
    std::ofstream out(images, std::ios::binary);
    put32(out, 0x00000803);
    put32(out, 20);  // count
    put32(out, 2);   // rows
    put32(out, 2);   // cols
    for (int i = 0; i < 20 * 4; ++i) out.put(char(i % 251));
  }
  {
    std::ofstream out(labels, std::ios::binary);
    put32(out, 0x00000801);
    put32(out, 20);
    for (int i = 0; i < 20; ++i) out.put(char(i % 3));
  }
  Task t = harness::load_idx_images(images.string(), labels.string());
  CHECK(t.kind == Task::Classification);
  CHECK(t.rows() == 20);
  CHECK(t.dim() == 4);
  CHECK(t.class_count == 3);
  CHECK(int(t.train_idx.size()) == 18);  // 90:10 train/valid
  CHECK(int(t.valid_idx.size()) == 2);
  CHECK(t.test_idx.empty());

  // labels file derived from the images path
  Task t2 = harness::load_idx_images(images.string());
  CHECK(t2.rows() == 20);

  fs::path wrong = temp_file("wrong-images-idx3-ubyte");
  {
    std::ofstream out(wrong, std::ios::binary);
    put32(out, 0xdeadbeef);
    put32(out, 1);
    put32(out, 2);
    put32(out, 2);
    for (int i = 0; i < 4; ++i) out.put(char(1));
  }
  CHECK_THROWS_AS((void)harness::load_idx_images(wrong.string(), labels.string()),
                  harness::IdxError);
  fs::remove(images);
  fs::remove(labels);
  fs::remove(wrong);
}

TEST_CASE("steps = 0 reports the untrained metric only") {
  Task t = harness::make_two_moons(3);
  MlpModel m = MlpModel::make({2, 16, 2}, 9);
  auto before = m.params;
  auto loss = harness::builder_from_spec(losses::parse_loss_name("ce"));
  auto opt = OptimizerState::adam(0.01);
  harness::TrainConfig cfg;
  cfg.steps = 0;
  harness::TrainReport r = harness::train(m, loss, opt, t, cfg);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].step == 0);
  CHECK(std::isfinite(r.rows[0].metric));
  CHECK(r.final_valid_metric ==
        doctest::Approx(harness::evaluate_metric(m, t, t.valid_idx)).epsilon(1e-15));
  for (size_t i = 0; i < before.size(); ++i) CHECK(before[i].v == m.params[i].v);
}

TEST_CASE("logistic regression reaches zero error on separable blobs") {
  Task t = separable_task(17);
  MlpModel m = MlpModel::make({2, 2}, 23);  // linear -> logits: logistic regression
  auto loss = harness::builder_from_spec(losses::parse_loss_name("ce"));
  auto opt = OptimizerState::sgd(0.5);
  harness::TrainConfig cfg;
  cfg.steps = 400;
  cfg.batch = 16;
  cfg.seed = 31;
  harness::TrainReport r = harness::train(m, loss, opt, t, cfg);
  CHECK(r.final_test_metric == 0.0);
  CHECK(harness::evaluate_metric(m, t, t.train_idx) == 0.0);
}

TEST_CASE("noise-free regression trains to near-zero mse") {
  Task t = harness::make_synthetic_regression(13, 600, 0.0);
  MlpModel m = MlpModel::make({t.dim(), 16, 1}, 5);
  auto loss = harness::builder_from_spec(losses::parse_loss_name("squared"));
  auto opt = OptimizerState::adam(0.01);
  harness::TrainConfig cfg;
  cfg.steps = 2000;
  cfg.seed = 19;
  (void)harness::train(m, loss, opt, t, cfg);
  CHECK(harness::evaluate_metric(m, t, t.train_idx) < 1e-3);
}

TEST_CASE("two moons classifier beats 5% test error across seeds") {
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Task t = harness::make_two_moons(seed);
    MlpModel m = MlpModel::make({2, 16, 2}, seed * 71 + 1);
    auto loss = harness::builder_from_spec(losses::parse_loss_name("ce"));
    auto opt = OptimizerState::adam(0.01);
    harness::TrainConfig cfg;
    cfg.steps = 500;
    cfg.seed = seed;
    harness::TrainReport r = harness::train(m, loss, opt, t, cfg);
    total += r.final_test_metric;
  }
  CHECK(total / 5.0 < 0.05);
}

TEST_CASE("robust losses shrug off label outliers") {
  double squared_sum = 0.0, cauchy_sum = 0.0, welsh_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto run = [&](const char* name) {
      Task t = harness::make_synthetic_regression(seed);
      harness::inject_label_outliers(t, 0.15, 3.0, seed + 100);
      MlpModel m = MlpModel::make({t.dim(), 16, 1}, seed * 13 + 2);
      auto loss = harness::builder_from_spec(losses::parse_loss_name(name));
      auto opt = OptimizerState::adam(0.01);
      harness::TrainConfig cfg;
      cfg.steps = 500;
      cfg.seed = seed;
      return harness::train(m, loss, opt, t, cfg).final_test_metric;
    };
    squared_sum += run("squared");
    cauchy_sum += run("cauchy:1");
    welsh_sum += run("welsh:1");
  }
  CHECK(cauchy_sum <= squared_sum);
  CHECK(welsh_sum <= squared_sum);
}

TEST_CASE("training reports are byte-reproducible") {
  auto run = [] {
    Task t = harness::make_two_moons(29);
    MlpModel m = MlpModel::make({2, 8, 2}, 4);
    auto loss = harness::builder_from_spec(losses::parse_loss_name("lsr:0.1"));
    auto opt = OptimizerState::adam(0.01);
    harness::TrainConfig cfg;
    cfg.steps = 120;
    cfg.seed = 77;
    return harness::report_to_csv(harness::train(m, loss, opt, t, cfg));
  };
  CHECK(run() == run());
}
