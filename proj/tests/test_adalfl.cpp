#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "metaloss/adalfl.hpp"
#include "metaloss/artifacts.hpp"
#include "metaloss/harness.hpp"

using namespace metaloss;
using adalfl::AdaConfig;
using adalfl::MetaLossNet;

namespace {
AdaConfig quick_cfg(std::uint64_t seed) {
  AdaConfig cfg;
  cfg.seed = seed;
  cfg.s_init = 0;
  cfg.s_train = 60;
  cfg.batch = 16;
  cfg.eval_every = 20;
  cfg.snapshot_every = 20;
  cfg.base_hidden = {8};
  return cfg;
}

bool params_equal(const std::vector<ad::Tensor>& a, const std::vector<ad::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].v != b[i].v) return false;
  return true;
}
}  // namespace

TEST_CASE("smooth leaky relu closed forms") {
  CHECK(adalfl::slrelu_value(0.0) == doctest::Approx(0.06862157087543458).epsilon(1e-14));
  CHECK(adalfl::slrelu_deriv(0.0) == doctest::Approx(0.505).epsilon(1e-14));
  CHECK(std::abs(adalfl::slrelu_value(100.0) - 100.0) < 1e-6);

  // unbounded on both sides, no overflow at extreme inputs
  CHECK(adalfl::slrelu_value(-1e6) == doctest::Approx(0.01 * -1e6).epsilon(1e-9));
  CHECK(std::isfinite(adalfl::slrelu_value(1e3)));
  CHECK(std::isfinite(adalfl::slrelu_value(-1e3)));

  // derivative against finite differences
  for (double x : {-2.0, -0.1, 0.0, 0.3, 5.0}) {
    double num = (adalfl::slrelu_value(x + 1e-6) - adalfl::slrelu_value(x - 1e-6)) / 2e-6;
    CHECK(adalfl::slrelu_deriv(x) == doctest::Approx(num).epsilon(1e-5));
  }
}

TEST_CASE("meta net construction and shapes") {
  MetaLossNet net = MetaLossNet::make(5, 40);
  REQUIRE(net.params.size() == 7);
  CHECK(net.params[0].shape() == ad::Shape{1, 40});  // w1y
  CHECK(net.params[1].shape() == ad::Shape{1, 40});  // w1f
  CHECK(net.params[2].shape() == ad::Shape{1, 40});  // b1
  CHECK(net.params[3].shape() == ad::Shape{40, 40});
  CHECK(net.params[4].shape() == ad::Shape{1, 40});
  CHECK(net.params[5].shape() == ad::Shape{40, 1});
  CHECK(net.params[6].shape() == ad::Shape{1, 1});
  CHECK(net.finite());

  MetaLossNet again = MetaLossNet::make(5, 40);
  CHECK(params_equal(net.params, again.params));
  MetaLossNet other = MetaLossNet::make(6, 40);
  CHECK_FALSE(params_equal(net.params, other.params));
}

TEST_CASE("meta loss is a mean over outputs") {
  MetaLossNet net = MetaLossNet::make(11, 16);

  std::vector<double> y1 = {1.0}, f1 = {0.7};
  CHECK(adalfl::meta_loss_value(net, y1, f1) ==
        doctest::Approx(net.value(1.0, 0.7)).epsilon(1e-14));

  std::vector<double> y = {1.0, 0.0, 0.0}, f = {0.6, 0.3, 0.1};
  double base = adalfl::meta_loss_value(net, y, f);

  std::vector<double> yp = {0.0, 1.0, 0.0}, fp = {0.3, 0.6, 0.1};
  CHECK(adalfl::meta_loss_value(net, yp, fp) == doctest::Approx(base).epsilon(1e-12));

  std::vector<double> yd = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
  std::vector<double> fd = {0.6, 0.3, 0.1, 0.6, 0.3, 0.1};
  CHECK(adalfl::meta_loss_value(net, yd, fd) == doctest::Approx(base).epsilon(1e-12));

  std::vector<double> bad = {1.0, 0.0};
  CHECK_THROWS_AS((void)adalfl::meta_loss_value(net, bad, f), std::invalid_argument);
}

TEST_CASE("tape loss equals the scalar evaluator") {
  MetaLossNet net = MetaLossNet::make(3, 8);
  ad::Tensor y(2, 3), f(2, 3);
  std::vector<double> yv = {1, 0, 0, 0, 1, 0}, fv = {0.5, 0.2, 0.3, 0.1, 0.8, 0.1};
  y.v = yv;
  f.v = fv;
  ad::Tape tape;
  double got = net.loss(tape, tape.constant(y), tape.constant(f)).value().scalar_value();
  double expect = 0.0;
  for (size_t i = 0; i < yv.size(); ++i) expect += net.value(yv[i], fv[i]);
  expect /= double(yv.size());
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("gradients through the meta net match finite differences") {
  MetaLossNet net = MetaLossNet::make(7, 4);
  ad::Tensor y(1, 2), f(1, 2);
  y.v = {1.0, 0.0};
  f.v = {0.65, 0.35};

  ad::Tape tape;
  std::vector<ad::Var> phi = net.params_as_inputs(tape);
  ad::Var fv = tape.input(f);
  ad::Var l = net.loss(tape, phi, tape.constant(y), fv);
  auto gphi = tape.backward(l, phi);
  auto gf = tape.backward(l, {fv});

  const double h = 1e-6;
  for (size_t p = 0; p < net.params.size(); ++p) {
    for (int k = 0; k < net.params[p].count(); ++k) {
      MetaLossNet up = net, dn = net;
      up.params[p].v[size_t(k)] += h;
      dn.params[p].v[size_t(k)] -= h;
      double lu = adalfl::meta_loss_value(up, y.v, f.v);
      double ld = adalfl::meta_loss_value(dn, y.v, f.v);
      double numeric = (lu - ld) / (2 * h);
      double analytic = gphi[p].value().v[size_t(k)];
      CHECK(std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)) <= 1e-5);
    }
  }
  for (int k = 0; k < 2; ++k) {
    auto fu = f.v, fdn = f.v;
    fu[size_t(k)] += h;
    fdn[size_t(k)] -= h;
    double numeric =
        (adalfl::meta_loss_value(net, y.v, fu) - adalfl::meta_loss_value(net, y.v, fdn)) /
        (2 * h);
    CHECK(std::abs(gf[0].value().v[size_t(k)] - numeric) / std::max(1.0, std::abs(numeric)) <=
          1e-5);
  }
}

TEST_CASE("json artifact round trip") {
  MetaLossNet net = MetaLossNet::make(9, 12);
  MetaLossNet back = adalfl::meta_net_from_json(adalfl::to_json(net));
  CHECK(back.hidden == net.hidden);
  CHECK(back.gamma == net.gamma);
  CHECK(back.beta == net.beta);
  CHECK(back.activation == net.activation);
  CHECK(params_equal(back.params, net.params));

  MetaLossNet abl = MetaLossNet::make(9, 12, MetaLossNet::ReluSoftplus);
  MetaLossNet abl2 = adalfl::meta_net_from_json(adalfl::to_json(abl));
  CHECK(abl2.activation == MetaLossNet::ReluSoftplus);
  CHECK(abl2.value(1.0, 0.5) == doctest::Approx(abl.value(1.0, 0.5)).epsilon(1e-15));

  CHECK_THROWS_AS((void)adalfl::meta_net_from_json("{\"kind\":\"meta-mlp\"}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)adalfl::meta_net_from_json(
          "{\"kind\":\"meta-mlp\",\"layers\":[2,4,4,1],\"gamma\":0.01,\"beta\":10,"
          "\"activation\":\"slrelu\",\"weights\":[1,2,3]}"),
      std::invalid_argument);
}

TEST_CASE("loss shape grids") {
  auto cls = adalfl::loss_shape_points(harness::Task::Classification);
  REQUIRE(cls.size() == 198);
  CHECK(cls[0].y == 0.0);
  CHECK(cls[0].f == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(cls[98].f == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(cls[99].y == 1.0);

  auto reg = adalfl::loss_shape_points(harness::Task::Regression);
  REQUIRE(reg.size() == 99);
  CHECK(reg[0].f == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(reg[98].f == doctest::Approx(3.0).epsilon(1e-12));

  MetaLossNet net = MetaLossNet::make(2, 8);
  auto vals = adalfl::loss_shape_values(net, harness::Task::Classification);
  CHECK(vals.size() == 198);
  for (double v : vals) CHECK(std::isfinite(v));
}

TEST_CASE("offline initialization") {
  harness::Task task = harness::make_two_moons(4);
  MetaLossNet phi = MetaLossNet::make(21, 8);

  AdaConfig cfg = quick_cfg(13);
  cfg.s_init = 0;
  MetaLossNet same = adalfl::offline_init(phi, task, cfg);
  CHECK(params_equal(same.params, phi.params));

  cfg.s_init = 5;
  MetaLossNet moved = adalfl::offline_init(phi, task, cfg);
  CHECK_FALSE(params_equal(moved.params, phi.params));
  CHECK(moved.finite());
  MetaLossNet again = adalfl::offline_init(phi, task, cfg);
  CHECK(params_equal(again.params, moved.params));
}

TEST_CASE("online eta = 0 is bit-identical to fixed-loss training") {
  harness::Task task = harness::make_two_moons(8);
  MetaLossNet phi = MetaLossNet::make(33, 8);

  AdaConfig cfg = quick_cfg(19);
  cfg.eta_online = 0.0;
  adalfl::OnlineResult frozen = adalfl::online_train(phi, task, cfg);

  harness::MlpModel model = harness::MlpModel::make(adalfl::base_dims(task, cfg), cfg.seed);
  auto builder = artifacts::builder_from_meta_net(phi);
  auto opt = harness::OptimizerState::sgd(cfg.alpha);
  harness::TrainConfig tc;
  tc.steps = cfg.s_train;
  tc.batch = cfg.batch;
  tc.seed = cfg.seed;
  tc.eval_every = cfg.eval_every;
  harness::TrainReport plain = harness::train(model, builder, opt, task, tc);

  CHECK(params_equal(frozen.model.params, model.params));
  CHECK(harness::report_to_csv(frozen.report) == harness::report_to_csv(plain));
  CHECK(params_equal(frozen.net.params, phi.params));  // meta params untouched
}

TEST_CASE("online adaptation moves the loss shape") {
  harness::Task task = harness::make_two_moons(14);
  MetaLossNet phi = MetaLossNet::make(41, 8);
  AdaConfig cfg = quick_cfg(23);
  cfg.eta_online = 1e-3;  // exaggerated rate so the short run visibly adapts

  adalfl::OnlineResult r = adalfl::online_train(phi, task, cfg);
  REQUIRE(r.snapshots.size() >= 2);
  CHECK(r.snapshots.front().step == 0);
  CHECK(r.snapshots.back().step == cfg.s_train);
  double max_abs = 0.0;
  const auto& first = r.snapshots.front().values;
  const auto& last = r.snapshots.back().values;
  REQUIRE(first.size() == last.size());
  for (size_t i = 0; i < first.size(); ++i)
    max_abs = std::max(max_abs, std::abs(first[i] - last[i]));
  CHECK(max_abs > 0.0);

  // meta losses are recorded in the trace
  bool any_meta = false;
  for (const auto& row : r.report.rows)
    if (std::isfinite(row.meta_loss)) any_meta = true;
  CHECK(any_meta);

  // determinism
  adalfl::OnlineResult r2 = adalfl::online_train(phi, task, cfg);
  CHECK(harness::report_to_csv(r2.report) == harness::report_to_csv(r.report));
  CHECK(params_equal(r2.model.params, r.model.params));
  CHECK(params_equal(r2.net.params, r.net.params));
}

TEST_CASE("learned learning rate baseline") {
  harness::Task task = harness::make_two_moons(28);
  AdaConfig cfg = quick_cfg(37);

  // probe gradient against finite differences over alpha
  const double alpha = 0.05, h = 1e-6;
  adalfl::AlphaProbe p = adalfl::meta_lr_probe(alpha, task, cfg, 0);
  double lu = adalfl::meta_lr_probe(alpha + h, task, cfg, 0).meta_loss;
  double ld = adalfl::meta_lr_probe(alpha - h, task, cfg, 0).meta_loss;
  double numeric = (lu - ld) / (2 * h);
  CHECK(std::abs(p.alpha_grad - numeric) / std::max(1.0, std::abs(numeric)) <= 1e-4);

  // eta = 0: constant alpha trace
  AdaConfig frozen = cfg;
  frozen.eta_online = 0.0;
  adalfl::MetaLrResult r0 = adalfl::meta_lr_train(0.05, task, frozen);
  REQUIRE(!r0.alpha_trace.empty());
  for (double a : r0.alpha_trace) CHECK(a == 0.05);

  // adaptation moves alpha and reproduces under the same seed
  AdaConfig live = cfg;
  live.eta_online = 1e-3;
  adalfl::MetaLrResult r1 = adalfl::meta_lr_train(0.05, task, live);
  CHECK(int(r1.alpha_trace.size()) == cfg.s_train + 1);
  CHECK(r1.alpha_final == r1.alpha_trace.back());
  bool moved = false;
  for (double a : r1.alpha_trace)
    if (a != 0.05) moved = true;
  CHECK(moved);
  adalfl::MetaLrResult r2 = adalfl::meta_lr_train(0.05, task, live);
  CHECK(r2.alpha_trace == r1.alpha_trace);

  // offline mode runs s_init steps and stays finite
  AdaConfig off = cfg;
  off.s_init = 5;
  off.eta_online = 1e-3;
  adalfl::MetaLrResult ro = adalfl::meta_lr_train(0.05, task, off, /*offline_mode=*/true);
  CHECK(int(ro.alpha_trace.size()) == off.s_init + 1);
  CHECK(std::isfinite(ro.alpha_final));
}

TEST_CASE("config validation") {
  AdaConfig bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  AdaConfig bad2;
  bad2.s_inner = 0;
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
  AdaConfig ok;
  CHECK_NOTHROW(ok.validate());
}
