#include "metaloss/adalfl.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace metaloss::adalfl {

namespace {

using harness::derive_seed;

constexpr std::uint64_t kTagNetInit = 0x93e7;
constexpr std::uint64_t kTagOffTheta = 0x0ff7;
constexpr std::uint64_t kTagOffBase = 0x0ffb;
constexpr std::uint64_t kTagOffMeta = 0x0ff3;
constexpr std::uint64_t kTagOnBase = 0xba7c4;  // matches the plain training loop
constexpr std::uint64_t kTagOnMeta = 0x3e7a1;
constexpr std::uint64_t kTagLrTheta = 0x17a0;
constexpr std::uint64_t kTagLrBase = 0x17ab;
constexpr std::uint64_t kTagLrMeta = 0x17ac;

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

ad::Var loss_input(const harness::Task& task, ad::Var pred) {
  if (task.kind == harness::Task::Classification) return ad::vexp(ad::log_softmax(pred));
  return pred;
}

ad::Var task_loss(const harness::Task& task, ad::Tape& tape, const harness::Batch& b,
                  ad::Var pred) {
  if (task.kind == harness::Task::Classification)
    return ad::neg(ad::mean(ad::row_sum(ad::mul(tape.constant(b.y), ad::log_softmax(pred)))));
  return ad::mean(ad::square(ad::sub(tape.constant(b.y), pred)));
}

ad::Var hidden_act(const MetaLossNet& net, ad::Var x) {
  if (net.activation == MetaLossNet::ReluSoftplus) return ad::relu(x);
  return ad::slrelu(x, net.gamma, net.beta);
}

ad::Var output_act(const MetaLossNet& net, ad::Var x) {
  if (net.activation == MetaLossNet::ReluSoftplus) return ad::softplus(x);
  return ad::slrelu(x, net.gamma, net.beta);
}

}  // namespace

double slrelu_value(double x, double gamma, double beta) {
  double z = beta * x;
  double sp = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  return sp / beta * (1.0 - gamma) + gamma * x;
}

double slrelu_deriv(double x, double gamma, double beta) {
  return (1.0 - gamma) * stable_sigmoid(beta * x) + gamma;
}

MetaLossNet MetaLossNet::make(std::uint64_t seed, int hidden, Activation activation) {
  if (hidden < 1) throw std::invalid_argument("MetaLossNet: hidden must be >= 1");
  MetaLossNet net;
  net.activation = activation;
  net.hidden = hidden;
  std::mt19937_64 rng(derive_seed(seed, kTagNetInit));

  ad::Tensor w1 = harness::he_init(2, hidden, harness::InitMode::Normal, rng);
  ad::Tensor w1y(1, hidden), w1f(1, hidden);
  for (int c = 0; c < hidden; ++c) {
    w1y.at(0, c) = w1.at(0, c);
    w1f.at(0, c) = w1.at(1, c);
  }
  net.params.push_back(std::move(w1y));
  net.params.push_back(std::move(w1f));
  net.params.push_back(ad::Tensor(1, hidden));
  net.params.push_back(harness::he_init(hidden, hidden, harness::InitMode::Normal, rng));
  net.params.push_back(ad::Tensor(1, hidden));
  net.params.push_back(harness::he_init(hidden, 1, harness::InitMode::Normal, rng));
  net.params.push_back(ad::Tensor(1, 1));
  return net;
}

std::vector<ad::Var> MetaLossNet::params_as_inputs(ad::Tape& tape) const {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const ad::Tensor& p : params) vars.push_back(tape.input(p));
  return vars;
}

ad::Var MetaLossNet::loss(ad::Tape&, const std::vector<ad::Var>& phi, ad::Var y,
                          ad::Var f) const {
  if (phi.size() != 7) throw std::invalid_argument("MetaLossNet::loss: expected 7 parameters");
  ad::Shape ys = y.shape(), fs = f.shape();
  if (!(ys == fs)) throw std::invalid_argument("MetaLossNet::loss: y/f shape mismatch");
  int m = ys.count();
  ad::Var yc = ad::reshape(y, m, 1);
  ad::Var fc = ad::reshape(f, m, 1);
  ad::Var h1 = hidden_act(*this,
      ad::add(ad::add(ad::matmul(yc, phi[0]), ad::matmul(fc, phi[1])), phi[2]));
  ad::Var h2 = hidden_act(*this, ad::add(ad::matmul(h1, phi[3]), phi[4]));
  ad::Var out = output_act(*this, ad::add(ad::matmul(h2, phi[5]), phi[6]));
  return ad::mean(out);
}

ad::Var MetaLossNet::loss(ad::Tape& tape, ad::Var y, ad::Var f) const {
  std::vector<ad::Var> phi;
  phi.reserve(params.size());
  for (const ad::Tensor& p : params) phi.push_back(tape.constant(p));
  return loss(tape, phi, y, f);
}

double MetaLossNet::value(double y, double f) const {
  ad::Tape tape;
  ad::Var yv = tape.constant(ad::Tensor::scalar(y));
  ad::Var fv = tape.constant(ad::Tensor::scalar(f));
  return loss(tape, yv, fv).value().scalar_value();
}

bool MetaLossNet::finite() const {
  for (const ad::Tensor& p : params)
    if (!p.all_finite()) return false;
  return true;
}

double meta_loss_value(const MetaLossNet& net, std::span<const double> y,
                       std::span<const double> f) {
  if (y.size() != f.size() || y.empty())
    throw std::invalid_argument("meta_loss_value: y/f length mismatch");
  ad::Tape tape;
  ad::Var yv = tape.constant(ad::Tensor::row(std::vector<double>(y.begin(), y.end())));
  ad::Var fv = tape.constant(ad::Tensor::row(std::vector<double>(f.begin(), f.end())));
  return net.loss(tape, yv, fv).value().scalar_value();
}

std::string to_json(const MetaLossNet& net) {
  nlohmann::ordered_json j;
  j["kind"] = "meta-mlp";
  j["layers"] = {2, net.hidden, net.hidden, 1};
  j["gamma"] = net.gamma;
  j["beta"] = net.beta;
  j["activation"] = net.activation == MetaLossNet::ReluSoftplus ? "relu-softplus" : "slrelu";
  std::vector<double> flat;
  for (const ad::Tensor& p : net.params) flat.insert(flat.end(), p.v.begin(), p.v.end());
  j["weights"] = flat;
  return j.dump(2) + "\n";
}

MetaLossNet meta_net_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("meta_net_from_json: ") + e.what());
  }
  if (j.value("kind", "") != "meta-mlp")
    throw std::invalid_argument("meta_net_from_json: kind is not 'meta-mlp'");
  std::vector<int> layers;
  std::vector<double> flat;
  MetaLossNet net;
  try {
    layers = j.at("layers").get<std::vector<int>>();
    net.gamma = j.value("gamma", 0.01);
    net.beta = j.value("beta", 10.0);
    flat = j.at("weights").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("meta_net_from_json: ") + e.what());
  }
  if (layers.size() != 4 || layers[0] != 2 || layers[3] != 1 || layers[1] != layers[2] ||
      layers[1] < 1)
    throw std::invalid_argument("meta_net_from_json: unsupported layer shape");
  int H = layers[1];
  net.hidden = H;
  std::string act = j.value("activation", "slrelu");
  if (act == "slrelu") {
    net.activation = MetaLossNet::SmoothLeakyRelu;
  } else if (act == "relu-softplus") {
    net.activation = MetaLossNet::ReluSoftplus;
  } else {
    throw std::invalid_argument("meta_net_from_json: unknown activation '" + act + "'");
  }
  size_t expected = size_t(H) * 3 + size_t(H) * H + size_t(H) * 2 + 1;
  if (flat.size() != expected)
    throw std::invalid_argument("meta_net_from_json: weight count mismatch");

  auto take = [&flat](size_t& pos, int r, int c) {
    ad::Tensor t(r, c);
    std::copy(flat.begin() + long(pos), flat.begin() + long(pos) + r * c, t.v.begin());
    pos += size_t(r) * c;
    return t;
  };
  size_t pos = 0;
  net.params.push_back(take(pos, 1, H));
  net.params.push_back(take(pos, 1, H));
  net.params.push_back(take(pos, 1, H));
  net.params.push_back(take(pos, H, H));
  net.params.push_back(take(pos, 1, H));
  net.params.push_back(take(pos, H, 1));
  net.params.push_back(take(pos, 1, 1));
  return net;
}

void AdaConfig::validate() const {
  if (s_init < 0 || s_train < 0) throw std::invalid_argument("AdaConfig: step counts must be >= 0");
  if (s_inner < 1) throw std::invalid_argument("AdaConfig: s_inner must be >= 1");
  if (eta_offline < 0 || eta_online < 0) throw std::invalid_argument("AdaConfig: rates must be >= 0");
  if (alpha <= 0) throw std::invalid_argument("AdaConfig: alpha must be > 0");
  if (batch < 1) throw std::invalid_argument("AdaConfig: batch must be >= 1");
  if (eval_every < 0 || snapshot_every < 0)
    throw std::invalid_argument("AdaConfig: cadences must be >= 0");
}

std::vector<int> base_dims(const harness::Task& task, const AdaConfig& cfg) {
  std::vector<int> dims{task.dim()};
  dims.insert(dims.end(), cfg.base_hidden.begin(), cfg.base_hidden.end());
  dims.push_back(task.kind == harness::Task::Classification ? task.class_count : 1);
  return dims;
}

MetaLossNet offline_init(const MetaLossNet& phi_in, const harness::Task& task,
                         const AdaConfig& cfg) {
  cfg.validate();
  if (task.train_idx.empty() || task.valid_idx.empty())
    throw std::invalid_argument("offline_init: task needs train and valid splits");
  MetaLossNet net = phi_in;
  if (cfg.s_init == 0 || cfg.eta_offline == 0.0) return net;

  harness::OptimizerState opt = harness::OptimizerState::adam(cfg.eta_offline);
  std::mt19937_64 base_rng(derive_seed(cfg.seed, kTagOffBase));
  std::mt19937_64 meta_rng(derive_seed(cfg.seed, kTagOffMeta));
  std::vector<int> dims = base_dims(task, cfg);

  for (int step = 0; step < cfg.s_init; ++step) {
    harness::MlpModel model =
        harness::MlpModel::make(dims, derive_seed(cfg.seed, kTagOffTheta, std::uint64_t(step)));
    ad::Tape tape;
    std::vector<ad::Var> phi = net.params_as_inputs(tape);
    std::vector<ad::Var> theta = model.params_as_inputs(tape);
    ad::Var rate = tape.scalar(cfg.alpha);
    for (int k = 0; k < cfg.s_inner; ++k) {
      harness::Batch b = harness::sample_batch(task, task.train_idx, cfg.batch, base_rng);
      ad::Var pred = harness::MlpModel::forward(tape, theta, tape.constant(b.x));
      ad::Var inner = net.loss(tape, phi, tape.constant(b.y), loss_input(task, pred));
      std::vector<ad::Var> g = tape.backward(inner, theta, /*create_graph=*/true);
      for (size_t i = 0; i < theta.size(); ++i)
        theta[i] = ad::sub(theta[i], ad::mul(rate, g[i]));
    }
    harness::Batch mb = harness::sample_batch(task, task.valid_idx, cfg.batch, meta_rng);
    ad::Var mpred = harness::MlpModel::forward(tape, theta, tape.constant(mb.x));
    ad::Var ml = task_loss(task, tape, mb, mpred);
    if (!std::isfinite(ml.value().scalar_value()))
      throw harness::DivergenceError("offline_init: non-finite meta loss at step " +
                                     std::to_string(step));
    std::vector<ad::Var> mg = tape.backward(ml, phi);
    std::vector<ad::Tensor> gts;
    gts.reserve(mg.size());
    for (ad::Var g : mg) gts.push_back(g.value());
    opt.step(net.params, gts);
    if (!net.finite())
      throw harness::DivergenceError("offline_init: meta parameters diverged at step " +
                                     std::to_string(step));
  }
  return net;
}

std::vector<GridPoint> loss_shape_points(harness::Task::Kind kind) {
  std::vector<GridPoint> pts;
  if (kind == harness::Task::Classification) {
    pts.reserve(198);
    for (int yi = 0; yi <= 1; ++yi)
      for (int i = 0; i < 99; ++i)
        pts.push_back({double(yi), 0.01 + double(i) * (0.98 / 98.0)});
  } else {
    pts.reserve(99);
    for (int i = 0; i < 99; ++i) pts.push_back({0.0, -3.0 + double(i) * (6.0 / 98.0)});
  }
  return pts;
}

std::vector<double> loss_shape_values(const MetaLossNet& net, harness::Task::Kind kind) {
  std::vector<GridPoint> pts = loss_shape_points(kind);
  std::vector<double> vals;
  vals.reserve(pts.size());
  for (const GridPoint& p : pts) vals.push_back(net.value(p.y, p.f));
  return vals;
}

OnlineResult online_train(const MetaLossNet& phi0, const harness::Task& task,
                          const AdaConfig& cfg) {
  cfg.validate();
  if (task.train_idx.empty())
    throw std::invalid_argument("online_train: task needs a train split");
  const std::vector<int>& meta_split =
      cfg.meta_source == AdaConfig::Train ? task.train_idx : task.valid_idx;
  const bool online = cfg.eta_online != 0.0;
  if (online && meta_split.empty())
    throw std::invalid_argument("online_train: meta-objective split is empty");

  auto t0 = std::chrono::steady_clock::now();
  OnlineResult out;
  out.net = phi0;
  out.model = harness::MlpModel::make(base_dims(task, cfg), cfg.seed);

  harness::OptimizerState base_opt = harness::OptimizerState::sgd(cfg.alpha);
  harness::OptimizerState meta_opt = harness::OptimizerState::adam(cfg.eta_online);
  std::mt19937_64 base_rng(derive_seed(cfg.seed, kTagOnBase));
  std::mt19937_64 meta_rng(derive_seed(cfg.seed, kTagOnMeta));

  out.report.seed = cfg.seed;
  out.report.config_echo = "mode=online,steps=" + std::to_string(cfg.s_train) +
                           ",batch=" + std::to_string(cfg.batch) + ",task=" + task.name;

  harness::StepRow row0;
  row0.step = 0;
  row0.base_loss = std::numeric_limits<double>::quiet_NaN();
  row0.metric = harness::evaluate_metric(out.model, task, task.valid_idx);
  out.report.rows.push_back(row0);
  out.snapshots.push_back({0, loss_shape_values(out.net, task.kind)});

  for (int step = 1; step <= cfg.s_train; ++step) {
    harness::Batch b = harness::sample_batch(task, task.train_idx, cfg.batch, base_rng);
    ad::Tape tape;
    std::vector<ad::Var> phi = out.net.params_as_inputs(tape);
    std::vector<ad::Var> theta = out.model.params_as_inputs(tape);
    ad::Var pred = harness::MlpModel::forward(tape, theta, tape.constant(b.x));
    ad::Var l = out.net.loss(tape, phi, tape.constant(b.y), loss_input(task, pred));
    double lv = l.value().scalar_value();
    if (!std::isfinite(lv))
      throw harness::DivergenceError("online_train: non-finite loss at step " +
                                     std::to_string(step));
    std::vector<ad::Var> g = tape.backward(l, theta, /*create_graph=*/online);

    double meta_value = std::numeric_limits<double>::quiet_NaN();
    if (online) {
      ad::Var rate = tape.scalar(cfg.alpha);
      std::vector<ad::Var> theta2(theta.size());
      for (size_t i = 0; i < theta.size(); ++i)
        theta2[i] = ad::sub(theta[i], ad::mul(rate, g[i]));
      harness::Batch mb = harness::sample_batch(task, meta_split, cfg.batch, meta_rng);
      ad::Var mpred = harness::MlpModel::forward(tape, theta2, tape.constant(mb.x));
      ad::Var ml = task_loss(task, tape, mb, mpred);
      meta_value = ml.value().scalar_value();
      if (!std::isfinite(meta_value))
        throw harness::DivergenceError("online_train: non-finite meta loss at step " +
                                       std::to_string(step));
      std::vector<ad::Var> mg = tape.backward(ml, phi);
      std::vector<ad::Tensor> mts;
      mts.reserve(mg.size());
      for (ad::Var gv : mg) mts.push_back(gv.value());
      meta_opt.step(out.net.params, mts);
      if (!out.net.finite())
        throw harness::DivergenceError("online_train: meta parameters diverged at step " +
                                       std::to_string(step));
      out.model.assign(theta2);  // commit the recorded base step
    } else {
      // frozen meta-loss: exactly the plain training loop's update
      std::vector<ad::Tensor> gts;
      gts.reserve(g.size());
      for (ad::Var gv : g) gts.push_back(gv.value());
      base_opt.step(out.model.params, gts);
    }
    if (!out.model.finite())
      throw harness::DivergenceError("online_train: parameters diverged at step " +
                                     std::to_string(step));

    harness::StepRow row;
    row.step = step;
    row.base_loss = lv;
    row.meta_loss = meta_value;
    if (cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.s_train))
      row.metric = harness::evaluate_metric(out.model, task, task.valid_idx);
    out.report.rows.push_back(row);

    if (cfg.snapshot_every > 0 && (step % cfg.snapshot_every == 0 || step == cfg.s_train))
      out.snapshots.push_back({step, loss_shape_values(out.net, task.kind)});
  }

  out.report.final_valid_metric = harness::evaluate_metric(out.model, task, task.valid_idx);
  out.report.final_test_metric = harness::evaluate_metric(out.model, task, task.test_idx);
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

MetaLrResult meta_lr_train(double alpha0, const harness::Task& task, const AdaConfig& cfg,
                           bool offline_mode) {
  cfg.validate();
  if (alpha0 <= 0) throw std::invalid_argument("meta_lr_train: alpha0 must be > 0");
  if (task.train_idx.empty())
    throw std::invalid_argument("meta_lr_train: task needs a train split");
  const std::vector<int>& meta_split =
      cfg.meta_source == AdaConfig::Train ? task.train_idx : task.valid_idx;
  const double eta = offline_mode ? cfg.eta_offline : cfg.eta_online;
  const int steps = offline_mode ? cfg.s_init : cfg.s_train;
  if (eta != 0.0 && meta_split.empty())
    throw std::invalid_argument("meta_lr_train: meta-objective split is empty");

  auto t0 = std::chrono::steady_clock::now();
  MetaLrResult out;
  std::vector<int> dims = base_dims(task, cfg);
  out.model = harness::MlpModel::make(dims, cfg.seed);
  double alpha = alpha0;
  out.alpha_trace.push_back(alpha);

  std::mt19937_64 base_rng(derive_seed(cfg.seed, kTagLrBase));
  std::mt19937_64 meta_rng(derive_seed(cfg.seed, kTagLrMeta));

  out.report.seed = cfg.seed;
  out.report.config_echo = std::string("mode=") + (offline_mode ? "offline" : "online") +
                           ",steps=" + std::to_string(steps) + ",task=" + task.name;
  harness::StepRow row0;
  row0.step = 0;
  row0.base_loss = std::numeric_limits<double>::quiet_NaN();
  row0.metric = harness::evaluate_metric(out.model, task, task.valid_idx);
  out.report.rows.push_back(row0);

  for (int step = 1; step <= steps; ++step) {
    if (offline_mode)
      out.model = harness::MlpModel::make(dims, derive_seed(cfg.seed, kTagLrTheta,
                                                            std::uint64_t(step)));
    harness::Batch b = harness::sample_batch(task, task.train_idx, cfg.batch, base_rng);
    ad::Tape tape;
    ad::Var avar = tape.input(ad::Tensor::scalar(alpha));
    std::vector<ad::Var> theta = out.model.params_as_inputs(tape);
    ad::Var pred = harness::MlpModel::forward(tape, theta, tape.constant(b.x));
    ad::Var l = task_loss(task, tape, b, pred);
    double lv = l.value().scalar_value();
    if (!std::isfinite(lv))
      throw harness::DivergenceError("meta_lr_train: non-finite loss at step " +
                                     std::to_string(step));
    std::vector<ad::Var> g = tape.backward(l, theta, /*create_graph=*/true);
    std::vector<ad::Var> theta2(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) theta2[i] = ad::sub(theta[i], ad::mul(avar, g[i]));

    double meta_value = std::numeric_limits<double>::quiet_NaN();
    if (eta != 0.0) {
      harness::Batch mb = harness::sample_batch(task, meta_split, cfg.batch, meta_rng);
      ad::Var mpred = harness::MlpModel::forward(tape, theta2, tape.constant(mb.x));
      ad::Var ml = task_loss(task, tape, mb, mpred);
      meta_value = ml.value().scalar_value();
      if (!std::isfinite(meta_value))
        throw harness::DivergenceError("meta_lr_train: non-finite meta loss at step " +
                                       std::to_string(step));
      std::vector<ad::Var> da = tape.backward(ml, {avar});
      alpha -= eta * da[0].value().scalar_value();
      if (!std::isfinite(alpha))
        throw harness::DivergenceError("meta_lr_train: alpha diverged at step " +
                                       std::to_string(step));
    }
    if (!offline_mode) {
      out.model.assign(theta2);
      if (!out.model.finite())
        throw harness::DivergenceError("meta_lr_train: parameters diverged at step " +
                                       std::to_string(step));
    }
    out.alpha_trace.push_back(alpha);

    harness::StepRow row;
    row.step = step;
    row.base_loss = lv;
    row.meta_loss = meta_value;
    if (cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == steps))
      row.metric = harness::evaluate_metric(out.model, task, task.valid_idx);
    out.report.rows.push_back(row);
  }

  out.alpha_final = alpha;
  out.report.final_valid_metric = harness::evaluate_metric(out.model, task, task.valid_idx);
  out.report.final_test_metric = harness::evaluate_metric(out.model, task, task.test_idx);
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

AlphaProbe meta_lr_probe(double alpha, const harness::Task& task, const AdaConfig& cfg,
                         int step) {
  if (task.train_idx.empty())
    throw std::invalid_argument("meta_lr_probe: task needs a train split");
  const std::vector<int>& meta_split =
      cfg.meta_source == AdaConfig::Train ? task.train_idx : task.valid_idx;
  if (meta_split.empty()) throw std::invalid_argument("meta_lr_probe: meta split is empty");

  harness::MlpModel model = harness::MlpModel::make(
      base_dims(task, cfg), derive_seed(cfg.seed, kTagLrTheta, std::uint64_t(step)));
  std::mt19937_64 base_rng(derive_seed(cfg.seed, kTagLrBase, std::uint64_t(step)));
  std::mt19937_64 meta_rng(derive_seed(cfg.seed, kTagLrMeta, std::uint64_t(step)));

  ad::Tape tape;
  ad::Var avar = tape.input(ad::Tensor::scalar(alpha));
  std::vector<ad::Var> theta = model.params_as_inputs(tape);
  harness::Batch b = harness::sample_batch(task, task.train_idx, cfg.batch, base_rng);
  ad::Var pred = harness::MlpModel::forward(tape, theta, tape.constant(b.x));
  ad::Var l = task_loss(task, tape, b, pred);
  std::vector<ad::Var> g = tape.backward(l, theta, /*create_graph=*/true);
  std::vector<ad::Var> theta2(theta.size());
  for (size_t i = 0; i < theta.size(); ++i) theta2[i] = ad::sub(theta[i], ad::mul(avar, g[i]));

  harness::Batch mb = harness::sample_batch(task, meta_split, cfg.batch, meta_rng);
  ad::Var mpred = harness::MlpModel::forward(tape, theta2, tape.constant(mb.x));
  ad::Var ml = task_loss(task, tape, mb, mpred);

  AlphaProbe probe;
  probe.meta_loss = ml.value().scalar_value();
  std::vector<ad::Var> da = tape.backward(ml, {avar});
  probe.alpha_grad = da[0].value().scalar_value();
  return probe;
}

}  // namespace metaloss::adalfl
