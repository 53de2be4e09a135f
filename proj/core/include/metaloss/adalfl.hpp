#pragma once
// Online adaptive loss-function learning: a small feed-forward meta-loss
// network updated in lockstep with the base model via unrolled
// differentiation, plus the offline initialization stage and the learned
// learning-rate baseline.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metaloss/autodiff.hpp"
#include "metaloss/harness.hpp"

namespace metaloss::adalfl {

// Smooth leaky ReLU: (1/beta) * log(e^{beta x} + 1) * (1 - gamma) + gamma * x.
// Unbounded on both sides for gamma > 0, so the meta-loss surface never
// flattens. Computed through a shifted softplus; |x| up to 1e3+ is safe.
double slrelu_value(double x, double gamma = 0.01, double beta = 10.0);
// d/dx = (e^{beta x} + gamma) / (e^{beta x} + 1)
double slrelu_deriv(double x, double gamma = 0.01, double beta = 10.0);

// Per-output loss net ell_phi(y_i, f_i): input 2 -> hidden -> hidden -> 1,
// smooth leaky ReLU on the hidden *and* output layers. The batch loss is the
// mean over outputs and instances, which makes it invariant to the output
// count. ReluSoftplus is the legacy ablation architecture (ReLU hidden,
// softplus output).
struct MetaLossNet {
  enum Activation { SmoothLeakyRelu, ReluSoftplus };

  Activation activation = SmoothLeakyRelu;
  double gamma = 0.01;
  double beta = 10.0;
  int hidden = 40;
  // w1y, w1f (1 x H: first-layer rows for the y and f inputs), b1 (1 x H),
  // w2 (H x H), b2 (1 x H), w3 (H x 1), b3 (1 x 1)
  std::vector<ad::Tensor> params;

  static MetaLossNet make(std::uint64_t seed, int hidden = 40,
                          Activation activation = SmoothLeakyRelu);
  std::vector<ad::Var> params_as_inputs(ad::Tape& tape) const;

  // Batch loss on the tape: y and f are (n x C); both are flattened to
  // (nC x 1) columns, pushed through the per-output net, and mean-reduced.
  // `phi` supplies the parameters as tape vars (gradients w.r.t. phi exist).
  ad::Var loss(ad::Tape& tape, const std::vector<ad::Var>& phi, ad::Var y, ad::Var f) const;
  ad::Var loss(ad::Tape& tape, ad::Var y, ad::Var f) const;  // parameters as constants

  // Single-pair evaluation ell_phi(y, f) (snapshot grids, diagnostics).
  double value(double y, double f) const;

  bool finite() const;
};

// Mean over outputs of the per-output net: y and f are C-vectors, C >= 1.
// Throws std::invalid_argument on length mismatch.
double meta_loss_value(const MetaLossNet& net, std::span<const double> y,
                       std::span<const double> f);

// JSON artifact: { "kind": "meta-mlp", "layers": [2, H, H, 1], "gamma": g,
// "beta": b, "activation": "slrelu" | "relu-softplus", "weights": [...] }
// with weights flattened row-major in parameter order.
std::string to_json(const MetaLossNet& net);
MetaLossNet meta_net_from_json(const std::string& text);

struct AdaConfig {
  int s_init = 2500;          // offline meta steps
  double eta_offline = 1e-3;  // offline meta rate (Adam)
  double eta_online = 1e-5;   // online meta rate (Adam)
  int s_inner = 1;            // unrolled base steps per offline meta step
  enum MetaSource { Train, Valid } meta_source = Valid;
  double alpha = 0.01;  // base learning rate (SGD)
  int s_train = 500;    // online steps
  int batch = 32;
  int eval_every = 100;
  int snapshot_every = 100;
  std::vector<int> base_hidden = {16};
  std::uint64_t seed = 42;

  void validate() const;  // throws std::invalid_argument
};

std::vector<int> base_dims(const harness::Task& task, const AdaConfig& cfg);

// Offline stage: s_init meta steps, each resetting the base model, taking
// s_inner recorded SGD steps under the meta-loss, and updating phi by Adam on
// the task loss at the updated parameters, measured on a validation batch.
// Throws harness::DivergenceError on a non-finite meta loss.
MetaLossNet offline_init(const MetaLossNet& phi, const harness::Task& task, const AdaConfig& cfg);

// Fixed evaluation grid for loss-shape snapshots. Classification: y in {0,1}
// crossed with f in linspace(0.01, 0.99, 99) (y=0 block first). Regression:
// y = 0, f in linspace(-3, 3, 99).
struct GridPoint {
  double y = 0.0;
  double f = 0.0;
};
std::vector<GridPoint> loss_shape_points(harness::Task::Kind kind);
std::vector<double> loss_shape_values(const MetaLossNet& net, harness::Task::Kind kind);

struct Snapshot {
  int step = 0;
  std::vector<double> values;  // aligned with loss_shape_points
};

struct OnlineResult {
  harness::MlpModel model;      // final base parameters
  MetaLossNet net;              // final meta-loss parameters
  harness::TrainReport report;  // rows carry base and meta loss traces
  std::vector<Snapshot> snapshots;
};

// Lockstep adaptation: the base model is initialized once and never reset;
// every step takes one base SGD step under the current meta-loss, then one
// Adam step on phi through the just-taken base step (task loss on a batch
// from cfg.meta_source). With eta_online = 0 all meta work is skipped and the
// run is bit-identical to plain training under the frozen meta-loss: the base
// batch stream and update arithmetic match harness::train exactly.
OnlineResult online_train(const MetaLossNet& phi0, const harness::Task& task,
                          const AdaConfig& cfg);

// --- learned learning-rate baseline -------------------------------------------
// Identical loop shape, but the meta-parameter is the scalar base rate alpha
// of SGD under the plain task loss. offline_mode resets the base model each
// step (s_init steps); online mode is lockstep (s_train steps).
struct MetaLrResult {
  harness::MlpModel model;
  double alpha_final = 0.0;
  std::vector<double> alpha_trace;  // alpha_0 .. alpha_T
  harness::TrainReport report;
};
MetaLrResult meta_lr_train(double alpha0, const harness::Task& task, const AdaConfig& cfg,
                           bool offline_mode = false);

// One lockstep meta-lr step in isolation: task loss after a single recorded
// SGD step at `alpha` plus d(task loss)/d(alpha). Deterministic in
// (cfg.seed, step); checkable against finite differences over alpha.
struct AlphaProbe {
  double meta_loss = 0.0;
  double alpha_grad = 0.0;
};
AlphaProbe meta_lr_probe(double alpha, const harness::Task& task, const AdaConfig& cfg,
                         int step = 0);

}  // namespace metaloss::adalfl
