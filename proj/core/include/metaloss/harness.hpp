#pragma once
// Base models, parameter initializers, optimizers, dataset ingestion, and the
// minibatch training loop that the meta-learning components drive.

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "metaloss/autodiff.hpp"
#include "metaloss/losses.hpp"

namespace metaloss::harness {

// Deterministic stream derivation: every rng in the toolkit is seeded from
// (seed, stream tags) so runs are reproducible and streams are independent.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

struct Task {
  std::string name;
  enum Kind { Regression, Classification } kind = Regression;
  ad::Tensor features;              // n x d
  std::vector<double> labels;       // regression targets (normalized) or class indices
  int class_count = 0;              // classification only
  std::vector<int> train_idx, valid_idx, test_idx;
  std::vector<double> feature_mean, feature_std;  // train-split statistics
  double label_mean = 0.0, label_std = 1.0;       // regression only

  int dim() const { return features.cols; }
  int rows() const { return features.rows; }
};

struct Batch {
  ad::Tensor x;        // b x d
  ad::Tensor y;        // regression: b x 1; classification: one-hot b x C
  std::vector<int> targets;  // classification class indices
};

Batch sample_batch(const Task& task, const std::vector<int>& split, int batch_size,
                   std::mt19937_64& rng);
Batch full_split_batch(const Task& task, const std::vector<int>& split);

// --- initializers -------------------------------------------------------------
enum class InitMode { Uniform, Normal };
double glorot_bound(int fan_in, int fan_out, InitMode mode);  // uniform bound or normal sigma
double he_bound(int fan_in, InitMode mode);
ad::Tensor glorot_init(int fan_in, int fan_out, InitMode mode, std::mt19937_64& rng);
ad::Tensor he_init(int fan_in, int fan_out, InitMode mode, std::mt19937_64& rng);

// --- model ---------------------------------------------------------------------
// Fully connected ReLU network; the head is linear (regression outputs or
// classification logits). Parameters are ordered W0, b0, W1, b1, ...
struct MlpModel {
  std::vector<int> dims;
  std::vector<ad::Tensor> params;

  static MlpModel make(const std::vector<int>& dims, std::uint64_t seed);
  std::vector<ad::Var> params_as_inputs(ad::Tape& tape) const;
  static ad::Var forward(ad::Tape& tape, const std::vector<ad::Var>& params, ad::Var x);
  void assign(const std::vector<ad::Var>& vars);  // copy var values back into params
  bool finite() const;
};

// --- optimizers -------------------------------------------------------------------
struct OptimizerState {
  enum Kind { Sgd, Momentum, Adam } kind = Sgd;
  double alpha = 0.01;
  double momentum = 0.9;            // velocity coefficient
  double beta1 = 0.9, beta2 = 0.999, eps_adam = 1e-8;
  bool bias_correction = true;      // disable to ablate (raw m, v)
  long step_count = 0;
  std::vector<ad::Tensor> m, v;     // moment buffers, lazily shaped

  static OptimizerState sgd(double alpha);
  static OptimizerState with_momentum(double alpha, double mu = 0.9);
  static OptimizerState adam(double alpha, bool bias_correction = true);
  void step(std::vector<ad::Tensor>& params, const std::vector<ad::Tensor>& grads);
};

// --- dataset presets and loaders ------------------------------------------------------
// Smooth 1-D regression curve with gaussian label noise, 60:20:20 splits,
// features and labels z-normalized on the train split.
Task make_synthetic_regression(std::uint64_t seed, int n = 600, double noise = 0.05);
// Optionally shifts a fraction of train-split labels (robust-loss experiments).
void inject_label_outliers(Task& task, double fraction, double offset, std::uint64_t seed);
// Two interleaved half-moons, 2 classes, 60:20:20 splits, z-normalized.
Task make_two_moons(std::uint64_t seed, int n = 600, double noise = 0.1);

// CSV: RFC-4180-style with a header row; the label column is named "target".
Task load_csv_task(const std::string& path, Task::Kind kind, std::uint64_t seed,
                   double train_frac = 0.6, double valid_frac = 0.2);
// IDX image/label pair (big-endian, magics 0x00000803 / 0x00000801). The labels
// file is derived from the images path ("images" -> "labels", "idx3" -> "idx1")
// unless given. 90:10 train/valid; a second pair may be supplied as the test set.
struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
Task load_idx_images(const std::string& images_path, const std::string& labels_path = "",
                     const std::string& test_images_path = "",
                     const std::string& test_labels_path = "", std::uint64_t seed = 0);

// --- training loop -----------------------------------------------------------------------
// Differentiable loss plugged into the loop: builds the scalar batch loss from
// (tape, batch, predictions). Named losses and loaded artifacts both take this
// shape, so they share one code path.
using LossBuilder = std::function<ad::Var(ad::Tape&, const Batch&, ad::Var pred)>;
LossBuilder builder_from_spec(const losses::LossSpec& spec);

struct StepRow {
  int step = 0;
  double base_loss = 0.0;
  double meta_loss = std::numeric_limits<double>::quiet_NaN();
  double metric = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::vector<StepRow> rows;
  double final_valid_metric = 0.0;
  double final_test_metric = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_echo;
};

struct TrainConfig {
  int steps = 500;
  int batch = 32;
  std::uint64_t seed = 42;
  int eval_every = 100;  // periodic validation metric cadence
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Error rate (classification) or MSE (regression) over a split.
double evaluate_metric(const MlpModel& model, const Task& task, const std::vector<int>& split);

TrainReport train(MlpModel& model, const LossBuilder& loss, OptimizerState& opt, const Task& task,
                  const TrainConfig& cfg);

// CSV with header step,base_loss,meta_loss,metric; missing values are empty.
std::string report_to_csv(const TrainReport& report);

}  // namespace metaloss::harness
