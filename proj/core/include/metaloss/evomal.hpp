#pragma once
// Evolved model-agnostic loss search: GP over symbolic losses, gradient-based
// local search of the transitioned network weights via unrolled
// differentiation, and a filtered fitness pipeline (structural-equivalence
// cache -> rejection protocol -> gradient-signature cache -> partial training).

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "metaloss/harness.hpp"
#include "metaloss/lossnet.hpp"
#include "metaloss/symbolic.hpp"

namespace metaloss::evomal {

struct MetaConfig {
  int s_meta = 250;          // meta gradient steps of local search
  int s_base = 1;            // unrolled inner steps per meta step
  int s_testing = 500;       // partial-training steps behind the fitness score
  double alpha = 0.02;       // base learning rate (inner SGD)
  double eta = 1e-3;         // meta learning rate (Adam on the edge weights)
  bool local_search = true;  // off: weights stay at init (pure GP search)
  int rejection_batch = 256;
  int rejection_steps = 100;
  double rejection_lr = 0.05;
  int probe_batch = 64;      // instances behind the gradient signature
  int batch = 32;            // inner/meta/evaluation batch size
  std::vector<int> base_hidden = {16};
  int workers = 1;

  void validate() const;  // throws std::invalid_argument
};

// Base-model layer dims for a task under this config (linear head; width C
// for classification, 1 for regression).
std::vector<int> base_dims(const harness::Task& task, const MetaConfig& cfg);

struct FitnessRecord {
  enum Verdict { Evaluated, EquivHit, Rejected, GradDup };

  std::string key;         // structural key of the source tree
  std::string expression;  // prefix text, non-negativity wrapper included
  net::LossNetwork network;
  double fitness = 0.0;    // validation error rate / MSE; lower is better
  Verdict verdict = Evaluated;
  int generation = 0;
  std::uint64_t seed = 0;  // candidate stream (weight init + local search)
  double wall_seconds = 0.0;
};

std::string_view verdict_name(FitnessRecord::Verdict v);

// Worst-case sentinel: the largest finite double, so ranking stays total.
inline constexpr double kWorstFitness = std::numeric_limits<double>::max();

// --- local search -----------------------------------------------------------
// S_meta iterations; each resets the base model to a fresh initialization,
// takes s_base recorded SGD steps under the candidate loss, measures the task
// loss (cross-entropy / squared) on the stepped batch at the updated
// parameters, and applies one Adam step to the edge weights on its gradient.
// Multi-task lists sum the per-task meta losses. Throws
// harness::DivergenceError on a non-finite meta loss.
net::LossNetwork optimize_loss(const net::LossNetwork& n, const std::vector<harness::Task>& tasks,
                               const MetaConfig& cfg, std::uint64_t seed);
net::LossNetwork optimize_loss(const net::LossNetwork& n, const harness::Task& task,
                               const MetaConfig& cfg, std::uint64_t seed);

// One unrolled meta step in isolation: the meta-loss value and its gradient
// w.r.t. the edge weights (edge order). Deterministic in (seed, step), which
// makes the hypergradient checkable against finite differences.
struct MetaStepProbe {
  double meta_loss = 0.0;
  std::vector<double> weight_grad;
};
MetaStepProbe meta_step_probe(const net::LossNetwork& n, const harness::Task& task,
                              const MetaConfig& cfg, std::uint64_t seed, int step = 0);

// --- fitness ----------------------------------------------------------------
// Trains a fresh base model for s_testing steps with the network as its loss
// and returns the validation metric (mean across tasks). Divergence or a
// non-finite metric yields kWorstFitness.
double evaluate_fitness(const net::LossNetwork& n, const std::vector<harness::Task>& tasks,
                        const MetaConfig& cfg, std::uint64_t seed);
double evaluate_fitness(const net::LossNetwork& n, const harness::Task& task,
                        const MetaConfig& cfg, std::uint64_t seed);

// --- filters ----------------------------------------------------------------
// Optimizes a fixed batch's prediction vector directly under the candidate
// loss (Adam, cfg.rejection_steps at cfg.rejection_lr) and scores
//   g = sum_b [task_loss(initial preds) - task_loss(optimized preds)].
// Candidates whose minimization does not improve the task loss (g <= 0) are
// unpromising and rejected. Non-finite optimization gives g = -inf.
struct RejectionResult {
  double g = 0.0;
  bool pass = false;
};
RejectionResult rejection_protocol(const net::LossNetwork& n, const harness::Task& task,
                                   const MetaConfig& cfg, std::uint64_t seed);

// Fixed probe for gradient signatures: a seeded batch plus the predictions of
// an untrained base model in the domain the loss consumes (softmax
// probabilities for classification, raw outputs for regression).
struct ProbeBatch {
  harness::Batch batch;
  ad::Tensor preds;
};
ProbeBatch make_probe(const harness::Task& task, const MetaConfig& cfg, std::uint64_t seed);

// Per-instance L2 norms of d(loss)/d(prediction), each rounded to two
// significant digits and comma-joined. Equal signatures share cached fitness.
std::string gradient_signature(const net::LossNetwork& n, const ProbeBatch& probe);

// --- the generational loop ----------------------------------------------------
struct GenerationStats {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;  // over candidates not filtered to the sentinel
  int evaluated = 0;
  int cache_hits = 0;
  int rejected = 0;
  int grad_dups = 0;
};

struct EvolveResult {
  // First-occurrence record per unique tree key, fitness ascending (ties by
  // key). Cache-hit duplicates are reflected in the per-generation stats.
  std::vector<FitnessRecord> ranked;
  std::vector<GenerationStats> generations;
};

using ProgressFn = std::function<void(const GenerationStats&)>;

// Runs `gp.generations` rounds of selection/crossover/mutation over an initial
// ramped population, pushing every candidate through the filtered pipeline.
// Deterministic for a fixed gp.seed at any worker count: candidate streams are
// derived from (seed, generation, index), and cache resolution is sequential.
EvolveResult evolve(const sym::GpConfig& gp, const MetaConfig& meta,
                    const std::vector<harness::Task>& tasks, ProgressFn progress = {});
EvolveResult evolve(const sym::GpConfig& gp, const MetaConfig& meta, const harness::Task& task,
                    ProgressFn progress = {});

// CSV: generation,best_fitness,mean_fitness,evaluated,cache_hits,rejected,grad_dups
std::string generations_to_csv(const std::vector<GenerationStats>& stats);
// JSON: { "kind": "ranking", "records": [ {expression, fitness, verdict,
// generation, network}, ... ] }
std::string ranked_to_json(const std::vector<FitnessRecord>& ranked);

}  // namespace metaloss::evomal
