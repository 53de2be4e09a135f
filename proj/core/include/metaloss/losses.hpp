#pragma once
// Handcrafted and analytically derived loss functions: cross-entropy, label
// smoothing (and its sparse target-only reformulation), absolute cross-entropy,
// focal variants, the robust regression family, and the dual-point
// delta-behavior analyzer.

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metaloss/autodiff.hpp"

namespace metaloss::losses {

inline constexpr double kEps = 1e-7;

// --- exact scalar forms (logits are a C-vector, target a class index) -------
double cross_entropy(int target, std::span<const double> logits);
std::vector<double> cross_entropy_grad(int target, std::span<const double> logits);

// Non-sparse label smoothing: -sum_i (y_i(1-xi) + xi/C) log p_i, linear in C.
double lsr(int target, std::span<const double> logits, double xi);
std::vector<double> lsr_grad(int target, std::span<const double> logits, double xi);

// Target-only reformulation; touches O(1) outputs beyond the shared
// log-sum-exp. Equal to lsr under uniform non-target mass.
double sparse_lsr(int target, std::span<const double> logits, double xi);
std::vector<double> sparse_lsr_grad(int target, std::span<const double> logits, double xi);

// Instrumentation for the complexity claim: counts output entries touched
// after the shared log-sum-exp has been computed.
struct OpCount {
  long touched_outputs = 0;
};
double lsr_counted(int target, std::span<const double> logits, double xi, OpCount& count);
double sparse_lsr_counted(int target, std::span<const double> logits, double xi, OpCount& count);

// Absolute cross-entropy phi0 * y * |log(phi1 * f)| over probabilities.
// The gradient at the kink f = 1/phi1 is defined as 0.
double ace(int target, std::span<const double> probs, double phi0, double phi1);
std::vector<double> ace_grad(int target, std::span<const double> probs, double phi0, double phi1);

double focal(int target, std::span<const double> logits, double gamma);
double focal_sparse_lsr(int target, std::span<const double> logits, double gamma, double xi);

// --- robust regression family (e = y - f) -----------------------------------
enum class Robust { Squared, PseudoHuber, Cauchy, GemanMcClure, Welsh };
double robust_value(Robust kind, double e, double delta);
double robust_deriv(Robust kind, double e, double delta);

// --- dual-point behavior ------------------------------------------------------
// delta = -dL/df_i, the learning-rule decomposition. Null epoch evaluates at
// f_i = 1/C (requires C >= 3); zero-error plugs f_nontarget = eps_limit,
// f_target = 1 - eps_limit (C-1) and certifies stability against eps_limit/10.
// Entries that keep growing ~10x between the two evaluations are reported as
// +/- infinity (the true limit diverges).
enum class DeltaLoss { CE, ACE, LSR };
enum class Regime { NullEpoch, ZeroError };
struct DeltaParams {
  double xi = 0.1;    // LSR smoothing
  double phi0 = 1.0;  // ACE scale
  double phi1 = 1.0;  // ACE shift
};
struct DeltaLimits {
  double target = 0.0;
  double nontarget = 0.0;
};
DeltaLimits delta_behavior(DeltaLoss loss, Regime regime, int C, const DeltaParams& params = {},
                           double eps_limit = 1e-8);

// --- runtime measurement for the sparse-vs-dense claim ------------------------
// Median per-batch wall time (ns) over `reps` repeats, batch rows of C logits.
// With include_lse = false the shared log-sum-exp is precomputed outside the
// timed region, isolating the Theta(1)-vs-Theta(C) per-output work.
struct LsrTiming {
  double sparse_ns = 0.0;
  double nonsparse_ns = 0.0;
};
LsrTiming measure_lsr_pair(int C, int batch, int reps, double xi, bool include_lse,
                           std::uint64_t seed);

// --- name registry and differentiable builders -------------------------------
// Classification builders take y = one-hot (n x C) and pred = logits (n x C);
// regression builders take y and pred as (n x 1). Both return the scalar
// batch-mean loss recorded on the tape.
struct LossSpec {
  std::string name;
  enum Domain { Classification, Regression } domain = Classification;
  std::function<ad::Var(ad::Tape&, ad::Var y, ad::Var pred)> build;
};

// Accepts "ce", "lsr:0.1", "sparse-lsr:0.1", "ace:1.0:1.1", "focal:2",
// "focal-sparse-lsr:2:0.2", "squared", "pseudo-huber:1.0", "cauchy:1",
// "geman-mcclure:1", "welsh:1". Throws std::invalid_argument on unknown names
// or malformed parameters.
LossSpec parse_loss_name(std::string_view name);

}  // namespace metaloss::losses
