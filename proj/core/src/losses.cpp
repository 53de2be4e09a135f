#include "metaloss/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace metaloss::losses {

namespace {

void check_class_args(int target, size_t c) {
  if (c < 2) throw std::invalid_argument("loss: class count must be >= 2");
  if (target < 0 || size_t(target) >= c) throw std::invalid_argument("loss: target out of range");
}

double logsumexp_of(std::span<const double> z) {
  double m = z[0];
  for (double x : z) m = std::max(m, x);
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  return m + std::log(s);
}

double sign_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

// --- cross-entropy -----------------------------------------------------------

double cross_entropy(int target, std::span<const double> logits) {
  check_class_args(target, logits.size());
  return logsumexp_of(logits) - logits[size_t(target)];
}

std::vector<double> cross_entropy_grad(int target, std::span<const double> logits) {
  check_class_args(target, logits.size());
  double lse = logsumexp_of(logits);
  std::vector<double> g(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) g[i] = std::exp(logits[i] - lse);
  g[size_t(target)] -= 1.0;
  return g;
}

// --- label smoothing (dense) ---------------------------------------------------

double lsr(int target, std::span<const double> logits, double xi) {
  OpCount scratch;
  return lsr_counted(target, logits, xi, scratch);
}

double lsr_counted(int target, std::span<const double> logits, double xi, OpCount& count) {
  check_class_args(target, logits.size());
  if (xi < 0.0 || xi >= 1.0) throw std::invalid_argument("lsr: xi must lie in [0,1)");
  const int C = int(logits.size());
  double lse = logsumexp_of(logits);
  double loss = 0.0;
  for (int i = 0; i < C; ++i) {
    double q = (i == target ? 1.0 - xi : 0.0) + xi / C;
    loss -= q * (logits[size_t(i)] - lse);
    ++count.touched_outputs;
  }
  return loss;
}

std::vector<double> lsr_grad(int target, std::span<const double> logits, double xi) {
  check_class_args(target, logits.size());
  const int C = int(logits.size());
  double lse = logsumexp_of(logits);
  std::vector<double> g(logits.size());
  // d/dz_j of -sum_i q_i (z_i - lse) = p_j - q_j  (since sum_i q_i = 1)
  for (int j = 0; j < C; ++j) {
    double q = (j == target ? 1.0 - xi : 0.0) + xi / C;
    g[size_t(j)] = std::exp(logits[size_t(j)] - lse) - q;
  }
  return g;
}

// --- sparse label smoothing ------------------------------------------------------

double sparse_lsr(int target, std::span<const double> logits, double xi) {
  OpCount scratch;
  return sparse_lsr_counted(target, logits, xi, scratch);
}

double sparse_lsr_counted(int target, std::span<const double> logits, double xi, OpCount& count) {
  check_class_args(target, logits.size());
  if (xi < 0.0 || xi >= 1.0) throw std::invalid_argument("sparse_lsr: xi must lie in [0,1)");
  const int C = int(logits.size());
  double lse = logsumexp_of(logits);
  // Everything below touches the target output only.
  double ptilde = logits[size_t(target)] - lse;  // log p_target
  ++count.touched_outputs;
  double a = 1.0 - xi + xi / C;
  double b = xi * (C - 1) / C;
  return -(a * ptilde + b * std::log((1.0 - std::exp(ptilde) + kEps) / (C - 1)));
}

std::vector<double> sparse_lsr_grad(int target, std::span<const double> logits, double xi) {
  check_class_args(target, logits.size());
  const int C = int(logits.size());
  double lse = logsumexp_of(logits);
  double ptilde = logits[size_t(target)] - lse;
  double u = std::exp(ptilde);  // p_target
  double a = 1.0 - xi + xi / C;
  double b = xi * (C - 1) / C;
  // dL/dptilde, then chain through dptilde/dz_j = [j == target] - p_j
  double dldp = -a + b * u / (1.0 - u + kEps);
  std::vector<double> g(logits.size());
  for (int j = 0; j < C; ++j) {
    double pj = std::exp(logits[size_t(j)] - lse);
    g[size_t(j)] = dldp * ((j == target ? 1.0 : 0.0) - pj);
  }
  return g;
}

// --- absolute cross-entropy -------------------------------------------------------

double ace(int target, std::span<const double> probs, double phi0, double phi1) {
  check_class_args(target, probs.size());
  if (phi0 <= 0 || phi1 <= 0) throw std::invalid_argument("ace: phi parameters must be positive");
  return phi0 * std::fabs(std::log(phi1 * probs[size_t(target)]));
}

std::vector<double> ace_grad(int target, std::span<const double> probs, double phi0, double phi1) {
  check_class_args(target, probs.size());
  std::vector<double> g(probs.size(), 0.0);
  double f = probs[size_t(target)];
  double l = std::log(phi1 * f);
  // d/df phi0 |log(phi1 f)| = phi0 sign(log(phi1 f)) / f; 0 at the kink.
  g[size_t(target)] = phi0 * sign_of(l) / f;
  return g;
}

// --- focal variants ------------------------------------------------------------------

double focal(int target, std::span<const double> logits, double gamma) {
  check_class_args(target, logits.size());
  if (gamma < 0) throw std::invalid_argument("focal: gamma must be >= 0");
  double lse = logsumexp_of(logits);
  double logp = logits[size_t(target)] - lse;
  return std::pow(1.0 - std::exp(logp), gamma) * (-logp);
}

double focal_sparse_lsr(int target, std::span<const double> logits, double gamma, double xi) {
  check_class_args(target, logits.size());
  if (gamma < 0) throw std::invalid_argument("focal_sparse_lsr: gamma must be >= 0");
  if (xi < 0.0 || xi >= 1.0) throw std::invalid_argument("focal_sparse_lsr: xi must lie in [0,1)");
  const int C = int(logits.size());
  double lse = logsumexp_of(logits);
  double ptilde = logits[size_t(target)] - lse;
  double u = std::exp(ptilde);
  double a = 1.0 - xi + xi / C;
  double b = xi * (C - 1) / C;
  // (1-p)^gamma modulates the target term; the shifted reflection p^gamma
  // modulates the redistributed non-target term.
  return -(std::pow(1.0 - u, gamma) * a * ptilde +
           std::pow(u, gamma) * b * std::log((1.0 - u + kEps) / (C - 1)));
}

// --- robust regression ------------------------------------------------------------------

double robust_value(Robust kind, double e, double delta) {
  if (delta <= 0) throw std::invalid_argument("robust loss: delta must be positive");
  switch (kind) {
    case Robust::Squared: return e * e;
    case Robust::PseudoHuber: {
      double t = e / delta;
      return delta * delta * (std::sqrt(1.0 + t * t) - 1.0);
    }
    case Robust::Cauchy: {
      double t = e / delta;
      return std::log(1.0 + 0.5 * t * t);
    }
    case Robust::GemanMcClure: return e * e / (delta + e * e);
    case Robust::Welsh: return 0.5 * delta * delta * (1.0 - std::exp(-e * e / (2 * delta * delta)));
  }
  throw std::invalid_argument("robust loss: unknown kind");
}

double robust_deriv(Robust kind, double e, double delta) {
  if (delta <= 0) throw std::invalid_argument("robust loss: delta must be positive");
  switch (kind) {
    case Robust::Squared: return 2.0 * e;
    case Robust::PseudoHuber: {
      double t = e / delta;
      return e / std::sqrt(1.0 + t * t);
    }
    case Robust::Cauchy: return 2.0 * e / (2.0 * delta * delta + e * e);
    case Robust::GemanMcClure: {
      double d = delta + e * e;
      return 2.0 * delta * e / (d * d);
    }
    case Robust::Welsh: return 0.5 * e * std::exp(-e * e / (2 * delta * delta));
  }
  throw std::invalid_argument("robust loss: unknown kind");
}

// --- dual-point behavior -------------------------------------------------------------------

namespace {

// delta_i = -dL/df_i for one output with prediction f and indicator y.
double delta_of(DeltaLoss loss, bool is_target, double f, int C, const DeltaParams& p) {
  switch (loss) {
    case DeltaLoss::CE:
      return is_target ? 1.0 / f : 0.0;
    case DeltaLoss::LSR: {
      double q = (is_target ? 1.0 - p.xi : 0.0) + p.xi / C;
      return q / f;
    }
    case DeltaLoss::ACE: {
      if (!is_target) return 0.0;
      double l = std::log(p.phi1 * f);  // analytic mode: no epsilon inside the log
      return -p.phi0 * sign_of(l) / f;
    }
  }
  throw std::invalid_argument("delta_behavior: unknown loss");
}

}  // namespace

DeltaLimits delta_behavior(DeltaLoss loss, Regime regime, int C, const DeltaParams& params,
                           double eps_limit) {
  if (regime == Regime::NullEpoch && C < 3)
    throw std::invalid_argument("delta_behavior: null epoch analysis requires C >= 3");
  if (C < 2) throw std::invalid_argument("delta_behavior: C must be >= 2");
  if (eps_limit <= 0 || eps_limit > 1e-3)
    throw std::invalid_argument("delta_behavior: eps_limit out of range");

  if (regime == Regime::NullEpoch) {
    double f = 1.0 / C;  // expected softmax output before any learning
    return {delta_of(loss, true, f, C, params), delta_of(loss, false, f, C, params)};
  }

  auto at = [&](double eps) {
    double f_target = 1.0 - eps * (C - 1);
    double f_non = eps;
    return DeltaLimits{delta_of(loss, true, f_target, C, params),
                       delta_of(loss, false, f_non, C, params)};
  };
  DeltaLimits d1 = at(eps_limit);
  DeltaLimits d2 = at(eps_limit / 10.0);
  auto settle = [](double v1, double v2) {
    // Stable limits barely move; divergent entries grow ~10x per epsilon decade.
    if (std::fabs(v2) > 2.0 * std::fabs(v1) + 1.0)
      return std::copysign(std::numeric_limits<double>::infinity(), v2);
    return v1;
  };
  return {settle(d1.target, d2.target), settle(d1.nontarget, d2.nontarget)};
}

// --- runtime measurement -------------------------------------------------------------------

LsrTiming measure_lsr_pair(int C, int batch, int reps, double xi, bool include_lse,
                           std::uint64_t seed) {
  if (C < 2 || batch < 1 || reps < 1) throw std::invalid_argument("measure_lsr_pair: bad args");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> logits(size_t(batch) * C);
  for (double& x : logits) x = dist(rng);
  std::vector<int> targets(size_t(batch), 0);
  std::uniform_int_distribution<int> tdist(0, C - 1);
  for (int& t : targets) t = tdist(rng);

  std::vector<double> lse(size_t(batch), 0.0);
  for (int r = 0; r < batch; ++r)
    lse[size_t(r)] = logsumexp_of(std::span(logits).subspan(size_t(r) * C, size_t(C)));

  volatile double sink = 0.0;  // defeat dead-code elimination

  auto run_sparse = [&]() {
    double acc = 0.0;
    for (int r = 0; r < batch; ++r) {
      std::span<const double> z = std::span(logits).subspan(size_t(r) * C, size_t(C));
      double l = include_lse ? logsumexp_of(z) : lse[size_t(r)];
      double ptilde = z[size_t(targets[size_t(r)])] - l;
      double a = 1.0 - xi + xi / C;
      double b = xi * (C - 1) / C;
      acc -= a * ptilde + b * std::log((1.0 - std::exp(ptilde) + kEps) / (C - 1));
    }
    sink = acc;
  };
  auto run_dense = [&]() {
    double acc = 0.0;
    for (int r = 0; r < batch; ++r) {
      std::span<const double> z = std::span(logits).subspan(size_t(r) * C, size_t(C));
      double l = include_lse ? logsumexp_of(z) : lse[size_t(r)];
      int tgt = targets[size_t(r)];
      double loss = 0.0;
      for (int i = 0; i < C; ++i) {
        double q = (i == tgt ? 1.0 - xi : 0.0) + xi / C;
        loss -= q * (z[size_t(i)] - l);
      }
      acc += loss;
    }
    sink = acc;
  };

  auto median_ns = [&](auto&& fn) {
    fn();  // warm-up
    std::vector<double> times;
    times.reserve(size_t(reps));
    for (int i = 0; i < reps; ++i) {
      auto t0 = std::chrono::steady_clock::now();
      fn();
      auto t1 = std::chrono::steady_clock::now();
      times.push_back(double(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
    }
    std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
    return times[times.size() / 2];
  };

  LsrTiming out;
  out.sparse_ns = median_ns(run_sparse);
  out.nonsparse_ns = median_ns(run_dense);
  (void)sink;
  return out;
}

// --- name registry ----------------------------------------------------------------------------

namespace {

using ad::Tape;
using ad::Var;

std::vector<std::string> split_colon(std::string_view s) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t p = s.find(':', start);
    if (p == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      break;
    }
    parts.emplace_back(s.substr(start, p - start));
    start = p + 1;
  }
  return parts;
}

double parse_param(const std::string& s, const std::string& name) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("loss name '" + name + "': bad numeric parameter '" + s + "'");
  }
}

// Per-instance log p_target as an (n x 1) column: row_sum(onehot * log_softmax).
Var target_logprob(Tape&, Var onehot, Var logits) {
  return ad::row_sum(ad::mul(onehot, ad::log_softmax(logits)));
}

}  // namespace

LossSpec parse_loss_name(std::string_view name) {
  std::vector<std::string> parts = split_colon(name);
  const std::string head = parts[0];
  const std::string full(name);
  auto param = [&](size_t i, double dflt) {
    return parts.size() > i ? parse_param(parts[i], full) : dflt;
  };
  auto max_params = [&](size_t n) {
    if (parts.size() > n + 1)
      throw std::invalid_argument("loss name '" + full + "': too many parameters");
  };

  LossSpec spec;
  spec.name = full;

  if (head == "ce") {
    max_params(0);
    spec.domain = LossSpec::Classification;
    spec.build = [](Tape& t, Var y, Var pred) {
      return ad::neg(ad::mean(target_logprob(t, y, pred)));
    };
    return spec;
  }
  if (head == "lsr" || head == "sparse-lsr") {
    max_params(1);
    double xi = param(1, 0.1);
    if (xi < 0 || xi >= 1) throw std::invalid_argument("loss name '" + full + "': xi not in [0,1)");
    spec.domain = LossSpec::Classification;
    if (head == "lsr") {
      spec.build = [xi](Tape& t, Var y, Var pred) {
        int C = pred.shape().cols;
        Var q = ad::add(ad::mul(y, t.scalar(1.0 - xi)), t.scalar(xi / C));
        return ad::neg(ad::mean(ad::row_sum(ad::mul(q, ad::log_softmax(pred)))));
      };
    } else {
      spec.build = [xi](Tape& t, Var y, Var pred) {
        int C = pred.shape().cols;
        double a = 1.0 - xi + xi / C;
        double b = xi * (C - 1) / C;
        Var ptilde = target_logprob(t, y, pred);
        Var redistributed = ad::sub(ad::plog(ad::sub(t.scalar(1.0), ad::vexp(ptilde))),
                                    t.scalar(std::log(double(C - 1))));
        return ad::neg(ad::mean(ad::add(ad::mul(t.scalar(a), ptilde),
                                        ad::mul(t.scalar(b), redistributed))));
      };
    }
    return spec;
  }
  if (head == "ace") {
    max_params(2);
    double phi0 = param(1, 1.0), phi1 = param(2, 1.0);
    if (phi0 <= 0 || phi1 <= 0)
      throw std::invalid_argument("loss name '" + full + "': phi parameters must be positive");
    spec.domain = LossSpec::Classification;
    spec.build = [phi0, phi1](Tape& t, Var y, Var pred) {
      Var ptarget = ad::row_sum(ad::mul(y, ad::vexp(ad::log_softmax(pred))));
      return ad::mul(t.scalar(phi0),
                     ad::mean(ad::vabs(ad::plog(ad::mul(t.scalar(phi1), ptarget)))));
    };
    return spec;
  }
  if (head == "focal") {
    max_params(1);
    double gamma = param(1, 2.0);
    if (gamma < 0) throw std::invalid_argument("loss name '" + full + "': gamma must be >= 0");
    spec.domain = LossSpec::Classification;
    spec.build = [gamma](Tape& t, Var y, Var pred) {
      Var ptilde = target_logprob(t, y, pred);
      Var focus = ad::powc(ad::sub(t.scalar(1.0), ad::vexp(ptilde)), gamma);
      return ad::neg(ad::mean(ad::mul(focus, ptilde)));
    };
    return spec;
  }
  if (head == "focal-sparse-lsr") {
    max_params(2);
    double gamma = param(1, 2.0), xi = param(2, 0.1);
    if (gamma < 0) throw std::invalid_argument("loss name '" + full + "': gamma must be >= 0");
    if (xi < 0 || xi >= 1) throw std::invalid_argument("loss name '" + full + "': xi not in [0,1)");
    spec.domain = LossSpec::Classification;
    spec.build = [gamma, xi](Tape& t, Var y, Var pred) {
      int C = pred.shape().cols;
      double a = 1.0 - xi + xi / C;
      double b = xi * (C - 1) / C;
      Var ptilde = target_logprob(t, y, pred);
      Var u = ad::vexp(ptilde);
      Var target_term = ad::mul(ad::powc(ad::sub(t.scalar(1.0), u), gamma),
                                ad::mul(t.scalar(a), ptilde));
      Var redistributed = ad::sub(ad::plog(ad::sub(t.scalar(1.0), u)),
                                  t.scalar(std::log(double(C - 1))));
      Var non_target_term = ad::mul(ad::powc(u, gamma), ad::mul(t.scalar(b), redistributed));
      return ad::neg(ad::mean(ad::add(target_term, non_target_term)));
    };
    return spec;
  }

  // robust regression family
  Robust kind;
  if (head == "squared") kind = Robust::Squared;
  else if (head == "pseudo-huber") kind = Robust::PseudoHuber;
  else if (head == "cauchy") kind = Robust::Cauchy;
  else if (head == "geman-mcclure") kind = Robust::GemanMcClure;
  else if (head == "welsh") kind = Robust::Welsh;
  else throw std::invalid_argument("unknown loss name '" + full + "'");

  if (head == "squared") max_params(0); else max_params(1);
  double delta = param(1, 1.0);
  if (delta <= 0) throw std::invalid_argument("loss name '" + full + "': delta must be positive");
  spec.domain = LossSpec::Regression;
  spec.build = [kind, delta](Tape& t, Var y, Var pred) {
    Var e = ad::sub(y, pred);
    switch (kind) {
      case Robust::Squared:
        return ad::mean(ad::square(e));
      case Robust::PseudoHuber: {
        Var tsq = ad::square(ad::mul(e, t.scalar(1.0 / delta)));
        Var root = ad::psqrt(ad::add(t.scalar(1.0), tsq));
        return ad::mul(t.scalar(delta * delta), ad::mean(ad::sub(root, t.scalar(1.0))));
      }
      case Robust::Cauchy: {
        Var tsq = ad::square(ad::mul(e, t.scalar(1.0 / delta)));
        return ad::mean(ad::plog(ad::add(t.scalar(1.0), ad::mul(t.scalar(0.5), tsq))));
      }
      case Robust::GemanMcClure:
        return ad::mean(ad::div(ad::square(e), ad::add(t.scalar(delta), ad::square(e))));
      case Robust::Welsh: {
        Var arg = ad::neg(ad::mul(t.scalar(1.0 / (2 * delta * delta)), ad::square(e)));
        return ad::mul(t.scalar(0.5 * delta * delta),
                       ad::mean(ad::sub(t.scalar(1.0), ad::vexp(arg))));
      }
    }
    throw std::logic_error("robust builder: unreachable");
  };
  return spec;
}

}  // namespace metaloss::losses
