#include "metaloss/evomal.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "metaloss/losses.hpp"

namespace metaloss::evomal {

namespace {

using harness::derive_seed;

// stream tags
constexpr std::uint64_t kTagInit = 0x6e17;
constexpr std::uint64_t kTagGp = 0x9b0f;
constexpr std::uint64_t kTagEval = 0xe7a1;
constexpr std::uint64_t kTagReject = 0x4e90;
constexpr std::uint64_t kTagProbe = 0x9406;
constexpr std::uint64_t kTagCand = 0xca4d;
constexpr std::uint64_t kTagBase = 0xba5e;
constexpr std::uint64_t kTagTheta = 0x07e7;

ad::Var as_loss_input(const harness::Task& task, ad::Var pred) {
  if (task.kind == harness::Task::Classification) return ad::vexp(ad::log_softmax(pred));
  return pred;
}

// The task-level objective the meta step minimizes: mean cross-entropy from
// logits for classification, mean squared error for regression.
ad::Var task_loss(const harness::Task& task, ad::Tape& tape, const harness::Batch& b,
                  ad::Var pred) {
  if (task.kind == harness::Task::Classification)
    return ad::neg(ad::mean(ad::row_sum(ad::mul(tape.constant(b.y), ad::log_softmax(pred)))));
  return ad::mean(ad::square(ad::sub(tape.constant(b.y), pred)));
}

harness::LossBuilder network_builder(net::LossNetwork n) {
  return [n = std::move(n)](ad::Tape& tape, const harness::Batch& b, ad::Var pred) {
    ad::Var f = b.targets.empty() ? pred : ad::vexp(ad::log_softmax(pred));
    return net::forward(n, tape, tape.constant(b.y), f);
  };
}

// Scalar task objective over a whole prediction tensor (rejection scoring).
double task_objective_total(const harness::Task& task, const harness::Batch& b,
                            const ad::Tensor& preds) {
  double total = 0.0;
  if (task.kind == harness::Task::Classification) {
    int C = preds.cols;
    for (int r = 0; r < preds.rows; ++r) {
      std::span<const double> row(&preds.v[size_t(r) * C], size_t(C));
      total += losses::cross_entropy(b.targets[size_t(r)], row);
    }
  } else {
    for (int r = 0; r < preds.rows; ++r) {
      double d = preds.at(r, 0) - b.y.at(r, 0);
      total += d * d;
    }
  }
  return total;
}

struct MetaStepOut {
  double meta_value = 0.0;
  std::vector<ad::Tensor> phi_grads;
};

// One unrolled meta step: fresh base model, s_base recorded SGD steps under
// the candidate loss, task loss at the updated parameters, gradient w.r.t.
// the edge weights. Deterministic in (seed, step).
MetaStepOut one_meta_step(const net::LossNetwork& n, const std::vector<harness::Task>& tasks,
                          const MetaConfig& cfg, std::uint64_t seed, int step) {
  ad::Tape tape;
  std::vector<ad::Var> phi = net::weights_as_inputs(n, tape);
  ad::Var total{};
  for (size_t ti = 0; ti < tasks.size(); ++ti) {
    const harness::Task& task = tasks[ti];
    harness::MlpModel model =
        harness::MlpModel::make(base_dims(task, cfg), derive_seed(seed, kTagTheta, step, ti));
    std::vector<ad::Var> theta = model.params_as_inputs(tape);
    std::mt19937_64 brng(derive_seed(seed, kTagBase, step, ti));
    ad::Var rate = tape.scalar(cfg.alpha);
    harness::Batch b;
    for (int k = 0; k < cfg.s_base; ++k) {
      b = harness::sample_batch(task, task.train_idx, cfg.batch, brng);
      ad::Var pred = harness::MlpModel::forward(tape, theta, tape.constant(b.x));
      ad::Var inner = net::forward(n, tape, tape.constant(b.y), as_loss_input(task, pred), phi);
      std::vector<ad::Var> g = tape.backward(inner, theta, /*create_graph=*/true);
      for (size_t i = 0; i < theta.size(); ++i)
        theta[i] = ad::sub(theta[i], ad::mul(rate, g[i]));
    }
    // learning progress is judged on the batch the step was taken on, at the
    // updated parameters
    ad::Var mpred = harness::MlpModel::forward(tape, theta, tape.constant(b.x));
    ad::Var ml = task_loss(task, tape, b, mpred);
    total = ti == 0 ? ml : ad::add(total, ml);
  }
  MetaStepOut out;
  out.meta_value = total.value().scalar_value();
  if (!std::isfinite(out.meta_value)) return out;
  std::vector<ad::Var> grads = tape.backward(total, phi);
  out.phi_grads.reserve(grads.size());
  for (ad::Var g : grads) out.phi_grads.push_back(g.value());
  return out;
}

void format_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  int count = std::min(workers, n);
  pool.reserve(size_t(count));
  for (int t = 0; t < count; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (std::thread& th : pool) th.join();
}

}  // namespace

void MetaConfig::validate() const {
  if (s_meta < 0) throw std::invalid_argument("MetaConfig: s_meta must be >= 0");
  if (s_base < 1 || s_testing < 1)
    throw std::invalid_argument("MetaConfig: step counts must be >= 1");
  if (alpha <= 0) throw std::invalid_argument("MetaConfig: rates must be > 0");
  if (eta < 0) throw std::invalid_argument("MetaConfig: eta must be >= 0");
  if (rejection_batch < 1 || rejection_steps < 1 || rejection_lr <= 0)
    throw std::invalid_argument("MetaConfig: bad rejection settings");
  if (probe_batch < 1 || batch < 1) throw std::invalid_argument("MetaConfig: batch sizes >= 1");
  if (workers < 1) throw std::invalid_argument("MetaConfig: workers must be >= 1");
}

std::vector<int> base_dims(const harness::Task& task, const MetaConfig& cfg) {
  std::vector<int> dims{task.dim()};
  dims.insert(dims.end(), cfg.base_hidden.begin(), cfg.base_hidden.end());
  dims.push_back(task.kind == harness::Task::Classification ? task.class_count : 1);
  return dims;
}

std::string_view verdict_name(FitnessRecord::Verdict v) {
  switch (v) {
    case FitnessRecord::Evaluated: return "evaluated";
    case FitnessRecord::EquivHit: return "equiv-hit";
    case FitnessRecord::Rejected: return "rejected";
    case FitnessRecord::GradDup: return "grad-dup";
  }
  return "unknown";
}

net::LossNetwork optimize_loss(const net::LossNetwork& n0, const std::vector<harness::Task>& tasks,
                               const MetaConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (tasks.empty()) throw std::invalid_argument("optimize_loss: no tasks");
  for (const harness::Task& t : tasks)
    if (t.train_idx.empty()) throw std::invalid_argument("optimize_loss: task lacks a train split");
  net::LossNetwork n = n0;
  if (cfg.s_meta == 0 || cfg.eta == 0.0 || n.edge_count() == 0) return n;

  harness::OptimizerState opt = harness::OptimizerState::adam(cfg.eta);
  for (int step = 0; step < cfg.s_meta; ++step) {
    MetaStepOut so = one_meta_step(n, tasks, cfg, seed, step);
    if (!std::isfinite(so.meta_value))
      throw harness::DivergenceError("optimize_loss: non-finite meta loss at step " +
                                     std::to_string(step));
    std::vector<ad::Tensor> params{ad::Tensor::row(n.weights)};
    ad::Tensor grad(1, n.edge_count());
    for (int i = 0; i < n.edge_count(); ++i) grad.v[size_t(i)] = so.phi_grads[size_t(i)].scalar_value();
    std::vector<ad::Tensor> grads{std::move(grad)};
    opt.step(params, grads);
    n.weights = params[0].v;
    for (double w : n.weights)
      if (!std::isfinite(w))
        throw harness::DivergenceError("optimize_loss: weights diverged at step " +
                                       std::to_string(step));
  }
  return n;
}

net::LossNetwork optimize_loss(const net::LossNetwork& n, const harness::Task& task,
                               const MetaConfig& cfg, std::uint64_t seed) {
  return optimize_loss(n, std::vector<harness::Task>{task}, cfg, seed);
}

MetaStepProbe meta_step_probe(const net::LossNetwork& n, const harness::Task& task,
                              const MetaConfig& cfg, std::uint64_t seed, int step) {
  MetaStepOut so = one_meta_step(n, {task}, cfg, seed, step);
  MetaStepProbe probe;
  probe.meta_loss = so.meta_value;
  probe.weight_grad.reserve(so.phi_grads.size());
  for (const ad::Tensor& g : so.phi_grads) probe.weight_grad.push_back(g.scalar_value());
  return probe;
}

double evaluate_fitness(const net::LossNetwork& n, const std::vector<harness::Task>& tasks,
                        const MetaConfig& cfg, std::uint64_t seed) {
  if (tasks.empty()) throw std::invalid_argument("evaluate_fitness: no tasks");
  harness::LossBuilder builder = network_builder(n);
  double total = 0.0;
  for (size_t ti = 0; ti < tasks.size(); ++ti) {
    const harness::Task& task = tasks[ti];
    harness::MlpModel model =
        harness::MlpModel::make(base_dims(task, cfg), derive_seed(seed, kTagEval, 1, ti));
    harness::OptimizerState opt = harness::OptimizerState::sgd(cfg.alpha);
    harness::TrainConfig tc;
    tc.steps = cfg.s_testing;
    tc.batch = cfg.batch;
    tc.seed = derive_seed(seed, kTagEval, 2, ti);
    tc.eval_every = 0;
    try {
      harness::TrainReport rep = harness::train(model, builder, opt, task, tc);
      if (!std::isfinite(rep.final_valid_metric)) return kWorstFitness;
      total += rep.final_valid_metric;
    } catch (const harness::DivergenceError&) {
      return kWorstFitness;
    }
  }
  return total / double(tasks.size());
}

double evaluate_fitness(const net::LossNetwork& n, const harness::Task& task,
                        const MetaConfig& cfg, std::uint64_t seed) {
  return evaluate_fitness(n, std::vector<harness::Task>{task}, cfg, seed);
}

RejectionResult rejection_protocol(const net::LossNetwork& n, const harness::Task& task,
                                   const MetaConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, kTagReject, 1));
  harness::Batch b = harness::sample_batch(task, task.train_idx, cfg.rejection_batch, rng);
  harness::MlpModel model =
      harness::MlpModel::make(base_dims(task, cfg), derive_seed(seed, kTagReject, 2));

  ad::Tensor preds;
  {
    ad::Tape t0;
    std::vector<ad::Var> theta = model.params_as_inputs(t0);
    preds = harness::MlpModel::forward(t0, theta, t0.constant(b.x)).value();
  }
  double before = task_objective_total(task, b, preds);

  RejectionResult reject_out;
  reject_out.g = -std::numeric_limits<double>::infinity();
  reject_out.pass = false;

  harness::OptimizerState opt = harness::OptimizerState::adam(cfg.rejection_lr);
  std::vector<ad::Tensor> pv{preds};
  for (int s = 0; s < cfg.rejection_steps; ++s) {
    ad::Tape tape;
    ad::Var p = tape.input(pv[0]);
    ad::Var f = task.kind == harness::Task::Classification ? ad::vexp(ad::log_softmax(p)) : p;
    ad::Var l = net::forward(n, tape, tape.constant(b.y), f);
    if (!std::isfinite(l.value().scalar_value())) return reject_out;
    std::vector<ad::Var> g = tape.backward(l, {p});
    std::vector<ad::Tensor> gs{g[0].value()};
    opt.step(pv, gs);
    if (!pv[0].all_finite()) return reject_out;
  }
  double after = task_objective_total(task, b, pv[0]);
  if (!std::isfinite(before) || !std::isfinite(after)) return reject_out;

  RejectionResult out;
  out.g = before - after;
  out.pass = out.g > 0.0;
  return out;
}

ProbeBatch make_probe(const harness::Task& task, const MetaConfig& cfg, std::uint64_t seed) {
  ProbeBatch probe;
  std::mt19937_64 rng(derive_seed(seed, kTagProbe, 1));
  probe.batch = harness::sample_batch(task, task.train_idx, cfg.probe_batch, rng);
  harness::MlpModel model =
      harness::MlpModel::make(base_dims(task, cfg), derive_seed(seed, kTagProbe, 2));
  ad::Tape t0;
  std::vector<ad::Var> theta = model.params_as_inputs(t0);
  ad::Var pred = harness::MlpModel::forward(t0, theta, t0.constant(probe.batch.x));
  probe.preds = as_loss_input(task, pred).value();
  return probe;
}

std::string gradient_signature(const net::LossNetwork& n, const ProbeBatch& probe) {
  std::string sig;
  sig.reserve(size_t(probe.preds.rows) * 8);
  int C = probe.preds.cols;
  int yc = probe.batch.y.cols;
  for (int r = 0; r < probe.preds.rows; ++r) {
    ad::Tensor yrow(1, yc);
    for (int c = 0; c < yc; ++c) yrow.at(0, c) = probe.batch.y.at(r, c);
    ad::Tensor frow(1, C);
    for (int c = 0; c < C; ++c) frow.at(0, c) = probe.preds.at(r, c);

    ad::Tape tape;
    ad::Var f = tape.input(frow);
    ad::Var l = net::forward(n, tape, tape.constant(yrow), f);
    std::vector<ad::Var> g = tape.backward(l, {f});
    double norm2 = 0.0;
    for (double x : g[0].value().v) norm2 += x * x;
    double norm = std::sqrt(norm2);

    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1e", norm);  // two significant digits
    if (r > 0) sig += ',';
    sig += buf;
  }
  return sig;
}

namespace {

struct Candidate {
  sym::ExprTree tree;
  std::string key;
  std::uint64_t seed = 0;
  int index = 0;
  FitnessRecord::Verdict verdict = FitnessRecord::Evaluated;
  bool resolved = false;
  double fitness = 0.0;
  net::LossNetwork network;
  std::string signature;
  int pending_on = -1;  // same-generation candidate whose fitness this inherits
  double wall = 0.0;
};

std::vector<sym::ExprTree> make_offspring(const std::vector<sym::ScoredTree>& pop,
                                          const sym::GpConfig& gp, std::mt19937_64& rng) {
  int elite = std::max(1, int(std::lround(gp.elitism_rate * gp.population_size)));
  std::vector<int> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (pop[size_t(a)].fitness != pop[size_t(b)].fitness)
      return pop[size_t(a)].fitness < pop[size_t(b)].fitness;
    return pop[size_t(a)].tree.node_count() < pop[size_t(b)].tree.node_count();
  });

  std::vector<sym::ExprTree> next;
  next.reserve(size_t(gp.population_size));
  for (int e = 0; e < elite && e < int(pop.size()); ++e) next.push_back(pop[size_t(order[size_t(e)])].tree);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (int(next.size()) < gp.population_size) {
    double r = u(rng);
    if (r < gp.crossover_rate) {
      const sym::ScoredTree& a = sym::tournament_select(pop, gp.tournament_k, rng);
      const sym::ScoredTree& b = sym::tournament_select(pop, gp.tournament_k, rng);
      next.push_back(sym::crossover_one_point(a.tree, b.tree, gp, rng));
    } else if (r < gp.crossover_rate + gp.mutation_rate) {
      const sym::ScoredTree& a = sym::tournament_select(pop, gp.tournament_k, rng);
      next.push_back(sym::mutate_uniform(a.tree, gp, rng));
    } else {
      next.push_back(sym::tournament_select(pop, gp.tournament_k, rng).tree);
    }
  }
  return next;
}

}  // namespace

EvolveResult evolve(const sym::GpConfig& gp, const MetaConfig& meta,
                    const std::vector<harness::Task>& tasks, ProgressFn progress) {
  gp.validate();
  meta.validate();
  if (tasks.empty()) throw std::invalid_argument("evolve: no tasks");
  for (const harness::Task& t : tasks)
    if (t.train_idx.empty() || t.valid_idx.empty())
      throw std::invalid_argument("evolve: task lacks train/valid splits");

  const std::uint64_t run_seed = gp.seed;
  // Filters probe the first task; fitness averages across all of them.
  const ProbeBatch probe = make_probe(tasks[0], meta, run_seed);

  std::unordered_map<std::string, double> key_cache;  // structural equivalence
  std::unordered_map<std::string, double> sig_cache;  // gradient equivalence

  EvolveResult result;
  std::vector<sym::ScoredTree> population;
  std::mt19937_64 gp_rng(derive_seed(run_seed, kTagGp));

  std::vector<sym::ExprTree> current;
  {
    std::mt19937_64 init_rng(derive_seed(run_seed, kTagInit));
    for (int i = 0; i < gp.population_size; ++i)
      current.push_back(sym::enforce_arguments(sym::random_tree(gp, init_rng, i), init_rng));
  }

  for (int gen = 0; gen <= gp.generations; ++gen) {
    if (gen > 0) current = make_offspring(population, gp, gp_rng);

    std::vector<Candidate> cands(current.size());
    for (int i = 0; i < int(current.size()); ++i) {
      cands[size_t(i)].tree = current[size_t(i)];
      cands[size_t(i)].key = sym::canonical_key(current[size_t(i)]);
      cands[size_t(i)].seed = derive_seed(run_seed, kTagCand, std::uint64_t(gen), std::uint64_t(i));
      cands[size_t(i)].index = i;
    }

    // resolve the structural cache sequentially so hit/miss order is stable
    std::unordered_map<std::string, int> gen_key_owner;
    std::vector<int> owners;
    for (Candidate& c : cands) {
      auto hit = key_cache.find(c.key);
      if (hit != key_cache.end()) {
        c.verdict = FitnessRecord::EquivHit;
        c.fitness = hit->second;
        c.resolved = true;
        continue;
      }
      auto prior = gen_key_owner.find(c.key);
      if (prior != gen_key_owner.end()) {
        c.verdict = FitnessRecord::EquivHit;
        c.pending_on = prior->second;
        continue;
      }
      gen_key_owner.emplace(c.key, c.index);
      owners.push_back(c.index);
    }

    // heavy per-candidate work in parallel; every result lands in its own slot
    parallel_for(int(owners.size()), meta.workers, [&](int oi) {
      Candidate& c = cands[size_t(owners[size_t(oi)])];
      auto t0 = std::chrono::steady_clock::now();
      try {
        std::mt19937_64 trng(derive_seed(c.seed, 0x74a2));
        c.network = net::transition(c.tree, net::WeightInit::Gaussian, trng, /*nonneg=*/true);
        if (meta.local_search) c.network = optimize_loss(c.network, tasks, meta, c.seed);
        RejectionResult rr = rejection_protocol(c.network, tasks[0], meta, run_seed);
        if (!rr.pass) {
          c.verdict = FitnessRecord::Rejected;
          c.fitness = kWorstFitness;
          c.resolved = true;
        } else {
          c.signature = gradient_signature(c.network, probe);
        }
      } catch (const std::exception&) {
        // divergence during local search or rejection: filtered out
        c.verdict = FitnessRecord::Rejected;
        c.fitness = kWorstFitness;
        c.resolved = true;
      }
      c.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    // gradient-signature dedup, again in index order
    std::unordered_map<std::string, int> gen_sig_owner;
    std::vector<int> evals;
    for (int idx : owners) {
      Candidate& c = cands[size_t(idx)];
      if (c.resolved) continue;
      auto hit = sig_cache.find(c.signature);
      if (hit != sig_cache.end()) {
        c.verdict = FitnessRecord::GradDup;
        c.fitness = hit->second;
        c.resolved = true;
        continue;
      }
      auto prior = gen_sig_owner.find(c.signature);
      if (prior != gen_sig_owner.end()) {
        c.verdict = FitnessRecord::GradDup;
        c.pending_on = prior->second;
        continue;
      }
      gen_sig_owner.emplace(c.signature, idx);
      evals.push_back(idx);
    }

    parallel_for(int(evals.size()), meta.workers, [&](int ei) {
      Candidate& c = cands[size_t(evals[size_t(ei)])];
      auto t0 = std::chrono::steady_clock::now();
      try {
        c.fitness = evaluate_fitness(c.network, tasks, meta, run_seed);
      } catch (const std::exception&) {
        c.fitness = kWorstFitness;
      }
      c.verdict = FitnessRecord::Evaluated;
      c.resolved = true;
      c.wall += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    // inherited fitness: pending links always point at earlier candidates
    std::function<double(int)> fitness_of = [&](int i) -> double {
      Candidate& c = cands[size_t(i)];
      if (!c.resolved) {
        c.fitness = fitness_of(c.pending_on);
        c.resolved = true;
      }
      return c.fitness;
    };
    for (int i = 0; i < int(cands.size()); ++i) fitness_of(i);

    for (int idx : owners) {
      Candidate& c = cands[size_t(idx)];
      key_cache.emplace(c.key, c.fitness);
      if (c.verdict == FitnessRecord::Evaluated) sig_cache.emplace(c.signature, c.fitness);
    }

    GenerationStats gs;
    gs.generation = gen;
    double best = kWorstFitness;
    double sum = 0.0;
    int finite_count = 0;
    population.clear();
    for (const Candidate& c : cands) {
      switch (c.verdict) {
        case FitnessRecord::Evaluated: ++gs.evaluated; break;
        case FitnessRecord::EquivHit: ++gs.cache_hits; break;
        case FitnessRecord::Rejected: ++gs.rejected; break;
        case FitnessRecord::GradDup: ++gs.grad_dups; break;
      }
      best = std::min(best, c.fitness);
      if (c.fitness != kWorstFitness) {
        sum += c.fitness;
        ++finite_count;
      }
      population.push_back({c.tree, c.fitness});
    }
    gs.best_fitness = best;
    gs.mean_fitness = finite_count > 0 ? sum / double(finite_count) : kWorstFitness;
    result.generations.push_back(gs);
    if (progress) progress(gs);

    for (int idx : owners) {
      Candidate& c = cands[size_t(idx)];
      FitnessRecord rec;
      rec.key = c.key;
      rec.expression = sym::to_prefix(c.tree, /*nonneg=*/true);
      rec.network = c.network;
      rec.fitness = c.fitness;
      rec.verdict = c.verdict;
      rec.generation = gen;
      rec.seed = c.seed;
      rec.wall_seconds = c.wall;
      result.ranked.push_back(std::move(rec));
    }
  }

  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const FitnessRecord& a, const FitnessRecord& b) {
                     if (a.fitness != b.fitness) return a.fitness < b.fitness;
                     return a.key < b.key;
                   });
  return result;
}

EvolveResult evolve(const sym::GpConfig& gp, const MetaConfig& meta, const harness::Task& task,
                    ProgressFn progress) {
  return evolve(gp, meta, std::vector<harness::Task>{task}, std::move(progress));
}

std::string generations_to_csv(const std::vector<GenerationStats>& stats) {
  std::string out = "generation,best_fitness,mean_fitness,evaluated,cache_hits,rejected,grad_dups\n";
  for (const GenerationStats& g : stats) {
    out += std::to_string(g.generation);
    out += ',';
    format_double(out, g.best_fitness);
    out += ',';
    format_double(out, g.mean_fitness);
    out += ',' + std::to_string(g.evaluated);
    out += ',' + std::to_string(g.cache_hits);
    out += ',' + std::to_string(g.rejected);
    out += ',' + std::to_string(g.grad_dups);
    out += '\n';
  }
  return out;
}

std::string ranked_to_json(const std::vector<FitnessRecord>& ranked) {
  nlohmann::ordered_json root;
  root["kind"] = "ranking";
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const FitnessRecord& rec : ranked) {
    nlohmann::ordered_json j;
    j["expression"] = rec.expression;
    j["fitness"] = rec.fitness;
    j["verdict"] = std::string(verdict_name(rec.verdict));
    j["generation"] = rec.generation;
    j["network"] = nlohmann::ordered_json::parse(net::to_json(rec.network));
    records.push_back(std::move(j));
  }
  root["records"] = std::move(records);
  return root.dump(2) + "\n";
}

}  // namespace metaloss::evomal
