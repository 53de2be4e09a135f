// metaloss: command-line surface for the loss-function toolkit.
//   evolve   symbolic loss discovery (genetic search + gradient local search)
//   adapt    online/offline adaptive meta-loss training
//   train    plain training with a named loss or a learned-loss artifact
//   analyze  dual-point behavior tables and loss-surface grids
//   bench    runtime sweeps (sparse label smoothing, learning-rate grid)
// Exit codes: 0 ok, 2 configuration error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metaloss/adalfl.hpp"
#include "metaloss/artifacts.hpp"
#include "metaloss/evomal.hpp"
#include "metaloss/harness.hpp"
#include "metaloss/losses.hpp"
#include "metaloss/lossnet.hpp"
#include "metaloss/symbolic.hpp"

namespace fs = std::filesystem;
using namespace metaloss;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// All artifacts land via temp file + rename so a crash never leaves a torn file.
void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << content;
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// --- minimal hand-emitted SVG ---------------------------------------------------

struct Series {
  std::vector<double> x, y;
  std::string stroke = "#1f77b4";
};

std::string svg_lines(const std::vector<Series>& series, const std::string& title) {
  const double W = 640, H = 400, M = 46;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmin > xmax) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
  if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
  if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
  auto px = [&](double x) { return M + (x - xmin) / (xmax - xmin) * (W - 2 * M); };
  auto py = [&](double y) { return H - M - (y - ymin) / (ymax - ymin) * (H - 2 * M); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "  <text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
     << " font-size=\"14\">" << title << "</text>\n";
  char buf[64];
  // axes with end-point labels
  os << "  <line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
     << "\" stroke=\"#444\"/>\n";
  os << "  <line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << M << "\" y2=\"" << M
     << "\" stroke=\"#444\"/>\n";
  auto label = [&](double x, double y, const std::string& t, const char* anchor) {
    os << "  <text x=\"" << x << "\" y=\"" << y << "\" text-anchor=\"" << anchor
       << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">" << t << "</text>\n";
  };
  label(M, H - M + 16, fmt6(xmin), "middle");
  label(W - M, H - M + 16, fmt6(xmax), "middle");
  label(M - 6, H - M, fmt6(ymin), "end");
  label(M - 6, M + 4, fmt6(ymax), "end");
  for (const Series& s : series) {
    os << "  <polyline fill=\"none\" stroke=\"" << s.stroke << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      std::snprintf(buf, sizeof buf, "%.2f,%.2f", px(s.x[i]), py(s.y[i]));
      os << (first ? "" : " ") << buf;
      first = false;
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// --- key=value config files -------------------------------------------------------
// Values fill in options the user did not pass explicitly (flags win). Unknown
// keys are rejected. Keys are the long option names without the leading "--".

class ConfigFile {
 public:
  explicit ConfigFile(CLI::App* cmd) : cmd_(cmd) {
    cmd->add_option("--config", path_, "key=value config file merged under explicit flags");
  }

  template <class T>
  void bind(const std::string& key, T& ref) {
    setters_[key] = [&ref](const std::string& v) { assign(ref, v); };
  }

  void apply() const {
    if (path_.empty()) return;
    std::ifstream is(path_);
    if (!is) throw std::invalid_argument("cannot open config file " + path_);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string s = trim(line);
      if (s.empty() || s[0] == '#') continue;
      size_t eq = s.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument(where(lineno) + ": expected key=value");
      std::string key = trim(s.substr(0, eq));
      std::string value = trim(s.substr(eq + 1));
      auto it = setters_.find(key);
      if (it == setters_.end())
        throw std::invalid_argument(where(lineno) + ": unknown config key '" + key + "'");
      if (cmd_->count("--" + key) == 0) it->second(value);
    }
  }

 private:
  std::string where(int lineno) const { return path_ + ":" + std::to_string(lineno); }

  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }
  static void assign(int& r, const std::string& v) { r = std::stoi(v); }
  static void assign(double& r, const std::string& v) { r = std::stod(v); }
  static void assign(std::uint64_t& r, const std::string& v) { r = std::stoull(v); }
  static void assign(std::string& r, const std::string& v) { r = v; }
  static void assign(bool& r, const std::string& v) {
    if (v == "1" || v == "true" || v == "on") r = true;
    else if (v == "0" || v == "false" || v == "off") r = false;
    else throw std::invalid_argument("expected a boolean, got '" + v + "'");
  }
  template <class T>
  static void assign(std::vector<T>& r, const std::string& v) {
    r.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      T x;
      assign(x, trim(item));
      r.push_back(x);
    }
  }

  CLI::App* cmd_;
  std::string path_;
  std::map<std::string, std::function<void(const std::string&)>> setters_;
};

// --- task specs -----------------------------------------------------------------

harness::Task make_task(const std::string& spec, std::uint64_t seed, int n, double noise) {
  auto rest = [&spec](size_t prefix) { return spec.substr(prefix); };
  if (spec == "synth-reg")
    return harness::make_synthetic_regression(seed, n, noise < 0 ? 0.05 : noise);
  if (spec == "two-moons") return harness::make_two_moons(seed, n, noise < 0 ? 0.1 : noise);
  if (spec.rfind("csv-reg:", 0) == 0)
    return harness::load_csv_task(rest(8), harness::Task::Regression, seed);
  if (spec.rfind("csv-class:", 0) == 0)
    return harness::load_csv_task(rest(10), harness::Task::Classification, seed);
  if (spec.rfind("idx:", 0) == 0) return harness::load_idx_images(rest(4), "", "", "", seed);
  throw std::invalid_argument("unknown task '" + spec +
                              "' (expected synth-reg, two-moons, csv-reg:<path>, "
                              "csv-class:<path>, idx:<path>)");
}

std::vector<int> model_dims(const harness::Task& task, const std::vector<int>& hidden) {
  std::vector<int> dims{task.dim()};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(task.kind == harness::Task::Classification ? task.class_count : 1);
  return dims;
}

std::string metric_name(const harness::Task& task) {
  return task.kind == harness::Task::Classification ? "error-rate" : "mse";
}

// --- evolve -----------------------------------------------------------------------

struct EvolveOpts {
  std::string task = "synth-reg";
  std::string out = "out";
  std::uint64_t seed = 42;
  int n = 600;
  double noise = -1.0;
  sym::GpConfig gp;
  evomal::MetaConfig mc;
  bool no_local_search = false;
};

int run_evolve(const EvolveOpts& o) {
  harness::Task task = make_task(o.task, o.seed, o.n, o.noise);
  sym::GpConfig gp = o.gp;
  gp.seed = o.seed;
  evomal::MetaConfig mc = o.mc;
  mc.local_search = !o.no_local_search;

  auto progress = [](const evomal::GenerationStats& g) {
    std::printf("gen %3d  best %-12.6g mean %-12.6g evaluated %d cache %d rejected %d dup %d\n",
                g.generation, g.best_fitness, g.mean_fitness, g.evaluated, g.cache_hits,
                g.rejected, g.grad_dups);
    std::fflush(stdout);
  };
  evomal::EvolveResult res = evomal::evolve(gp, mc, task, progress);

  fs::path out(o.out);
  write_atomic(out / "losses.json", evomal::ranked_to_json(res.ranked));
  write_atomic(out / "generations.csv", evomal::generations_to_csv(res.generations));

  std::ostringstream sum;
  if (!res.ranked.empty()) {
    const evomal::FitnessRecord& best = res.ranked.front();
    write_atomic(out / "best_loss.json", net::to_json(best.network));
    sum << "best expression: " << best.expression << "\n";
    sum << "fitness (" << metric_name(task) << " on validation): " << fmt(best.fitness) << "\n";
    sum << "found in generation: " << best.generation << "\n";
  }
  sum << "unique candidates ranked: " << res.ranked.size() << "\n";
  sum << "local search: " << (mc.local_search ? "on" : "off") << "\n";
  write_atomic(out / "summary.txt", sum.str());
  std::cout << sum.str();
  return 0;
}

// --- adapt ------------------------------------------------------------------------

struct AdaptOpts {
  std::string task = "two-moons";
  std::string out = "out";
  std::string mode = "online";
  std::string meta_source = "valid";
  std::uint64_t seed = 42;
  int n = 600;
  double noise = -1.0;
  int hidden = 40;
  adalfl::AdaConfig ac;
};

std::string snapshots_to_csv(const std::vector<adalfl::GridPoint>& pts,
                             const std::vector<adalfl::Snapshot>& snaps) {
  std::string csv = "step,y,f,loss\n";
  for (const adalfl::Snapshot& s : snaps)
    for (size_t i = 0; i < pts.size(); ++i)
      csv += std::to_string(s.step) + "," + fmt(pts[i].y) + "," + fmt(pts[i].f) + "," +
             fmt(s.values[i]) + "\n";
  return csv;
}

std::string shape_svg(const std::vector<adalfl::GridPoint>& pts, const std::vector<double>& vals,
                      const std::string& title) {
  // one polyline per distinct y value (two for classification, one for regression)
  std::vector<Series> series;
  const char* palette[] = {"#1f77b4", "#d62728"};
  size_t i = 0;
  while (i < pts.size()) {
    Series s;
    s.stroke = palette[series.size() % 2];
    double y0 = pts[i].y;
    for (; i < pts.size() && pts[i].y == y0; ++i) {
      s.x.push_back(pts[i].f);
      s.y.push_back(vals[i]);
    }
    series.push_back(std::move(s));
  }
  return svg_lines(series, title);
}

int run_adapt(const AdaptOpts& o) {
  harness::Task task = make_task(o.task, o.seed, o.n, o.noise);
  adalfl::AdaConfig ac = o.ac;
  ac.seed = o.seed;
  ac.meta_source =
      o.meta_source == "train" ? adalfl::AdaConfig::Train : adalfl::AdaConfig::Valid;

  adalfl::MetaLossNet net = adalfl::MetaLossNet::make(o.seed, o.hidden);
  if (ac.s_init > 0) {
    std::printf("offline phase: %d meta steps\n", ac.s_init);
    std::fflush(stdout);
    net = adalfl::offline_init(net, task, ac);
  }

  fs::path out(o.out);
  std::vector<adalfl::GridPoint> pts = adalfl::loss_shape_points(task.kind);
  if (o.mode == "offline") {
    std::vector<double> vals = adalfl::loss_shape_values(net, task.kind);
    write_atomic(out / "meta_net.json", adalfl::to_json(net));
    write_atomic(out / "snapshots.csv", snapshots_to_csv(pts, {{ac.s_init, vals}}));
    write_atomic(out / "loss_shape.svg", shape_svg(pts, vals, "learned loss after offline phase"));
    std::cout << "offline phase complete; meta-loss written to " << (out / "meta_net.json").string()
              << "\n";
    return 0;
  }

  std::printf("online phase: %d steps (meta batches from the %s split)\n", ac.s_train,
              o.meta_source.c_str());
  std::fflush(stdout);
  adalfl::OnlineResult res = adalfl::online_train(net, task, ac);
  write_atomic(out / "meta_net.json", adalfl::to_json(res.net));
  write_atomic(out / "report.csv", harness::report_to_csv(res.report));
  write_atomic(out / "snapshots.csv", snapshots_to_csv(pts, res.snapshots));
  write_atomic(out / "loss_shape.svg",
               shape_svg(pts, res.snapshots.back().values, "learned loss after online adaptation"));
  std::cout << "final validation " << metric_name(task) << ": " << fmt6(res.report.final_valid_metric)
            << "\nfinal test " << metric_name(task) << ": " << fmt6(res.report.final_test_metric)
            << "\n";
  return 0;
}

// --- train ------------------------------------------------------------------------

struct TrainOpts {
  std::string task = "synth-reg";
  std::string out = "out";
  std::string loss = "";  // empty: squared for regression, ce for classification
  std::string opt = "sgd";
  std::uint64_t seed = 42;
  int n = 600;
  double noise = -1.0;
  double alpha = 0.01;
  std::vector<int> hidden = {16};
  harness::TrainConfig tc;
};

int run_train(const TrainOpts& o) {
  harness::Task task = make_task(o.task, o.seed, o.n, o.noise);
  std::string loss_spec = o.loss;
  if (loss_spec.empty())
    loss_spec = task.kind == harness::Task::Classification ? "ce" : "squared";
  // a path to an artifact file wins over a loss name
  artifacts::LoadedLoss loaded = fs::exists(loss_spec)
                                     ? artifacts::load_loss_builder(read_file(loss_spec))
                                     : artifacts::load_loss_builder(loss_spec);

  harness::OptimizerState opt = harness::OptimizerState::sgd(o.alpha);
  if (o.opt == "momentum")
    opt = harness::OptimizerState::with_momentum(o.alpha);
  else if (o.opt == "adam")
    opt = harness::OptimizerState::adam(o.alpha);
  else if (o.opt != "sgd")
    throw std::invalid_argument("unknown optimizer '" + o.opt + "'");

  harness::TrainConfig tc = o.tc;
  tc.seed = o.seed;
  harness::MlpModel model = harness::MlpModel::make(model_dims(task, o.hidden), o.seed);
  harness::TrainReport rep = harness::train(model, loaded.builder, opt, task, tc);

  fs::path out(o.out);
  write_atomic(out / "train.csv", harness::report_to_csv(rep));
  std::cout << "loss: " << loaded.kind << " (" << loaded.description << ")\n"
            << "final validation " << metric_name(task) << ": " << fmt6(rep.final_valid_metric)
            << "\nfinal test " << metric_name(task) << ": " << fmt6(rep.final_test_metric) << "\n";
  return 0;
}

// --- analyze ------------------------------------------------------------------------

struct AnalyzeOpts {
  std::string out = "out";
  std::string regime = "";
  int classes = 10;
  double xi = 0.1;
  double phi0 = 1.0;
  double phi1 = 1.0;
  std::string grid_loss = "";
};

int run_analyze(const AnalyzeOpts& o) {
  if (o.regime.empty() && o.grid_loss.empty())
    throw std::invalid_argument("analyze: pass --regime null|zero and/or --grid-loss <name>");
  fs::path out(o.out);

  if (!o.regime.empty()) {
    losses::Regime regime;
    if (o.regime == "null")
      regime = losses::Regime::NullEpoch;
    else if (o.regime == "zero")
      regime = losses::Regime::ZeroError;
    else
      throw std::invalid_argument("analyze: --regime must be null or zero");

    losses::DeltaParams params;
    params.xi = o.xi;
    params.phi0 = o.phi0;
    params.phi1 = o.phi1;
    std::string csv = "loss,classes,regime,delta_target,delta_nontarget\n";
    struct RowSpec {
      const char* name;
      losses::DeltaLoss loss;
    };
    for (RowSpec r : {RowSpec{"ce", losses::DeltaLoss::CE}, RowSpec{"ace", losses::DeltaLoss::ACE},
                      RowSpec{"lsr", losses::DeltaLoss::LSR}}) {
      losses::DeltaLimits lim = losses::delta_behavior(r.loss, regime, o.classes, params);
      csv += std::string(r.name) + "," + std::to_string(o.classes) + "," + o.regime + "," +
             fmt(lim.target) + "," + fmt(lim.nontarget) + "\n";
    }
    write_atomic(out / ("delta_" + o.regime + ".csv"), csv);
    std::cout << csv;
  }

  if (!o.grid_loss.empty()) {
    losses::LossSpec spec = losses::parse_loss_name(o.grid_loss);
    std::string csv = "y,f,loss\n";
    Series target, nontarget;
    target.stroke = "#1f77b4";
    nontarget.stroke = "#d62728";
    if (spec.domain == losses::LossSpec::Classification) {
      // two-class surface: scan the target-class probability
      for (int i = 1; i < 99; ++i) {
        double p = i / 99.0;
        ad::Tape tape;
        ad::Var y = tape.constant(ad::Tensor::row({1.0, 0.0}));
        // logits reproducing probabilities (p, 1-p)
        ad::Var z = tape.constant(ad::Tensor::row({std::log(p), std::log(1.0 - p)}));
        double v = spec.build(tape, y, z).value().scalar_value();
        csv += "1," + fmt(p) + "," + fmt(v) + "\n";
        target.x.push_back(p);
        target.y.push_back(v);
      }
    } else {
      for (int i = 0; i < 99; ++i) {
        double f = -3.0 + i * (6.0 / 98.0);
        ad::Tape tape;
        ad::Var y = tape.constant(ad::Tensor::scalar(0.0));
        ad::Var z = tape.constant(ad::Tensor::scalar(f));
        double v = spec.build(tape, y, z).value().scalar_value();
        csv += "0," + fmt(f) + "," + fmt(v) + "\n";
        target.x.push_back(f);
        target.y.push_back(v);
      }
    }
    std::vector<Series> series{target};
    if (!nontarget.x.empty()) series.push_back(nontarget);
    write_atomic(out / "grid.csv", csv);
    write_atomic(out / "grid.svg", svg_lines(series, "loss surface: " + spec.name));
    std::cout << "grid written for " << spec.name << "\n";
  }
  return 0;
}

// --- bench ------------------------------------------------------------------------

struct BenchLsrOpts {
  std::string out = "out";
  std::vector<int> classes = {3, 10, 100, 1000, 10000};
  int batch = 100;
  int reps = 30;
  double xi = 0.1;
  bool include_lse = false;
  std::uint64_t seed = 42;
};

int run_bench_lsr(const BenchLsrOpts& o) {
  std::string csv = "classes,time_ns_sparse,time_ns_nonsparse\n";
  for (int C : o.classes) {
    losses::LsrTiming t = losses::measure_lsr_pair(C, o.batch, o.reps, o.xi, o.include_lse, o.seed);
    csv += std::to_string(C) + "," + fmt(t.sparse_ns) + "," + fmt(t.nonsparse_ns) + "\n";
  }
  write_atomic(fs::path(o.out) / "bench_sparse_lsr.csv", csv);
  std::cout << csv;
  return 0;
}

struct BenchLrOpts {
  std::string task = "two-moons";
  std::string out = "out";
  std::vector<double> alphas = {0.001, 0.003, 0.01, 0.03, 0.1, 0.3};
  int steps = 300;
  int seeds = 3;
  std::uint64_t seed = 42;
  int n = 600;
  double noise = -1.0;
};

int run_bench_lr(const BenchLrOpts& o) {
  std::string csv = "alpha,mean_metric\n";
  Series curve;
  for (double a : o.alphas) {
    double acc = 0.0;
    int ok = 0;
    for (int s = 0; s < o.seeds; ++s) {
      std::uint64_t seed = harness::derive_seed(o.seed, 0x15ee, std::uint64_t(s));
      harness::Task task = make_task(o.task, seed, o.n, o.noise);
      losses::LossSpec spec = losses::parse_loss_name(
          task.kind == harness::Task::Classification ? "ce" : "squared");
      harness::MlpModel model = harness::MlpModel::make(model_dims(task, {16}), seed);
      harness::OptimizerState opt = harness::OptimizerState::sgd(a);
      harness::TrainConfig tc;
      tc.steps = o.steps;
      tc.seed = seed;
      tc.eval_every = 0;
      try {
        harness::TrainReport rep =
            harness::train(model, harness::builder_from_spec(spec), opt, task, tc);
        acc += rep.final_valid_metric;
        ++ok;
      } catch (const harness::DivergenceError&) {
        // divergent rate: skip; the sweep reports the finite mean
      }
    }
    double mean = ok > 0 ? acc / ok : std::numeric_limits<double>::quiet_NaN();
    csv += fmt(a) + "," + fmt(mean) + "\n";
    if (std::isfinite(mean)) {
      curve.x.push_back(std::log10(a));
      curve.y.push_back(mean);
    }
  }
  write_atomic(fs::path(o.out) / "bench_lr_sweep.csv", csv);
  write_atomic(fs::path(o.out) / "bench_lr_sweep.svg",
               svg_lines({curve}, "validation metric vs log10(learning rate)"));
  std::cout << csv;
  return 0;
}

void add_task_options(CLI::App* cmd, ConfigFile& cfg, std::string& task, std::uint64_t& seed,
                      std::string& out, int& n, double& noise) {
  cmd->add_option("--task", task, "task spec: synth-reg, two-moons, csv-reg:<path>, csv-class:<path>, idx:<path>")
      ->capture_default_str();
  cmd->add_option("--seed", seed, "run seed")->envname("METALOSS_SEED")->capture_default_str();
  cmd->add_option("--out", out, "output directory")->capture_default_str();
  cmd->add_option("--n", n, "synthetic dataset size")->capture_default_str();
  cmd->add_option("--noise", noise, "synthetic noise level (negative: task default)");
  cfg.bind("task", task);
  cfg.bind("seed", seed);
  cfg.bind("out", out);
  cfg.bind("n", n);
  cfg.bind("noise", noise);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meta-learned loss function toolkit"};
  app.require_subcommand(1);

  EvolveOpts ev;
  CLI::App* cmd_evolve = app.add_subcommand("evolve", "discover symbolic loss functions");
  ConfigFile cfg_evolve(cmd_evolve);
  add_task_options(cmd_evolve, cfg_evolve, ev.task, ev.seed, ev.out, ev.n, ev.noise);
  cmd_evolve->add_option("--gens", ev.gp.generations, "GP generations")->capture_default_str();
  cmd_evolve->add_option("--pop", ev.gp.population_size, "population size")->capture_default_str();
  cmd_evolve->add_option("--workers", ev.mc.workers, "parallel evaluation workers")
      ->capture_default_str();
  cmd_evolve->add_flag("--no-local-search", ev.no_local_search,
                       "skip gradient local search (pure GP over initialized networks)");
  cmd_evolve->add_option("--s-meta", ev.mc.s_meta, "local-search meta steps")->capture_default_str();
  cmd_evolve->add_option("--s-testing", ev.mc.s_testing, "fitness-evaluation training steps")
      ->capture_default_str();
  cmd_evolve->add_option("--alpha", ev.mc.alpha, "inner SGD rate")->capture_default_str();
  cmd_evolve->add_option("--eta", ev.mc.eta, "local-search meta rate")->capture_default_str();
  cmd_evolve->add_option("--batch", ev.mc.batch, "batch size")->capture_default_str();
  cfg_evolve.bind("gens", ev.gp.generations);
  cfg_evolve.bind("pop", ev.gp.population_size);
  cfg_evolve.bind("workers", ev.mc.workers);
  cfg_evolve.bind("no-local-search", ev.no_local_search);
  cfg_evolve.bind("s-meta", ev.mc.s_meta);
  cfg_evolve.bind("s-testing", ev.mc.s_testing);
  cfg_evolve.bind("alpha", ev.mc.alpha);
  cfg_evolve.bind("eta", ev.mc.eta);
  cfg_evolve.bind("batch", ev.mc.batch);

  AdaptOpts ad_;
  CLI::App* cmd_adapt = app.add_subcommand("adapt", "adaptive meta-loss training");
  ConfigFile cfg_adapt(cmd_adapt);
  add_task_options(cmd_adapt, cfg_adapt, ad_.task, ad_.seed, ad_.out, ad_.n, ad_.noise);
  cmd_adapt->add_option("--mode", ad_.mode, "online or offline")
      ->check(CLI::IsMember({"online", "offline"}))
      ->capture_default_str();
  cmd_adapt->add_option("--meta-source", ad_.meta_source, "meta-objective batches: train or valid")
      ->check(CLI::IsMember({"train", "valid"}))
      ->capture_default_str();
  ad_.ac.s_init = 0;  // desk-scale default: no offline phase unless asked
  cmd_adapt->add_option("--s-init", ad_.ac.s_init, "offline meta steps")->capture_default_str();
  cmd_adapt->add_option("--s-train", ad_.ac.s_train, "online steps")->capture_default_str();
  cmd_adapt->add_option("--alpha", ad_.ac.alpha, "base SGD rate")->capture_default_str();
  cmd_adapt->add_option("--eta-offline", ad_.ac.eta_offline, "offline meta rate")
      ->capture_default_str();
  cmd_adapt->add_option("--eta-online", ad_.ac.eta_online, "online meta rate")
      ->capture_default_str();
  cmd_adapt->add_option("--batch", ad_.ac.batch, "batch size")->capture_default_str();
  cmd_adapt->add_option("--hidden", ad_.hidden, "meta-loss hidden width")->capture_default_str();
  cmd_adapt->add_option("--snapshot-every", ad_.ac.snapshot_every, "loss-shape snapshot cadence")
      ->capture_default_str();
  cmd_adapt->add_option("--eval-every", ad_.ac.eval_every, "validation metric cadence")
      ->capture_default_str();
  cfg_adapt.bind("mode", ad_.mode);
  cfg_adapt.bind("meta-source", ad_.meta_source);
  cfg_adapt.bind("s-init", ad_.ac.s_init);
  cfg_adapt.bind("s-train", ad_.ac.s_train);
  cfg_adapt.bind("alpha", ad_.ac.alpha);
  cfg_adapt.bind("eta-offline", ad_.ac.eta_offline);
  cfg_adapt.bind("eta-online", ad_.ac.eta_online);
  cfg_adapt.bind("batch", ad_.ac.batch);
  cfg_adapt.bind("hidden", ad_.hidden);
  cfg_adapt.bind("snapshot-every", ad_.ac.snapshot_every);
  cfg_adapt.bind("eval-every", ad_.ac.eval_every);

  TrainOpts tr;
  CLI::App* cmd_train = app.add_subcommand("train", "train with a named loss or artifact");
  ConfigFile cfg_train(cmd_train);
  add_task_options(cmd_train, cfg_train, tr.task, tr.seed, tr.out, tr.n, tr.noise);
  cmd_train->add_option("--loss", tr.loss,
                        "loss name (ce, lsr:0.1, sparse-lsr:0.1, ace:1:1.1, focal:2, squared, "
                        "pseudo-huber:1, ...) or artifact JSON path");
  cmd_train->add_option("--opt", tr.opt, "optimizer: sgd, momentum, adam")
      ->check(CLI::IsMember({"sgd", "momentum", "adam"}))
      ->capture_default_str();
  cmd_train->add_option("--alpha", tr.alpha, "learning rate")->capture_default_str();
  cmd_train->add_option("--steps", tr.tc.steps, "training steps")->capture_default_str();
  cmd_train->add_option("--batch", tr.tc.batch, "batch size")->capture_default_str();
  cmd_train->add_option("--eval-every", tr.tc.eval_every, "validation metric cadence")
      ->capture_default_str();
  cmd_train->add_option("--hidden", tr.hidden, "hidden layer widths")->capture_default_str();
  cfg_train.bind("loss", tr.loss);
  cfg_train.bind("opt", tr.opt);
  cfg_train.bind("alpha", tr.alpha);
  cfg_train.bind("steps", tr.tc.steps);
  cfg_train.bind("batch", tr.tc.batch);
  cfg_train.bind("eval-every", tr.tc.eval_every);
  cfg_train.bind("hidden", tr.hidden);

  AnalyzeOpts an;
  CLI::App* cmd_analyze = app.add_subcommand("analyze", "behavior tables and loss-surface grids");
  cmd_analyze->add_option("--out", an.out, "output directory")->capture_default_str();
  cmd_analyze->add_option("--regime", an.regime, "learning-rule limits: null or zero");
  cmd_analyze->add_option("--classes", an.classes, "class count for the table")
      ->capture_default_str();
  cmd_analyze->add_option("--xi", an.xi, "label-smoothing strength")->capture_default_str();
  cmd_analyze->add_option("--phi0", an.phi0, "absolute-CE scale")->capture_default_str();
  cmd_analyze->add_option("--phi1", an.phi1, "absolute-CE shift")->capture_default_str();
  cmd_analyze->add_option("--grid-loss", an.grid_loss, "emit a value grid + SVG for this loss");
  ConfigFile cfg_analyze(cmd_analyze);
  cfg_analyze.bind("out", an.out);
  cfg_analyze.bind("regime", an.regime);
  cfg_analyze.bind("classes", an.classes);
  cfg_analyze.bind("xi", an.xi);
  cfg_analyze.bind("phi0", an.phi0);
  cfg_analyze.bind("phi1", an.phi1);
  cfg_analyze.bind("grid-loss", an.grid_loss);

  CLI::App* cmd_bench = app.add_subcommand("bench", "runtime sweeps");
  cmd_bench->require_subcommand(1);
  BenchLsrOpts bl;
  CLI::App* cmd_bench_lsr = cmd_bench->add_subcommand(
      "sparse-lsr", "sparse vs dense label-smoothing runtime across class counts");
  cmd_bench_lsr->add_option("--classes", bl.classes, "class counts")->delimiter(',')
      ->capture_default_str();
  cmd_bench_lsr->add_option("--batch", bl.batch, "rows per timed batch")->capture_default_str();
  cmd_bench_lsr->add_option("--reps", bl.reps, "timing repetitions (median)")
      ->capture_default_str();
  cmd_bench_lsr->add_option("--xi", bl.xi, "smoothing strength")->capture_default_str();
  cmd_bench_lsr->add_flag("--include-lse", bl.include_lse,
                          "time the shared log-sum-exp inside the loop");
  cmd_bench_lsr->add_option("--out", bl.out, "output directory")->capture_default_str();
  cmd_bench_lsr->add_option("--seed", bl.seed, "run seed")->envname("METALOSS_SEED")
      ->capture_default_str();
  ConfigFile cfg_bench_lsr(cmd_bench_lsr);
  cfg_bench_lsr.bind("classes", bl.classes);
  cfg_bench_lsr.bind("batch", bl.batch);
  cfg_bench_lsr.bind("reps", bl.reps);
  cfg_bench_lsr.bind("xi", bl.xi);
  cfg_bench_lsr.bind("include-lse", bl.include_lse);
  cfg_bench_lsr.bind("out", bl.out);
  cfg_bench_lsr.bind("seed", bl.seed);

  BenchLrOpts br;
  CLI::App* cmd_bench_lr =
      cmd_bench->add_subcommand("lr-sweep", "validation metric across learning rates");
  cmd_bench_lr->add_option("--task", br.task, "task spec")->capture_default_str();
  cmd_bench_lr->add_option("--alphas", br.alphas, "learning rates")->delimiter(',')
      ->capture_default_str();
  cmd_bench_lr->add_option("--steps", br.steps, "steps per run")->capture_default_str();
  cmd_bench_lr->add_option("--seeds", br.seeds, "seeds per rate")->capture_default_str();
  cmd_bench_lr->add_option("--seed", br.seed, "run seed")->envname("METALOSS_SEED")
      ->capture_default_str();
  cmd_bench_lr->add_option("--out", br.out, "output directory")->capture_default_str();
  cmd_bench_lr->add_option("--n", br.n, "synthetic dataset size")->capture_default_str();
  cmd_bench_lr->add_option("--noise", br.noise, "synthetic noise level");
  ConfigFile cfg_bench_lr(cmd_bench_lr);
  cfg_bench_lr.bind("task", br.task);
  cfg_bench_lr.bind("alphas", br.alphas);
  cfg_bench_lr.bind("steps", br.steps);
  cfg_bench_lr.bind("seeds", br.seeds);
  cfg_bench_lr.bind("seed", br.seed);
  cfg_bench_lr.bind("out", br.out);
  cfg_bench_lr.bind("n", br.n);
  cfg_bench_lr.bind("noise", br.noise);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(cmd_evolve)) {
      cfg_evolve.apply();
      return run_evolve(ev);
    }
    if (app.got_subcommand(cmd_adapt)) {
      cfg_adapt.apply();
      return run_adapt(ad_);
    }
    if (app.got_subcommand(cmd_train)) {
      cfg_train.apply();
      return run_train(tr);
    }
    if (app.got_subcommand(cmd_analyze)) {
      cfg_analyze.apply();
      return run_analyze(an);
    }
    if (app.got_subcommand(cmd_bench)) {
      if (cmd_bench->got_subcommand(cmd_bench_lsr)) {
        cfg_bench_lsr.apply();
        return run_bench_lsr(bl);
      }
      cfg_bench_lr.apply();
      return run_bench_lr(br);
    }
  } catch (const harness::DivergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
