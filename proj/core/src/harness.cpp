#include "metaloss/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace metaloss::harness {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void format_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(seed ^ 0xa5a5a5a5a5a5a5a5ULL) + a) + splitmix64(b) + c);
}

// --- batches -----------------------------------------------------------------

namespace {
Batch gather(const Task& task, const std::vector<int>& rows) {
  Batch b;
  int d = task.dim();
  b.x = ad::Tensor(int(rows.size()), d);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < d; ++c) b.x.at(int(r), c) = task.features.at(rows[r], c);
  if (task.kind == Task::Classification) {
    b.y = ad::Tensor(int(rows.size()), task.class_count);
    b.targets.resize(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
      int t = int(task.labels[size_t(rows[r])]);
      b.targets[r] = t;
      b.y.at(int(r), t) = 1.0;
    }
  } else {
    b.y = ad::Tensor(int(rows.size()), 1);
    for (size_t r = 0; r < rows.size(); ++r) b.y.at(int(r), 0) = task.labels[size_t(rows[r])];
  }
  return b;
}
}  // namespace

Batch sample_batch(const Task& task, const std::vector<int>& split, int batch_size,
                   std::mt19937_64& rng) {
  if (split.empty()) throw std::invalid_argument("sample_batch: empty split");
  std::uniform_int_distribution<size_t> draw(0, split.size() - 1);
  std::vector<int> rows(size_t(batch_size), 0);
  for (int& r : rows) r = split[draw(rng)];
  return gather(task, rows);
}

Batch full_split_batch(const Task& task, const std::vector<int>& split) {
  return gather(task, split);
}

// --- initializers -------------------------------------------------------------

double glorot_bound(int fan_in, int fan_out, InitMode mode) {
  if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("glorot: fans must be >= 1");
  return mode == InitMode::Uniform ? std::sqrt(6.0 / (fan_in + fan_out))
                                   : std::sqrt(2.0 / (fan_in + fan_out));
}

double he_bound(int fan_in, InitMode mode) {
  if (fan_in < 1) throw std::invalid_argument("he: fan_in must be >= 1");
  return mode == InitMode::Uniform ? std::sqrt(3.0 / fan_in) : std::sqrt(1.0 / fan_in);
}

namespace {
ad::Tensor fill_init(int fan_in, int fan_out, InitMode mode, double bound, std::mt19937_64& rng) {
  ad::Tensor w(fan_in, fan_out);
  if (mode == InitMode::Uniform) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : w.v) x = dist(rng);
  } else {
    std::normal_distribution<double> dist(0.0, bound);
    for (double& x : w.v) x = dist(rng);
  }
  return w;
}
}  // namespace

ad::Tensor glorot_init(int fan_in, int fan_out, InitMode mode, std::mt19937_64& rng) {
  return fill_init(fan_in, fan_out, mode, glorot_bound(fan_in, fan_out, mode), rng);
}

ad::Tensor he_init(int fan_in, int fan_out, InitMode mode, std::mt19937_64& rng) {
  return fill_init(fan_in, fan_out, mode, he_bound(fan_in, mode), rng);
}

// --- model --------------------------------------------------------------------

MlpModel MlpModel::make(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("MlpModel: need at least input/output dims");
  MlpModel m;
  m.dims = dims;
  std::mt19937_64 rng(derive_seed(seed, 0x11d0de1));
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    m.params.push_back(he_init(dims[l], dims[l + 1], InitMode::Normal, rng));
    m.params.push_back(ad::Tensor(1, dims[l + 1]));  // zero bias row
  }
  return m;
}

std::vector<ad::Var> MlpModel::params_as_inputs(ad::Tape& tape) const {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.input(p));
  return vars;
}

ad::Var MlpModel::forward(ad::Tape& tape, const std::vector<ad::Var>& params, ad::Var x) {
  (void)tape;
  ad::Var h = x;
  size_t layers = params.size() / 2;
  for (size_t l = 0; l < layers; ++l) {
    h = ad::add(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layers) h = ad::relu(h);
  }
  return h;
}

void MlpModel::assign(const std::vector<ad::Var>& vars) {
  if (vars.size() != params.size()) throw std::invalid_argument("MlpModel::assign: size mismatch");
  for (size_t i = 0; i < vars.size(); ++i) params[i] = vars[i].value();
}

bool MlpModel::finite() const {
  for (const auto& p : params)
    if (!p.all_finite()) return false;
  return true;
}

// --- optimizers ------------------------------------------------------------------

OptimizerState OptimizerState::sgd(double alpha) {
  OptimizerState s;
  s.kind = Sgd;
  s.alpha = alpha;
  return s;
}

OptimizerState OptimizerState::with_momentum(double alpha, double mu) {
  OptimizerState s;
  s.kind = Momentum;
  s.alpha = alpha;
  s.momentum = mu;
  return s;
}

OptimizerState OptimizerState::adam(double alpha, bool bias_correction) {
  OptimizerState s;
  s.kind = Adam;
  s.alpha = alpha;
  s.bias_correction = bias_correction;
  return s;
}

void OptimizerState::step(std::vector<ad::Tensor>& params, const std::vector<ad::Tensor>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("optimizer: size mismatch");
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].shape() != grads[i].shape())
      throw std::invalid_argument("optimizer: parameter/gradient shape mismatch");
  if (kind != Sgd && m.empty()) {
    for (const auto& p : params) m.emplace_back(p.rows, p.cols);
    if (kind == Adam)
      for (const auto& p : params) v.emplace_back(p.rows, p.cols);
  }
  ++step_count;
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].v;
    const auto& g = grads[i].v;
    switch (kind) {
      case Sgd:
        for (size_t j = 0; j < p.size(); ++j) p[j] -= alpha * g[j];
        break;
      case Momentum:
        // v_t = alpha * grad + mu * v_{t-1};  theta <- theta - v_t
        for (size_t j = 0; j < p.size(); ++j) {
          double vel = alpha * g[j] + momentum * m[i].v[j];
          m[i].v[j] = vel;
          p[j] -= vel;
        }
        break;
      case Adam: {
        double bc1 = bias_correction ? 1.0 - std::pow(beta1, double(step_count)) : 1.0;
        double bc2 = bias_correction ? 1.0 - std::pow(beta2, double(step_count)) : 1.0;
        for (size_t j = 0; j < p.size(); ++j) {
          m[i].v[j] = beta1 * m[i].v[j] + (1.0 - beta1) * g[j];
          v[i].v[j] = beta2 * v[i].v[j] + (1.0 - beta2) * g[j] * g[j];
          double mhat = m[i].v[j] / bc1;
          double vhat = v[i].v[j] / bc2;
          p[j] -= alpha * mhat / (std::sqrt(vhat) + eps_adam);
        }
        break;
      }
    }
  }
}

// --- dataset construction ------------------------------------------------------------

namespace {

void split_indices(Task& task, std::uint64_t seed, double train_frac, double valid_frac) {
  int n = task.rows();
  std::vector<int> order(size_t(n), 0);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 0x5b1175));
  std::shuffle(order.begin(), order.end(), rng);
  int n_train = int(std::lround(train_frac * n));
  int n_valid = int(std::lround(valid_frac * n));
  n_train = std::clamp(n_train, 1, n - 2);
  n_valid = std::clamp(n_valid, 1, n - n_train - 1);
  task.train_idx.assign(order.begin(), order.begin() + n_train);
  task.valid_idx.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  task.test_idx.assign(order.begin() + n_train + n_valid, order.end());
}

// z-normalization with statistics computed on the train split only
void normalize_features(Task& task) {
  int d = task.dim();
  task.feature_mean.assign(size_t(d), 0.0);
  task.feature_std.assign(size_t(d), 1.0);
  for (int c = 0; c < d; ++c) {
    double s = 0.0;
    for (int r : task.train_idx) s += task.features.at(r, c);
    double mean = s / double(task.train_idx.size());
    double sq = 0.0;
    for (int r : task.train_idx) {
      double dlt = task.features.at(r, c) - mean;
      sq += dlt * dlt;
    }
    double sd = std::sqrt(sq / double(task.train_idx.size()));
    if (sd < 1e-12) sd = 1.0;
    task.feature_mean[size_t(c)] = mean;
    task.feature_std[size_t(c)] = sd;
    for (int r = 0; r < task.rows(); ++r)
      task.features.at(r, c) = (task.features.at(r, c) - mean) / sd;
  }
}

void normalize_labels(Task& task) {
  double s = 0.0;
  for (int r : task.train_idx) s += task.labels[size_t(r)];
  double mean = s / double(task.train_idx.size());
  double sq = 0.0;
  for (int r : task.train_idx) {
    double d = task.labels[size_t(r)] - mean;
    sq += d * d;
  }
  double sd = std::sqrt(sq / double(task.train_idx.size()));
  if (sd < 1e-12) sd = 1.0;
  task.label_mean = mean;
  task.label_std = sd;
  for (double& y : task.labels) y = (y - mean) / sd;
}

}  // namespace

Task make_synthetic_regression(std::uint64_t seed, int n, double noise) {
  if (n < 30) throw std::invalid_argument("make_synthetic_regression: n must be >= 30");
  Task task;
  task.name = "synth-reg";
  task.kind = Task::Regression;
  task.features = ad::Tensor(n, 1);
  task.labels.resize(size_t(n));
  std::mt19937_64 rng(derive_seed(seed, 0xda7a1));
  std::uniform_real_distribution<double> xs(-2.0, 2.0);
  std::normal_distribution<double> eps(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    double x = xs(rng);
    task.features.at(i, 0) = x;
    task.labels[size_t(i)] = std::sin(2.0 * x) + 0.5 * x + noise * eps(rng);
  }
  split_indices(task, seed, 0.6, 0.2);
  normalize_features(task);
  normalize_labels(task);
  return task;
}

void inject_label_outliers(Task& task, double fraction, double offset, std::uint64_t seed) {
  if (task.kind != Task::Regression)
    throw std::invalid_argument("inject_label_outliers: regression tasks only");
  std::mt19937_64 rng(derive_seed(seed, 0x0071));
  std::vector<int> rows = task.train_idx;
  std::shuffle(rows.begin(), rows.end(), rng);
  size_t k = size_t(std::lround(fraction * double(rows.size())));
  for (size_t i = 0; i < k && i < rows.size(); ++i) task.labels[size_t(rows[i])] += offset;
}

Task make_two_moons(std::uint64_t seed, int n, double noise) {
  if (n < 30) throw std::invalid_argument("make_two_moons: n must be >= 30");
  Task task;
  task.name = "two-moons";
  task.kind = Task::Classification;
  task.class_count = 2;
  task.features = ad::Tensor(n, 2);
  task.labels.resize(size_t(n));
  std::mt19937_64 rng(derive_seed(seed, 0xda7a2));
  std::uniform_real_distribution<double> ts(0.0, 3.14159265358979323846);
  std::normal_distribution<double> eps(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    double t = ts(rng);
    int label = i % 2;
    double x, y;
    if (label == 0) {
      x = std::cos(t);
      y = std::sin(t);
    } else {
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
    }
    task.features.at(i, 0) = x + noise * eps(rng);
    task.features.at(i, 1) = y + noise * eps(rng);
    task.labels[size_t(i)] = label;
  }
  split_indices(task, seed, 0.6, 0.2);
  normalize_features(task);
  return task;
}

// --- CSV loader -----------------------------------------------------------------------

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
  // RFC-4180-style: quoted fields may contain commas and doubled quotes.
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}
}  // namespace

Task load_csv_task(const std::string& path, Task::Kind kind, std::uint64_t seed,
                   double train_frac, double valid_frac) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv_task: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv_task: empty file '" + path + "'");
  std::vector<std::string> header = split_csv_line(line);
  int label_col = -1;
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == "target") label_col = int(i);
  if (label_col < 0)
    throw std::runtime_error("load_csv_task: no column named 'target' in '" + path + "'");

  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("load_csv_task: line " + std::to_string(lineno) +
                               " has " + std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    std::vector<double> vals(fields.size());
    for (size_t i = 0; i < fields.size(); ++i) {
      try {
        size_t used = 0;
        vals[i] = std::stod(fields[i], &used);
        if (used != fields[i].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv_task: non-numeric field '" + fields[i] + "' at line " +
                                 std::to_string(lineno));
      }
    }
    rows.push_back(std::move(vals));
  }
  if (rows.size() < 5) throw std::runtime_error("load_csv_task: too few data rows");

  Task task;
  task.name = path;
  task.kind = kind;
  int d = int(rows[0].size()) - 1;
  task.features = ad::Tensor(int(rows.size()), d);
  task.labels.resize(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    int c_out = 0;
    for (size_t c = 0; c < rows[r].size(); ++c) {
      if (int(c) == label_col) {
        task.labels[r] = rows[r][c];
      } else {
        task.features.at(int(r), c_out++) = rows[r][c];
      }
    }
  }
  if (kind == Task::Classification) {
    int maxc = 0;
    for (double y : task.labels) {
      if (y < 0 || y != std::floor(y))
        throw std::runtime_error("load_csv_task: classification labels must be integers >= 0");
      maxc = std::max(maxc, int(y));
    }
    task.class_count = maxc + 1;
    if (task.class_count < 2) throw std::runtime_error("load_csv_task: need at least 2 classes");
  }
  split_indices(task, seed, train_frac, valid_frac);
  normalize_features(task);
  if (kind == Task::Regression) normalize_labels(task);
  return task;
}

// --- IDX loader -------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IdxError("idx: truncated header in '" + path + "'");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

struct IdxPair {
  int n = 0, width = 0, height = 0;
  std::vector<unsigned char> pixels;
  std::vector<unsigned char> labels;
};

IdxPair read_idx_pair(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IdxError("idx: cannot open '" + images_path + "'");
  std::uint32_t magic = read_be32(img, images_path);
  if (magic != 0x00000803u)
    throw IdxError("idx: bad image magic in '" + images_path + "' (expected 0x00000803)");
  IdxPair p;
  p.n = int(read_be32(img, images_path));
  p.height = int(read_be32(img, images_path));
  p.width = int(read_be32(img, images_path));
  p.pixels.resize(size_t(p.n) * p.height * p.width);
  img.read(reinterpret_cast<char*>(p.pixels.data()), std::streamsize(p.pixels.size()));
  if (!img) throw IdxError("idx: truncated image data in '" + images_path + "'");

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IdxError("idx: cannot open '" + labels_path + "'");
  magic = read_be32(lab, labels_path);
  if (magic != 0x00000801u)
    throw IdxError("idx: bad label magic in '" + labels_path + "' (expected 0x00000801)");
  int nl = int(read_be32(lab, labels_path));
  if (nl != p.n) throw IdxError("idx: image/label count mismatch");
  p.labels.resize(size_t(nl));
  lab.read(reinterpret_cast<char*>(p.labels.data()), std::streamsize(p.labels.size()));
  if (!lab) throw IdxError("idx: truncated label data in '" + labels_path + "'");
  return p;
}

std::string derive_labels_path(const std::string& images_path) {
  std::string p = images_path;
  auto replace_all = [&](const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = p.find(from, pos)) != std::string::npos) {
      p.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all("images", "labels");
  replace_all("idx3", "idx1");
  return p;
}

}  // namespace

Task load_idx_images(const std::string& images_path, const std::string& labels_path,
                     const std::string& test_images_path, const std::string& test_labels_path,
                     std::uint64_t seed) {
  std::string lab = labels_path.empty() ? derive_labels_path(images_path) : labels_path;
  IdxPair train = read_idx_pair(images_path, lab);

  IdxPair test;
  bool has_test = !test_images_path.empty();
  if (has_test) {
    std::string tlab = test_labels_path.empty() ? derive_labels_path(test_images_path)
                                                : test_labels_path;
    test = read_idx_pair(test_images_path, tlab);
    if (test.width != train.width || test.height != train.height)
      throw IdxError("idx: train/test image shapes differ");
  }

  Task task;
  task.name = images_path;
  task.kind = Task::Classification;
  int d = train.width * train.height;
  int n = train.n + (has_test ? test.n : 0);
  task.features = ad::Tensor(n, d);
  task.labels.resize(size_t(n));
  int maxc = 0;
  for (int i = 0; i < train.n; ++i) {
    for (int c = 0; c < d; ++c)
      task.features.at(i, c) = double(train.pixels[size_t(i) * d + c]) / 255.0;
    task.labels[size_t(i)] = double(train.labels[size_t(i)]);
    maxc = std::max(maxc, int(train.labels[size_t(i)]));
  }
  for (int i = 0; i < (has_test ? test.n : 0); ++i) {
    int r = train.n + i;
    for (int c = 0; c < d; ++c)
      task.features.at(r, c) = double(test.pixels[size_t(i) * d + c]) / 255.0;
    task.labels[size_t(r)] = double(test.labels[size_t(i)]);
    maxc = std::max(maxc, int(test.labels[size_t(i)]));
  }
  task.class_count = maxc + 1;

  // 90:10 train/valid over the first pair; the optional second pair is the test set.
  std::vector<int> order(size_t(train.n), 0);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 0x1dc5));
  std::shuffle(order.begin(), order.end(), rng);
  int n_valid = std::max(1, train.n / 10);
  task.train_idx.assign(order.begin(), order.end() - n_valid);
  task.valid_idx.assign(order.end() - n_valid, order.end());
  if (has_test) {
    task.test_idx.resize(size_t(test.n));
    std::iota(task.test_idx.begin(), task.test_idx.end(), train.n);
  }
  normalize_features(task);
  return task;
}

// --- training loop -------------------------------------------------------------------------

LossBuilder builder_from_spec(const losses::LossSpec& spec) {
  auto build = spec.build;
  return [build](ad::Tape& tape, const Batch& batch, ad::Var pred) {
    return build(tape, tape.constant(batch.y), pred);
  };
}

double evaluate_metric(const MlpModel& model, const Task& task, const std::vector<int>& split) {
  if (split.empty()) return std::numeric_limits<double>::quiet_NaN();
  Batch b = full_split_batch(task, split);
  ad::Tape tape;
  std::vector<ad::Var> params = model.params_as_inputs(tape);
  ad::Var pred = MlpModel::forward(tape, params, tape.constant(b.x));
  const ad::Tensor& out = pred.value();
  if (task.kind == Task::Regression) {
    double s = 0.0;
    for (int r = 0; r < out.rows; ++r) {
      double d = out.at(r, 0) - b.y.at(r, 0);
      s += d * d;
    }
    return s / double(out.rows);
  }
  int wrong = 0;
  for (int r = 0; r < out.rows; ++r) {
    int best = 0;
    for (int c = 1; c < out.cols; ++c)
      if (out.at(r, c) > out.at(r, best)) best = c;
    if (best != b.targets[size_t(r)]) ++wrong;
  }
  return double(wrong) / double(out.rows);
}

TrainReport train(MlpModel& model, const LossBuilder& loss, OptimizerState& opt, const Task& task,
                  const TrainConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = cfg.seed;
  {
    std::string echo = "steps=" + std::to_string(cfg.steps) + ",batch=" + std::to_string(cfg.batch) +
                       ",task=" + task.name + ",alpha=";
    format_double(echo, opt.alpha);
    report.config_echo = echo;
  }
  std::mt19937_64 batch_rng(derive_seed(cfg.seed, 0xba7c4));

  StepRow start_row;
  start_row.step = 0;
  start_row.base_loss = std::numeric_limits<double>::quiet_NaN();
  start_row.metric = evaluate_metric(model, task, task.valid_idx);
  report.rows.push_back(start_row);

  for (int step = 1; step <= cfg.steps; ++step) {
    Batch b = sample_batch(task, task.train_idx, cfg.batch, batch_rng);
    ad::Tape tape;
    std::vector<ad::Var> params = model.params_as_inputs(tape);
    ad::Var pred = MlpModel::forward(tape, params, tape.constant(b.x));
    ad::Var l = loss(tape, b, pred);
    double lv = l.value().scalar_value();
    if (!std::isfinite(lv))
      throw DivergenceError("train: non-finite loss at step " + std::to_string(step));
    std::vector<ad::Var> grads = tape.backward(l, params);
    std::vector<ad::Tensor> gts;
    gts.reserve(grads.size());
    for (ad::Var g : grads) gts.push_back(g.value());
    opt.step(model.params, gts);
    if (!model.finite())
      throw DivergenceError("train: parameters diverged at step " + std::to_string(step));

    StepRow row;
    row.step = step;
    row.base_loss = lv;
    if (cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.steps))
      row.metric = evaluate_metric(model, task, task.valid_idx);
    report.rows.push_back(row);
  }

  report.final_valid_metric = evaluate_metric(model, task, task.valid_idx);
  report.final_test_metric = evaluate_metric(model, task, task.test_idx);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string report_to_csv(const TrainReport& report) {
  std::string out = "step,base_loss,meta_loss,metric\n";
  for (const StepRow& r : report.rows) {
    out += std::to_string(r.step);
    out += ',';
    if (std::isfinite(r.base_loss)) format_double(out, r.base_loss);
    out += ',';
    if (std::isfinite(r.meta_loss)) format_double(out, r.meta_loss);
    out += ',';
    if (std::isfinite(r.metric)) format_double(out, r.metric);
    out += '\n';
  }
  return out;
}

}  // namespace metaloss::harness
