#include "ramlab/synthgen.hpp"

#include <cmath>

#include "ramlab/errors.hpp"
#include "ramlab/rng.hpp"

namespace ramlab {

namespace {
constexpr int kFourierFeatures = 32;
constexpr double kTwoPi = 6.283185307179586476925286766559;

void validate(const TaskSpec& s) {
  if (s.d_x < 1 || s.d_z < 1) throw ConfigError("task: dimensions must be positive");
  if (s.num_classes < 2) throw ConfigError("task: need at least two classes");
  if (s.store_size < 1) throw ConfigError("task: store_size must be positive");
  if (s.n_train < 1 || s.n_test < 1) throw ConfigError("task: sample counts must be positive");
  if (!(s.omega > 0.0)) throw ConfigError("task: omega must be positive");
  if (!(s.score_scale > 0.0)) throw ConfigError("task: score_scale must be positive");
  if (s.label_noise < 0.0 || s.label_noise > 1.0)
    throw ConfigError("task: label_noise must lie in [0,1]");
}
}  // namespace

std::vector<double> FourierScore::eval(std::span<const double> u) const {
  if (static_cast<int>(u.size()) != dim) throw ShapeError("FourierScore: input size mismatch");
  std::vector<double> out(static_cast<size_t>(num_classes), 0.0);
  const double norm = scale * std::sqrt(2.0 / features);
  for (int y = 0; y < num_classes; ++y) {
    const Matrix& w = freqs[static_cast<size_t>(y)];
    double s = 0.0;
    for (int f = 0; f < features; ++f) {
      const double* wr = w.row(f);
      double ang = phase[static_cast<size_t>(y)][static_cast<size_t>(f)];
      for (int c = 0; c < dim; ++c) ang += wr[c] * u[static_cast<size_t>(c)];
      s += amp[static_cast<size_t>(y)][static_cast<size_t>(f)] *
           (std::cos(ang) - std::cos(phase[static_cast<size_t>(y)][static_cast<size_t>(f)]));
    }
    out[static_cast<size_t>(y)] = norm * s;
  }
  return out;
}

int oracle_evidence_index(const Matrix& relevance_map, const DataStore& store,
                          std::span<const double> x) {
  std::vector<double> proj(static_cast<size_t>(relevance_map.rows));
  for (int r = 0; r < relevance_map.rows; ++r) {
    const double* ar = relevance_map.row(r);
    double s = 0.0;
    for (int c = 0; c < relevance_map.cols; ++c) s += ar[c] * x[static_cast<size_t>(c)];
    proj[static_cast<size_t>(r)] = s;
  }
  int best = 0;
  double best_d = 0.0;
  for (int j = 0; j < store.size(); ++j) {
    const auto& z = store.evidences[static_cast<size_t>(j)];
    double d = 0.0;
    for (int r = 0; r < relevance_map.rows; ++r) {
      double diff = proj[static_cast<size_t>(r)] - z[static_cast<size_t>(r)];
      d += diff * diff;
    }
    if (j == 0 || d < best_d) {
      best = j;
      best_d = d;
    }
  }
  return best;
}

SynthTask generate(const TaskSpec& spec) {
  validate(spec);
  SynthTask task;
  task.spec = spec;

  // Structure: store, relevance map, and planted scores from map_seed.
  Rng structure(derive_seed(spec.map_seed, 0x5307));
  task.store.dim = spec.d_z;
  task.store.evidences.resize(static_cast<size_t>(spec.store_size));
  for (auto& z : task.store.evidences) {
    z.resize(static_cast<size_t>(spec.d_z));
    for (double& v : z) v = structure.uniform(-1.0, 1.0);
  }

  task.relevance_map = Matrix(spec.d_z, spec.d_x);
  for (int r = 0; r < spec.d_z; ++r) {
    double l1 = 0.0;
    for (int c = 0; c < spec.d_x; ++c) {
      double v = structure.uniform(-1.0, 1.0);
      task.relevance_map.at(r, c) = v;
      l1 += std::fabs(v);
    }
    double inv = 1.0 / std::max(l1, 1e-12);  // rows L1-normalized: A x stays in [-1,1]
    for (int c = 0; c < spec.d_x; ++c) task.relevance_map.at(r, c) *= inv;
  }

  FourierScore& fs = task.score;
  fs.dim = spec.d_x + spec.d_z;
  fs.num_classes = spec.num_classes;
  fs.features = kFourierFeatures;
  fs.scale = spec.score_scale;
  fs.freqs.resize(static_cast<size_t>(spec.num_classes));
  fs.phase.resize(static_cast<size_t>(spec.num_classes));
  fs.amp.resize(static_cast<size_t>(spec.num_classes));
  for (int y = 0; y < spec.num_classes; ++y) {
    fs.freqs[static_cast<size_t>(y)] = Matrix(fs.features, fs.dim);
    for (double& v : fs.freqs[static_cast<size_t>(y)].a) v = spec.omega * structure.normal();
    fs.phase[static_cast<size_t>(y)].resize(static_cast<size_t>(fs.features));
    for (double& v : fs.phase[static_cast<size_t>(y)]) v = structure.uniform(0.0, kTwoPi);
    fs.amp[static_cast<size_t>(y)].resize(static_cast<size_t>(fs.features));
    for (double& v : fs.amp[static_cast<size_t>(y)]) v = structure.normal();
  }

  // Samples and labels from data_seed.
  Rng data(derive_seed(spec.data_seed, 0xDA7A));
  auto draw_split = [&](int count, LabeledDataset& out, std::vector<int>& oracle,
                        std::vector<std::vector<double>>* bayes) {
    out.dim = spec.d_x;
    out.num_classes = spec.num_classes;
    out.xs.resize(static_cast<size_t>(count));
    out.ys.resize(static_cast<size_t>(count));
    oracle.resize(static_cast<size_t>(count));
    if (bayes) bayes->resize(static_cast<size_t>(count));
    std::vector<double> u(static_cast<size_t>(fs.dim));
    for (int i = 0; i < count; ++i) {
      auto& x = out.xs[static_cast<size_t>(i)];
      x.resize(static_cast<size_t>(spec.d_x));
      for (double& v : x) v = data.uniform(-1.0, 1.0);
      int star = oracle_evidence_index(task.relevance_map, task.store, x);
      oracle[static_cast<size_t>(i)] = star;
      std::copy(x.begin(), x.end(), u.begin());
      const auto& z = task.store.evidences[static_cast<size_t>(star)];
      std::copy(z.begin(), z.end(), u.begin() + spec.d_x);
      auto probs = softmax(fs.eval(u));
      // Categorical draw, then independent uniform resampling with prob eps.
      double r = data.uniform();
      int y = spec.num_classes - 1;
      double csum = 0.0;
      for (int cl = 0; cl < spec.num_classes; ++cl) {
        csum += probs[static_cast<size_t>(cl)];
        if (r < csum) {
          y = cl;
          break;
        }
      }
      if (data.uniform() < spec.label_noise)
        y = static_cast<int>(data.below(static_cast<std::uint64_t>(spec.num_classes)));
      out.ys[static_cast<size_t>(i)] = y;
      if (bayes) (*bayes)[static_cast<size_t>(i)] = std::move(probs);
    }
  };
  draw_split(spec.n_train, task.train, task.oracle_train, nullptr);
  draw_split(spec.n_test, task.test, task.oracle_test, &task.bayes_probs);
  return task;
}

double oracle_accuracy(const SynthTask& task) {
  double total = 0.0;
  for (const auto& probs : task.bayes_probs) {
    double mx = probs[0];
    for (double v : probs) mx = std::max(mx, v);
    total += mx;
  }
  return total / static_cast<double>(task.bayes_probs.size());
}

double oracle_recall(const SynthTask& task, std::span<const int> retrieved) {
  if (retrieved.size() != task.oracle_test.size())
    throw ShapeError("oracle_recall: retrieved list must align with test set");
  int hit = 0;
  for (size_t i = 0; i < retrieved.size(); ++i)
    if (retrieved[i] == task.oracle_test[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(retrieved.size());
}

double uniform_marginal_accuracy(const SynthTask& task) {
  const auto& spec = task.spec;
  std::vector<double> u(static_cast<size_t>(task.score.dim));
  double total = 0.0;
  for (size_t i = 0; i < task.test.xs.size(); ++i) {
    const auto& x = task.test.xs[i];
    std::copy(x.begin(), x.end(), u.begin());
    std::vector<double> q(static_cast<size_t>(spec.num_classes), 0.0);
    for (const auto& z : task.store.evidences) {
      std::copy(z.begin(), z.end(), u.begin() + spec.d_x);
      auto probs = softmax(task.score.eval(u));
      for (int y = 0; y < spec.num_classes; ++y) q[static_cast<size_t>(y)] += probs[static_cast<size_t>(y)];
    }
    int yhat = 0;
    for (int y = 1; y < spec.num_classes; ++y)
      if (q[static_cast<size_t>(y)] > q[static_cast<size_t>(yhat)]) yhat = y;
    total += task.bayes_probs[i][static_cast<size_t>(yhat)];
  }
  return total / static_cast<double>(task.test.xs.size());
}

}  // namespace ramlab
