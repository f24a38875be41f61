#include "ramlab/ram.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ramlab/csv.hpp"
#include "ramlab/errors.hpp"
#include "ramlab/rng.hpp"

namespace ramlab {

RamModel make_ram_model(int d_x, int d_z, int num_classes, int ret_depth, int ret_width,
                        int pred_depth, int pred_width, double ell_max, std::uint64_t seed) {
  if (num_classes < 1) throw ConfigError("make_ram_model: need at least one class");
  if (ell_max < std::log(static_cast<double>(num_classes)))
    throw ConfigError("make_ram_model: ell_max must be at least log(num_classes)");
  RamModel m;
  m.retriever = mlp_init(d_x + d_z, 1, ret_width, ret_depth, derive_seed(seed, 1));
  m.predictor = mlp_init(d_x + d_z, num_classes, pred_width, pred_depth, derive_seed(seed, 2));
  m.num_classes = num_classes;
  m.ell_max = ell_max;
  return m;
}

std::vector<double> softmax(std::span<const double> s) {
  if (s.empty()) throw ShapeError("softmax: empty input");
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  std::vector<double> out(s.size());
  double tot = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    out[i] = std::exp(s[i] - mx);
    tot += out[i];
  }
  for (double& v : out) v /= tot;
  return out;
}

double log_sum_exp(std::span<const double> s) {
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double tot = 0.0;
  for (double v : s) tot += std::exp(v - mx);
  return mx + std::log(tot);
}

static std::vector<double> concat_xz(std::span<const double> x, std::span<const double> z) {
  std::vector<double> u;
  u.reserve(x.size() + z.size());
  u.insert(u.end(), x.begin(), x.end());
  u.insert(u.end(), z.begin(), z.end());
  return u;
}

std::vector<double> retriever_scores(const RamModel& m, const DataStore& store,
                                     std::span<const double> x) {
  if (store.size() == 0) throw ShapeError("retriever_scores: empty store");
  std::vector<double> scores(static_cast<size_t>(store.size()));
  MlpWorkspace ws;
  std::vector<double> u(x.size() + static_cast<size_t>(store.dim));
  std::copy(x.begin(), x.end(), u.begin());
  for (int j = 0; j < store.size(); ++j) {
    const auto& z = store.evidences[static_cast<size_t>(j)];
    std::copy(z.begin(), z.end(), u.begin() + static_cast<std::ptrdiff_t>(x.size()));
    scores[static_cast<size_t>(j)] = mlp_forward_ws(m.retriever, u, ws)[0];
  }
  return scores;
}

std::vector<double> retriever_dist(std::span<const double> scores) { return softmax(scores); }

std::vector<double> predictor_scores(const RamModel& m, std::span<const double> x,
                                     std::span<const double> z) {
  return mlp_forward(m.predictor, concat_xz(x, z));
}

std::vector<double> predictor_dist(const RamModel& m, std::span<const double> x,
                                   std::span<const double> z) {
  return softmax(predictor_scores(m, x, z));
}

double bounded_log_loss(const RamModel& m, std::span<const double> x,
                        std::span<const double> z, int y) {
  if (y < 0 || y >= m.num_classes) throw ShapeError("bounded_log_loss: label out of range");
  auto h = predictor_scores(m, x, z);
  double raw = log_sum_exp(h) - h[static_cast<size_t>(y)];
  return std::min(m.ell_max, raw);
}

std::vector<int> top_k_indices(std::span<const double> scores, int k) {
  int n = static_cast<int>(scores.size());
  if (k < 1 || k > n) throw ShapeError("top_k_indices: k out of range");
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

std::vector<int> sample_evidences(std::span<const double> dist, int k, std::uint64_t seed) {
  if (dist.empty()) throw ShapeError("sample_evidences: empty distribution");
  Rng rng(seed);
  std::vector<int> out(static_cast<size_t>(k));
  int last = static_cast<int>(dist.size()) - 1;
  for (int j = 0; j < k; ++j) {
    double u = rng.uniform();
    double c = 0.0;
    int pick = last;
    for (int i = 0; i <= last; ++i) {
      c += dist[static_cast<size_t>(i)];
      if (u < c) {
        pick = i;
        break;
      }
    }
    out[static_cast<size_t>(j)] = pick;
  }
  return out;
}

static int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
  return best;
}

Prediction predict(const RamModel& m, const DataStore& store, std::span<const double> x) {
  auto scores = retriever_scores(m, store, x);
  Prediction p;
  p.evidence = argmax_lowest(scores);
  auto h = predictor_scores(m, x, store.evidences[static_cast<size_t>(p.evidence)]);
  p.label = argmax_lowest(h);
  return p;
}

double accuracy(const RamModel& m, const DataStore& store, const LabeledDataset& data) {
  if (data.size() == 0) throw ShapeError("accuracy: empty dataset");
  int hit = 0;
  for (int i = 0; i < data.size(); ++i)
    if (predict(m, store, data.xs[static_cast<size_t>(i)]).label == data.ys[static_cast<size_t>(i)])
      ++hit;
  return static_cast<double>(hit) / data.size();
}

double empirical_risk_exact(const RamModel& m, const DataStore& store,
                            const LabeledDataset& data) {
  if (data.size() == 0) throw ShapeError("empirical_risk_exact: empty dataset");
  double total = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    const auto& x = data.xs[static_cast<size_t>(i)];
    auto dist = retriever_dist(retriever_scores(m, store, x));
    double v = 0.0;
    for (int j = 0; j < store.size(); ++j)
      v += dist[static_cast<size_t>(j)] *
           bounded_log_loss(m, x, store.evidences[static_cast<size_t>(j)],
                            data.ys[static_cast<size_t>(i)]);
    total += v;
  }
  return total / data.size();
}

std::vector<double> empirical_risk_sampled(const RamModel& m, const DataStore& store,
                                           const LabeledDataset& data, std::uint64_t seed) {
  std::vector<double> losses(static_cast<size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) {
    const auto& x = data.xs[static_cast<size_t>(i)];
    auto dist = retriever_dist(retriever_scores(m, store, x));
    int j = sample_evidences(dist, 1, derive_seed(seed, static_cast<std::uint64_t>(i)))[0];
    losses[static_cast<size_t>(i)] = bounded_log_loss(
        m, x, store.evidences[static_cast<size_t>(j)], data.ys[static_cast<size_t>(i)]);
  }
  return losses;
}

void save_store_csv(const DataStore& s, const std::string& path) {
  std::vector<std::string> header;
  for (int c = 0; c < s.dim; ++c) header.push_back("z" + std::to_string(c));
  std::vector<std::vector<std::string>> rows;
  rows.reserve(s.evidences.size());
  for (const auto& z : s.evidences) {
    std::vector<std::string> r;
    r.reserve(z.size());
    for (double v : z) r.push_back(fmt_real(v));
    rows.push_back(std::move(r));
  }
  write_csv(path, header, rows);
}

DataStore load_store_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  DataStore s;
  s.dim = static_cast<int>(t.header.size());
  for (const auto& r : t.rows) {
    if (static_cast<int>(r.size()) != s.dim) throw ShapeError("store CSV: ragged row");
    std::vector<double> z;
    z.reserve(r.size());
    for (const auto& f : r) z.push_back(parse_real(f));
    s.evidences.push_back(std::move(z));
  }
  return s;
}

void save_dataset_csv(const LabeledDataset& d, const std::string& path) {
  std::vector<std::string> header;
  for (int c = 0; c < d.dim; ++c) header.push_back("x" + std::to_string(c));
  header.push_back("label");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(d.xs.size());
  for (size_t i = 0; i < d.xs.size(); ++i) {
    std::vector<std::string> r;
    r.reserve(d.xs[i].size() + 1);
    for (double v : d.xs[i]) r.push_back(fmt_real(v));
    r.push_back(std::to_string(d.ys[i]));
    rows.push_back(std::move(r));
  }
  write_csv(path, header, rows);
}

LabeledDataset load_dataset_csv(const std::string& path, int num_classes) {
  CsvTable t = read_csv(path);
  if (t.header.empty()) throw ConfigError("dataset CSV has no header: " + path);
  LabeledDataset d;
  d.dim = static_cast<int>(t.header.size()) - 1;
  d.num_classes = num_classes;
  for (const auto& r : t.rows) {
    if (static_cast<int>(r.size()) != d.dim + 1) throw ShapeError("dataset CSV: ragged row");
    std::vector<double> x;
    x.reserve(static_cast<size_t>(d.dim));
    for (int c = 0; c < d.dim; ++c) x.push_back(parse_real(r[static_cast<size_t>(c)]));
    int y = static_cast<int>(std::stol(r.back()));
    if (y < 0 || y >= num_classes) throw ShapeError("dataset CSV: label out of range");
    d.xs.push_back(std::move(x));
    d.ys.push_back(y);
  }
  return d;
}

}  // namespace ramlab
