#include "ramlab/objectives.hpp"

#include <cmath>

#include "ramlab/errors.hpp"
#include "ramlab/rng.hpp"

namespace ramlab {

std::string objective_name(const ObjectiveKind& kind) {
  switch (kind.type) {
    case ObjectiveType::RceExact: return "rce_exact";
    case ObjectiveType::Emdr2: return "emdr2";
    case ObjectiveType::PDist: return "pdist";
    case ObjectiveType::RceTopK: return "rce_topk";
    case ObjectiveType::RcePG: return "rce_pg";
  }
  return "?";
}

ObjectiveKind objective_from_name(const std::string& name) {
  ObjectiveKind k;
  if (name == "rce_exact") k.type = ObjectiveType::RceExact;
  else if (name == "emdr2") k.type = ObjectiveType::Emdr2;
  else if (name == "pdist") k.type = ObjectiveType::PDist;
  else if (name == "rce_topk") k.type = ObjectiveType::RceTopK;
  else if (name == "rce_pg") k.type = ObjectiveType::RcePG;
  else throw ConfigError("unknown objective: " + name);
  return k;
}

namespace {

void check_batch(const RamModel& m, const DataStore& store, const LabeledDataset& batch) {
  if (batch.size() == 0) throw ShapeError("objective: empty batch");
  if (store.size() == 0) throw ShapeError("objective: empty store");
  if (batch.dim + store.dim != m.input_dim())
    throw ShapeError("objective: model input dimension does not match x+z");
  for (int y : batch.ys)
    if (y < 0 || y >= m.num_classes) throw ShapeError("objective: label out of range");
}

// Per-example scratch shared by the objectives: retriever scores over a set
// of evidences plus predictor class scores at each of them.
struct ExampleEval {
  std::vector<double> u;            // concat buffer [x, z]
  std::vector<double> scores;       // retriever scores, one per evidence
  std::vector<std::vector<double>> h;  // predictor scores per evidence
  MlpWorkspace ws_ret, ws_pred;
  std::vector<double> up1{1.0};     // scalar upstream buffer
  std::vector<double> upc;          // class upstream buffer

  void fill_u(std::span<const double> x, std::span<const double> z) {
    u.resize(x.size() + z.size());
    std::copy(x.begin(), x.end(), u.begin());
    std::copy(z.begin(), z.end(), u.begin() + static_cast<std::ptrdiff_t>(x.size()));
  }

  // Forward both nets at (x, z_j) for the given evidence indices.
  void forward(const RamModel& m, const DataStore& store, std::span<const double> x,
               std::span<const int> idx) {
    scores.resize(idx.size());
    h.resize(idx.size());
    for (size_t t = 0; t < idx.size(); ++t) {
      const auto& z = store.evidences[static_cast<size_t>(idx[t])];
      fill_u(x, z);
      auto rs = mlp_forward_ws(m.retriever, u, ws_ret);
      scores[t] = rs[0];
      auto ps = mlp_forward_ws(m.predictor, u, ws_pred);
      h[t].assign(ps.begin(), ps.end());
    }
  }
};

std::vector<int> all_indices(int m) {
  std::vector<int> idx(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) idx[static_cast<size_t>(j)] = j;
  return idx;
}

}  // namespace

// Shared implementation of the exact retrieval-weighted loss, either over the
// full store or over a per-example evidence subset.
static LossReport rce_weighted(const RamModel& m, const DataStore& store,
                               const LabeledDataset& batch,
                               const std::vector<std::vector<int>>* subsets, bool clipped) {
  check_batch(m, store, batch);
  const int n = batch.size();
  LossReport rep;
  rep.grad_theta = make_grad_buffer(m.retriever);
  rep.grad_xi = make_grad_buffer(m.predictor);
  rep.per_example.resize(static_cast<size_t>(n));
  const double inv_n = 1.0 / n;

  ExampleEval ev;
  std::vector<int> full = all_indices(store.size());
  std::vector<double> c, pi;
  for (int i = 0; i < n; ++i) {
    std::span<const int> idx = full;
    if (subsets) {
      const auto& row = (*subsets)[static_cast<size_t>(i)];
      if (row.empty()) throw ShapeError("rce_topk: empty cached subset");
      for (int j : row)
        if (j < 0 || j >= store.size()) throw ShapeError("rce_topk: cached index out of range");
      idx = row;
    }
    const auto& x = batch.xs[static_cast<size_t>(i)];
    const int y = batch.ys[static_cast<size_t>(i)];
    ev.forward(m, store, x, idx);
    auto p = softmax(ev.scores);

    c.resize(idx.size());
    double v = 0.0;
    for (size_t t = 0; t < idx.size(); ++t) {
      double raw = log_sum_exp(ev.h[t]) - ev.h[t][static_cast<size_t>(y)];
      c[t] = clipped ? std::min(m.ell_max, raw) : raw;
      v += p[t] * c[t];
    }
    rep.per_example[static_cast<size_t>(i)] = v;
    rep.value += v * inv_n;

    for (size_t t = 0; t < idx.size(); ++t) {
      const auto& z = store.evidences[static_cast<size_t>(idx[t])];
      ev.fill_u(x, z);
      // Retriever: d/ds_t of sum_j p_j c_j with c treated as constant.
      double gs = inv_n * p[t] * (c[t] - v);
      if (gs != 0.0)
        mlp_accumulate_grad(m.retriever, ev.u, ev.up1, gs, rep.grad_theta, ev.ws_ret);
      // Predictor: clipped losses contribute exactly zero.
      if (clipped && c[t] >= m.ell_max) continue;
      pi = softmax(ev.h[t]);
      pi[static_cast<size_t>(y)] -= 1.0;
      mlp_accumulate_grad(m.predictor, ev.u, pi, inv_n * p[t], rep.grad_xi, ev.ws_pred);
    }
  }
  return rep;
}

LossReport rce_exact(const RamModel& m, const DataStore& store, const LabeledDataset& batch,
                     bool clipped) {
  return rce_weighted(m, store, batch, nullptr, clipped);
}

LossReport rce_topk(const RamModel& m, const DataStore& store, const LabeledDataset& batch,
                    const std::vector<std::vector<int>>& cached_topk, bool clipped) {
  if (static_cast<int>(cached_topk.size()) != batch.size())
    throw ShapeError("rce_topk: cache rows must align with batch rows");
  return rce_weighted(m, store, batch, &cached_topk, clipped);
}

LossReport emdr2(const RamModel& m, const DataStore& store, const LabeledDataset& batch) {
  check_batch(m, store, batch);
  const int n = batch.size();
  LossReport rep;
  rep.grad_theta = make_grad_buffer(m.retriever);
  rep.grad_xi = make_grad_buffer(m.predictor);
  rep.per_example.resize(static_cast<size_t>(n));
  const double inv_n = 1.0 / n;

  ExampleEval ev;
  std::vector<int> full = all_indices(store.size());
  std::vector<double> q, pi;
  for (int i = 0; i < n; ++i) {
    const auto& x = batch.xs[static_cast<size_t>(i)];
    const int y = batch.ys[static_cast<size_t>(i)];
    ev.forward(m, store, x, full);
    auto p = softmax(ev.scores);

    q.resize(full.size());
    double marginal = 0.0;
    for (size_t t = 0; t < full.size(); ++t) {
      q[t] = std::exp(ev.h[t][static_cast<size_t>(y)] - log_sum_exp(ev.h[t]));
      marginal += p[t] * q[t];
    }
    if (marginal < 1e-300)
      throw NumericError("emdr2: marginal class probability underflow at batch row " +
                         std::to_string(i));
    double v = -std::log(marginal);
    rep.per_example[static_cast<size_t>(i)] = v;
    rep.value += v * inv_n;

    for (size_t t = 0; t < full.size(); ++t) {
      const auto& z = store.evidences[static_cast<size_t>(t)];
      ev.fill_u(x, z);
      // d(-log M)/ds_t = -p_t (q_t - M) / M.
      double gs = -inv_n * p[t] * (q[t] - marginal) / marginal;
      if (gs != 0.0)
        mlp_accumulate_grad(m.retriever, ev.u, ev.up1, gs, rep.grad_theta, ev.ws_ret);
      // d(-log M)/dh_{y'} = -(p_t q_t / M) (1[y'=y] - pi_{y'}).
      pi = softmax(ev.h[t]);
      for (double& w : pi) w = -w;
      pi[static_cast<size_t>(y)] += 1.0;
      mlp_accumulate_grad(m.predictor, ev.u, pi, -inv_n * p[t] * q[t] / marginal, rep.grad_xi,
                          ev.ws_pred);
    }
  }
  return rep;
}

LossReport pdist_retriever_loss(const RamModel& m, const DataStore& store,
                                const LabeledDataset& batch) {
  check_batch(m, store, batch);
  const int n = batch.size();
  LossReport rep;
  rep.grad_theta = make_grad_buffer(m.retriever);
  rep.grad_xi = make_grad_buffer(m.predictor);
  rep.per_example.resize(static_cast<size_t>(n));
  const double inv_n = 1.0 / n;

  ExampleEval ev;
  std::vector<int> full = all_indices(store.size());
  std::vector<double> logq;
  for (int i = 0; i < n; ++i) {
    const auto& x = batch.xs[static_cast<size_t>(i)];
    const int y = batch.ys[static_cast<size_t>(i)];
    ev.forward(m, store, x, full);
    auto p = softmax(ev.scores);
    double lse_s = log_sum_exp(ev.scores);

    // Target: predictor-utility distribution over evidences, held constant.
    logq.resize(full.size());
    for (size_t t = 0; t < full.size(); ++t)
      logq[t] = ev.h[t][static_cast<size_t>(y)] - log_sum_exp(ev.h[t]);
    auto target = softmax(logq);

    double v = 0.0;
    for (size_t t = 0; t < full.size(); ++t)
      v -= target[t] * (ev.scores[t] - lse_s);  // cross-entropy to p(z|x)
    rep.per_example[static_cast<size_t>(i)] = v;
    rep.value += v * inv_n;

    for (size_t t = 0; t < full.size(); ++t) {
      double gs = inv_n * (p[t] - target[t]);
      if (gs == 0.0) continue;
      const auto& z = store.evidences[static_cast<size_t>(t)];
      ev.fill_u(x, z);
      mlp_accumulate_grad(m.retriever, ev.u, ev.up1, gs, rep.grad_theta, ev.ws_ret);
    }
  }
  return rep;
}

LossReport rce_pg_with_samples(const RamModel& m, const DataStore& store,
                               const LabeledDataset& batch,
                               const std::vector<std::vector<int>>& samples, double baseline) {
  check_batch(m, store, batch);
  if (static_cast<int>(samples.size()) != batch.size())
    throw ShapeError("rce_pg: sample rows must align with batch rows");
  const int n = batch.size();
  LossReport rep;
  rep.grad_theta = make_grad_buffer(m.retriever);
  rep.grad_xi = make_grad_buffer(m.predictor);
  rep.per_example.resize(static_cast<size_t>(n));
  const double inv_n = 1.0 / n;

  ExampleEval ev;
  std::vector<int> full = all_indices(store.size());
  std::vector<double> gscore, pi;
  for (int i = 0; i < n; ++i) {
    const auto& row = samples[static_cast<size_t>(i)];
    if (row.empty()) throw ShapeError("rce_pg: need at least one sample per example");
    const auto& x = batch.xs[static_cast<size_t>(i)];
    const int y = batch.ys[static_cast<size_t>(i)];
    ev.forward(m, store, x, full);
    auto p = softmax(ev.scores);
    const double inv_k = 1.0 / static_cast<double>(row.size());

    // Score-space gradient: -(1/nk) sum_t (e_{z_t} - p) * (log q(z_t) - b),
    // accumulated here, then pushed through the retriever per evidence.
    gscore.assign(full.size(), 0.0);
    double wsum = 0.0;
    double vloss = 0.0;
    for (int zt : row) {
      if (zt < 0 || zt >= store.size()) throw ShapeError("rce_pg: sample index out of range");
      double raw = log_sum_exp(ev.h[static_cast<size_t>(zt)]) -
                   ev.h[static_cast<size_t>(zt)][static_cast<size_t>(y)];
      vloss += raw * inv_k;
      double w = -raw - baseline;  // log q(y|x,z_t) - b
      wsum += w;
      gscore[static_cast<size_t>(zt)] -= inv_n * inv_k * w;
      // Predictor Monte-Carlo gradient on the same sample.
      pi = softmax(ev.h[static_cast<size_t>(zt)]);
      pi[static_cast<size_t>(y)] -= 1.0;
      ev.fill_u(x, store.evidences[static_cast<size_t>(zt)]);
      mlp_accumulate_grad(m.predictor, ev.u, pi, inv_n * inv_k, rep.grad_xi, ev.ws_pred);
    }
    for (size_t t = 0; t < full.size(); ++t) gscore[t] += inv_n * inv_k * p[t] * wsum;

    rep.per_example[static_cast<size_t>(i)] = vloss;
    rep.value += vloss * inv_n;

    for (size_t t = 0; t < full.size(); ++t) {
      if (gscore[t] == 0.0) continue;
      ev.fill_u(x, store.evidences[static_cast<size_t>(t)]);
      mlp_accumulate_grad(m.retriever, ev.u, ev.up1, gscore[t], rep.grad_theta, ev.ws_ret);
    }
  }
  return rep;
}

LossReport rce_pg(const RamModel& m, const DataStore& store, const LabeledDataset& batch,
                  int k, double baseline, std::uint64_t seed) {
  check_batch(m, store, batch);
  if (k < 1) throw ConfigError("rce_pg: sample count must be positive");
  std::vector<std::vector<int>> samples(static_cast<size_t>(batch.size()));
  for (int i = 0; i < batch.size(); ++i) {
    auto dist = retriever_dist(retriever_scores(m, store, batch.xs[static_cast<size_t>(i)]));
    samples[static_cast<size_t>(i)] =
        sample_evidences(dist, k, derive_seed(seed, static_cast<std::uint64_t>(i)));
  }
  return rce_pg_with_samples(m, store, batch, samples, baseline);
}

LossReport objective_eval(const ObjectiveKind& kind, const RamModel& m, const DataStore& store,
                          const LabeledDataset& batch,
                          const std::vector<std::vector<int>>* cached_topk, std::uint64_t seed) {
  switch (kind.type) {
    case ObjectiveType::RceExact:
      return rce_exact(m, store, batch);
    case ObjectiveType::Emdr2:
      return emdr2(m, store, batch);
    case ObjectiveType::PDist:
      return pdist_retriever_loss(m, store, batch);
    case ObjectiveType::RceTopK:
      if (!cached_topk) throw ConfigError("objective_eval: rce_topk needs a top-k cache");
      return rce_topk(m, store, batch, *cached_topk);
    case ObjectiveType::RcePG:
      return rce_pg(m, store, batch, kind.k, kind.baseline, seed);
  }
  throw ConfigError("objective_eval: unknown objective");
}

}  // namespace ramlab
