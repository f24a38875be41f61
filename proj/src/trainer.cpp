#include "ramlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "ramlab/csv.hpp"
#include "ramlab/errors.hpp"
#include "ramlab/rng.hpp"

namespace ramlab {

std::string paradigm_name(Paradigm p) {
  switch (p) {
    case Paradigm::NoRetriever: return "no_retriever";
    case Paradigm::FixedRetriever: return "fixed_retriever";
    case Paradigm::FixedPredictor: return "fixed_predictor";
    case Paradigm::Joint: return "joint";
  }
  return "?";
}

Paradigm paradigm_from_name(const std::string& name) {
  if (name == "no_retriever") return Paradigm::NoRetriever;
  if (name == "fixed_retriever") return Paradigm::FixedRetriever;
  if (name == "fixed_predictor") return Paradigm::FixedPredictor;
  if (name == "joint") return Paradigm::Joint;
  throw ConfigError("unknown paradigm: " + name);
}

TrainConfig paper_preset(Paradigm p) {
  TrainConfig cfg;
  cfg.paradigm = p;
  cfg.steps = (p == Paradigm::NoRetriever || p == Paradigm::Joint) ? 40000 : 20000;
  cfg.batch_size = 64;
  cfg.peak_lr = 1e-4;
  cfg.warmup_steps = 2000;
  cfg.weight_decay = 0.1;
  cfg.eval_every = 1000;
  cfg.objective.k = 64;
  cfg.objective.refresh_every = 500;
  cfg.objective.baseline = 5.0;
  return cfg;
}

double lr_at(int step, const TrainConfig& cfg) {
  if (step < 0 || step >= cfg.steps) throw ConfigError("lr_at: step out of range");
  if (step < cfg.warmup_steps)
    return cfg.peak_lr * static_cast<double>(step) / cfg.warmup_steps;
  if (cfg.steps == cfg.warmup_steps) return cfg.peak_lr;
  return cfg.peak_lr * static_cast<double>(cfg.steps - step) /
         static_cast<double>(cfg.steps - cfg.warmup_steps);
}

AdamState make_adam_state(const MlpParams& p) {
  AdamState s;
  s.m = make_grad_buffer(p);
  s.v = make_grad_buffer(p);
  return s;
}

void adamw_step(MlpParams& params, const GradBuffer& grad, AdamState& state, int step,
                double lr, double weight_decay) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  state.t += 1;
  double c1 = 1.0 - std::pow(b1, state.t);
  double c2 = 1.0 - std::pow(b2, state.t);
  for (size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
      for (size_t i = 0; i < p.size(); ++i) {
        double gi = g[i];
        if (!std::isfinite(gi)) throw DivergedError("adamw_step: non-finite gradient", step);
        p[i] -= lr * weight_decay * p[i];  // decoupled decay before the adaptive step
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    };
    update(params.layers[l].w.a, grad.layers[l].w.a, state.m.layers[l].w.a,
           state.v.layers[l].w.a);
    update(params.layers[l].b, grad.layers[l].b, state.m.layers[l].b, state.v.layers[l].b);
  }
}

void save_trace_csv(const TrainTrace& t, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(t.rows.size());
  for (const auto& r : t.rows)
    rows.push_back({std::to_string(r.step), fmt_real(r.train_loss), fmt_real(r.test_acc),
                    fmt_real(r.test_recall), fmt_real(r.gnorm_theta), fmt_real(r.gnorm_xi)});
  write_csv(path, {"step", "train_loss", "test_acc", "test_recall", "gnorm_theta", "gnorm_xi"},
            rows);
}

TrainResult train(const RamModel& m0, const DataStore& store, const LabeledDataset& data,
                  const LabeledDataset& test, const TrainConfig& cfg,
                  std::span<const int> test_oracle) {
  if (cfg.steps < 0) throw ConfigError("train: steps must be nonnegative");
  if (cfg.batch_size < 1 || cfg.batch_size > data.size())
    throw ConfigError("train: batch_size must lie in [1, n_train]");
  if (cfg.warmup_steps < 0 || (cfg.steps > 0 && cfg.warmup_steps > cfg.steps))
    throw ConfigError("train: warmup_steps must lie in [0, steps]");
  if (cfg.eval_every < 1) throw ConfigError("train: eval_every must be positive");
  if (!test_oracle.empty() && static_cast<int>(test_oracle.size()) != test.size())
    throw ShapeError("train: test_oracle must align with test rows");
  bool train_theta =
      cfg.paradigm == Paradigm::Joint || cfg.paradigm == Paradigm::FixedPredictor;
  bool train_xi =
      cfg.paradigm != Paradigm::FixedPredictor;  // all others update the predictor
  if (cfg.paradigm == Paradigm::NoRetriever &&
      (cfg.objective.type == ObjectiveType::PDist || cfg.objective.type == ObjectiveType::RcePG ||
       cfg.objective.type == ObjectiveType::RceTopK))
    throw ConfigError("train: no_retriever supports rce_exact or emdr2 only");
  if (cfg.paradigm == Paradigm::FixedRetriever && cfg.objective.type == ObjectiveType::PDist)
    throw ConfigError("train: pdist trains only the retriever; predictor would not move");
  if (cfg.objective.type == ObjectiveType::RceTopK &&
      (cfg.objective.k < 1 || cfg.objective.k > store.size()))
    throw ConfigError("train: top-k width must lie in [1, store size]");

  TrainResult res;
  res.model = m0;
  // The NoRetriever paradigm sees a single zero evidence: retrieval is
  // trivial and the predictor learns from x alone.
  if (cfg.paradigm == Paradigm::NoRetriever) {
    res.run_store.dim = m0.input_dim() - data.dim;
    res.run_store.evidences = {std::vector<double>(static_cast<size_t>(res.run_store.dim), 0.0)};
  } else {
    res.run_store = store;
  }
  const DataStore& rs = res.run_store;
  RamModel& model = res.model;

  AdamState st_theta = make_adam_state(model.retriever);
  AdamState st_xi = make_adam_state(model.predictor);

  // PDist trains only the retriever; in joint training the predictor is
  // trained with the exact retrieval-weighted loss alongside it.
  bool pdist_joint = cfg.objective.type == ObjectiveType::PDist && train_xi;

  std::vector<int> perm(static_cast<size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) perm[static_cast<size_t>(i)] = i;
  int cursor = 0;
  std::uint64_t epoch = 0;
  auto reshuffle = [&]() {
    Rng rng(derive_seed(cfg.seed, 0xE60C, epoch++));
    for (int i = data.size() - 1; i > 0; --i) {
      int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }
    cursor = 0;
  };
  reshuffle();

  std::vector<std::vector<int>> cache;  // per-train-row top-k lists
  LabeledDataset batch;
  batch.dim = data.dim;
  batch.num_classes = data.num_classes;
  std::vector<int> batch_rows(static_cast<size_t>(cfg.batch_size));

  std::deque<double> loss_window;
  double window_sum = 0.0;

  auto evaluate = [&](int step, double loss_smoothed, double gn_theta, double gn_xi) {
    TraceRow row;
    row.step = step;
    row.train_loss = loss_smoothed;
    int hit = 0, rec = 0;
    for (int i = 0; i < test.size(); ++i) {
      Prediction pr = predict(model, rs, test.xs[static_cast<size_t>(i)]);
      if (pr.label == test.ys[static_cast<size_t>(i)]) ++hit;
      if (!test_oracle.empty() && pr.evidence == test_oracle[static_cast<size_t>(i)]) ++rec;
    }
    row.test_acc = static_cast<double>(hit) / test.size();
    row.test_recall = test_oracle.empty() ? 0.0 : static_cast<double>(rec) / test.size();
    row.gnorm_theta = gn_theta;
    row.gnorm_xi = gn_xi;
    res.trace.rows.push_back(row);
  };

  for (int step = 0; step < cfg.steps; ++step) {
    // Assemble the batch, reshuffling at epoch boundaries.
    batch.xs.clear();
    batch.ys.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor >= data.size()) reshuffle();
      int row = perm[static_cast<size_t>(cursor++)];
      batch_rows[static_cast<size_t>(b)] = row;
      batch.xs.push_back(data.xs[static_cast<size_t>(row)]);
      batch.ys.push_back(data.ys[static_cast<size_t>(row)]);
    }

    // Refresh the stale top-k cache on its cadence (full-store scoring).
    std::vector<std::vector<int>> batch_cache;
    if (cfg.objective.type == ObjectiveType::RceTopK) {
      if (step % cfg.objective.refresh_every == 0) {
        cache.resize(static_cast<size_t>(data.size()));
        for (int i = 0; i < data.size(); ++i) {
          auto scores = retriever_scores(model, rs, data.xs[static_cast<size_t>(i)]);
          cache[static_cast<size_t>(i)] = top_k_indices(scores, cfg.objective.k);
        }
      }
      batch_cache.resize(static_cast<size_t>(cfg.batch_size));
      for (int b = 0; b < cfg.batch_size; ++b)
        batch_cache[static_cast<size_t>(b)] = cache[static_cast<size_t>(batch_rows[static_cast<size_t>(b)])];
    }

    LossReport rep = objective_eval(cfg.objective, model, rs, batch,
                                    batch_cache.empty() ? nullptr : &batch_cache,
                                    derive_seed(cfg.seed, 0x96, static_cast<std::uint64_t>(step)));
    if (pdist_joint) {
      LossReport xi_rep = rce_exact(model, rs, batch);
      rep.grad_xi = std::move(xi_rep.grad_xi);
    }
    if (!std::isfinite(rep.value)) throw DivergedError("train: non-finite loss", step);

    double gn_theta = std::sqrt(grad_sq_norm(rep.grad_theta));
    double gn_xi = std::sqrt(grad_sq_norm(rep.grad_xi));
    // Global-norm clipping over the blocks that actually update.
    double sq = 0.0;
    if (train_theta) sq += gn_theta * gn_theta;
    if (train_xi) sq += gn_xi * gn_xi;
    double gn = std::sqrt(sq);
    if (cfg.grad_clip > 0.0 && gn > cfg.grad_clip) {
      double s = cfg.grad_clip / gn;
      if (train_theta) grad_scale(rep.grad_theta, s);
      if (train_xi) grad_scale(rep.grad_xi, s);
    }

    double lr = lr_at(step, cfg);
    if (train_theta) adamw_step(model.retriever, rep.grad_theta, st_theta, step, lr, cfg.weight_decay);
    if (train_xi) adamw_step(model.predictor, rep.grad_xi, st_xi, step, lr, cfg.weight_decay);

    loss_window.push_back(rep.value);
    window_sum += rep.value;
    if (loss_window.size() > 50) {
      window_sum -= loss_window.front();
      loss_window.pop_front();
    }
    if ((step + 1) % cfg.eval_every == 0 || step == cfg.steps - 1)
      evaluate(step, window_sum / static_cast<double>(loss_window.size()), gn_theta, gn_xi);
  }
  return res;
}

}  // namespace ramlab
