#include "ramlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "ramlab/errors.hpp"
#include "ramlab/objectives.hpp"
#include "ramlab/rng.hpp"

namespace ramlab {

void CheckAccumulator::add(double slack) {
  ++trials_;
  if (!any_ || slack < worst_) {
    worst_ = slack;
    any_ = true;
  }
  if (slack < -tol_) ++violations_;
}

CheckResult CheckAccumulator::finalize(bool informational) const {
  CheckResult r;
  r.name = name_;
  r.trials = trials_;
  r.violations = violations_;
  r.worst_margin = worst_;
  r.pass = violations_ == 0;
  r.informational = informational;
  return r;
}

CheckResult check_truncated_gibbs(int trials, int k_max, double c_max, std::uint64_t seed) {
  if (trials < 1 || k_max < 1 || !(c_max > 0.0))
    throw ConfigError("check_truncated_gibbs: bad arguments");
  Rng rng(seed);
  CheckAccumulator acc("truncated_gibbs", 1e-12);
  std::vector<double> a, b;
  for (int t = 0; t < trials; ++t) {
    int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k_max)));
    double c = rng.uniform(1e-3, c_max);
    a.resize(static_cast<size_t>(k));
    b.resize(static_cast<size_t>(k));
    double sa = 0.0, sb = 0.0;
    for (int i = 0; i < k; ++i) {
      a[static_cast<size_t>(i)] = rng.uniform() + 1e-12;
      b[static_cast<size_t>(i)] = rng.uniform() + 1e-12;
      sa += a[static_cast<size_t>(i)];
      sb += b[static_cast<size_t>(i)];
    }
    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < k; ++i) {
      double ai = a[static_cast<size_t>(i)] / sa;
      double bi = b[static_cast<size_t>(i)] / sb;
      lhs += ai * std::min(c, -std::log(bi));
      rhs += ai * std::min(c, -std::log(ai));
    }
    acc.add(lhs - (rhs - (k - 1) * std::exp(-c)));
  }
  return acc.finalize();
}

CheckResult check_softmax_lipschitz(int trials, int dim_max, std::uint64_t seed) {
  if (trials < 1 || dim_max < 1) throw ConfigError("check_softmax_lipschitz: bad arguments");
  Rng rng(seed);
  CheckAccumulator acc("softmax_lipschitz", 1e-12);
  std::vector<double> s, s2;
  for (int t = 0; t < trials; ++t) {
    int d = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(dim_max)));
    s.resize(static_cast<size_t>(d));
    s2.resize(static_cast<size_t>(d));
    double scale = std::exp(rng.uniform(std::log(1e-4), std::log(4.0)));
    double linf = 0.0;
    for (int i = 0; i < d; ++i) {
      s[static_cast<size_t>(i)] = rng.uniform(-5.0, 5.0);
      double delta = scale * rng.uniform(-1.0, 1.0);
      s2[static_cast<size_t>(i)] = s[static_cast<size_t>(i)] + delta;
      linf = std::max(linf, std::fabs(delta));
    }
    auto p = softmax(s);
    auto q = softmax(s2);
    double l1 = 0.0;
    for (int i = 0; i < d; ++i) l1 += std::fabs(p[static_cast<size_t>(i)] - q[static_cast<size_t>(i)]);
    acc.add(linf - l1);
  }
  return acc.finalize();
}

namespace {
// Softmin gap: sum_z softmax(-tau g)_z g_z - min_z g_z for one random g.
double softmin_gap(Rng& rng, int m_max, std::span<const double> tau_grid, int* m_out,
                   double* tau_out) {
  int m = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m_max - 1)));
  double tau = tau_grid[rng.below(tau_grid.size())];
  double scale = std::exp(rng.uniform(std::log(1e-2), std::log(10.0)));
  std::vector<double> g(static_cast<size_t>(m)), neg(static_cast<size_t>(m));
  double mn = 0.0;
  for (int i = 0; i < m; ++i) {
    g[static_cast<size_t>(i)] = scale * rng.uniform();
    neg[static_cast<size_t>(i)] = -tau * g[static_cast<size_t>(i)];
    mn = i == 0 ? g[0] : std::min(mn, g[static_cast<size_t>(i)]);
  }
  auto p = softmax(neg);
  double avg = 0.0;
  for (int i = 0; i < m; ++i) avg += p[static_cast<size_t>(i)] * g[static_cast<size_t>(i)];
  *m_out = m;
  *tau_out = tau;
  return avg - mn;
}
}  // namespace

CheckResult check_softmin_approx(int trials, int m_max, std::span<const double> tau_grid,
                                 std::uint64_t seed) {
  if (trials < 1 || m_max < 2 || tau_grid.empty())
    throw ConfigError("check_softmin_approx: bad arguments");
  Rng rng(seed);
  CheckAccumulator acc("softmin_approx", 1e-12);
  for (int t = 0; t < trials; ++t) {
    int m;
    double tau;
    double gap = softmin_gap(rng, m_max, tau_grid, &m, &tau);
    double bound = std::log(static_cast<double>(m)) / (tau * tau) +
                   std::log(static_cast<double>(m)) / tau;
    acc.add(std::min(gap, bound - gap));  // both 0 <= gap and gap <= bound
  }
  return acc.finalize();
}

CheckResult check_softmin_strict(int trials, int m_max, std::span<const double> tau_grid,
                                 std::uint64_t seed) {
  if (trials < 1 || m_max < 2 || tau_grid.empty())
    throw ConfigError("check_softmin_strict: bad arguments");
  Rng rng(seed);
  CheckAccumulator acc("softmin_strict", 1e-12);
  for (int t = 0; t < trials; ++t) {
    int m;
    double tau;
    double gap = softmin_gap(rng, m_max, tau_grid, &m, &tau);
    acc.add(std::log(static_cast<double>(m)) / (tau * tau) - gap);
  }
  return acc.finalize(/*informational=*/true);
}

namespace {

struct TestInstance {
  RamModel model;
  DataStore store;
  LabeledDataset batch;
};

TestInstance random_instance(std::uint64_t seed, int store_min, int store_max) {
  Rng rng(derive_seed(seed, 0x717E57));
  TestInstance inst;
  int d_x = 1 + static_cast<int>(rng.below(3));
  int d_z = 1 + static_cast<int>(rng.below(3));
  int classes = 2 + static_cast<int>(rng.below(3));
  int m = store_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(store_max - store_min + 1)));
  int n = 1 + static_cast<int>(rng.below(3));
  double ell = std::log(static_cast<double>(classes)) + rng.uniform(0.3, 1.5);
  inst.model = make_ram_model(d_x, d_z, classes, 1 + static_cast<int>(rng.below(2)),
                              2 + static_cast<int>(rng.below(3)),
                              1 + static_cast<int>(rng.below(2)),
                              2 + static_cast<int>(rng.below(3)), ell, rng.u64());
  // Spread the initialization so losses land on both sides of the clip.
  for (auto& layer : inst.model.predictor.layers)
    for (double& v : layer.w.a) v *= 1.0 + rng.uniform();
  for (auto& layer : inst.model.retriever.layers)
    for (double& v : layer.w.a) v *= 1.0 + rng.uniform();
  inst.store.dim = d_z;
  inst.store.evidences.resize(static_cast<size_t>(m));
  for (auto& z : inst.store.evidences) {
    z.resize(static_cast<size_t>(d_z));
    for (double& v : z) v = rng.uniform(-1.0, 1.0);
  }
  inst.batch.dim = d_x;
  inst.batch.num_classes = classes;
  inst.batch.xs.resize(static_cast<size_t>(n));
  inst.batch.ys.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    inst.batch.xs[static_cast<size_t>(i)].resize(static_cast<size_t>(d_x));
    for (double& v : inst.batch.xs[static_cast<size_t>(i)]) v = rng.uniform(-1.0, 1.0);
    inst.batch.ys[static_cast<size_t>(i)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  }
  return inst;
}

// Smallest distance of any pre-activation from zero and any raw loss from
// the clip level, across all (example, evidence) pairs.
double instance_margin(const TestInstance& inst) {
  double margin = 1e300;
  MlpWorkspace ws;
  std::vector<double> u;
  for (const auto& x : inst.batch.xs) {
    for (const auto& z : inst.store.evidences) {
      u.assign(x.begin(), x.end());
      u.insert(u.end(), z.begin(), z.end());
      for (const MlpParams* net : {&inst.model.retriever, &inst.model.predictor}) {
        mlp_forward_ws(*net, u, ws);
        for (size_t l = 0; l + 1 < net->layers.size(); ++l)
          for (double v : ws.pre[l]) margin = std::min(margin, std::fabs(v));
      }
    }
  }
  for (size_t i = 0; i < inst.batch.xs.size(); ++i)
    for (const auto& z : inst.store.evidences) {
      auto h = predictor_scores(inst.model, inst.batch.xs[i], z);
      double raw = log_sum_exp(h) - h[static_cast<size_t>(inst.batch.ys[i])];
      margin = std::min(margin, std::fabs(raw - inst.model.ell_max));
    }
  return margin;
}

TestInstance filtered_instance(std::uint64_t seed, int store_min, int store_max,
                               double margin) {
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    TestInstance inst = random_instance(derive_seed(seed, attempt), store_min, store_max);
    if (instance_margin(inst) > margin) return inst;
  }
  throw NumericError("filtered_instance: could not find an instance clear of kinks");
}

}  // namespace

CheckResult check_jensen_rce_emdr2(int trials, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("check_jensen_rce_emdr2: bad arguments");
  CheckAccumulator acc("jensen_rce_emdr2", 1e-10);
  for (int t = 0; t < trials; ++t) {
    TestInstance inst = random_instance(derive_seed(seed, static_cast<std::uint64_t>(t)), 1, 6);
    LossReport exact = rce_exact(inst.model, inst.store, inst.batch, /*clipped=*/false);
    LossReport marg = emdr2(inst.model, inst.store, inst.batch);
    acc.add(exact.value - marg.value);
  }
  return acc.finalize();
}

CheckResult check_pg_unbiased(int trials, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("check_pg_unbiased: bad arguments");
  CheckAccumulator acc("pg_unbiased", 0.0);
  const double baselines[3] = {0.0, 5.0, -3.0};
  for (int t = 0; t < trials; ++t) {
    std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(t));
    TestInstance inst = random_instance(s, 1, 6);
    // Keep the joint outcome space enumerable: n in {1,2}, k in {1,2}.
    if (inst.batch.size() > 2) {
      inst.batch.xs.resize(2);
      inst.batch.ys.resize(2);
    }
    int n = inst.batch.size();
    int m = inst.store.size();
    int k = 1 + static_cast<int>(s % 2);

    // Per-example retrieval distributions.
    std::vector<std::vector<double>> dists(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      dists[static_cast<size_t>(i)] =
          retriever_dist(retriever_scores(inst.model, inst.store, inst.batch.xs[static_cast<size_t>(i)]));

    LossReport exact = rce_exact(inst.model, inst.store, inst.batch, /*clipped=*/false);

    // Enumerate every joint sample assignment; weight by its probability.
    int draws = n * k;
    long total = 1;
    for (int d = 0; d < draws; ++d) total *= m;
    double worst = 1e300;
    GradBuffer expect_theta = make_grad_buffer(inst.model.retriever);
    GradBuffer expect_xi = make_grad_buffer(inst.model.predictor);
    GradBuffer first_theta = make_grad_buffer(inst.model.retriever);
    for (int bi = 0; bi < 3; ++bi) {
      zero_grad(expect_theta);
      zero_grad(expect_xi);
      std::vector<std::vector<int>> samples(static_cast<size_t>(n),
                                            std::vector<int>(static_cast<size_t>(k)));
      for (long code = 0; code < total; ++code) {
        long c = code;
        double w = 1.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < k; ++j) {
            int z = static_cast<int>(c % m);
            c /= m;
            samples[static_cast<size_t>(i)][static_cast<size_t>(j)] = z;
            w *= dists[static_cast<size_t>(i)][static_cast<size_t>(z)];
          }
        LossReport rep =
            rce_pg_with_samples(inst.model, inst.store, inst.batch, samples, baselines[bi]);
        grad_axpy(expect_theta, rep.grad_theta, w);
        grad_axpy(expect_xi, rep.grad_xi, w);
      }
      // Expectation must match the exact unclipped gradients.
      for (int idx = 0; idx < param_count(inst.model.retriever); ++idx)
        worst = std::min(worst, 1e-10 - std::fabs(get_grad(expect_theta, idx) -
                                                  get_grad(exact.grad_theta, idx)));
      for (int idx = 0; idx < param_count(inst.model.predictor); ++idx)
        worst = std::min(worst, 1e-10 - std::fabs(get_grad(expect_xi, idx) -
                                                  get_grad(exact.grad_xi, idx)));
      // And be invariant to the baseline.
      if (bi == 0) {
        first_theta = expect_theta;
      } else {
        for (int idx = 0; idx < param_count(inst.model.retriever); ++idx)
          worst = std::min(worst, 1e-12 - std::fabs(get_grad(expect_theta, idx) -
                                                    get_grad(first_theta, idx)));
      }
    }
    acc.add(worst);
  }
  return acc.finalize();
}

namespace {

double objective_value(int which, const TestInstance& inst,
                       const std::vector<std::vector<int>>& cache) {
  switch (which) {
    case 0: return rce_exact(inst.model, inst.store, inst.batch).value;
    case 1: return emdr2(inst.model, inst.store, inst.batch).value;
    case 2: return pdist_retriever_loss(inst.model, inst.store, inst.batch).value;
    default: return rce_topk(inst.model, inst.store, inst.batch, cache).value;
  }
}

}  // namespace

CheckResult check_gradients_all(int trials, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("check_gradients_all: bad arguments");
  CheckAccumulator acc("gradients_fd", 0.0);
  const double h = 1e-5, tol = 1e-5;
  for (int t = 0; t < trials; ++t) {
    TestInstance inst =
        filtered_instance(derive_seed(seed, static_cast<std::uint64_t>(t)), 2, 6, 1e-3);
    // Fresh top-k cache, held fixed while differentiating.
    int k = 1 + static_cast<int>(derive_seed(seed, static_cast<std::uint64_t>(t), 7) %
                                 static_cast<std::uint64_t>(inst.store.size()));
    std::vector<std::vector<int>> cache;
    for (const auto& x : inst.batch.xs)
      cache.push_back(top_k_indices(retriever_scores(inst.model, inst.store, x), k));

    double worst = 1e300;
    for (int which = 0; which < 4; ++which) {
      LossReport rep;
      switch (which) {
        case 0: rep = rce_exact(inst.model, inst.store, inst.batch); break;
        case 1: rep = emdr2(inst.model, inst.store, inst.batch); break;
        case 2: rep = pdist_retriever_loss(inst.model, inst.store, inst.batch); break;
        default: rep = rce_topk(inst.model, inst.store, inst.batch, cache); break;
      }
      // The predictor-utility target is a stop-gradient: its predictor block
      // is defined as zero, so finite differences apply to the retriever only.
      int blocks = which == 2 ? 1 : 2;
      for (int blk = 0; blk < blocks; ++blk) {
        MlpParams& params = blk == 0 ? inst.model.retriever : inst.model.predictor;
        const GradBuffer& ana = blk == 0 ? rep.grad_theta : rep.grad_xi;
        for (int idx = 0; idx < param_count(params); ++idx) {
          double p0 = get_param(params, idx);
          set_param(params, idx, p0 + h);
          double fp = objective_value(which, inst, cache);
          set_param(params, idx, p0 - h);
          double fm = objective_value(which, inst, cache);
          set_param(params, idx, p0);
          double fd = (fp - fm) / (2.0 * h);
          double rel = std::fabs(get_grad(ana, idx) - fd) / std::max(1.0, std::fabs(fd));
          worst = std::min(worst, tol - rel);
        }
      }
      if (which == 2) {
        for (int idx = 0; idx < param_count(inst.model.predictor); ++idx)
          if (get_grad(rep.grad_xi, idx) != 0.0) worst = std::min(worst, -1.0);
      }
    }
    acc.add(worst);
  }
  return acc.finalize();
}

std::vector<CheckResult> run_all_checks(std::uint64_t seed) {
  const double taus[4] = {1.0, 2.0, 5.0, 10.0};
  std::vector<CheckResult> out;
  out.push_back(check_truncated_gibbs(10000, 8, 10.0, derive_seed(seed, 1)));
  out.push_back(check_softmax_lipschitz(10000, 64, derive_seed(seed, 2)));
  out.push_back(check_softmin_approx(10000, 16, taus, derive_seed(seed, 3)));
  out.push_back(check_jensen_rce_emdr2(1000, derive_seed(seed, 4)));
  out.push_back(check_pg_unbiased(100, derive_seed(seed, 5)));
  out.push_back(check_gradients_all(60, derive_seed(seed, 6)));
  out.push_back(check_softmin_strict(10000, 16, taus, derive_seed(seed, 7)));
  return out;
}

}  // namespace ramlab
