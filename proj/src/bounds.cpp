#include "ramlab/bounds.hpp"

#include <cmath>

#include "ramlab/csv.hpp"
#include "ramlab/errors.hpp"

namespace ramlab {

namespace {
// Natural log floored at 1: arguments below e are raised to e, keeping every
// generalization factor positive at tiny depth*width products.
double flog(double x) { return std::log(std::max(x, std::exp(1.0))); }

void validate(const BoundInputs& bi) {
  if (bi.n < 1.0 || bi.store_size < 1.0)
    throw ConfigError("bounds: n and store_size must be at least 1");
  if (bi.num_classes < 1) throw ConfigError("bounds: num_classes must be positive");
  if (bi.d_x < 1 || bi.d_z < 1) throw ConfigError("bounds: dimensions must be positive");
  if (!(bi.kappa > 0.0) || !(bi.kappa_store > 0.0) || !(bi.kappa_true > 0.0))
    throw ConfigError("bounds: smoothness exponents must be positive");
  if (!(bi.gamma_store > 0.0) || !(bi.c_store > 0.0))
    throw ConfigError("bounds: coverage parameters must be positive");
  if (!(bi.l_ret > 0.0) || !(bi.l_pred > 0.0))
    throw ConfigError("bounds: depths must be positive");
  if (!(bi.ell_max > 0.0)) throw ConfigError("bounds: ell_max must be positive");
}
}  // namespace

int theorem_width(int d) { return 25 * d + 31; }

BoundBreakdown excess_risk_bound(const BoundInputs& bi) {
  validate(bi);
  const double d = bi.d_tot();
  const double y = static_cast<double>(bi.num_classes);
  const double w_ret = d;
  const double w_pred = y * d;
  BoundBreakdown b;

  b.gen_ret = bi.ell_max * bi.l_ret * w_ret *
              std::sqrt(flog(bi.l_ret * w_ret) * flog(bi.n * bi.store_size)) / std::sqrt(bi.n);
  b.gen_pred = bi.ell_max *
               std::sqrt((bi.l_pred * flog(y) +
                          bi.l_pred * bi.l_pred * w_pred * w_pred * flog(bi.l_pred * w_pred)) *
                         flog(bi.n * bi.store_size * y)) /
               std::sqrt(bi.n);
  b.approx_ret = bi.ell_max * std::pow(bi.l_ret, -4.0 * bi.kappa / (3.0 * d)) *
                 std::cbrt(flog(bi.store_size));
  b.approx_pred_net = std::pow(bi.l_pred, -2.0 * bi.kappa_store / d);
  b.approx_pred_clip = (y - 1.0) * std::exp(-bi.ell_max);
  b.approx_pred_store =
      bi.c_store * std::pow(bi.store_size, -bi.gamma_store) * std::exp(bi.ell_max);
  b.total = b.gen_ret + b.gen_pred + b.approx_ret + b.approx_pred_net + b.approx_pred_clip +
            b.approx_pred_store;
  return b;
}

Schedules optimal_schedules(double n, int num_classes, double d_tot, double kappa,
                            double kappa_store) {
  if (n < 1.0 || num_classes < 1 || !(d_tot > 0.0) || !(kappa > 0.0) || !(kappa_store > 0.0))
    throw ConfigError("optimal_schedules: invalid inputs");
  const double y = static_cast<double>(num_classes);
  Schedules s;
  s.l_ret = std::pow(n, 3.0 * d_tot / (6.0 * d_tot + 8.0 * kappa));
  s.l_pred = std::pow(std::sqrt(n) / y, d_tot / (2.0 * d_tot + 4.0 * kappa_store));
  s.ell_max = std::log(y) + kappa_store / (d_tot + 2.0 * kappa_store) * std::log(n);
  return s;
}

double joint_rate(double n, double store_size, int num_classes, double d_tot, double kappa,
                  double kappa_store, double gamma_store) {
  const double y = static_cast<double>(num_classes);
  double ret_term = std::pow(n, -2.0 * kappa / (3.0 * d_tot + 4.0 * kappa));
  double store_term =
      std::pow(store_size, -gamma_store) * y * std::pow(n, kappa_store / (d_tot + 2.0 * kappa_store));
  double pred_term = std::pow(n / (y * y), -kappa_store / (d_tot + 2.0 * kappa_store));
  return ret_term + std::max(store_term, pred_term);
}

double no_retrieval_rate(double n, int num_classes, double d_x, double kappa_true) {
  const double y = static_cast<double>(num_classes);
  return std::pow(n / (y * y), -kappa_true / (d_x + 2.0 * kappa_true));
}

GainReport retrieval_gain_check(const BoundInputs& bi) {
  validate(bi);
  const double d = bi.d_tot();
  const double y = static_cast<double>(bi.num_classes);
  GainReport g;
  g.store_required = std::pow(y, d / (bi.gamma_store * (d + 2.0 * bi.kappa_store))) *
                     std::pow(bi.n, 2.0 * bi.kappa_store / (bi.gamma_store * (d + 2.0 * bi.kappa_store)));
  g.store_ok = bi.store_size >= g.store_required;
  g.kappa_ok = bi.kappa > 1.5 * d / bi.d_x * bi.kappa_true;
  g.kappa_store_ok = bi.kappa_store > d / bi.d_x * bi.kappa_true;
  g.gain = g.store_ok && g.kappa_ok && g.kappa_store_ok;
  return g;
}

std::vector<SurfaceRow> tradeoff_surface(const BoundInputs& base,
                                         std::span<const double> lret_grid,
                                         std::span<const double> lpred_grid) {
  if (lret_grid.empty() || lpred_grid.empty())
    throw ConfigError("tradeoff_surface: empty depth grid");
  std::vector<SurfaceRow> out;
  out.reserve(lret_grid.size() * lpred_grid.size());
  BoundInputs bi = base;
  for (double lr : lret_grid)
    for (double lp : lpred_grid) {
      bi.l_ret = lr;
      bi.l_pred = lp;
      out.push_back({lr, lp, excess_risk_bound(bi)});
    }
  return out;
}

std::vector<GainRow> store_gain_curve(const BoundInputs& base,
                                      std::span<const double> store_grid,
                                      std::span<const double> n_grid) {
  if (store_grid.empty() || n_grid.empty()) throw ConfigError("store_gain_curve: empty grid");
  std::vector<GainRow> out;
  out.reserve(store_grid.size() * n_grid.size());
  for (double n : n_grid)
    for (double s : store_grid) {
      GainRow r;
      r.n = n;
      r.store_size = s;
      r.joint = joint_rate(n, s, base.num_classes, base.d_tot(), base.kappa, base.kappa_store,
                           base.gamma_store);
      r.no_retrieval = no_retrieval_rate(n, base.num_classes, base.d_x, base.kappa_true);
      r.crossover = r.joint < r.no_retrieval;
      out.push_back(r);
    }
  return out;
}

std::pair<double, double> covering_norms(const std::vector<std::vector<double>>& u,
                                         const RamModel& m, const DataStore& store,
                                         const LabeledDataset& batch) {
  if (static_cast<int>(u.size()) != batch.size())
    throw ShapeError("covering_norms: weight rows must align with batch rows");
  double s_xi = 0.0, s_theta = 0.0;
  for (int i = 0; i < batch.size(); ++i) {
    const auto& row = u[static_cast<size_t>(i)];
    if (static_cast<int>(row.size()) != store.size())
      throw ShapeError("covering_norms: weight row size must equal store size");
    const auto& x = batch.xs[static_cast<size_t>(i)];
    auto dist = retriever_dist(retriever_scores(m, store, x));
    double a = 0.0, b = 0.0;
    for (int j = 0; j < store.size(); ++j) {
      a += row[static_cast<size_t>(j)] *
           bounded_log_loss(m, x, store.evidences[static_cast<size_t>(j)],
                            batch.ys[static_cast<size_t>(i)]);
      b += dist[static_cast<size_t>(j)] * row[static_cast<size_t>(j)];
    }
    s_xi += a * a;
    s_theta += b * b;
  }
  return {std::sqrt(s_xi / batch.size()), std::sqrt(s_theta / batch.size())};
}

void save_breakdown_csv(const std::vector<SurfaceRow>& rows, const std::string& path) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& r : rows)
    out.push_back({fmt_real(r.l_ret), fmt_real(r.l_pred), fmt_real(r.bb.gen_ret),
                   fmt_real(r.bb.gen_pred), fmt_real(r.bb.approx_ret),
                   fmt_real(r.bb.approx_pred_net), fmt_real(r.bb.approx_pred_clip),
                   fmt_real(r.bb.approx_pred_store), fmt_real(r.bb.total)});
  write_csv(path,
            {"l_ret", "l_pred", "gen_ret", "gen_pred", "approx_ret", "approx_pred_net",
             "approx_pred_clip", "approx_pred_store", "total"},
            out);
}

void save_gain_csv(const std::vector<GainRow>& rows, const std::string& path) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& r : rows)
    out.push_back({fmt_real(r.n), fmt_real(r.store_size), fmt_real(r.joint),
                   fmt_real(r.no_retrieval), r.crossover ? "1" : "0"});
  write_csv(path, {"n", "store_size", "joint_rate", "no_retrieval_rate", "crossover"}, out);
}

}  // namespace ramlab
