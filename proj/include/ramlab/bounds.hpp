#pragma once

#include <span>
#include <string>
#include <vector>

#include "ramlab/ram.hpp"

namespace ramlab {

// Inputs of the excess-risk bound evaluator. Depths are positive reals;
// all constants in the bound itself are 1 (exponents carry the content).
struct BoundInputs {
  double n = 1e4;            // training-set size
  double store_size = 1e3;   // |I|
  int num_classes = 4;       // |Y|
  int d_x = 4;
  int d_z = 4;
  double kappa = 4.0;        // smoothness of the retrieval-gap field
  double kappa_store = 4.0;  // smoothness of the store-conditional class scores
  double gamma_store = 1.0;  // store coverage exponent
  double c_store = 1.0;      // store coverage constant
  double kappa_true = 1.0;   // smoothness of the unconditional regression
  double l_ret = 8.0;        // retriever depth
  double l_pred = 8.0;       // predictor depth
  double ell_max = 0.0;      // loss clip level

  double d_tot() const { return static_cast<double>(d_x + d_z); }
};

struct BoundBreakdown {
  double gen_ret = 0.0;
  double gen_pred = 0.0;
  double approx_ret = 0.0;
  double approx_pred_net = 0.0;
  double approx_pred_clip = 0.0;
  double approx_pred_store = 0.0;
  double total = 0.0;
};

// Width at which the approximation guarantees kick in for input dimension d.
int theorem_width(int d);

// Excess-risk decomposition with widths tied to dimensions (retriever width
// d_tot, predictor width |Y|*d_tot), natural logs floored at 1 (arguments
// below e are raised to e).
BoundBreakdown excess_risk_bound(const BoundInputs& bi);

struct Schedules {
  double l_ret = 0.0;
  double l_pred = 0.0;
  double ell_max = 0.0;
};

// Depth and clip schedules that balance estimation against approximation.
Schedules optimal_schedules(double n, int num_classes, double d_tot, double kappa,
                            double kappa_store);

// Joint-training excess-risk rate and the no-retrieval baseline rate.
double joint_rate(double n, double store_size, int num_classes, double d_tot, double kappa,
                  double kappa_store, double gamma_store);
double no_retrieval_rate(double n, int num_classes, double d_x, double kappa_true);

struct GainReport {
  bool gain = false;        // all three conditions hold
  bool store_ok = false;    // store is large enough
  bool kappa_ok = false;    // gap field smoother than 3 d_tot / (2 d_x) * kappa_true
  bool kappa_store_ok = false;  // conditional scores smoother than d_tot/d_x * kappa_true
  double store_required = 0.0;
};

GainReport retrieval_gain_check(const BoundInputs& bi);

struct SurfaceRow {
  double l_ret = 0.0;
  double l_pred = 0.0;
  BoundBreakdown bb;
};

// Bound evaluated over a depth grid (all other inputs from base).
std::vector<SurfaceRow> tradeoff_surface(const BoundInputs& base,
                                         std::span<const double> lret_grid,
                                         std::span<const double> lpred_grid);

struct GainRow {
  double n = 0.0;
  double store_size = 0.0;
  double joint = 0.0;
  double no_retrieval = 0.0;
  bool crossover = false;  // joint rate strictly below the baseline
};

// Rate comparison over (n, |I|) grids using base for the remaining inputs.
std::vector<GainRow> store_gain_curve(const BoundInputs& base,
                                      std::span<const double> store_grid,
                                      std::span<const double> n_grid);

// Empirical counterparts of the covering-argument norms: u holds one weight
// vector per batch row (one weight per evidence).
// first  = sqrt(mean_i (sum_z u_{iz} * clipped_loss(x_i, z, y_i))^2)
// second = sqrt(mean_i (sum_z p(z|x_i) u_{iz})^2)
std::pair<double, double> covering_norms(const std::vector<std::vector<double>>& u,
                                         const RamModel& m, const DataStore& store,
                                         const LabeledDataset& batch);

void save_breakdown_csv(const std::vector<SurfaceRow>& rows, const std::string& path);
void save_gain_csv(const std::vector<GainRow>& rows, const std::string& path);

}  // namespace ramlab
