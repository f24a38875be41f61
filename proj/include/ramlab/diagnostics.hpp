#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ramlab {

// Outcome of one randomized inequality check. worst_margin is the smallest
// slack seen (negative iff some trial violated the inequality).
struct CheckResult {
  std::string name;
  int trials = 0;
  int violations = 0;
  double worst_margin = 0.0;
  bool pass = false;
  bool informational = false;  // reported but not gating
};

// Accumulates slacks; a slack below -tolerance counts as a violation.
class CheckAccumulator {
 public:
  CheckAccumulator(std::string name, double tolerance)
      : name_(std::move(name)), tol_(tolerance) {}
  void add(double slack);
  CheckResult finalize(bool informational = false) const;

 private:
  std::string name_;
  double tol_;
  int trials_ = 0;
  int violations_ = 0;
  double worst_ = 0.0;
  bool any_ = false;
};

// Truncated-Gibbs inequality: for distributions a, b on K atoms and C > 0,
// sum a_i min(C, -log b_i) >= sum a_i min(C, -log a_i) - (K-1) e^{-C}.
CheckResult check_truncated_gibbs(int trials, int k_max, double c_max, std::uint64_t seed);

// ||softmax(s) - softmax(s')||_1 <= ||s - s'||_inf.
CheckResult check_softmax_lipschitz(int trials, int dim_max, std::uint64_t seed);

// Softmax-min approximation: 0 <= sum_z softmax(-tau g)_z g_z - min_z g_z,
// asserted against log(m)/tau^2 + log(m)/tau. The tau^2-only form is checked
// separately (informational: it fails for general g).
CheckResult check_softmin_approx(int trials, int m_max, std::span<const double> tau_grid,
                                 std::uint64_t seed);
CheckResult check_softmin_strict(int trials, int m_max, std::span<const double> tau_grid,
                                 std::uint64_t seed);

// Unclipped exact loss dominates the marginalized loss (Jensen) on random
// models; equality holds at store size 1.
CheckResult check_jensen_rce_emdr2(int trials, std::uint64_t seed);

// Exhaustive expectation of the policy-gradient estimator equals the exact
// unclipped retriever gradient on tiny stores.
CheckResult check_pg_unbiased(int trials, std::uint64_t seed);

// Central finite differences against analytic gradients for every objective.
CheckResult check_gradients_all(int trials, std::uint64_t seed);

// Default suite, gating checks first, informational ones flagged.
std::vector<CheckResult> run_all_checks(std::uint64_t seed);

}  // namespace ramlab
