#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ramlab/ram.hpp"

namespace ramlab {

enum class ObjectiveType { RceExact, Emdr2, PDist, RceTopK, RcePG };

struct ObjectiveKind {
  ObjectiveType type = ObjectiveType::RceExact;
  int k = 8;               // top-k width (RceTopK) or sample count (RcePG)
  int refresh_every = 100; // cache refresh cadence in steps (RceTopK)
  double baseline = 5.0;   // constant reward baseline (RcePG)
};

std::string objective_name(const ObjectiveKind& kind);
ObjectiveKind objective_from_name(const std::string& name);

// One objective evaluation over a batch: scalar value, gradients for both
// parameter blocks, and the per-example decomposition (mean equals value).
struct LossReport {
  double value = 0.0;
  GradBuffer grad_theta;  // retriever
  GradBuffer grad_xi;     // predictor
  std::vector<double> per_example;
};

// Exact retrieval-weighted classification loss: the clipped log loss of each
// evidence, averaged under the full retrieval distribution. The retriever
// gradient treats per-evidence losses as constants (softmax-through); with
// clipped=false the raw log loss is used instead.
LossReport rce_exact(const RamModel& m, const DataStore& store, const LabeledDataset& batch,
                     bool clipped = true);

// Log of the retrieval-marginalized probability of the correct class.
LossReport emdr2(const RamModel& m, const DataStore& store, const LabeledDataset& batch);

// Forward cross-entropy from the predictor-utility distribution over
// evidences (stop-gradient target) to the retrieval distribution. Trains the
// retriever only; grad_xi is identically zero.
LossReport pdist_retriever_loss(const RamModel& m, const DataStore& store,
                                const LabeledDataset& batch);

// Exact loss restricted to a cached top-k evidence subset per example, with
// the retrieval distribution renormalized over that subset. cached_topk rows
// align with batch rows and may be stale.
LossReport rce_topk(const RamModel& m, const DataStore& store, const LabeledDataset& batch,
                    const std::vector<std::vector<int>>& cached_topk, bool clipped = true);

// REINFORCE estimator with a constant baseline: k evidences are sampled per
// example (i.i.d., with replacement) from the retrieval distribution; the
// retriever gets the score-function gradient and the predictor the
// Monte-Carlo gradient on the same samples. Unclipped.
LossReport rce_pg(const RamModel& m, const DataStore& store, const LabeledDataset& batch,
                  int k, double baseline, std::uint64_t seed);
// Deterministic core used by rce_pg and by exhaustive-expectation tests:
// samples[i] holds the k evidence indices drawn for batch row i.
LossReport rce_pg_with_samples(const RamModel& m, const DataStore& store,
                               const LabeledDataset& batch,
                               const std::vector<std::vector<int>>& samples, double baseline);

// Dispatch on kind. RceTopK requires cached_topk; RcePG draws its samples
// from seed.
LossReport objective_eval(const ObjectiveKind& kind, const RamModel& m, const DataStore& store,
                          const LabeledDataset& batch,
                          const std::vector<std::vector<int>>* cached_topk, std::uint64_t seed);

}  // namespace ramlab
