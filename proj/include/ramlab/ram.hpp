#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ramlab/nn.hpp"

namespace ramlab {

// Evidence store: |I| vectors in [-1,1]^{d_z}.
struct DataStore {
  int dim = 0;
  std::vector<std::vector<double>> evidences;

  int size() const { return static_cast<int>(evidences.size()); }
};

struct LabeledDataset {
  int dim = 0;
  int num_classes = 0;
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;

  int size() const { return static_cast<int>(xs.size()); }
};

// Retrieval-augmented model: a scalar-output retriever net scoring (x, z)
// pairs and a |Y|-output predictor net scoring classes from the same pair.
// Both consume the concatenation [x, z].
struct RamModel {
  MlpParams retriever;
  MlpParams predictor;
  int num_classes = 0;
  double ell_max = 0.0;

  int input_dim() const { return retriever.in_dim; }
};

RamModel make_ram_model(int d_x, int d_z, int num_classes, int ret_depth, int ret_width,
                        int pred_depth, int pred_width, double ell_max, std::uint64_t seed);

// Numerically stabilized softmax (max subtraction).
std::vector<double> softmax(std::span<const double> s);
double log_sum_exp(std::span<const double> s);

// Retriever scores against every store entry, in store order.
std::vector<double> retriever_scores(const RamModel& m, const DataStore& store,
                                     std::span<const double> x);
// Retrieval distribution p(z|x) = softmax over store scores.
std::vector<double> retriever_dist(std::span<const double> scores);
// Class scores / distribution for one (x, z) pair.
std::vector<double> predictor_scores(const RamModel& m, std::span<const double> x,
                                     std::span<const double> z);
std::vector<double> predictor_dist(const RamModel& m, std::span<const double> x,
                                   std::span<const double> z);

// Log loss clipped at ell_max: min(ell_max, logsumexp(h) - h[y]).
double bounded_log_loss(const RamModel& m, std::span<const double> x,
                        std::span<const double> z, int y);

// Indices of the k largest scores, sorted by descending score; ties resolve
// to the lowest index.
std::vector<int> top_k_indices(std::span<const double> scores, int k);

// k i.i.d. categorical draws (with replacement) from dist.
std::vector<int> sample_evidences(std::span<const double> dist, int k, std::uint64_t seed);

struct Prediction {
  int label = 0;
  int evidence = 0;
};

// Greedy inference: top-1 evidence by retriever score, argmax class there.
Prediction predict(const RamModel& m, const DataStore& store, std::span<const double> x);

double accuracy(const RamModel& m, const DataStore& store, const LabeledDataset& data);

// Population-risk estimators over a dataset: exact marginalizes the clipped
// loss over the full retrieval distribution; sampled draws one evidence per
// example from that distribution and returns per-example losses.
double empirical_risk_exact(const RamModel& m, const DataStore& store,
                            const LabeledDataset& data);
std::vector<double> empirical_risk_sampled(const RamModel& m, const DataStore& store,
                                           const LabeledDataset& data, std::uint64_t seed);

// CSV persistence. Stores: header z0..z{d-1}, one evidence per row. Datasets:
// header x0..x{d-1},label.
void save_store_csv(const DataStore& s, const std::string& path);
DataStore load_store_csv(const std::string& path);
void save_dataset_csv(const LabeledDataset& d, const std::string& path);
LabeledDataset load_dataset_csv(const std::string& path, int num_classes);

}  // namespace ramlab
