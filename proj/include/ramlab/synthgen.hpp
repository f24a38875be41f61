#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ramlab/ram.hpp"

namespace ramlab {

struct TaskSpec {
  int d_x = 4;
  int d_z = 4;
  int num_classes = 4;
  int store_size = 64;
  int n_train = 4096;
  int n_test = 2000;
  double omega = 3.0;        // frequency scale of the planted score field
  double score_scale = 3.0;  // amplitude of the planted score field
  double label_noise = 0.05; // probability of resampling the label uniformly
  std::uint64_t map_seed = 1;
  std::uint64_t data_seed = 2;
};

// Planted class-score field: per class, a random Fourier feature expansion
// over concat(x, z) with frequencies of scale omega. Features are centered
// (phi(u) = cos(w.u + b) - cos(b)), so scores vanish as omega -> 0 and the
// induced label distribution tends to uniform.
struct FourierScore {
  int dim = 0;
  int num_classes = 0;
  int features = 0;
  double scale = 0.0;
  std::vector<Matrix> freqs;               // per class: features x dim
  std::vector<std::vector<double>> phase;  // per class: features
  std::vector<std::vector<double>> amp;    // per class: features

  std::vector<double> eval(std::span<const double> u) const;
};

struct SynthTask {
  TaskSpec spec;
  DataStore store;
  LabeledDataset train;
  LabeledDataset test;
  Matrix relevance_map;                 // A: d_z x d_x, rows L1-normalized
  FourierScore score;                   // planted h*
  std::vector<int> oracle_train;        // z*(x) per train sample
  std::vector<int> oracle_test;         // z*(x) per test sample
  std::vector<std::vector<double>> bayes_probs;  // p*(y | x, z*(x)) per test sample
};

// Builds the task: store and structure from map_seed, samples and labels
// from data_seed. Labels are drawn from softmax(h*(x, z*(x))) and resampled
// uniformly with probability label_noise.
SynthTask generate(const TaskSpec& spec);

// Index of the planted relevant evidence: argmin_j ||A x - z_j||_2 (ties to
// the lowest index).
int oracle_evidence_index(const Matrix& relevance_map, const DataStore& store,
                          std::span<const double> x);

// Mean over test samples of max_y bayes_probs.
double oracle_accuracy(const SynthTask& task);

// Fraction of test samples whose retrieved evidence equals the planted one.
double oracle_recall(const SynthTask& task, std::span<const int> retrieved);

// Accuracy of the best evidence-free predictor estimate: classify by the
// store-uniform marginal of the planted scores, judge under bayes_probs.
double uniform_marginal_accuracy(const SynthTask& task);

}  // namespace ramlab
