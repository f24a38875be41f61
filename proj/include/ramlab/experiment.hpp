#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ramlab/synthgen.hpp"
#include "ramlab/trainer.hpp"

namespace ramlab {

// One sweep cell: a paradigm/objective pair at given model sizes.
struct RunSpec {
  Paradigm paradigm = Paradigm::Joint;
  ObjectiveKind objective;
  int ret_depth = 2;
  int ret_width = 16;
  int pred_depth = 2;
  int pred_width = 32;
  bool has_train_override = false;
  TrainConfig train_override;  // replaces the shared schedule when set
};

struct ExperimentConfig {
  TaskSpec task;
  TrainConfig base;          // shared schedule; seed/paradigm/objective set per run
  double ell_max = 0.0;      // 0 selects log(num_classes) + 3
  std::vector<std::uint64_t> seeds;
  std::vector<RunSpec> runs;
};

struct RunResult {
  RunSpec spec;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double accuracy = 0.0;
  double recall = 0.0;
  double qps = 0.0;
  double wall_seconds = 0.0;
  TrainTrace trace;
};

// Trains every (run x seed) cell on the shared generated task. Rows come
// back in deterministic (run-major, then seed) order regardless of thread
// count; a failed cell carries its error message and leaves metrics unset.
// Model initialization depends only on the seed and sizes, so paradigms
// sharing a seed start from identical parameters.
std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, int threads);

// Median queries-per-second of full greedy inference over the query set,
// single-threaded, over `trials` timed repetitions.
double measure_qps(const RamModel& m, const DataStore& store, const LabeledDataset& queries,
                   int trials);

std::string size_label(int depth, int width);

void save_results_csv(const std::vector<RunResult>& results, const std::string& path);
void save_summary_csv(const std::vector<RunResult>& results, const std::string& path);

}  // namespace ramlab
