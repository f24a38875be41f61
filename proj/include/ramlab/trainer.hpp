#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ramlab/objectives.hpp"
#include "ramlab/ram.hpp"

namespace ramlab {

// Which parameter blocks train. NoRetriever additionally replaces the store
// with a single all-zeros evidence, so the model degenerates to a plain
// classifier of x.
enum class Paradigm { NoRetriever, FixedRetriever, FixedPredictor, Joint };

std::string paradigm_name(Paradigm p);
Paradigm paradigm_from_name(const std::string& name);

struct TrainConfig {
  Paradigm paradigm = Paradigm::Joint;
  ObjectiveKind objective;
  int steps = 2000;
  int batch_size = 32;
  double peak_lr = 1e-3;
  int warmup_steps = 100;
  double weight_decay = 0.1;
  double grad_clip = 10.0;  // global L2 norm across updated blocks
  int eval_every = 100;
  std::uint64_t seed = 7;
};

// Paper-scale preset: long schedules, larger batch, wide top-k.
TrainConfig paper_preset(Paradigm p);

// Linear warmup from 0 to peak_lr over warmup_steps, then linear decay to 0
// at cfg.steps.
double lr_at(int step, const TrainConfig& cfg);

struct AdamState {
  GradBuffer m;
  GradBuffer v;
  int t = 0;
};

AdamState make_adam_state(const MlpParams& p);

// One decoupled-weight-decay Adam update: p <- p - lr*wd*p first, then the
// bias-corrected adaptive step (beta1=0.9, beta2=0.999, eps=1e-8).
void adamw_step(MlpParams& params, const GradBuffer& grad, AdamState& state, int step,
                double lr, double weight_decay);

struct TraceRow {
  int step = 0;
  double train_loss = 0.0;  // trailing 50-step mean of the objective value
  double test_acc = 0.0;
  double test_recall = 0.0;
  double gnorm_theta = 0.0;  // pre-clip gradient norms
  double gnorm_xi = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
};

void save_trace_csv(const TrainTrace& t, const std::string& path);

struct TrainResult {
  RamModel model;
  TrainTrace trace;
  DataStore run_store;  // store actually used (substituted for NoRetriever)
};

// Runs cfg.steps optimizer steps of cfg.objective under cfg.paradigm,
// starting from m0. Batches are drawn by seeded epoch shuffling. test_oracle,
// when provided, aligns with test rows and enables the recall column.
TrainResult train(const RamModel& m0, const DataStore& store, const LabeledDataset& data,
                  const LabeledDataset& test, const TrainConfig& cfg,
                  std::span<const int> test_oracle = {});

}  // namespace ramlab
