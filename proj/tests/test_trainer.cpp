#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <vector>

#include "ramlab/csv.hpp"
#include "ramlab/errors.hpp"
#include "ramlab/rng.hpp"
#include "ramlab/synthgen.hpp"
#include "ramlab/trainer.hpp"

using namespace ramlab;

namespace {

TaskSpec small_task_spec() {
  TaskSpec spec;
  spec.store_size = 16;
  spec.n_train = 256;
  spec.n_test = 200;
  return spec;
}

RamModel small_model(const TaskSpec& spec, std::uint64_t seed) {
  return make_ram_model(spec.d_x, spec.d_z, spec.num_classes, 1, 8, 1, 16,
                        std::log(static_cast<double>(spec.num_classes)) + 3.0, seed);
}

TrainConfig small_config(Paradigm p, ObjectiveType t, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.paradigm = p;
  cfg.objective.type = t;
  cfg.objective.k = 4;
  cfg.objective.refresh_every = 25;
  cfg.steps = 300;
  cfg.batch_size = 32;
  cfg.warmup_steps = 30;
  cfg.eval_every = 50;
  cfg.seed = seed;
  return cfg;
}

bool params_equal(const MlpParams& a, const MlpParams& b) {
  if (param_count(a) != param_count(b)) return false;
  for (int i = 0; i < param_count(a); ++i)
    if (get_param(a, i) != get_param(b, i)) return false;
  return true;
}

}  // namespace

TEST_CASE("paradigm names round-trip") {
  for (Paradigm p : {Paradigm::NoRetriever, Paradigm::FixedRetriever, Paradigm::FixedPredictor,
                     Paradigm::Joint})
    CHECK(paradigm_from_name(paradigm_name(p)) == p);
  CHECK_THROWS_AS(paradigm_from_name("frozen"), ConfigError);
}

TEST_CASE("learning-rate schedule: linear warmup then linear decay") {
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.warmup_steps = 100;
  cfg.peak_lr = 1e-3;
  CHECK(lr_at(0, cfg) == 0.0);
  CHECK(lr_at(50, cfg) == doctest::Approx(5e-4).epsilon(1e-14));
  CHECK(lr_at(100, cfg) == doctest::Approx(1e-3).epsilon(1e-14));
  CHECK(lr_at(1050, cfg) == doctest::Approx(1e-3 * 950.0 / 1900.0).epsilon(1e-14));
  CHECK(lr_at(1999, cfg) == doctest::Approx(1e-3 / 1900.0).epsilon(1e-14));
  CHECK_THROWS_AS(lr_at(2000, cfg), ConfigError);
  CHECK_THROWS_AS(lr_at(-1, cfg), ConfigError);

  TrainConfig flat;
  flat.steps = 10;
  flat.warmup_steps = 10;
  CHECK(lr_at(9, flat) == doctest::Approx(flat.peak_lr * 0.9).epsilon(1e-14));
}

TEST_CASE("adamw follows the hand-computed reference for two steps") {
  // One-parameter affine net: weight only (bias receives zero gradients).
  MlpParams p = mlp_init(1, 1, 0, 0, 1);
  set_param(p, 0, 0.5);
  set_param(p, 1, 0.0);
  AdamState st = make_adam_state(p);
  GradBuffer g = make_grad_buffer(p);

  const double lr = 0.1, wd = 0.01, eps = 1e-8;
  // Step 1, gradient 0.2.
  g.layers[0].w.a[0] = 0.2;
  adamw_step(p, g, st, 0, lr, wd);
  double w = 0.5 - lr * wd * 0.5;              // decoupled decay first
  double m = 0.1 * 0.2, v = 0.001 * 0.2 * 0.2; // fresh moments
  double mhat = m / 0.1, vhat = v / 0.001;     // bias corrections at t=1
  w -= lr * mhat / (std::sqrt(vhat) + eps);
  CHECK(get_param(p, 0) == doctest::Approx(w).epsilon(1e-15));

  // Step 2, gradient -0.1.
  g.layers[0].w.a[0] = -0.1;
  adamw_step(p, g, st, 1, lr, wd);
  w -= lr * wd * w;
  m = 0.9 * m + 0.1 * (-0.1);
  v = 0.999 * v + 0.001 * 0.01;
  mhat = m / (1.0 - 0.9 * 0.9);
  vhat = v / (1.0 - 0.999 * 0.999);
  w -= lr * mhat / (std::sqrt(vhat) + eps);
  CHECK(get_param(p, 0) == doctest::Approx(w).epsilon(1e-15));

  // Untouched bias: decayed but not moved by the zero gradient.
  CHECK(get_param(p, 1) == 0.0);

  g.layers[0].w.a[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adamw_step(p, g, st, 2, lr, wd), DivergedError);
}

TEST_CASE("train validates its configuration") {
  TaskSpec spec = small_task_spec();
  SynthTask task = generate(spec);
  RamModel m0 = small_model(spec, 5);

  TrainConfig cfg = small_config(Paradigm::Joint, ObjectiveType::RceExact, 1);
  cfg.batch_size = 10000;
  CHECK_THROWS_AS(train(m0, task.store, task.train, task.test, cfg), ConfigError);

  cfg = small_config(Paradigm::Joint, ObjectiveType::RceExact, 1);
  cfg.warmup_steps = cfg.steps + 1;
  CHECK_THROWS_AS(train(m0, task.store, task.train, task.test, cfg), ConfigError);

  cfg = small_config(Paradigm::Joint, ObjectiveType::RceExact, 1);
  cfg.eval_every = 0;
  CHECK_THROWS_AS(train(m0, task.store, task.train, task.test, cfg), ConfigError);

  for (ObjectiveType t : {ObjectiveType::PDist, ObjectiveType::RcePG, ObjectiveType::RceTopK}) {
    cfg = small_config(Paradigm::NoRetriever, t, 1);
    CHECK_THROWS_AS(train(m0, task.store, task.train, task.test, cfg), ConfigError);
  }
  cfg = small_config(Paradigm::FixedRetriever, ObjectiveType::PDist, 1);
  CHECK_THROWS_AS(train(m0, task.store, task.train, task.test, cfg), ConfigError);

  cfg = small_config(Paradigm::Joint, ObjectiveType::RceTopK, 1);
  cfg.objective.k = 17;  // store only has 16
  CHECK_THROWS_AS(train(m0, task.store, task.train, task.test, cfg), ConfigError);

  std::vector<int> short_oracle(3, 0);
  cfg = small_config(Paradigm::Joint, ObjectiveType::RceExact, 1);
  CHECK_THROWS_AS(train(m0, task.store, task.train, task.test, cfg, short_oracle), ShapeError);
}

TEST_CASE("zero steps returns the initial model with an empty trace") {
  TaskSpec spec = small_task_spec();
  SynthTask task = generate(spec);
  RamModel m0 = small_model(spec, 5);
  TrainConfig cfg = small_config(Paradigm::Joint, ObjectiveType::RceExact, 1);
  cfg.steps = 0;
  TrainResult res = train(m0, task.store, task.train, task.test, cfg);
  CHECK(res.trace.rows.empty());
  CHECK(params_equal(res.model.retriever, m0.retriever));
  CHECK(params_equal(res.model.predictor, m0.predictor));
}

TEST_CASE("every objective lowers its own training loss on the planted task") {
  TaskSpec spec = small_task_spec();
  SynthTask task = generate(spec);
  struct Case {
    Paradigm p;
    ObjectiveType t;
  };
  const Case cases[] = {{Paradigm::Joint, ObjectiveType::RceExact},
                        {Paradigm::Joint, ObjectiveType::Emdr2},
                        {Paradigm::Joint, ObjectiveType::PDist},
                        {Paradigm::Joint, ObjectiveType::RceTopK},
                        {Paradigm::Joint, ObjectiveType::RcePG}};
  for (const Case& c : cases) {
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      RamModel m0 = small_model(spec, derive_seed(seed, 0xB0D));
      TrainConfig cfg = small_config(c.p, c.t, seed);
      TrainResult res = train(m0, task.store, task.train, task.test, cfg, task.oracle_test);
      REQUIRE(res.trace.rows.size() >= 2);
      double first = res.trace.rows.front().train_loss;
      double last = res.trace.rows.back().train_loss;
      if (last < first) ++improved;
    }
    INFO("objective ", objective_name(ObjectiveKind{c.t, 4, 25, 5.0}));
    CHECK(improved >= 2);
  }
}

TEST_CASE("paradigms freeze exactly the blocks they promise") {
  TaskSpec spec = small_task_spec();
  SynthTask task = generate(spec);
  RamModel m0 = small_model(spec, 17);
  TrainConfig cfg = small_config(Paradigm::FixedRetriever, ObjectiveType::RceExact, 4);
  cfg.steps = 60;

  TrainResult fixed_ret = train(m0, task.store, task.train, task.test, cfg);
  CHECK(params_equal(fixed_ret.model.retriever, m0.retriever));
  CHECK(!params_equal(fixed_ret.model.predictor, m0.predictor));

  cfg.paradigm = Paradigm::FixedPredictor;
  TrainResult fixed_pred = train(m0, task.store, task.train, task.test, cfg);
  CHECK(params_equal(fixed_pred.model.predictor, m0.predictor));
  CHECK(!params_equal(fixed_pred.model.retriever, m0.retriever));

  cfg.paradigm = Paradigm::Joint;
  TrainResult joint = train(m0, task.store, task.train, task.test, cfg);
  CHECK(!params_equal(joint.model.retriever, m0.retriever));
  CHECK(!params_equal(joint.model.predictor, m0.predictor));

  cfg.paradigm = Paradigm::NoRetriever;
  TrainResult nr = train(m0, task.store, task.train, task.test, cfg);
  CHECK(params_equal(nr.model.retriever, m0.retriever));
  CHECK(!params_equal(nr.model.predictor, m0.predictor));
  REQUIRE(nr.run_store.size() == 1);
  CHECK(nr.run_store.dim == spec.d_z);
  for (double v : nr.run_store.evidences[0]) CHECK(v == 0.0);
  // The other paradigms run on the real store.
  CHECK(joint.run_store.size() == task.store.size());
}

TEST_CASE("training is deterministic in the seed") {
  TaskSpec spec = small_task_spec();
  SynthTask task = generate(spec);
  RamModel m0 = small_model(spec, 3);
  TrainConfig cfg = small_config(Paradigm::Joint, ObjectiveType::RceTopK, 11);
  cfg.steps = 80;
  TrainResult a = train(m0, task.store, task.train, task.test, cfg, task.oracle_test);
  TrainResult b = train(m0, task.store, task.train, task.test, cfg, task.oracle_test);
  CHECK(params_equal(a.model.retriever, b.model.retriever));
  CHECK(params_equal(a.model.predictor, b.model.predictor));
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (size_t i = 0; i < a.trace.rows.size(); ++i) {
    CHECK(a.trace.rows[i].train_loss == b.trace.rows[i].train_loss);
    CHECK(a.trace.rows[i].test_acc == b.trace.rows[i].test_acc);
    CHECK(a.trace.rows[i].gnorm_theta == b.trace.rows[i].gnorm_theta);
  }
  cfg.seed = 12;
  TrainResult c = train(m0, task.store, task.train, task.test, cfg, task.oracle_test);
  CHECK(!params_equal(a.model.predictor, c.model.predictor));
}

TEST_CASE("the top-k cache cadence is observable") {
  TaskSpec spec = small_task_spec();
  SynthTask task = generate(spec);
  RamModel m0 = small_model(spec, 23);
  TrainConfig fresh = small_config(Paradigm::Joint, ObjectiveType::RceTopK, 9);
  fresh.steps = 60;
  fresh.objective.refresh_every = 1;
  TrainConfig stale = fresh;
  stale.objective.refresh_every = 1000;  // never refreshed after step 0
  TrainResult a = train(m0, task.store, task.train, task.test, fresh);
  TrainResult b = train(m0, task.store, task.train, task.test, stale);
  CHECK(!params_equal(a.model.retriever, b.model.retriever));
}

TEST_CASE("trace rows appear on the eval cadence and save to CSV") {
  TaskSpec spec = small_task_spec();
  SynthTask task = generate(spec);
  RamModel m0 = small_model(spec, 31);
  TrainConfig cfg = small_config(Paradigm::Joint, ObjectiveType::RceExact, 2);
  cfg.steps = 120;
  cfg.eval_every = 50;
  TrainResult res = train(m0, task.store, task.train, task.test, cfg, task.oracle_test);
  REQUIRE(res.trace.rows.size() == 3);
  CHECK(res.trace.rows[0].step == 49);
  CHECK(res.trace.rows[1].step == 99);
  CHECK(res.trace.rows[2].step == 119);
  for (const auto& row : res.trace.rows) {
    CHECK(row.test_acc >= 0.0);
    CHECK(row.test_acc <= 1.0);
    CHECK(row.test_recall >= 0.0);
    CHECK(row.test_recall <= 1.0);
    CHECK(row.gnorm_theta >= 0.0);
    CHECK(row.gnorm_xi >= 0.0);
    CHECK(std::isfinite(row.train_loss));
  }

  auto path = std::filesystem::temp_directory_path() / "ramlab_trace_test.csv";
  save_trace_csv(res.trace, path.string());
  CsvTable t = read_csv(path.string());
  REQUIRE(t.header.size() == 6);
  CHECK(t.header[0] == "step");
  CHECK(t.header[1] == "train_loss");
  REQUIRE(t.rows.size() == 3);
  CHECK(parse_real(t.rows[2][2]) == res.trace.rows[2].test_acc);
  std::filesystem::remove(path);
}

TEST_CASE("an absurd learning rate raises a diverged error with its step") {
  TaskSpec spec = small_task_spec();
  SynthTask task = generate(spec);
  RamModel m0 = make_ram_model(spec.d_x, spec.d_z, spec.num_classes, 2, 8, 2, 8,
                               std::log(4.0) + 3.0, 77);
  TrainConfig cfg = small_config(Paradigm::Joint, ObjectiveType::RceExact, 1);
  cfg.steps = 30;
  cfg.warmup_steps = 0;
  cfg.peak_lr = 1e160;
  cfg.grad_clip = 0.0;  // disabled
  bool threw = false;
  try {
    train(m0, task.store, task.train, task.test, cfg);
  } catch (const DivergedError& e) {
    threw = true;
    CHECK(e.step >= 0);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("paper preset scales the schedule per paradigm") {
  TrainConfig joint = paper_preset(Paradigm::Joint);
  CHECK(joint.steps == 40000);
  CHECK(joint.batch_size == 64);
  CHECK(joint.peak_lr == 1e-4);
  CHECK(joint.warmup_steps == 2000);
  CHECK(joint.objective.k == 64);
  CHECK(joint.objective.refresh_every == 500);
  TrainConfig fixed = paper_preset(Paradigm::FixedRetriever);
  CHECK(fixed.steps == 20000);
  CHECK(paper_preset(Paradigm::NoRetriever).steps == 40000);
}
