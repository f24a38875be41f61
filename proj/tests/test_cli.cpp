#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ramlab/cli.hpp"
#include "ramlab/csv.hpp"
#include "ramlab/errors.hpp"
#include "ramlab/nn.hpp"
#include "ramlab/ram.hpp"
#include "ramlab/rng.hpp"
#include "ramlab/synthgen.hpp"
#include "ramlab/trainer.hpp"

using namespace ramlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ramlab_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_config(const TempDir& dir, const std::string& name, const std::string& body) {
  fs::path p = dir.path / name;
  std::ofstream out(p, std::ios::binary);
  out << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliOptions options(const fs::path& config, const fs::path& out) {
  CliOptions opt;
  opt.config_path = config.string();
  opt.out_dir = out.string();
  opt.threads = 1;
  return opt;
}

// A task small enough that every command under it finishes in well under a second.
const char* kTinyTask = R"("task": {"d_x": 2, "d_z": 2, "num_classes": 3, "store_size": 8,
                          "n_train": 64, "n_test": 40})";

}  // namespace

TEST_CASE("configs are validated strictly") {
  TempDir dir("cfg");
  CliOptions opt = options(dir.path / "missing.json", dir.path / "out");
  CHECK_THROWS_AS(cmd_gen(opt), ConfigError);  // file does not exist

  auto bad = [&](const std::string& name, const std::string& body) {
    CliOptions o = options(write_config(dir, name, body), dir.path / "out");
    CHECK_THROWS_AS(cmd_gen(o), ConfigError);
  };
  bad("noschema.json", R"({"task": {}})");
  bad("wrongschema.json", R"({"schema": 2})");
  bad("notobject.json", R"([1, 2])");
  bad("syntax.json", R"({"schema": 1)");
  bad("unknown_top.json", R"({"schema": 1, "tusk": {}})");
  bad("unknown_task.json", R"({"schema": 1, "task": {"d_q": 3}})");
  bad("bad_type.json", R"({"schema": 1, "task": {"d_x": "four"}})");
  bad("neg_seed.json", R"({"schema": 1, "task": {"map_seed": -4}})");

  CliOptions o = options(
      write_config(dir, "unknown_train.json",
                   R"({"schema": 1, "train": {"step": 10}})"),
      dir.path / "out");
  CHECK_THROWS_AS(cmd_train(o), ConfigError);
  o = options(write_config(dir, "bad_objective.json",
                           R"({"schema": 1, "train": {"objective": "dice"}})"),
              dir.path / "out");
  CHECK_THROWS_AS(cmd_train(o), ConfigError);
  o = options(write_config(dir, "bad_runs.json",
                           R"({"schema": 1, "runs": {"paradigm": "joint"}})"),
              dir.path / "out");
  CHECK_THROWS_AS(cmd_sweep(o), ConfigError);
  o = options(write_config(dir, "bad_size.json",
                           R"({"schema": 1, "runs": [{"size": "enormous"}]})"),
              dir.path / "out");
  CHECK_THROWS_AS(cmd_sweep(o), ConfigError);
  o = options(write_config(dir, "bad_run_train.json",
                           R"({"schema": 1, "runs": [{"train": {"seed": 4}}]})"),
              dir.path / "out");
  CHECK_THROWS_AS(cmd_sweep(o), ConfigError);
  o = options(write_config(dir, "empty_seeds.json", R"({"schema": 1, "seeds": []})"),
              dir.path / "out");
  CHECK_THROWS_AS(cmd_sweep(o), ConfigError);
  o = options(write_config(dir, "bad_bounds.json",
                           R"({"schema": 1, "bounds": {"lret_grid": []}})"),
              dir.path / "out");
  CHECK_THROWS_AS(cmd_bounds(o), ConfigError);
}

TEST_CASE("gen writes the dataset family and is reproducible") {
  TempDir dir("gen");
  std::string body = std::string(R"({"schema": 1, )") + kTinyTask + "}";
  fs::path cfg = write_config(dir, "gen.json", body);

  CliOptions a = options(cfg, dir.path / "a");
  REQUIRE(cmd_gen(a) == 0);
  for (const char* f : {"store.csv", "train.csv", "test.csv", "oracle.csv", "task.json"})
    CHECK(fs::exists(dir.path / "a" / f));

  CsvTable store = read_csv((dir.path / "a" / "store.csv").string());
  CHECK(store.rows.size() == 8);
  CsvTable train = read_csv((dir.path / "a" / "train.csv").string());
  CHECK(train.rows.size() == 64);
  CsvTable test = read_csv((dir.path / "a" / "test.csv").string());
  CHECK(test.rows.size() == 40);
  CsvTable oracle = read_csv((dir.path / "a" / "oracle.csv").string());
  CHECK(oracle.rows.size() == 104);
  REQUIRE(oracle.header.size() == 6);  // split,row,evidence,b0..b2
  CHECK(oracle.rows[0][0] == "train");
  CHECK(oracle.rows[0][3] == "");            // no posterior on train rows
  CHECK(oracle.rows[103][0] == "test");
  CHECK(oracle.rows[103][3] != "");

  CliOptions b = options(cfg, dir.path / "b");
  REQUIRE(cmd_gen(b) == 0);
  for (const char* f : {"store.csv", "train.csv", "test.csv", "oracle.csv", "task.json"})
    CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
}

TEST_CASE("train writes trace, checkpoints, and summary") {
  TempDir dir("train");
  std::string body = std::string(R"({"schema": 1, )") + kTinyTask + R"(,
    "model": {"ret_depth": 1, "ret_width": 8, "pred_depth": 1, "pred_width": 8},
    "train": {"paradigm": "joint", "objective": "rce_topk", "k": 4, "refresh_every": 10,
              "steps": 40, "batch_size": 16, "warmup_steps": 5, "eval_every": 20, "seed": 3}})";
  fs::path cfg = write_config(dir, "train.json", body);
  CliOptions opt = options(cfg, dir.path / "run");
  REQUIRE(cmd_train(opt) == 0);

  CsvTable trace = read_csv((dir.path / "run" / "trace.csv").string());
  REQUIRE(trace.rows.size() == 2);
  CHECK(trace.rows[0][0] == "19");
  CHECK(trace.rows[1][0] == "39");
  CHECK(fs::exists(dir.path / "run" / "retriever.json"));
  CHECK(fs::exists(dir.path / "run" / "predictor.json"));
  std::string summary = slurp(dir.path / "run" / "summary.json");
  CHECK(summary.find("\"accuracy\"") != std::string::npos);
  CHECK(summary.find("rce_topk") != std::string::npos);
}

TEST_CASE("train with zero steps leaves the model at initialization") {
  TempDir dir("train0");
  std::string body = std::string(R"({"schema": 1, )") + kTinyTask + R"(,
    "model": {"ret_depth": 1, "ret_width": 8, "pred_depth": 1, "pred_width": 8},
    "train": {"paradigm": "fixed_retriever", "steps": 0, "batch_size": 16,
              "warmup_steps": 0, "eval_every": 20, "seed": 9}})";
  fs::path cfg = write_config(dir, "zero.json", body);
  CliOptions opt = options(cfg, dir.path / "run");
  REQUIRE(cmd_train(opt) == 0);
  CsvTable trace = read_csv((dir.path / "run" / "trace.csv").string());
  CHECK(trace.rows.empty());

  // The saved retriever must equal the deterministic initialization.
  RamModel init = make_ram_model(2, 2, 3, 1, 8, 1, 8, std::log(3.0) + 3.0, derive_seed(9, 0xB0D));
  fs::path ref = dir.path / "ref_retriever.json";
  save_checkpoint(init.retriever, ref.string());
  CHECK(slurp(ref) == slurp(dir.path / "run" / "retriever.json"));
  // Zero steps means even the predictor is untouched.
  fs::path refp = dir.path / "ref_predictor.json";
  save_checkpoint(init.predictor, refp.string());
  CHECK(slurp(refp) == slurp(dir.path / "run" / "predictor.json"));
}

TEST_CASE("fixed retriever training never moves the retriever checkpoint") {
  TempDir dir("fixedret");
  std::string body = std::string(R"({"schema": 1, )") + kTinyTask + R"(,
    "model": {"ret_depth": 1, "ret_width": 8, "pred_depth": 1, "pred_width": 8},
    "train": {"paradigm": "fixed_retriever", "steps": 30, "batch_size": 16,
              "warmup_steps": 5, "eval_every": 15, "seed": 21}})";
  fs::path cfg = write_config(dir, "fixed.json", body);
  CliOptions opt = options(cfg, dir.path / "run");
  REQUIRE(cmd_train(opt) == 0);
  RamModel init = make_ram_model(2, 2, 3, 1, 8, 1, 8, std::log(3.0) + 3.0, derive_seed(21, 0xB0D));
  fs::path ref = dir.path / "ref_retriever.json";
  save_checkpoint(init.retriever, ref.string());
  CHECK(slurp(ref) == slurp(dir.path / "run" / "retriever.json"));
}

TEST_CASE("preset knobs flow into the objective unless overridden") {
  TempDir dir("preset");
  std::string body = std::string(R"({"schema": 1, )") + kTinyTask + R"(,
    "model": {"ret_depth": 1, "ret_width": 8, "pred_depth": 1, "pred_width": 8},
    "train": {"paradigm": "joint", "objective": "rce_topk", "paper_preset": true,
              "steps": 40, "batch_size": 16, "warmup_steps": 10, "eval_every": 20,
              "k": 4, "seed": 5}})";
  fs::path cfg = write_config(dir, "preset.json", body);
  CliOptions opt = options(cfg, dir.path / "run");
  REQUIRE(cmd_train(opt) == 0);
  std::string summary = slurp(dir.path / "run" / "summary.json");
  // Naming an objective keeps the preset's cache cadence; explicit keys win.
  CHECK(summary.find("\"refresh_every\": 500") != std::string::npos);
  CHECK(summary.find("\"k\": 4") != std::string::npos);
  CHECK(summary.find("\"steps\": 40") != std::string::npos);
}

TEST_CASE("run entries naming an objective inherit the shared cache knobs") {
  TempDir dir("inherit");
  std::string body = std::string(R"({"schema": 1, )") + kTinyTask + R"(,
    "model": {"ret_depth": 1, "ret_width": 8, "pred_depth": 1, "pred_width": 8},
    "train": {"steps": 60, "batch_size": 16, "peak_lr": 2e-2, "warmup_steps": 10,
              "eval_every": 60, "k": 2, "refresh_every": 5},
    "seeds": [3],
    "runs": [{"paradigm": "joint", "objective": "rce_topk"}]})";
  fs::path cfg = write_config(dir, "inherit.json", body);
  CliOptions opt = options(cfg, dir.path / "run");
  REQUIRE(cmd_sweep(opt) == 0);
  CsvTable res = read_csv((dir.path / "run" / "results.csv").string());
  REQUIRE(res.rows.size() == 1);

  // The cell must equal a direct training run whose objective carries the
  // shared k and refresh cadence from the train block.
  TaskSpec spec;
  spec.d_x = 2;
  spec.d_z = 2;
  spec.num_classes = 3;
  spec.store_size = 8;
  spec.n_train = 64;
  spec.n_test = 40;
  SynthTask task = generate(spec);
  RamModel m0 =
      make_ram_model(2, 2, 3, 1, 8, 1, 8, std::log(3.0) + 3.0, derive_seed(3, 0xB0D));
  TrainConfig tc;
  tc.paradigm = Paradigm::Joint;
  tc.objective = ObjectiveKind{ObjectiveType::RceTopK, 2, 5, 5.0};
  tc.steps = 60;
  tc.batch_size = 16;
  tc.peak_lr = 2e-2;
  tc.warmup_steps = 10;
  tc.eval_every = 60;
  tc.seed = 3;
  TrainResult ref = train(m0, task.store, task.train, task.test, tc, task.oracle_test);
  REQUIRE(!ref.trace.rows.empty());
  CHECK(parse_real(res.rows[0][5]) == ref.trace.rows.back().test_acc);
  CHECK(parse_real(res.rows[0][6]) == ref.trace.rows.back().test_recall);
}

TEST_CASE("sweep writes one row per run-seed pair and is deterministic") {
  TempDir dir("sweep");
  std::string body = std::string(R"({"schema": 1, )") + kTinyTask + R"(,
    "model": {"ret_depth": 1, "ret_width": 8, "pred_depth": 1, "pred_width": 8},
    "train": {"steps": 30, "batch_size": 16, "warmup_steps": 5, "eval_every": 15},
    "seeds": [1, 2],
    "runs": [{"paradigm": "no_retriever"},
             {"paradigm": "joint", "objective": "rce_topk", "k": 4, "refresh_every": 10,
              "train": {"steps": 20}}]})";
  fs::path cfg = write_config(dir, "sweep.json", body);

  CliOptions a = options(cfg, dir.path / "a");
  REQUIRE(cmd_sweep(a) == 0);
  CsvTable res = read_csv((dir.path / "a" / "results.csv").string());
  REQUIRE(res.header.size() == 9);
  CHECK(res.header[0] == "paradigm");
  CHECK(res.header[7] == "qps");
  CHECK(res.header[8] == "wall_seconds");
  REQUIRE(res.rows.size() == 4);  // 2 runs x 2 seeds
  for (const auto& row : res.rows) CHECK(row[5] != "");  // every run succeeded
  CHECK(fs::exists(dir.path / "a" / "summary.csv"));

  CliOptions b = options(cfg, dir.path / "b");
  REQUIRE(cmd_sweep(b) == 0);
  CsvTable res2 = read_csv((dir.path / "b" / "results.csv").string());
  REQUIRE(res2.rows.size() == res.rows.size());
  for (size_t i = 0; i < res.rows.size(); ++i)
    for (size_t c = 0; c < 7; ++c)  // all but the timing columns
      CHECK(res.rows[i][c] == res2.rows[i][c]);
}

TEST_CASE("seed flag overrides the config seed list") {
  TempDir dir("seedflag");
  std::string body = std::string(R"({"schema": 1, )") + kTinyTask + R"(,
    "model": {"ret_depth": 1, "ret_width": 8, "pred_depth": 1, "pred_width": 8},
    "train": {"steps": 10, "batch_size": 16, "warmup_steps": 0, "eval_every": 5},
    "seeds": [1, 2, 3],
    "runs": [{"paradigm": "no_retriever"}]})";
  fs::path cfg = write_config(dir, "s.json", body);
  CliOptions opt = options(cfg, dir.path / "out");
  opt.seed_set = true;
  opt.seed = 42;
  REQUIRE(cmd_sweep(opt) == 0);
  CsvTable res = read_csv((dir.path / "out" / "results.csv").string());
  REQUIRE(res.rows.size() == 1);
  CHECK(res.rows[0][4] == "42");
}

TEST_CASE("bounds writes breakdown, surface, gain curve, and analysis") {
  TempDir dir("bounds");
  std::string body = R"({"schema": 1, "bounds": {
    "n": 10000, "store_size": 1000, "num_classes": 4,
    "lret_grid": [2, 8], "lpred_grid": [1, 4, 16],
    "gain_stores": [10, 1000], "gain_ns": [1e4, 1e6]}})";
  fs::path cfg = write_config(dir, "bounds.json", body);
  CliOptions opt = options(cfg, dir.path / "out");
  REQUIRE(cmd_bounds(opt) == 0);

  CsvTable breakdown = read_csv((dir.path / "out" / "breakdown.csv").string());
  REQUIRE(breakdown.rows.size() == 1);
  CsvTable surface = read_csv((dir.path / "out" / "surface.csv").string());
  CHECK(surface.rows.size() == 6);
  CsvTable gain = read_csv((dir.path / "out" / "store_gain.csv").string());
  CHECK(gain.rows.size() == 4);
  std::string analysis = slurp(dir.path / "out" / "analysis.json");
  CHECK(analysis.find("\"schedules\"") != std::string::npos);
  CHECK(analysis.find("\"gain\"") != std::string::npos);

  // With ell_max left to default, it is filled from the optimal schedule.
  CHECK(analysis.find("\"ell_max\": 3.68") != std::string::npos);
}

TEST_CASE("the inequality suite gates the check command") {
  CliOptions opt;
  opt.seed = 7;
  CHECK(cmd_check(opt) == 0);
}
