#include <cstdio>
#include <exception>

#include "CLI11.hpp"

#include "ramlab/cli.hpp"
#include "ramlab/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ramlab: desk-scale laboratory for retrieval-augmented classifiers"};
  app.require_subcommand(1);

  ramlab::CliOptions opt;
  app.add_option("--config", opt.config_path, "JSON config file (schema 1)");
  app.add_option("--out", opt.out_dir, "output directory (default: out)");
  auto* seed_opt = app.add_option("--seed", opt.seed, "seed override");
  app.add_option("--threads", opt.threads, "worker threads for sweeps (0 = all cores)");

  CLI::App* gen = app.add_subcommand("gen", "generate the synthetic task to CSV");
  CLI::App* train = app.add_subcommand("train", "train one model and write trace + checkpoints");
  CLI::App* sweep = app.add_subcommand("sweep", "run the paradigm/objective sweep");
  CLI::App* bounds = app.add_subcommand("bounds", "evaluate the excess-risk bound surfaces");
  CLI::App* check = app.add_subcommand("check", "run the analytic property checks");
  for (CLI::App* sub : {gen, train, sweep, bounds, check}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  opt.seed_set = seed_opt->count() > 0;

  try {
    if (gen->parsed()) return ramlab::cmd_gen(opt);
    if (train->parsed()) return ramlab::cmd_train(opt);
    if (sweep->parsed()) return ramlab::cmd_sweep(opt);
    if (bounds->parsed()) return ramlab::cmd_bounds(opt);
    if (check->parsed()) return ramlab::cmd_check(opt);
  } catch (const ramlab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
