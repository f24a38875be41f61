#pragma once

#include <cstdint>
#include <string>

namespace ramlab {

// Global command-line options shared by every subcommand. A missing config
// path means "all defaults"; seed_set records whether --seed was given so
// it can override the config file.
struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  bool seed_set = false;
  std::uint64_t seed = 7;
  int threads = 0;  // 0 = hardware concurrency
};

// Subcommand bodies. They throw ConfigError for bad configs and other
// exceptions for runtime failures; the caller maps exceptions to exit codes
// (0 success, 1 config, 2 runtime, 3 failed checks).
int cmd_gen(const CliOptions& opt);
int cmd_train(const CliOptions& opt);
int cmd_sweep(const CliOptions& opt);
int cmd_bounds(const CliOptions& opt);
int cmd_check(const CliOptions& opt);

}  // namespace ramlab
