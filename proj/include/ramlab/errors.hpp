#pragma once

#include <stdexcept>
#include <string>

namespace ramlab {

// Bad user-supplied configuration (unknown keys, invalid ranges, file problems).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched tensor/dataset dimensions.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// A computation left its valid numeric domain (underflow to zero marginals, etc.).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a non-finite loss or gradient; `step` is where it happened.
struct DivergedError : std::runtime_error {
  DivergedError(const std::string& msg, int at_step)
      : std::runtime_error(msg + " (step " + std::to_string(at_step) + ")"), step(at_step) {}
  int step;
};

}  // namespace ramlab
