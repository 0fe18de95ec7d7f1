#pragma once

#include <stdexcept>

namespace vicntm {

// Bad or inconsistent configuration values (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or malformed inputs: corpora, artifacts, checkpoints (exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure during optimization (exit code 3).
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vicntm
