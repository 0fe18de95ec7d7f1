#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include "vicntm/params.hpp"

namespace vicntm {

struct AdamConfig {
  double lr = 0.002;
  double beta1 = 0.99;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates keyed by parameter name, plus the shared
// step counter used for bias correction.
struct AdamState {
  AdamConfig cfg;
  int64_t step = 0;
  std::unordered_map<std::string, Matrix> m;
  std::unordered_map<std::string, Matrix> v;
};

// One bias-corrected Adam update over every parameter in the store.
// Throws TrainError naming the parameter if any gradient is non-finite.
void adam_step(ParamStore& params, AdamState& state);

// Same update over several stores under a single step counter (parameter
// names must be globally unique across the stores).
void adam_step(const std::vector<ParamStore*>& stores, AdamState& state);

}  // namespace vicntm
