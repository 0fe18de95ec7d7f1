#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vicntm/matrix.hpp"
#include "vicntm/ntm.hpp"
#include "vicntm/optimizer.hpp"
#include "vicntm/vicreg.hpp"

namespace vicntm {

// Versioned little-endian binary archive of named tensors plus string and
// integer metadata. Doubles round-trip bit-exactly. Loads validate magic,
// version and every declared size before trusting a byte.
struct TensorArchive {
  std::vector<std::pair<std::string, Matrix>> tensors;
  std::map<std::string, std::string> strings;
  std::map<std::string, uint64_t> ints;

  void add(const std::string& name, const Matrix& m) { tensors.emplace_back(name, m); }
  const Matrix& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;

  void save(const std::string& path) const;
  static TensorArchive load(const std::string& path);
};

// A frozen training run: enough state to evaluate, export, or resume
// bit-exactly (model, optimizer moments, generator counter).
struct Checkpoint {
  NtmModel model;
  std::optional<Expander> expander;
  AdamState opt;
  uint64_t rng_seed = 0;
  uint64_t rng_counter = 0;
  int best_epoch = 0;
  std::string variant;
  std::string dataset;
  std::string manifest_hash;
  uint64_t vocab_hash = 0;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace vicntm
