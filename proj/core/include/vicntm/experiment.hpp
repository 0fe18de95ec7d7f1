#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vicntm/checkpoint.hpp"
#include "vicntm/corpus.hpp"
#include "vicntm/metrics.hpp"
#include "vicntm/sampling.hpp"
#include "vicntm/variants.hpp"

namespace vicntm {

// Flat dotted-key config file: "key = value", '#' comments, blank lines
// ignored. Environment variables override file values: key a.b_c is
// overridden by VICNTM_A_B_C.
struct KeyValueConfig {
  std::map<std::string, std::string> kv;

  static KeyValueConfig load(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  // File value with environment override applied; nullopt if neither set.
  std::optional<std::string> raw(const std::string& key) const;

  std::string get_str(const std::string& key, const std::string& def) const;
  int get_int(const std::string& key, int def) const;
  uint64_t get_u64(const std::string& key, uint64_t def) const;
  double get_double(const std::string& key, double def) const;
  std::vector<uint64_t> get_u64_list(const std::string& key,
                                     const std::vector<uint64_t>& def) const;
};

std::string env_var_for_key(const std::string& key);

struct MetricsConfig {
  int top_n = 10;
  double rbo_p = 0.9;
  std::string reference = "test";  // split for NPMI co-occurrences
};

struct AdvFitConfigKeys {
  AdvSamplerConfig cfg;
  uint64_t seed = 7;
};

// Everything a run depends on, resolved and validated.
struct ExperimentConfig {
  std::string dataset = "corpus";
  std::string input_path;           // raw corpus (preprocess)
  std::string data_dir = "data";    // preprocessed artifacts
  std::string out_dir = "runs";

  int min_df = 100;
  double max_df = 0.7;
  int min_types = 30;
  std::string stopword_path;        // empty = shipped list

  double split_train = 0.48, split_dev = 0.12, split_test = 0.40;
  uint64_t split_seed = 42;

  VariantSpec variant;
  TrainConfig train;
  std::vector<uint64_t> seeds{11};
  MetricsConfig metrics;
  AdvFitConfigKeys adv;
  std::string sampler_table;        // empty = data_dir/positives.bin

  int search_trials = 12;
  uint64_t search_seed = 99;
  SearchBounds search_bounds;

  static ExperimentConfig from(const KeyValueConfig& kvc);
  void validate() const;  // throws ConfigError
};

// Canonical JSON of everything that shapes one run (sorted keys) and its
// FNV-1a hash; every artifact of the run is keyed by the hash.
std::string manifest_json(const ExperimentConfig& cfg, uint64_t seed,
                          uint64_t vocab_hash);
std::string manifest_hash_hex(const std::string& manifest);

// --- preprocessed artifact bundle ---
struct CorpusArtifacts {
  Vocabulary vocab;
  BowMatrix bow;
  std::vector<std::string> ids;
  CorpusSplit split;
};

void run_preprocess(const ExperimentConfig& cfg, std::ostream& log);
CorpusArtifacts load_artifacts(const ExperimentConfig& cfg);

// --- training / evaluation entry points (the CLI wraps these) ---
struct RunOutput {
  std::string run_dir;
  std::string manifest_hash;
  MetricsReport report;
  int best_epoch = 0;
  std::string stop_reason;
};

RunOutput run_single_train(const ExperimentConfig& cfg, uint64_t seed,
                           const CorpusArtifacts& art, const AdvTable* adv,
                           std::ostream& log);
void run_train(const ExperimentConfig& cfg, std::ostream& log);
MetricsReport run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                       std::ostream& out);
void run_export(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                const std::string& what, const std::string& split_name,
                const std::string& out_path);
void run_search(const ExperimentConfig& cfg, std::ostream& log);
void run_fit_sampler(const ExperimentConfig& cfg, std::ostream& log);

// Fixed-format float used by every CSV writer (determinism requires one
// canonical rendering).
std::string format_g(double v);

}  // namespace vicntm
