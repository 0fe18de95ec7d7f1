#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vicntm/corpus.hpp"
#include "vicntm/metrics.hpp"
#include "vicntm/ntm.hpp"
#include "vicntm/optimizer.hpp"
#include "vicntm/sampling.hpp"
#include "vicntm/vicreg.hpp"

namespace vicntm {

enum class VariantKind {
  Scholar,      // plain VAE topic model
  ProdLda,      // same, background zeroed
  Clntm,        // contrastive term on latents
  Vicntm,       // variance-invariance-covariance on latents
  DeepVicntm,   // same, in expander space
  VcClntm,      // contrastive + variance/covariance (no invariance)
  DeepVcClntm,  // contrastive on latents, VC in expander space
  VicClntm,     // full VIC + cosine push-away from the negative
};

VariantKind parse_variant(const std::string& name);  // throws ConfigError
std::string variant_name(VariantKind k);

enum class SamplerKind { Tfidf, Adversarial };
SamplerKind parse_sampler(const std::string& name);
std::string sampler_name(SamplerKind k);

struct VariantSpec {
  VariantKind kind = VariantKind::Scholar;
  VicWeights vic;
  int expander_dim = 0;  // 0 = default 4k, resolved at train time
  double contrastive_weight = 1.0;
  double temperature = 0.5;
  SamplerKind sampler = SamplerKind::Tfidf;
  int t = 5;  // words replaced per document

  // Structural reductions: a branch that cannot contribute is never built,
  // so e.g. VICNTM with all-zero weights consumes the same random stream as
  // SCHOLAR and their trajectories match bitwise.
  bool uses_vic() const;
  bool uses_contrast() const;
  bool uses_cosine_penalty() const;
  bool needs_positives() const { return uses_vic() || uses_contrast(); }
  bool needs_negatives() const { return uses_contrast() || uses_cosine_penalty(); }
  bool needs_expander() const {
    return kind == VariantKind::DeepVicntm || kind == VariantKind::DeepVcClntm;
  }
  bool deep_vic() const { return needs_expander(); }
};

struct TrainConfig {
  int k = 50;
  int hidden = 300;
  int batch_size = 50;
  int max_epochs = 200;
  int patience = 30;
  AdamConfig adam;
  double alpha = 0.0;  // 0 = default_alpha(k)
  int bn_anneal_epochs = 100;
  double background_smoothing = 1.0;
  bool zero_background = false;  // ProdLDA mode
  int val_top_n = 10;            // words per topic for validation NPMI
  double log_floor = 1e-10;
};

struct EpochRow {
  int epoch = 0;
  double recon = 0, kl = 0, inv = 0, var = 0, cov = 0;
  double contrast = 0, cos_pen = 0;
  double total = 0;
  double val_npmi = 0;
};

struct TrainHistory {
  std::vector<EpochRow> rows;
  int best_epoch = 0;
  double best_val_npmi = 0.0;
  std::string stop_reason;  // "patience" or "max_epochs"
};

struct TrainState {
  NtmModel model;
  std::optional<Expander> expander;
};

struct TrainResult {
  TrainState state;  // parameters of the best-validation epoch
  TrainHistory history;
  AdamState opt;
  uint64_t rng_seed = 0;
  uint64_t rng_counter = 0;
};

// --- single-batch loss composition ---
// Positives/negatives are produced by callbacks that receive the anchor's
// count-scaled reconstruction (detached): the tfidf path regenerates from
// the live decoder output, the adversarial path ignores the argument and
// serves precomputed rows. Callbacks absent => that branch must be inactive.
struct SampleProvider {
  std::function<Matrix(const Matrix& recon_counts)> positives;
  std::function<Matrix(const Matrix& recon_counts)> negatives;
};

struct LossBreakdown {
  double recon = 0, kl = 0, inv = 0, var = 0, cov = 0;
  double contrast = 0, cos_pen = 0;
  double total = 0;
};

struct LossNodes {
  Tape::Id total = -1;
  LossBreakdown values;
  // Copies the tape gradients into the model (and expander) stores; call
  // after tape.backward(total).
  std::function<void()> write_grads;
  // Encoder/decoder batch moments recorded during the forward pass, for
  // folding into the running statistics after the step.
  std::vector<NtmGraph::LayerStats> bn_stats;
};

// Builds the full objective for one batch on the given tape. Noise matrices
// are drawn by the caller (anchor always; positive/negative only when the
// variant needs those branches).
LossNodes total_loss(Tape& tape, const VariantSpec& spec, TrainState& state,
                     const Matrix& x, const Matrix& noise_anchor,
                     const Matrix* noise_pos, const Matrix* noise_neg,
                     const SampleProvider& provider);

// Mean cosine similarity between matched rows (used by the VIC-CLNTM
// penalty); exposed for tests.
double mean_row_cosine(const Matrix& a, const Matrix& b);

// Full training loop: shuffled minibatches, Adam, decoder batchnorm
// annealing, per-epoch validation NPMI with early stopping on patience,
// best-epoch parameter retention. adv_table must be non-null iff `spec`
// selects the adversarial sampler and the variant needs positives.
TrainResult train(const VariantSpec& spec, const CorpusSplit& split,
                  const TrainConfig& cfg, uint64_t seed,
                  const AdvTable* adv_table = nullptr);

// --- random search over the regularizer grid ---
struct SearchBounds {
  double lambda_lo = 1.25, lambda_hi = 500.0;
  double mu_lo = 1.25, mu_hi = 500.0;
  double nu_lo = 0.05, nu_hi = 20.0;
  int t_lo = 1, t_hi = 15;
  // expander dim sampled in [k, 16k] when the variant uses one
};

struct TrialResult {
  VariantSpec spec;
  double val_npmi = 0.0;
  int best_epoch = 0;
};

struct SearchResult {
  VariantSpec best;
  double best_val_npmi = 0.0;
  std::vector<TrialResult> log;
};

SearchResult random_search(const VariantSpec& base, const CorpusSplit& split,
                           const TrainConfig& cfg, int trials,
                           const SearchBounds& bounds, uint64_t seed,
                           const AdvTable* adv_table = nullptr);

}  // namespace vicntm
