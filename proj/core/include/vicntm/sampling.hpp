#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vicntm/corpus.hpp"
#include "vicntm/matrix.hpp"
#include "vicntm/params.hpp"
#include "vicntm/rng.hpp"

namespace vicntm {

// Replace the t lowest-tfidf words present in each document with the
// model's count-scaled reconstruction values at those positions (the
// salient words stay as raw counts). x_recon carries row_total(x) * decoder
// probabilities and is treated as a constant: no gradient flows through
// the substituted entries. Ties in tfidf break toward the lower word index.
// Throws DataError if any row has fewer than t present words.
Matrix tfidf_positive(const Matrix& x, const Matrix& x_recon,
                      const std::vector<double>& idf, int t);
// Same, replacing the t highest-tfidf words: the negative keeps filler
// words but loses the salient ones.
Matrix tfidf_negative(const Matrix& x, const Matrix& x_recon,
                      const std::vector<double>& idf, int t);

// teacher <- decay * teacher + (1 - decay) * target, per parameter.
void ema_update(ParamStore& teacher, const ParamStore& target, double decay);

// Additive non-negative perturbation x + relu(x W + b).
struct Augmenter {
  ParamStore params;  // g.w (V x V), g.b (1 x V)
  static Augmenter init(int vocab, Rng& rng);
};
Matrix augment(const Matrix& x, const Augmenter& g);

struct AdvSamplerConfig {
  int hidden = 512;
  double ema_decay = 0.999;
  int epochs = 20;
  int average_window = 5;  // final epochs whose outputs are averaged
  int batch_size = 50;
  double lr = 1e-3;
};

struct AdvFitInfo {
  int epochs_run = 0;
  double final_target_loss = 0.0;   // mean target CE on real rows, last epoch
  double final_augment_obj = 0.0;   // mean augmenter objective, last epoch
};

// Instance-discrimination pretraining: the target classifier maps a BoW row
// to its own document index, the teacher is an EMA copy, and the augmenter
// is trained against both (fooling the target while staying recognizable
// to the teacher). Returns one averaged augmented row per training
// document, in row order; these are the precomputed adversarial positives.
Matrix adversarial_fit(const BowMatrix& train, const AdvSamplerConfig& cfg,
                       uint64_t seed, AdvFitInfo* info = nullptr);

// Archive wrapper so a fitted table can be reused across runs.
struct AdvTable {
  std::vector<std::string> ids;  // training document ids, row-aligned
  Matrix xprime;                 // rows x vocab
  uint64_t vocab_hash = 0;
  uint64_t seed = 0;
};
void save_adv_table(const AdvTable& t, const std::string& path);
AdvTable load_adv_table(const std::string& path);

}  // namespace vicntm
