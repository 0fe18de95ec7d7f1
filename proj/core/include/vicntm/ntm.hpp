#pragma once

#include <string>
#include <vector>

#include "vicntm/autodiff.hpp"
#include "vicntm/corpus.hpp"
#include "vicntm/matrix.hpp"
#include "vicntm/params.hpp"
#include "vicntm/rng.hpp"

namespace vicntm {

// Laplace approximation to a symmetric Dirichlet(alpha) in softmax basis:
// zero mean, variance (1 - 1/k) / alpha in every coordinate.
struct PriorParams {
  Matrix mean;      // 1 x k
  Matrix variance;  // 1 x k
  double alpha = 0.0;
};
PriorParams logistic_normal_prior(int k, double alpha);
// Default concentration scales with the topic count: 0.01 * (50 / k).
double default_alpha(int k);

struct NtmConfig {
  int vocab = 0;
  int k = 50;
  int hidden = 300;
  double recon_log_floor = 1e-10;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
};

// Encoder MLP with weight-tied trunk and batchnormed mean / log-variance
// heads, plus a linear decoder over a frozen log-frequency background.
// bn_mix is the decoder batchnorm annealing coefficient (1 = full
// batchnorm, 0 = raw logits); the trainer moves it and it travels with the
// frozen model so eval decodes match training.
struct NtmModel {
  NtmConfig cfg;
  ParamStore params;  // enc.w1 enc.b1 enc.mu.{w,b,bn.scale,bn.shift}
                      // enc.lv.{w,b,bn.scale,bn.shift} dec.beta
                      // dec.bn.scale dec.bn.shift
  Matrix background;  // 1 x V, not trained
  BnStats mu_bn, lv_bn, dec_bn;
  PriorParams prior;
  double bn_mix = 1.0;

  static NtmModel init(const NtmConfig& cfg, const PriorParams& prior,
                       const Matrix& background, Rng& rng);
};

// Log-frequency background d_w = ln((count_w + s) / sum_v (count_v + s)).
Matrix compute_background(const BowMatrix& train, double smoothing);

// --- eval-mode forward (running batchnorm statistics, no tape) ---
void encode_eval(const NtmModel& m, const Matrix& x, Matrix& mu, Matrix& logvar);
Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& noise);
Matrix decode_eval(const NtmModel& m, const Matrix& z);

// --- plain losses (shared with tests and perplexity) ---
double recon_loss(const Matrix& x, const Matrix& xprime, double log_floor = 1e-10);
double kl_loss(const Matrix& mu, const Matrix& logvar, const PriorParams& prior);

// Ranked top-n word indices per topic, ties broken toward the lower index.
struct TopicSet {
  std::vector<std::vector<int>> topics;
  int n = 0;  // words per topic
  std::vector<std::vector<std::string>> to_strings(const Vocabulary& v) const;
};
TopicSet top_words(const Matrix& beta, int n);

// --- training-mode graph over one minibatch ---
// Binds the model parameters onto the tape lazily and records decoder /
// encoder batch statistics so the trainer can fold them into the running
// stats after the step.
class NtmGraph {
 public:
  struct Enc {
    Tape::Id mu = -1;
    Tape::Id logvar = -1;
  };
  struct LayerStats {
    std::string layer;  // "mu", "lv", "dec"
    Matrix mean, var;
    int batch_rows = 0;
  };

  NtmGraph(Tape& tape, NtmModel& model);

  Enc encode(Tape::Id x);
  Tape::Id reparameterize(const Enc& e, const Matrix& noise);
  Tape::Id topics(Tape::Id r);  // softmax over the latent
  Tape::Id decode(Tape::Id z);  // uses model.bn_mix
  Tape::Id recon_loss(Tape::Id xprime, const Matrix& x);
  Tape::Id kl_loss(const Enc& e);

  void write_grads() { bound_.write_grads(); }
  const std::vector<LayerStats>& batch_stats() const { return stats_; }
  Tape& tape() { return *tape_; }

 private:
  Tape* tape_;
  NtmModel* model_;
  BoundParams bound_;
  std::vector<LayerStats> stats_;
};

}  // namespace vicntm
