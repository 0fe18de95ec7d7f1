#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vicntm/corpus.hpp"
#include "vicntm/ntm.hpp"

namespace vicntm {

// Document-level binary co-occurrence over a reference corpus. Pair counts
// are resolved lazily by intersecting per-word posting lists and cached,
// so only the pairs a topic set actually touches are ever counted.
struct CoocCounts {
  int n_docs = 0;
  std::vector<int> doc_freq;
  std::vector<std::vector<int>> postings;  // sorted doc ids per word

  int df(int w) const { return doc_freq[w]; }
  int cooc(int a, int b) const;

 private:
  mutable std::map<std::pair<int, int>, int> cache_;
};
CoocCounts count_cooc(const BowMatrix& reference);

// Mean NPMI over all word pairs inside each topic's top words, with add-eps
// smoothing (eps defaults to 1/N). A pair whose smoothed joint probability
// reaches 1 carries no signal and scores 0.
struct NpmiResult {
  double mean = 0.0;
  std::vector<double> per_topic;
};
NpmiResult npmi(const TopicSet& topics, const CoocCounts& counts, double eps = -1.0);

// Fraction of distinct words across all topic top-n lists.
double topic_diversity(const TopicSet& topics);

// Extrapolated rank-biased overlap of two equal-length rankings at their
// full depth: (X_n / n) p^n + ((1-p)/p) sum_d (X_d / d) p^d.
double rbo(const std::vector<int>& a, const std::vector<int>& b, double p = 0.9);

// 1 - mean pairwise RBO across topics; needs at least two topics.
double inverted_rbo(const TopicSet& topics, double p = 0.9);

// exp of per-token reconstruction negative log-likelihood with the
// posterior mean latent (z = softmax(mu), no sampling).
double perplexity(const NtmModel& model, const BowMatrix& heldout,
                  int batch_rows = 256);

struct MetricsReport {
  double npmi_mean = 0.0;
  std::vector<double> npmi_per_topic;
  double td = 0.0;
  double irbo = 0.0;
  double ppl = 0.0;
};

// Full report for a frozen model: topics from the decoder, NPMI against the
// reference split, diversity, IRBO, and perplexity on the held-out split.
MetricsReport evaluate_model(const NtmModel& model, const BowMatrix& reference,
                             const BowMatrix& heldout, int top_n = 10,
                             double rbo_p = 0.9);

}  // namespace vicntm
