#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vicntm/corpus.hpp"

namespace vicntm {

// Planted-topic corpus generator. Each topic owns a Zipf-weighted word
// pool; documents mix one to three topics with shared "polysemy" words, a
// common background pool, real stopwords (so preprocessing has something to
// strip), and a long tail of rare words that fall under any sensible min_df.
// Everything is a pure function of the spec, so corpora are reproducible.
struct SyntheticSpec {
  int docs = 6000;
  int topics = 25;
  int words_per_topic = 60;
  int shared_words = 200;
  int background_words = 400;
  int rare_words = 50000;
  double topic_mass = 0.55;
  double background_mass = 0.30;
  double stop_mass = 0.10;  // remainder of the unit mass goes to rare words
  double own_pool_frac = 0.8;
  double topic_skew = 0.0;  // >0: topic prevalence ~ 1/(rank+1)^skew, like real corpora
  int family_size = 0;      // >1: consecutive topics form families; the shared pool is
                            // sliced per family so related topics overlap (comp.* style)
  int len_mean = 130;
  int len_sd = 30;
  int len_min = 60;
  int len_max = 400;
  uint64_t seed = 1;

  // Small two-minute-scale corpus for end-to-end runs.
  static SyntheticSpec desk();
  // Sized so the default preprocessing filters land near a 3k vocabulary.
  static SyntheticSpec news();
  // Tiny corpus for fast unit tests.
  static SyntheticSpec toy(int docs = 200, uint64_t seed = 7);
};

std::vector<Document> synthesize_corpus(const SyntheticSpec& spec);

// One "id<TAB>tokens..." line per document.
void write_corpus(const std::vector<Document>& docs, const std::string& path);

}  // namespace vicntm
