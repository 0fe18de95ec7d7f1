#include "vicntm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vicntm/errors.hpp"
#include "vicntm/rng.hpp"

namespace vicntm {

namespace {

const char* kSyllables[20] = {"ba", "ce", "di", "fo", "gu", "ha", "ki",
                              "lo", "mu", "ne", "pa", "qi", "ro", "su",
                              "ta", "ve", "wi", "xo", "yu", "za"};

// Deterministic pseudo-word from a non-negative id: base-20 syllables.
std::string word_name(long long id, int min_syllables) {
  std::string out;
  long long v = id;
  int n = 0;
  do {
    out = std::string(kSyllables[v % 20]) + out;
    v /= 20;
    ++n;
  } while (v > 0 || n < min_syllables);
  return out;
}

const char* kStops[30] = {
    "the", "and",  "of",    "to",    "in",    "that",  "for",  "have",
    "not", "this", "with",  "from",  "they",  "would", "there", "their",
    "what", "which", "when", "will", "about", "been",  "were", "said",
    "each", "other", "into", "more", "some",  "these"};

// Zipf-ish weights 1/(rank+2), cumulative for inverse sampling.
std::vector<double> zipf_cdf(int n) {
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += 1.0 / double(i + 2);
    cdf[i] = acc;
  }
  for (double& v : cdf) v /= acc;
  return cdf;
}

int sample_cdf(const std::vector<double>& cdf, Rng& rng) {
  double u = rng.uniform();
  auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  int i = int(it - cdf.begin());
  return i < int(cdf.size()) ? i : int(cdf.size()) - 1;
}

}  // namespace

SyntheticSpec SyntheticSpec::desk() {
  SyntheticSpec s;
  s.docs = 6000;
  s.topics = 50;
  s.words_per_topic = 60;
  s.shared_words = 200;
  s.background_words = 400;
  s.own_pool_frac = 0.65;
  s.family_size = 5;
  s.seed = 20260815;
  return s;
}

SyntheticSpec SyntheticSpec::news() {
  SyntheticSpec s;
  s.docs = 13000;
  s.topics = 40;
  s.words_per_topic = 90;
  s.shared_words = 450;
  s.background_words = 900;
  s.len_mean = 150;
  s.len_sd = 40;
  s.seed = 19970402;
  return s;
}

SyntheticSpec SyntheticSpec::toy(int docs, uint64_t seed) {
  SyntheticSpec s;
  s.docs = docs;
  s.topics = 5;
  s.words_per_topic = 30;
  s.shared_words = 40;
  s.background_words = 80;
  s.rare_words = 2000;
  s.len_mean = 80;
  s.len_sd = 15;
  s.len_min = 50;
  s.len_max = 160;
  s.seed = seed;
  return s;
}

std::vector<Document> synthesize_corpus(const SyntheticSpec& spec) {
  if (spec.docs < 1 || spec.topics < 2 || spec.words_per_topic < 2)
    throw ConfigError("synthetic spec: docs >= 1, topics >= 2, words_per_topic >= 2");
  double rare_mass = 1.0 - spec.topic_mass - spec.background_mass - spec.stop_mass;
  if (spec.topic_mass <= 0 || spec.background_mass < 0 || spec.stop_mass < 0 ||
      rare_mass < 0)
    throw ConfigError("synthetic spec: token masses must be a sub-unit partition");

  // Disjoint id ranges per word category keep names collision-free.
  long long topic_base = 0;
  long long shared_base = topic_base + (long long)spec.topics * spec.words_per_topic;
  long long background_base = shared_base + spec.shared_words;
  long long rare_base = background_base + spec.background_words;

  std::vector<double> pool_cdf = zipf_cdf(spec.words_per_topic);
  std::vector<double> shared_cdf = zipf_cdf(spec.shared_words);
  std::vector<double> bg_cdf = zipf_cdf(spec.background_words);
  // Families slice the shared pool so sibling topics overlap lexically.
  int n_families = 1, fam_slice = spec.shared_words;
  if (spec.family_size > 1) {
    n_families = (spec.topics + spec.family_size - 1) / spec.family_size;
    fam_slice = spec.shared_words / n_families;
    if (fam_slice < 2)
      throw ConfigError("synthetic spec: shared_words too small for the family count");
    shared_cdf = zipf_cdf(fam_slice);
  }
  std::vector<double> topic_cdf(spec.topics);
  {
    double acc = 0.0;
    for (int i = 0; i < spec.topics; ++i) {
      acc += spec.topic_skew > 0.0 ? std::pow(double(i + 1), -spec.topic_skew) : 1.0;
      topic_cdf[i] = acc;
    }
    for (double& v : topic_cdf) v /= acc;
  }

  Rng rng(spec.seed);
  std::vector<Document> docs;
  docs.reserve(spec.docs);
  for (int d = 0; d < spec.docs; ++d) {
    Document doc;
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "d%06d", d);
    doc.id = idbuf;

    // One to three planted topics with decaying weights.
    int t1 = sample_cdf(topic_cdf, rng);
    int t2 = -1, t3 = -1;
    double w1 = 1.0, w2 = 0.0, w3 = 0.0;
    if (rng.uniform() < 0.5) {
      t2 = sample_cdf(topic_cdf, rng);
      w2 = 0.5;
      if (rng.uniform() < 0.4) {
        t3 = sample_cdf(topic_cdf, rng);
        w3 = 0.25;
      }
    }
    double wsum = w1 + w2 + w3;

    double len_raw = double(spec.len_mean) + double(spec.len_sd) * rng.normal();
    int len = int(std::lround(len_raw));
    len = std::clamp(len, spec.len_min, spec.len_max);

    doc.tokens.reserve(len);
    for (int i = 0; i < len; ++i) {
      double u = rng.uniform();
      if (u < spec.topic_mass) {
        double tu = rng.uniform() * wsum;
        int topic = tu < w1 ? t1 : (tu < w1 + w2 ? t2 : t3);
        if (rng.uniform() < spec.own_pool_frac) {
          int w = sample_cdf(pool_cdf, rng);
          doc.tokens.push_back(
              word_name(topic_base + (long long)topic * spec.words_per_topic + w, 3));
        } else {
          int w = sample_cdf(shared_cdf, rng);
          long long off = spec.family_size > 1
                              ? (long long)(topic / spec.family_size) * fam_slice
                              : 0;
          doc.tokens.push_back(word_name(shared_base + off + w, 3));
        }
      } else if (u < spec.topic_mass + spec.background_mass) {
        int w = sample_cdf(bg_cdf, rng);
        doc.tokens.push_back(word_name(background_base + w, 3));
      } else if (u < spec.topic_mass + spec.background_mass + spec.stop_mass) {
        doc.tokens.push_back(kStops[rng.uniform_int(30)]);
      } else {
        int w = rng.uniform_int(spec.rare_words);
        doc.tokens.push_back(word_name(rare_base + w, 4));
      }
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus: " + path);
  for (const auto& d : docs) {
    out << d.id << '\t';
    for (size_t i = 0; i < d.tokens.size(); ++i) {
      if (i) out << ' ';
      out << d.tokens[i];
    }
    out << '\n';
  }
}

}  // namespace vicntm
