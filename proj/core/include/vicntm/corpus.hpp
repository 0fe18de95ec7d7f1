#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vicntm/matrix.hpp"

namespace vicntm {

struct Document {
  std::string id;
  std::vector<std::string> tokens;
};

// Lowercases and splits on runs of non-alphabetic bytes; no stemming.
std::vector<std::string> tokenize(const std::string& text);

// One document per line, either "id<TAB>text" or bare text (ids are then
// doc0, doc1, ...). Blank lines are skipped.
std::vector<Document> read_documents(std::istream& in);
std::vector<Document> load_documents(const std::string& path);

std::unordered_set<std::string> load_stopwords(const std::string& path);
// The list shipped under core/data (install dir baked at configure time).
std::string default_stopwords_path();

struct Vocabulary {
  std::vector<std::string> words;                 // build order
  std::unordered_map<std::string, int> index;
  std::vector<int> doc_freq;                      // aligned with words

  int size() const { return int(words.size()); }
  // Order-sensitive hash of the word list; artifacts carry it so stale
  // pairings of model and vocabulary are detectable.
  uint64_t hash() const;
};

// Keeps words with min_df <= df <= max_df_frac * |docs|, drops stopwords
// and single-character words, orders by descending df then lexicographic.
Vocabulary build_vocabulary(const std::vector<Document>& docs, int min_df,
                            double max_df_frac,
                            const std::unordered_set<std::string>& stopwords);

// Sparse bag-of-words counts; row entries sorted by word index.
struct BowMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<std::pair<int, int>>> entries;

  long long total_count() const;
  double row_total(int r) const;
  int row_types(int r) const { return int(entries[r].size()); }
  Matrix dense_rows(const std::vector<int>& rows_idx) const;
  Matrix dense_all() const;
  BowMatrix select_rows(const std::vector<int>& idx) const;
};

struct VectorizeResult {
  BowMatrix bow;
  std::vector<std::string> kept_ids;
};

// Counts in-vocabulary tokens per document and drops documents with fewer
// than min_types distinct vocabulary words.
VectorizeResult vectorize_and_filter(const std::vector<Document>& docs,
                                     const Vocabulary& vocab, int min_types);

// idf(w) = ln(rows / df(w)) with df computed over the given matrix;
// tfidf(d, w) = count(d, w) * idf(w), sparse like the counts.
struct TfIdfStats {
  std::vector<double> idf;
  std::vector<std::vector<std::pair<int, double>>> scores;
};
TfIdfStats compute_tfidf(const BowMatrix& bow);

struct CorpusSplit {
  BowMatrix train, dev, test;
  std::vector<std::string> train_ids, dev_ids, test_ids;
  uint64_t seed = 0;
};

// Shuffles rows with the seeded generator and cuts them by the given
// ratios, sized by largest remainder so the parts differ from the exact
// ratios by at most one document.
CorpusSplit split_corpus(const BowMatrix& bow, const std::vector<std::string>& ids,
                         double train_frac, double dev_frac, double test_frac,
                         uint64_t seed);

// --- artifact io ---
void save_vocabulary(const Vocabulary& v, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);  // doc_freq not persisted

void save_bow(const BowMatrix& bow, const std::string& path);
BowMatrix load_bow(const std::string& path);

void save_id_list(const std::vector<std::string>& ids, const std::string& path);
std::vector<std::string> load_id_list(const std::string& path);

void save_idf(const std::vector<double>& idf, const std::string& path);
std::vector<double> load_idf(const std::string& path);

}  // namespace vicntm
