#include "vicntm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vicntm/errors.hpp"
#include "vicntm/hashing.hpp"
#include "vicntm/rng.hpp"

namespace vicntm {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalpha(ch)) {
      cur.push_back(char(std::tolower(ch)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<Document> read_documents(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Document d;
    auto tab = line.find('\t');
    if (tab != std::string::npos && tab > 0) {
      d.id = line.substr(0, tab);
      d.tokens = tokenize(line.substr(tab + 1));
    } else {
      d.id = "doc" + std::to_string(n);
      d.tokens = tokenize(line);
    }
    ++n;
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> load_documents(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  return read_documents(in);
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file: " + path);
  std::unordered_set<std::string> words;
  std::string w;
  while (in >> w) words.insert(w);
  return words;
}

std::string default_stopwords_path() {
#ifdef VICNTM_DATA_DIR
  return std::string(VICNTM_DATA_DIR) + "/stopwords_en.txt";
#else
  return "stopwords_en.txt";
#endif
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& w : words) {
    for (unsigned char c : w) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  return h;
}

Vocabulary build_vocabulary(const std::vector<Document>& docs, int min_df,
                            double max_df_frac,
                            const std::unordered_set<std::string>& stopwords) {
  std::unordered_map<std::string, int> df;
  std::unordered_set<std::string> seen;
  for (const auto& d : docs) {
    seen.clear();
    for (const auto& t : d.tokens)
      if (seen.insert(t).second) ++df[t];
  }
  double max_df = max_df_frac * double(docs.size());
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [w, f] : df) {
    if (w.size() < 2) continue;
    if (stopwords.count(w)) continue;
    if (f < min_df) continue;
    if (double(f) > max_df) continue;
    kept.emplace_back(w, f);
  }
  if (kept.empty())
    throw DataError("vocabulary is empty after frequency and stopword filters");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.words.reserve(kept.size());
  v.doc_freq.reserve(kept.size());
  for (const auto& [w, f] : kept) {
    v.index.emplace(w, int(v.words.size()));
    v.words.push_back(w);
    v.doc_freq.push_back(f);
  }
  return v;
}

long long BowMatrix::total_count() const {
  long long t = 0;
  for (const auto& row : entries)
    for (const auto& [w, c] : row) t += c;
  return t;
}

double BowMatrix::row_total(int r) const {
  double t = 0;
  for (const auto& [w, c] : entries[r]) t += c;
  return t;
}

Matrix BowMatrix::dense_rows(const std::vector<int>& rows_idx) const {
  Matrix out(int(rows_idx.size()), cols);
  for (int i = 0; i < int(rows_idx.size()); ++i)
    for (const auto& [w, c] : entries[rows_idx[i]]) out(i, w) = double(c);
  return out;
}

Matrix BowMatrix::dense_all() const {
  std::vector<int> idx(rows);
  for (int i = 0; i < rows; ++i) idx[i] = i;
  return dense_rows(idx);
}

BowMatrix BowMatrix::select_rows(const std::vector<int>& idx) const {
  BowMatrix out;
  out.rows = int(idx.size());
  out.cols = cols;
  out.entries.reserve(idx.size());
  for (int i : idx) out.entries.push_back(entries[i]);
  return out;
}

VectorizeResult vectorize_and_filter(const std::vector<Document>& docs,
                                     const Vocabulary& vocab, int min_types) {
  VectorizeResult out;
  out.bow.cols = vocab.size();
  std::unordered_map<int, int> counts;
  for (const auto& d : docs) {
    counts.clear();
    for (const auto& t : d.tokens) {
      auto it = vocab.index.find(t);
      if (it != vocab.index.end()) ++counts[it->second];
    }
    if (int(counts.size()) < min_types) continue;
    std::vector<std::pair<int, int>> row(counts.begin(), counts.end());
    std::sort(row.begin(), row.end());
    out.bow.entries.push_back(std::move(row));
    out.kept_ids.push_back(d.id);
  }
  out.bow.rows = int(out.bow.entries.size());
  if (out.bow.rows == 0)
    throw DataError("no documents survive the min_types filter");
  return out;
}

TfIdfStats compute_tfidf(const BowMatrix& bow) {
  TfIdfStats s;
  std::vector<int> df(bow.cols, 0);
  for (const auto& row : bow.entries)
    for (const auto& [w, c] : row) ++df[w];
  s.idf.resize(bow.cols, 0.0);
  for (int w = 0; w < bow.cols; ++w)
    if (df[w] > 0) s.idf[w] = std::log(double(bow.rows) / double(df[w]));
  s.scores.reserve(bow.entries.size());
  for (const auto& row : bow.entries) {
    std::vector<std::pair<int, double>> srow;
    srow.reserve(row.size());
    for (const auto& [w, c] : row) srow.emplace_back(w, double(c) * s.idf[w]);
    s.scores.push_back(std::move(srow));
  }
  return s;
}

CorpusSplit split_corpus(const BowMatrix& bow, const std::vector<std::string>& ids,
                         double train_frac, double dev_frac, double test_frac,
                         uint64_t seed) {
  if (int(ids.size()) != bow.rows)
    throw DataError("split: id list does not match row count");
  if (train_frac <= 0 || dev_frac <= 0 || test_frac <= 0)
    throw ConfigError("split ratios must all be positive");
  double sum = train_frac + dev_frac + test_frac;
  if (std::fabs(sum - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");

  int n = bow.rows;
  double fr[3] = {train_frac, dev_frac, test_frac};
  int sizes[3];
  double fparts[3];
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double exact = fr[i] * n;
    sizes[i] = int(std::floor(exact));
    fparts[i] = exact - sizes[i];
    assigned += sizes[i];
  }
  int order[3] = {0, 1, 2};
  std::sort(order, order + 3, [&](int a, int b) {
    if (fparts[a] != fparts[b]) return fparts[a] > fparts[b];
    return a < b;
  });
  for (int i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % 3]];

  Rng rng(seed);
  std::vector<int> perm = rng.permutation(n);
  CorpusSplit out;
  out.seed = seed;
  auto take = [&](int begin, int count, BowMatrix& m, std::vector<std::string>& part_ids) {
    std::vector<int> idx(perm.begin() + begin, perm.begin() + begin + count);
    m = bow.select_rows(idx);
    part_ids.reserve(count);
    for (int i : idx) part_ids.push_back(ids[i]);
  };
  take(0, sizes[0], out.train, out.train_ids);
  take(sizes[0], sizes[1], out.dev, out.dev_ids);
  take(sizes[0] + sizes[1], sizes[2], out.test, out.test_ids);
  return out;
}

void save_vocabulary(const Vocabulary& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary: " + path);
  for (const auto& w : v.words) out << w << '\n';
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary: " + path);
  Vocabulary v;
  std::string w;
  while (std::getline(in, w)) {
    if (w.empty()) continue;
    v.index.emplace(w, int(v.words.size()));
    v.words.push_back(w);
  }
  v.doc_freq.assign(v.words.size(), 0);
  if (v.words.empty()) throw DataError("vocabulary file is empty: " + path);
  return v;
}

void save_bow(const BowMatrix& bow, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write bow matrix: " + path);
  long long nnz = 0;
  for (const auto& row : bow.entries) nnz += (long long)row.size();
  out << "% " << bow.rows << ' ' << bow.cols << ' ' << nnz << '\n';
  for (int r = 0; r < bow.rows; ++r)
    for (const auto& [w, c] : bow.entries[r])
      out << r << ' ' << w << ' ' << c << '\n';
}

BowMatrix load_bow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open bow matrix: " + path);
  std::string header;
  if (!std::getline(in, header) || header.empty() || header[0] != '%')
    throw DataError("bow file missing '%' header: " + path);
  std::istringstream hs(header.substr(1));
  BowMatrix bow;
  long long nnz = 0;
  if (!(hs >> bow.rows >> bow.cols >> nnz) || bow.rows < 0 || bow.cols < 0)
    throw DataError("bow file has a malformed header: " + path);
  bow.entries.resize(bow.rows);
  int r, w, c;
  long long read = 0;
  while (in >> r >> w >> c) {
    if (r < 0 || r >= bow.rows || w < 0 || w >= bow.cols || c <= 0)
      throw DataError("bow file has an out-of-range triplet: " + path);
    bow.entries[r].emplace_back(w, c);
    ++read;
  }
  if (read != nnz) throw DataError("bow file triplet count does not match header: " + path);
  for (auto& row : bow.entries) std::sort(row.begin(), row.end());
  return bow;
}

void save_id_list(const std::vector<std::string>& ids, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write id list: " + path);
  for (const auto& id : ids) out << id << '\n';
}

std::vector<std::string> load_id_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open id list: " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ids.push_back(line);
  return ids;
}

void save_idf(const std::vector<double>& idf, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write idf cache: " + path);
  char buf[64];
  for (double v : idf) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << '\n';
  }
}

std::vector<double> load_idf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open idf cache: " + path);
  std::vector<double> idf;
  double v;
  while (in >> v) idf.push_back(v);
  return idf;
}

}  // namespace vicntm
