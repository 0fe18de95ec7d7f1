#include "vicntm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "vicntm/errors.hpp"

namespace vicntm {

CoocCounts count_cooc(const BowMatrix& reference) {
  if (reference.rows == 0) throw DataError("co-occurrence: empty reference corpus");
  CoocCounts c;
  c.n_docs = reference.rows;
  c.doc_freq.assign(reference.cols, 0);
  c.postings.assign(reference.cols, {});
  for (int r = 0; r < reference.rows; ++r)
    for (const auto& [w, cnt] : reference.entries[r]) {
      ++c.doc_freq[w];
      c.postings[w].push_back(r);  // rows ascend, so postings stay sorted
    }
  return c;
}

int CoocCounts::cooc(int a, int b) const {
  if (a == b) return doc_freq[a];
  if (a > b) std::swap(a, b);
  auto key = std::make_pair(a, b);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const auto& pa = postings[a];
  const auto& pb = postings[b];
  int n = 0;
  size_t i = 0, j = 0;
  while (i < pa.size() && j < pb.size()) {
    if (pa[i] == pb[j]) {
      ++n;
      ++i;
      ++j;
    } else if (pa[i] < pb[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  cache_.emplace(key, n);
  return n;
}

NpmiResult npmi(const TopicSet& topics, const CoocCounts& counts, double eps) {
  if (counts.n_docs < 1) throw DataError("npmi: empty reference");
  double N = double(counts.n_docs);
  if (eps < 0.0) eps = 1.0 / N;
  NpmiResult out;
  out.per_topic.reserve(topics.topics.size());
  for (const auto& words : topics.topics) {
    int n = int(words.size());
    if (n < 2) throw std::invalid_argument("npmi: topics need at least 2 words");
    double acc = 0.0;
    int pairs = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double pi = (counts.df(words[i]) + eps) / N;
        double pj = (counts.df(words[j]) + eps) / N;
        double pij = (counts.cooc(words[i], words[j]) + eps) / N;
        double v;
        if (pij >= 1.0) {
          v = 0.0;  // joint saturates the corpus: no information either way
        } else {
          v = std::log(pij / (pi * pj)) / (-std::log(pij));
        }
        acc += v;
        ++pairs;
      }
    out.per_topic.push_back(acc / pairs);
  }
  double m = 0.0;
  for (double v : out.per_topic) m += v;
  out.mean = out.per_topic.empty() ? 0.0 : m / double(out.per_topic.size());
  return out;
}

double topic_diversity(const TopicSet& topics) {
  if (topics.topics.empty()) throw std::invalid_argument("topic_diversity: no topics");
  std::set<int> uniq;
  size_t total = 0;
  for (const auto& t : topics.topics) {
    uniq.insert(t.begin(), t.end());
    total += t.size();
  }
  return double(uniq.size()) / double(total);
}

double rbo(const std::vector<int>& a, const std::vector<int>& b, double p) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("rbo: rankings must be equal-length and non-empty");
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("rbo: need 0 < p < 1");
  int n = int(a.size());
  std::set<int> sa, sb;
  double sum = 0.0;
  int overlap = 0;
  double pd = 1.0;
  for (int d = 1; d <= n; ++d) {
    int xa = a[d - 1], xb = b[d - 1];
    if (xa == xb) {
      ++overlap;
    } else {
      if (sb.count(xa)) ++overlap;
      if (sa.count(xb)) ++overlap;
      sa.insert(xa);
      sb.insert(xb);
    }
    pd *= p;  // p^d
    sum += double(overlap) / double(d) * pd;
  }
  double xn_over_n = double(overlap) / double(n);
  return xn_over_n * pd + (1.0 - p) / p * sum;
}

double inverted_rbo(const TopicSet& topics, double p) {
  int k = int(topics.topics.size());
  if (k < 2) throw std::invalid_argument("inverted_rbo: need at least two topics");
  double acc = 0.0;
  int pairs = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      acc += rbo(topics.topics[i], topics.topics[j], p);
      ++pairs;
    }
  return 1.0 - acc / double(pairs);
}

double perplexity(const NtmModel& model, const BowMatrix& heldout, int batch_rows) {
  if (heldout.rows == 0) throw DataError("perplexity: empty held-out corpus");
  double nll = 0.0;
  double tokens = 0.0;
  for (int start = 0; start < heldout.rows; start += batch_rows) {
    int end = std::min(heldout.rows, start + batch_rows);
    std::vector<int> rows;
    rows.reserve(end - start);
    for (int r = start; r < end; ++r) rows.push_back(r);
    Matrix x = heldout.dense_rows(rows);
    Matrix mu, logvar;
    encode_eval(model, x, mu, logvar);
    Matrix z = softmax_rows(mu);  // posterior mean, no sampling
    Matrix xp = decode_eval(model, z);
    nll += recon_loss(x, xp, model.cfg.recon_log_floor);
    for (double v : x.data) tokens += v;
  }
  if (tokens <= 0.0) throw DataError("perplexity: held-out corpus has no tokens");
  return std::exp(nll / tokens);
}

MetricsReport evaluate_model(const NtmModel& model, const BowMatrix& reference,
                             const BowMatrix& heldout, int top_n, double rbo_p) {
  MetricsReport r;
  TopicSet topics = top_words(model.params.at("dec.beta"), top_n);
  CoocCounts counts = count_cooc(reference);
  NpmiResult np = npmi(topics, counts);
  r.npmi_mean = np.mean;
  r.npmi_per_topic = std::move(np.per_topic);
  r.td = topic_diversity(topics);
  r.irbo = inverted_rbo(topics, rbo_p);
  r.ppl = perplexity(model, heldout);
  return r;
}

}  // namespace vicntm
