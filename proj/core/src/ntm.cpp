#include "vicntm/ntm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vicntm/errors.hpp"

namespace vicntm {

double default_alpha(int k) { return 0.01 * (50.0 / double(k)); }

PriorParams logistic_normal_prior(int k, double alpha) {
  if (k < 2) throw std::invalid_argument("prior needs k >= 2");
  if (alpha <= 0) throw std::invalid_argument("prior needs alpha > 0");
  PriorParams p;
  p.alpha = alpha;
  p.mean = Matrix::zeros(1, k);
  p.variance = Matrix::full(1, k, (1.0 - 1.0 / double(k)) / alpha);
  return p;
}

namespace {
Matrix xavier(int in, int out, Rng& rng) {
  double limit = std::sqrt(6.0 / double(in + out));
  Matrix w(in, out);
  for (double& v : w.data) v = rng.uniform(-limit, limit);
  return w;
}
}  // namespace

NtmModel NtmModel::init(const NtmConfig& cfg, const PriorParams& prior,
                        const Matrix& background, Rng& rng) {
  if (cfg.vocab < 1 || cfg.k < 2 || cfg.hidden < 1)
    throw std::invalid_argument("ntm config: vocab >= 1, k >= 2, hidden >= 1");
  if (background.rows != 1 || background.cols != cfg.vocab)
    throw std::invalid_argument("ntm init: background must be 1 x vocab");
  if (prior.mean.cols != cfg.k)
    throw std::invalid_argument("ntm init: prior dimension != k");
  NtmModel m;
  m.cfg = cfg;
  m.prior = prior;
  m.background = background;
  m.params.add("enc.w1", xavier(cfg.vocab, cfg.hidden, rng));
  m.params.add("enc.b1", Matrix::zeros(1, cfg.hidden));
  m.params.add("enc.mu.w", xavier(cfg.hidden, cfg.k, rng));
  m.params.add("enc.mu.b", Matrix::zeros(1, cfg.k));
  m.params.add("enc.lv.w", xavier(cfg.hidden, cfg.k, rng));
  m.params.add("enc.lv.b", Matrix::zeros(1, cfg.k));
  m.params.add("enc.mu.bn.scale", Matrix::full(1, cfg.k, 1.0));
  m.params.add("enc.mu.bn.shift", Matrix::zeros(1, cfg.k));
  m.params.add("enc.lv.bn.scale", Matrix::full(1, cfg.k, 1.0));
  m.params.add("enc.lv.bn.shift", Matrix::zeros(1, cfg.k));
  m.params.add("dec.beta", xavier(cfg.k, cfg.vocab, rng));
  m.params.add("dec.bn.scale", Matrix::full(1, cfg.vocab, 1.0));
  m.params.add("dec.bn.shift", Matrix::zeros(1, cfg.vocab));
  m.mu_bn = BnStats::fresh(cfg.k);
  m.lv_bn = BnStats::fresh(cfg.k);
  m.dec_bn = BnStats::fresh(cfg.vocab);
  return m;
}

Matrix compute_background(const BowMatrix& train, double smoothing) {
  if (train.rows == 0) throw DataError("background: empty training matrix");
  std::vector<double> counts(train.cols, 0.0);
  for (const auto& row : train.entries)
    for (const auto& [w, c] : row) counts[w] += double(c);
  double total = 0.0;
  for (double& c : counts) {
    c += smoothing;
    if (c <= 0.0)
      throw DataError("background: zero column count; raise the smoothing");
    total += c;
  }
  Matrix d(1, train.cols);
  for (int w = 0; w < train.cols; ++w) d(0, w) = std::log(counts[w] / total);
  return d;
}

void encode_eval(const NtmModel& m, const Matrix& x, Matrix& mu, Matrix& logvar) {
  Matrix h = affine(x, m.params.at("enc.w1"), m.params.at("enc.b1"));
  for (double& v : h.data) v = v > 0.0 ? v : 0.0;
  Matrix mu_raw = affine(h, m.params.at("enc.mu.w"), m.params.at("enc.mu.b"));
  Matrix lv_raw = affine(h, m.params.at("enc.lv.w"), m.params.at("enc.lv.b"));
  BnStats mu_stats = m.mu_bn, lv_stats = m.lv_bn;  // eval: no update
  mu = batchnorm(mu_raw, m.params.at("enc.mu.bn.scale"), m.params.at("enc.mu.bn.shift"),
                 false, mu_stats, m.cfg.bn_eps, m.cfg.bn_momentum);
  logvar = batchnorm(lv_raw, m.params.at("enc.lv.bn.scale"), m.params.at("enc.lv.bn.shift"),
                     false, lv_stats, m.cfg.bn_eps, m.cfg.bn_momentum);
}

Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& noise) {
  if (!mu.same_shape(logvar) || !mu.same_shape(noise))
    throw std::invalid_argument("reparameterize: mu/logvar/noise shapes differ");
  Matrix r = mu;
  for (size_t i = 0; i < r.data.size(); ++i)
    r.data[i] += std::exp(0.5 * logvar.data[i]) * noise.data[i];
  return r;
}

Matrix decode_eval(const NtmModel& m, const Matrix& z) {
  Matrix eta = matmul(z, m.params.at("dec.beta"));
  double a = m.bn_mix;
  Matrix logits;
  if (a > 0.0) {
    BnStats st = m.dec_bn;
    Matrix bn = batchnorm(eta, m.params.at("dec.bn.scale"), m.params.at("dec.bn.shift"),
                          false, st, m.cfg.bn_eps, m.cfg.bn_momentum);
    logits = Matrix(eta.rows, eta.cols);
    for (size_t i = 0; i < logits.data.size(); ++i)
      logits.data[i] = a * bn.data[i] + (1.0 - a) * eta.data[i];
  } else {
    logits = eta;
  }
  for (int r = 0; r < logits.rows; ++r)
    for (int c = 0; c < logits.cols; ++c) logits(r, c) += m.background(0, c);
  return softmax_rows(logits);
}

double recon_loss(const Matrix& x, const Matrix& xprime, double log_floor) {
  if (!x.same_shape(xprime))
    throw std::invalid_argument("recon_loss: shape mismatch");
  double loss = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    double p = xprime.data[i] > log_floor ? xprime.data[i] : log_floor;
    loss -= x.data[i] * std::log(p);
  }
  return loss;
}

double kl_loss(const Matrix& mu, const Matrix& logvar, const PriorParams& prior) {
  if (!mu.same_shape(logvar))
    throw std::invalid_argument("kl_loss: shape mismatch");
  if (mu.cols != prior.mean.cols)
    throw std::invalid_argument("kl_loss: prior dimension mismatch");
  double kl = 0.0;
  for (int r = 0; r < mu.rows; ++r)
    for (int c = 0; c < mu.cols; ++c) {
      double pv = prior.variance(0, c);
      double pm = prior.mean(0, c);
      double lv = logvar(r, c);
      double dm = mu(r, c) - pm;
      kl += 0.5 * (std::log(pv) - lv + (std::exp(lv) + dm * dm) / pv - 1.0);
    }
  return kl;
}

TopicSet top_words(const Matrix& beta, int n) {
  if (n < 1 || n > beta.cols)
    throw std::invalid_argument("top_words: need 1 <= n <= vocab");
  TopicSet ts;
  ts.n = n;
  ts.topics.resize(beta.rows);
  std::vector<int> idx(beta.cols);
  for (int t = 0; t < beta.rows; ++t) {
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + n, idx.end(), [&](int a, int b) {
      if (beta(t, a) != beta(t, b)) return beta(t, a) > beta(t, b);
      return a < b;
    });
    ts.topics[t].assign(idx.begin(), idx.begin() + n);
  }
  return ts;
}

std::vector<std::vector<std::string>> TopicSet::to_strings(const Vocabulary& v) const {
  std::vector<std::vector<std::string>> out;
  out.reserve(topics.size());
  for (const auto& t : topics) {
    std::vector<std::string> row;
    row.reserve(t.size());
    for (int w : t) row.push_back(v.words.at(w));
    out.push_back(std::move(row));
  }
  return out;
}

NtmGraph::NtmGraph(Tape& tape, NtmModel& model)
    : tape_(&tape), model_(&model), bound_(tape, model.params) {}

NtmGraph::Enc NtmGraph::encode(Tape::Id x) {
  Tape& t = *tape_;
  Tape::Id h = t.relu(t.add_row(t.matmul(x, bound_("enc.w1")), bound_("enc.b1")));
  Tape::Id mu_raw = t.add_row(t.matmul(h, bound_("enc.mu.w")), bound_("enc.mu.b"));
  Tape::Id lv_raw = t.add_row(t.matmul(h, bound_("enc.lv.w")), bound_("enc.lv.b"));
  LayerStats mu_s{"mu", {}, {}, t.value(mu_raw).rows};
  LayerStats lv_s{"lv", {}, {}, t.value(lv_raw).rows};
  Enc e;
  e.mu = t.batchnorm(mu_raw, bound_("enc.mu.bn.scale"), bound_("enc.mu.bn.shift"),
                     model_->cfg.bn_eps, &mu_s.mean, &mu_s.var);
  e.logvar = t.batchnorm(lv_raw, bound_("enc.lv.bn.scale"), bound_("enc.lv.bn.shift"),
                         model_->cfg.bn_eps, &lv_s.mean, &lv_s.var);
  stats_.push_back(std::move(mu_s));
  stats_.push_back(std::move(lv_s));
  return e;
}

Tape::Id NtmGraph::reparameterize(const Enc& e, const Matrix& noise) {
  Tape& t = *tape_;
  Tape::Id sd = t.exp(t.scale(e.logvar, 0.5));
  return t.add(e.mu, t.mul(sd, t.constant(noise)));
}

Tape::Id NtmGraph::topics(Tape::Id r) { return tape_->softmax_rows(r); }

Tape::Id NtmGraph::decode(Tape::Id z) {
  Tape& t = *tape_;
  Tape::Id eta = t.matmul(z, bound_("dec.beta"));
  double a = model_->bn_mix;
  Tape::Id logits;
  if (a > 0.0) {
    LayerStats dec_s{"dec", {}, {}, t.value(eta).rows};
    Tape::Id bn = t.batchnorm(eta, bound_("dec.bn.scale"), bound_("dec.bn.shift"),
                              model_->cfg.bn_eps, &dec_s.mean, &dec_s.var);
    stats_.push_back(std::move(dec_s));
    logits = t.add(t.scale(bn, a), t.scale(eta, 1.0 - a));
  } else {
    logits = eta;
  }
  logits = t.add_row(logits, t.constant(model_->background));
  return t.softmax_rows(logits);
}

Tape::Id NtmGraph::recon_loss(Tape::Id xprime, const Matrix& x) {
  Tape& t = *tape_;
  Tape::Id lp = t.log_clamped(xprime, model_->cfg.recon_log_floor);
  return t.scale(t.sum_all(t.mul(t.constant(x), lp)), -1.0);
}

Tape::Id NtmGraph::kl_loss(const Enc& e) {
  Tape& t = *tape_;
  const PriorParams& prior = model_->prior;
  int n = t.value(e.mu).rows;
  int k = t.value(e.mu).cols;
  Matrix inv_pv(1, k);
  double const_term = 0.0;  // n/2 * sum_j (ln pv_j - 1)
  for (int c = 0; c < k; ++c) {
    inv_pv(0, c) = 1.0 / prior.variance(0, c);
    const_term += std::log(prior.variance(0, c)) - 1.0;
  }
  const_term *= 0.5 * double(n);
  Tape::Id dm = t.sub_row(e.mu, t.constant(prior.mean));
  Tape::Id quad = t.mul_row(t.add(t.exp(e.logvar), t.square(dm)), t.constant(inv_pv));
  Tape::Id sum_q = t.sum_all(quad);
  Tape::Id sum_lv = t.sum_all(e.logvar);
  Tape::Id kl = t.add(t.scale(sum_q, 0.5), t.scale(sum_lv, -0.5));
  return t.add_scalar(kl, const_term);
}

}  // namespace vicntm
