#include "vicntm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vicntm/autodiff.hpp"
#include "vicntm/checkpoint.hpp"
#include "vicntm/errors.hpp"
#include "vicntm/optimizer.hpp"

namespace vicntm {

namespace {

// Shared core: pick the t present words ranked by tfidf (ascending for
// positives, descending for negatives) and swap in reconstruction values.
Matrix replace_ranked(const Matrix& x, const Matrix& x_recon,
                      const std::vector<double>& idf, int t, bool lowest) {
  if (!x.same_shape(x_recon))
    throw std::invalid_argument("sampler: x and x_recon shapes differ");
  if (int(idf.size()) != x.cols)
    throw std::invalid_argument("sampler: idf length != vocab");
  if (t < 1) throw std::invalid_argument("sampler: t must be >= 1");
  Matrix out = x;
  std::vector<std::pair<double, int>> present;
  for (int r = 0; r < x.rows; ++r) {
    present.clear();
    for (int c = 0; c < x.cols; ++c)
      if (x(r, c) > 0.0) present.emplace_back(x(r, c) * idf[c], c);
    if (int(present.size()) < t) {
      std::ostringstream msg;
      msg << "sampler: row " << r << " has " << present.size()
          << " present words, fewer than t=" << t;
      throw DataError(msg.str());
    }
    auto cmp = [lowest](const std::pair<double, int>& a, const std::pair<double, int>& b) {
      if (a.first != b.first) return lowest ? a.first < b.first : a.first > b.first;
      return a.second < b.second;
    };
    std::partial_sort(present.begin(), present.begin() + t, present.end(), cmp);
    for (int i = 0; i < t; ++i) {
      int c = present[i].second;
      out(r, c) = x_recon(r, c);
    }
  }
  return out;
}

}  // namespace

Matrix tfidf_positive(const Matrix& x, const Matrix& x_recon,
                      const std::vector<double>& idf, int t) {
  return replace_ranked(x, x_recon, idf, t, /*lowest=*/true);
}

Matrix tfidf_negative(const Matrix& x, const Matrix& x_recon,
                      const std::vector<double>& idf, int t) {
  return replace_ranked(x, x_recon, idf, t, /*lowest=*/false);
}

void ema_update(ParamStore& teacher, const ParamStore& target, double decay) {
  if (decay < 0.0 || decay > 1.0)
    throw std::invalid_argument("ema_update: decay must lie in [0, 1]");
  if (teacher.names != target.names)
    throw std::invalid_argument("ema_update: parameter sets differ");
  for (const auto& name : teacher.names) {
    Matrix& tm = teacher.at(name);
    const Matrix& sm = target.at(name);
    for (size_t i = 0; i < tm.data.size(); ++i)
      tm.data[i] = decay * tm.data[i] + (1.0 - decay) * sm.data[i];
  }
}

Augmenter Augmenter::init(int vocab, Rng& rng) {
  Augmenter g;
  double limit = std::sqrt(6.0 / double(2 * vocab));
  Matrix w(vocab, vocab);
  for (double& v : w.data) v = rng.uniform(-limit, limit);
  g.params.add("g.w", std::move(w));
  g.params.add("g.b", Matrix::zeros(1, vocab));
  return g;
}

Matrix augment(const Matrix& x, const Augmenter& g) {
  Matrix h = affine(x, g.params.at("g.w"), g.params.at("g.b"));
  Matrix out = x;
  for (size_t i = 0; i < h.data.size(); ++i)
    if (h.data[i] > 0.0) out.data[i] += h.data[i];
  return out;
}

namespace {

struct Classifier {
  ParamStore params;  // c.w1 c.b1 c.w2 c.b2
  static Classifier init(int vocab, int hidden, int classes, Rng& rng) {
    Classifier c;
    auto xavier = [&rng](int in, int out) {
      double limit = std::sqrt(6.0 / double(in + out));
      Matrix w(in, out);
      for (double& v : w.data) v = rng.uniform(-limit, limit);
      return w;
    };
    c.params.add("c.w1", xavier(vocab, hidden));
    c.params.add("c.b1", Matrix::zeros(1, hidden));
    c.params.add("c.w2", xavier(hidden, classes));
    c.params.add("c.b2", Matrix::zeros(1, classes));
    return c;
  }
};

// Builds logits = relu(x W1 + b1) W2 + b2 on the tape; weights come in as
// constants when the classifier is frozen for the augmenter phase.
Tape::Id classifier_logits(Tape& t, Tape::Id x, const Classifier& c,
                           BoundParams* bound) {
  auto param = [&](const char* name) {
    return bound ? (*bound)(name) : t.constant(c.params.at(name));
  };
  Tape::Id h = t.relu(t.add_row(t.matmul(x, param("c.w1")), param("c.b1")));
  return t.add_row(t.matmul(h, param("c.w2")), param("c.b2"));
}

}  // namespace

Matrix adversarial_fit(const BowMatrix& train, const AdvSamplerConfig& cfg,
                       uint64_t seed, AdvFitInfo* info) {
  if (train.rows < 2) throw DataError("adversarial sampler needs >= 2 documents");
  if (cfg.average_window < 1 || cfg.average_window > cfg.epochs)
    throw ConfigError("adversarial sampler: need 1 <= average_window <= epochs");
  if (cfg.batch_size < 1) throw ConfigError("adversarial sampler: batch_size >= 1");

  int vocab = train.cols;
  Rng rng(seed);
  Classifier target = Classifier::init(vocab, cfg.hidden, train.rows, rng);
  Classifier teacher = target;  // EMA starts at the target weights
  Augmenter g = Augmenter::init(vocab, rng);

  AdamState opt_target, opt_g;
  opt_target.cfg.lr = cfg.lr;
  opt_target.cfg.beta1 = 0.9;
  opt_g.cfg.lr = cfg.lr;
  opt_g.cfg.beta1 = 0.9;

  Matrix avg = Matrix::zeros(train.rows, vocab);
  int averaged = 0;
  double last_target_loss = 0.0, last_aug_obj = 0.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> perm = rng.permutation(train.rows);
    double ep_target = 0.0, ep_aug = 0.0;
    int batches = 0;
    for (int start = 0; start < train.rows; start += cfg.batch_size) {
      int end = std::min(train.rows, start + cfg.batch_size);
      std::vector<int> rows(perm.begin() + start, perm.begin() + end);
      Matrix x = train.dense_rows(rows);
      std::vector<int> labels(rows.begin(), rows.end());

      // Phase 1: target learns to identify documents under augmentation.
      {
        Matrix xa = augment(x, g);
        Tape t;
        BoundParams bound(t, target.params);
        Tape::Id logits = classifier_logits(t, t.constant(xa), target, &bound);
        Tape::Id loss = t.scale(t.softmax_xent_sum(logits, labels), 1.0 / x.rows);
        t.backward(loss);
        target.params.zero_grads();
        bound.write_grads();
        adam_step(target.params, opt_target);
        ep_target += t.scalar(loss);
      }
      ema_update(teacher.params, target.params, cfg.ema_decay);

      // Phase 2: augmenter fools the target but stays legible to the teacher.
      {
        Tape t;
        BoundParams bound(t, g.params);
        Tape::Id xin = t.constant(x);
        Tape::Id xa =
            t.add(xin, t.relu(t.add_row(t.matmul(xin, bound("g.w")), bound("g.b"))));
        Tape::Id lt = t.softmax_xent_sum(classifier_logits(t, xa, target, nullptr), labels);
        Tape::Id lte = t.softmax_xent_sum(classifier_logits(t, xa, teacher, nullptr), labels);
        Tape::Id obj = t.scale(t.add(t.scale(lt, -1.0), lte), 1.0 / x.rows);
        t.backward(obj);
        g.params.zero_grads();
        bound.write_grads();
        adam_step(g.params, opt_g);
        ep_aug += t.scalar(obj);
      }
      ema_update(teacher.params, target.params, cfg.ema_decay);
      ++batches;
    }
    last_target_loss = ep_target / batches;
    last_aug_obj = ep_aug / batches;

    if (epoch > cfg.epochs - cfg.average_window) {
      // Snapshot the augmenter over the whole training set.
      for (int start = 0; start < train.rows; start += cfg.batch_size) {
        int end = std::min(train.rows, start + cfg.batch_size);
        std::vector<int> rows;
        for (int r = start; r < end; ++r) rows.push_back(r);
        Matrix xa = augment(train.dense_rows(rows), g);
        for (int i = 0; i < int(rows.size()); ++i)
          for (int c = 0; c < vocab; ++c) avg(rows[i], c) += xa(i, c);
      }
      ++averaged;
    }
  }
  for (double& v : avg.data) v /= double(averaged);
  if (info) {
    info->epochs_run = cfg.epochs;
    info->final_target_loss = last_target_loss;
    info->final_augment_obj = last_aug_obj;
  }
  return avg;
}

void save_adv_table(const AdvTable& t, const std::string& path) {
  TensorArchive a;
  a.add("xprime", t.xprime);
  std::string joined;
  for (const auto& id : t.ids) {
    joined += id;
    joined += '\n';
  }
  a.strings["ids"] = joined;
  a.ints["vocab.hash"] = t.vocab_hash;
  a.ints["seed"] = t.seed;
  a.save(path);
}

AdvTable load_adv_table(const std::string& path) {
  TensorArchive a = TensorArchive::load(path);
  AdvTable t;
  t.xprime = a.tensor("xprime");
  auto it = a.strings.find("ids");
  if (it == a.strings.end()) throw DataError("positive table missing ids: " + path);
  std::istringstream ss(it->second);
  std::string id;
  while (std::getline(ss, id))
    if (!id.empty()) t.ids.push_back(id);
  if (int(t.ids.size()) != t.xprime.rows)
    throw DataError("positive table id count does not match rows: " + path);
  t.vocab_hash = a.ints.count("vocab.hash") ? a.ints.at("vocab.hash") : 0;
  t.seed = a.ints.count("seed") ? a.ints.at("seed") : 0;
  return t;
}

}  // namespace vicntm
