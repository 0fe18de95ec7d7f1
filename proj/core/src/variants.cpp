#include "vicntm/variants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "vicntm/errors.hpp"

namespace vicntm {

VariantKind parse_variant(const std::string& name) {
  if (name == "SCHOLAR") return VariantKind::Scholar;
  if (name == "ProdLDA") return VariantKind::ProdLda;
  if (name == "CLNTM") return VariantKind::Clntm;
  if (name == "VICNTM") return VariantKind::Vicntm;
  if (name == "DeepVICNTM") return VariantKind::DeepVicntm;
  if (name == "VC-CLNTM") return VariantKind::VcClntm;
  if (name == "DeepVC-CLNTM") return VariantKind::DeepVcClntm;
  if (name == "VIC-CLNTM") return VariantKind::VicClntm;
  throw ConfigError("unknown variant '" + name + "'");
}

std::string variant_name(VariantKind k) {
  switch (k) {
    case VariantKind::Scholar: return "SCHOLAR";
    case VariantKind::ProdLda: return "ProdLDA";
    case VariantKind::Clntm: return "CLNTM";
    case VariantKind::Vicntm: return "VICNTM";
    case VariantKind::DeepVicntm: return "DeepVICNTM";
    case VariantKind::VcClntm: return "VC-CLNTM";
    case VariantKind::DeepVcClntm: return "DeepVC-CLNTM";
    case VariantKind::VicClntm: return "VIC-CLNTM";
  }
  return "?";
}

SamplerKind parse_sampler(const std::string& name) {
  if (name == "tfidf") return SamplerKind::Tfidf;
  if (name == "adversarial") return SamplerKind::Adversarial;
  throw ConfigError("unknown sampler '" + name + "'");
}

std::string sampler_name(SamplerKind k) {
  return k == SamplerKind::Tfidf ? "tfidf" : "adversarial";
}

bool VariantSpec::uses_vic() const {
  bool any_vc = vic.mu > 0.0 || vic.nu > 0.0;
  switch (kind) {
    case VariantKind::Vicntm:
    case VariantKind::DeepVicntm:
    case VariantKind::VicClntm:
      return vic.lambda > 0.0 || any_vc;
    case VariantKind::VcClntm:
    case VariantKind::DeepVcClntm:
      return any_vc;  // invariance inactive for the VC variants
    default:
      return false;
  }
}

bool VariantSpec::uses_contrast() const {
  switch (kind) {
    case VariantKind::Clntm:
    case VariantKind::VcClntm:
    case VariantKind::DeepVcClntm:
      return contrastive_weight != 0.0;
    default:
      return false;
  }
}

bool VariantSpec::uses_cosine_penalty() const {
  return kind == VariantKind::VicClntm && contrastive_weight != 0.0;
}

namespace {

// Row-wise cosine between matched rows as an n x 1 tape node. Simplex
// latents can never have zero norm; reject degenerate rows anyway.
Tape::Id row_cosine_nodes(Tape& t, Tape::Id a, Tape::Id b) {
  Tape::Id dot = t.row_sum(t.mul(a, b));
  Tape::Id na = t.sqrt(t.row_sum(t.square(a)));
  Tape::Id nb = t.sqrt(t.row_sum(t.square(b)));
  for (double v : t.value(na).data)
    if (v <= 0.0) throw TrainError("cosine: zero-norm latent row");
  for (double v : t.value(nb).data)
    if (v <= 0.0) throw TrainError("cosine: zero-norm latent row");
  return t.div(dot, t.mul(na, nb));
}

}  // namespace

double mean_row_cosine(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("mean_row_cosine: shape mismatch");
  double acc = 0.0;
  for (int r = 0; r < a.rows; ++r) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int c = 0; c < a.cols; ++c) {
      dot += a(r, c) * b(r, c);
      na += a(r, c) * a(r, c);
      nb += b(r, c) * b(r, c);
    }
    if (na <= 0.0 || nb <= 0.0)
      throw std::invalid_argument("mean_row_cosine: zero-norm row");
    acc += dot / (std::sqrt(na) * std::sqrt(nb));
  }
  return acc / a.rows;
}

LossNodes total_loss(Tape& tape, const VariantSpec& spec, TrainState& state,
                     const Matrix& x, const Matrix& noise_anchor,
                     const Matrix* noise_pos, const Matrix* noise_neg,
                     const SampleProvider& provider) {
  if (spec.needs_expander() && !state.expander)
    throw std::invalid_argument("total_loss: variant needs an expander");
  if (spec.needs_positives() && (!noise_pos || !provider.positives))
    throw std::invalid_argument("total_loss: variant needs positives and their noise");
  if (spec.needs_negatives() && (!noise_neg || !provider.negatives))
    throw std::invalid_argument("total_loss: variant needs negatives and their noise");

  auto graph = std::make_shared<NtmGraph>(tape, state.model);
  std::shared_ptr<BoundParams> ebound;
  if (spec.needs_expander())
    ebound = std::make_shared<BoundParams>(tape, state.expander->params);

  LossNodes out;
  Tape::Id xid = tape.constant(x);
  NtmGraph::Enc enc = graph->encode(xid);
  Tape::Id r = graph->reparameterize(enc, noise_anchor);
  Tape::Id z = graph->topics(r);
  Tape::Id xp = graph->decode(z);
  Tape::Id recon = graph->recon_loss(xp, x);
  Tape::Id kl = graph->kl_loss(enc);
  Tape::Id total = tape.add(recon, kl);
  out.values.recon = tape.scalar(recon);
  out.values.kl = tape.scalar(kl);

  Tape::Id zpos = -1;
  Tape::Id zneg = -1;
  if (spec.needs_positives() || spec.needs_negatives()) {
    // Count-scaled reconstruction, detached: the samplers read the live
    // decoder output but no gradient flows through substituted entries.
    const Matrix& probs = tape.value(xp);
    Matrix recon_counts(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
      double row_total = 0.0;
      for (int c = 0; c < x.cols; ++c) row_total += x(i, c);
      for (int c = 0; c < x.cols; ++c)
        recon_counts(i, c) = row_total * probs(i, c);
    }
    if (spec.needs_positives()) {
      Matrix xpos = provider.positives(recon_counts);
      if (!xpos.same_shape(x))
        throw std::invalid_argument("total_loss: positive batch shape mismatch");
      NtmGraph::Enc ep = graph->encode(tape.constant(std::move(xpos)));
      zpos = graph->topics(graph->reparameterize(ep, *noise_pos));
    }
    if (spec.needs_negatives()) {
      Matrix xneg = provider.negatives(recon_counts);
      if (!xneg.same_shape(x))
        throw std::invalid_argument("total_loss: negative batch shape mismatch");
      NtmGraph::Enc en = graph->encode(tape.constant(std::move(xneg)));
      zneg = graph->topics(graph->reparameterize(en, *noise_neg));
    }
  }

  if (spec.uses_vic()) {
    Tape::Id y = z, yp = zpos;
    if (spec.deep_vic()) {
      y = expand_node(tape, *ebound, z);
      yp = expand_node(tape, *ebound, zpos);
    }
    bool include_inv = spec.kind == VariantKind::Vicntm ||
                       spec.kind == VariantKind::DeepVicntm ||
                       spec.kind == VariantKind::VicClntm;
    VicNodes vic = vic_loss_nodes(tape, y, yp, spec.vic, include_inv);
    total = tape.add(total, vic.total);
    out.values.inv = vic.values.inv;
    out.values.var = vic.values.var;
    out.values.cov = vic.values.cov;
  }

  if (spec.uses_contrast()) {
    int n = x.rows;
    Tape::Id cp = row_cosine_nodes(tape, z, zpos);
    Tape::Id cn = row_cosine_nodes(tape, z, zneg);
    Tape::Id per_row = tape.softplus(tape.scale(tape.sub(cn, cp), 1.0 / spec.temperature));
    Tape::Id con = tape.scale(tape.sum_all(per_row), 1.0 / n);
    Tape::Id weighted = tape.scale(con, spec.contrastive_weight);
    total = tape.add(total, weighted);
    out.values.contrast = tape.scalar(weighted);
  }

  if (spec.uses_cosine_penalty()) {
    int n = x.rows;
    Tape::Id pen = tape.scale(tape.sum_all(row_cosine_nodes(tape, z, zneg)), 1.0 / n);
    Tape::Id weighted = tape.scale(pen, spec.contrastive_weight);
    total = tape.add(total, weighted);
    out.values.cos_pen = tape.scalar(weighted);
  }

  out.total = total;
  out.values.total = tape.scalar(total);
  out.bn_stats = graph->batch_stats();
  out.write_grads = [graph, ebound] {
    graph->write_grads();
    if (ebound) ebound->write_grads();
  };
  return out;
}

namespace {

double anneal_mix(int epoch, int anneal_epochs) {
  if (anneal_epochs <= 0) return 1.0;
  double mix = 1.0 - double(epoch - 1) / double(anneal_epochs);
  return mix > 0.0 ? mix : 0.0;
}

struct Snapshot {
  TrainState state;
  bool set = false;
};

}  // namespace

TrainResult train(const VariantSpec& spec, const CorpusSplit& split,
                  const TrainConfig& cfg, uint64_t seed,
                  const AdvTable* adv_table) {
  if (cfg.batch_size < 2)
    throw ConfigError("train: batch_size must be >= 2 (batchnorm needs a batch)");
  if (cfg.k < 2) throw ConfigError("train: k must be >= 2");
  if (cfg.max_epochs < 1 || cfg.patience < 1)
    throw ConfigError("train: max_epochs and patience must be >= 1");
  if (split.train.rows < 2) throw DataError("train: training split has < 2 documents");
  if (split.dev.rows < 1) throw DataError("train: validation split is empty");

  const bool adv = spec.sampler == SamplerKind::Adversarial && spec.needs_positives();
  if (adv) {
    if (!adv_table)
      throw ConfigError("adversarial sampler requires a fitted positive table");
    if (adv_table->ids != split.train_ids)
      throw DataError("positive table rows do not match the training split ids");
    if (adv_table->xprime.cols != split.train.cols)
      throw DataError("positive table vocabulary width does not match the corpus");
  }

  int vocab = split.train.cols;
  double alpha = cfg.alpha > 0.0 ? cfg.alpha : default_alpha(cfg.k);
  PriorParams prior = logistic_normal_prior(cfg.k, alpha);
  bool zero_bg = cfg.zero_background || spec.kind == VariantKind::ProdLda;
  Matrix background = zero_bg
                          ? Matrix::zeros(1, vocab)
                          : compute_background(split.train, cfg.background_smoothing);

  Rng rng(seed);
  NtmConfig ncfg;
  ncfg.vocab = vocab;
  ncfg.k = cfg.k;
  ncfg.hidden = cfg.hidden;
  ncfg.recon_log_floor = cfg.log_floor;

  TrainState state;
  state.model = NtmModel::init(ncfg, prior, background, rng);
  if (spec.needs_expander()) {
    int dim = spec.expander_dim > 0 ? spec.expander_dim : default_expander_dim(cfg.k);
    state.expander = Expander::init(cfg.k, dim, rng);
  }

  TfIdfStats tfidf;
  bool tfidf_needed = (spec.needs_positives() && spec.sampler == SamplerKind::Tfidf) ||
                      spec.needs_negatives();
  if (tfidf_needed) tfidf = compute_tfidf(split.train);

  CoocCounts val_cooc = count_cooc(split.dev);

  AdamState opt;
  opt.cfg = cfg.adam;
  std::vector<ParamStore*> stores{&state.model.params};
  if (state.expander) stores.push_back(&state.expander->params);

  TrainResult result;
  result.rng_seed = seed;
  Snapshot best;
  double best_val = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  TrainHistory& hist = result.history;
  hist.stop_reason = "max_epochs";

  int n = split.train.rows;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    state.model.bn_mix = anneal_mix(epoch, cfg.bn_anneal_epochs);
    std::vector<int> perm = rng.permutation(n);

    EpochRow row;
    row.epoch = epoch;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      int end = std::min(n, start + cfg.batch_size);
      if (n - end == 1) end = n;  // fold a trailing singleton into this batch
      std::vector<int> rows(perm.begin() + start, perm.begin() + end);
      int nb = int(rows.size());
      Matrix x = split.train.dense_rows(rows);

      Matrix noise_a(nb, cfg.k);
      rng.fill_normal(noise_a);
      Matrix noise_p, noise_n;
      if (spec.needs_positives()) {
        noise_p = Matrix(nb, cfg.k);
        rng.fill_normal(noise_p);
      }
      if (spec.needs_negatives()) {
        noise_n = Matrix(nb, cfg.k);
        rng.fill_normal(noise_n);
      }

      SampleProvider provider;
      if (spec.needs_positives()) {
        if (adv) {
          provider.positives = [&](const Matrix&) {
            Matrix xpos(nb, vocab);
            for (int i = 0; i < nb; ++i)
              for (int c = 0; c < vocab; ++c)
                xpos(i, c) = adv_table->xprime(rows[i], c);
            return xpos;
          };
        } else {
          provider.positives = [&](const Matrix& recon_counts) {
            return tfidf_positive(x, recon_counts, tfidf.idf, spec.t);
          };
        }
      }
      if (spec.needs_negatives())
        provider.negatives = [&](const Matrix& recon_counts) {
          return tfidf_negative(x, recon_counts, tfidf.idf, spec.t);
        };

      Tape tape;
      LossNodes loss = total_loss(tape, spec, state, x, noise_a,
                                  spec.needs_positives() ? &noise_p : nullptr,
                                  spec.needs_negatives() ? &noise_n : nullptr,
                                  provider);
      if (!std::isfinite(loss.values.total)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batches;
        throw TrainError(msg.str());
      }
      tape.backward(loss.total);
      for (ParamStore* s : stores) s->zero_grads();
      loss.write_grads();
      adam_step(stores, opt);

      for (const auto& st : loss.bn_stats) {
        BnStats* target = nullptr;
        if (st.layer == "mu") target = &state.model.mu_bn;
        else if (st.layer == "lv") target = &state.model.lv_bn;
        else if (st.layer == "dec") target = &state.model.dec_bn;
        if (target)
          update_running_stats(*target, st.mean, st.var, st.batch_rows,
                               state.model.cfg.bn_momentum);
      }

      row.recon += loss.values.recon;
      row.kl += loss.values.kl;
      row.inv += loss.values.inv;
      row.var += loss.values.var;
      row.cov += loss.values.cov;
      row.contrast += loss.values.contrast;
      row.cos_pen += loss.values.cos_pen;
      row.total += loss.values.total;
      ++batches;
      if (end == n) break;
    }
    row.recon /= batches;
    row.kl /= batches;
    row.inv /= batches;
    row.var /= batches;
    row.cov /= batches;
    row.contrast /= batches;
    row.cos_pen /= batches;
    row.total /= batches;

    TopicSet topics = top_words(state.model.params.at("dec.beta"), cfg.val_top_n);
    row.val_npmi = npmi(topics, val_cooc).mean;
    hist.rows.push_back(row);

    if (row.val_npmi > best_val) {
      best_val = row.val_npmi;
      best_epoch = epoch;
      best.state = state;
      best.set = true;
    }
    if (epoch - best_epoch >= cfg.patience) {
      hist.stop_reason = "patience";
      break;
    }
  }

  hist.best_epoch = best_epoch;
  hist.best_val_npmi = best_val;
  result.state = best.set ? best.state : state;
  result.opt = std::move(opt);
  result.rng_counter = rng.counter();
  return result;
}

SearchResult random_search(const VariantSpec& base, const CorpusSplit& split,
                           const TrainConfig& cfg, int trials,
                           const SearchBounds& bounds, uint64_t seed,
                           const AdvTable* adv_table) {
  if (trials < 1) throw ConfigError("random_search: trials must be >= 1");
  Rng rng(seed);
  SearchResult out;
  out.best_val_npmi = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    VariantSpec s = base;
    s.vic.lambda = rng.log_uniform(bounds.lambda_lo, bounds.lambda_hi);
    s.vic.mu = rng.log_uniform(bounds.mu_lo, bounds.mu_hi);
    s.vic.nu = rng.log_uniform(bounds.nu_lo, bounds.nu_hi);
    s.t = bounds.t_lo + rng.uniform_int(bounds.t_hi - bounds.t_lo + 1);
    if (s.needs_expander())
      s.expander_dim = cfg.k + rng.uniform_int(16 * cfg.k - cfg.k + 1);
    uint64_t train_seed = rng.next_u64();
    TrainResult res = train(s, split, cfg, train_seed, adv_table);
    TrialResult tr;
    tr.spec = s;
    tr.val_npmi = res.history.best_val_npmi;
    tr.best_epoch = res.history.best_epoch;
    out.log.push_back(tr);
    if (tr.val_npmi > out.best_val_npmi) {
      out.best_val_npmi = tr.val_npmi;
      out.best = s;
    }
  }
  return out;
}

}  // namespace vicntm
