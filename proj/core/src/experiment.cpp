#include "vicntm/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "vicntm/errors.hpp"
#include "vicntm/hashing.hpp"
#include "vicntm/version.hpp"

namespace fs = std::filesystem;

namespace vicntm {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void parse_line(KeyValueConfig& c, const std::string& raw_line, int lineno) {
  std::string line = raw_line;
  auto hash = line.find('#');
  if (hash != std::string::npos) line.resize(hash);
  line = trim(line);
  if (line.empty()) return;
  auto eq = line.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config line " + std::to_string(lineno) +
                      " is not 'key = value': " + trim(raw_line));
  std::string key = trim(line.substr(0, eq));
  std::string val = trim(line.substr(eq + 1));
  if (key.empty())
    throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
  c.kv[key] = val;
}

}  // namespace

std::string env_var_for_key(const std::string& key) {
  std::string name = "VICNTM_";
  for (char ch : key) {
    if (ch == '.')
      name.push_back('_');
    else
      name.push_back(char(std::toupper(static_cast<unsigned char>(ch))));
  }
  return name;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  KeyValueConfig c;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) parse_line(c, line, ++n);
  return c;
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig c;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) parse_line(c, line, ++n);
  return c;
}

std::optional<std::string> KeyValueConfig::raw(const std::string& key) const {
  if (const char* env = std::getenv(env_var_for_key(key).c_str()))
    return std::string(env);
  auto it = kv.find(key);
  if (it != kv.end()) return it->second;
  return std::nullopt;
}

std::string KeyValueConfig::get_str(const std::string& key, const std::string& def) const {
  auto v = raw(key);
  return v ? *v : def;
}

int KeyValueConfig::get_int(const std::string& key, int def) const {
  auto v = raw(key);
  if (!v) return def;
  try {
    size_t pos = 0;
    int out = std::stoi(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + *v + "' as an integer");
  }
}

uint64_t KeyValueConfig::get_u64(const std::string& key, uint64_t def) const {
  auto v = raw(key);
  if (!v) return def;
  try {
    size_t pos = 0;
    unsigned long long out = std::stoull(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return uint64_t(out);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + *v + "' as an integer");
  }
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
  auto v = raw(key);
  if (!v) return def;
  try {
    size_t pos = 0;
    double out = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + *v + "' as a number");
  }
}

std::vector<uint64_t> KeyValueConfig::get_u64_list(
    const std::string& key, const std::vector<uint64_t>& def) const {
  auto v = raw(key);
  if (!v) return def;
  std::vector<uint64_t> out;
  std::istringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      size_t pos = 0;
      out.push_back(uint64_t(std::stoull(item, &pos)));
      if (pos != item.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': cannot parse '" + item + "' as an integer");
    }
  }
  if (out.empty())
    throw ConfigError("key '" + key + "': list is empty");
  return out;
}

namespace {

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "data.name",       "data.input",      "data.dir",
      "out.dir",         "prep.min_df",     "prep.max_df",
      "prep.min_types",  "prep.stopwords",  "split.train",
      "split.dev",       "split.test",      "split.seed",
      "model.variant",   "model.k",         "model.hidden",
      "model.alpha",     "model.expander_dim",
      "vic.lambda",      "vic.mu",          "vic.nu",
      "vic.gamma",       "vic.eps",         "contrast.weight",
      "contrast.temperature",               "sampler.kind",
      "sampler.t",       "sampler.table",   "train.batch_size",
      "train.max_epochs", "train.patience", "train.lr",
      "train.beta1",     "train.beta2",     "train.adam_eps",
      "train.bn_anneal", "train.bg_smoothing",
      "train.seeds",     "metrics.top_n",   "metrics.rbo_p",
      "metrics.reference", "adv.hidden",    "adv.decay",
      "adv.epochs",      "adv.window",      "adv.batch",
      "adv.lr",          "adv.seed",        "search.trials",
      "search.seed",     "search.lambda_lo", "search.lambda_hi",
      "search.mu_lo",    "search.mu_hi",    "search.nu_lo",
      "search.nu_hi",    "search.t_lo",     "search.t_hi",
  };
  return keys;
}

// A typo'd key would otherwise silently fall back to its default, which
// surfaces much later as a confusing data/training failure.
void reject_unknown_keys(const KeyValueConfig& c) {
  const auto& known = known_config_keys();
  for (const auto& [key, value] : c.kv) {
    if (known.count(key)) continue;
    std::string leaf = key.substr(key.find_last_of('.') + 1);
    std::string hint;
    for (const auto& k : known)
      if (k.substr(k.find_last_of('.') + 1) == leaf) {
        hint = " (did you mean '" + k + "'?)";
        break;
      }
    throw ConfigError("unknown config key '" + key + "'" + hint);
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const KeyValueConfig& c) {
  reject_unknown_keys(c);
  ExperimentConfig e;
  e.dataset = c.get_str("data.name", e.dataset);
  e.input_path = c.get_str("data.input", "");
  e.data_dir = c.get_str("data.dir", e.data_dir);
  e.out_dir = c.get_str("out.dir", e.out_dir);

  e.min_df = c.get_int("prep.min_df", e.min_df);
  e.max_df = c.get_double("prep.max_df", e.max_df);
  e.min_types = c.get_int("prep.min_types", e.min_types);
  e.stopword_path = c.get_str("prep.stopwords", "");

  e.split_train = c.get_double("split.train", e.split_train);
  e.split_dev = c.get_double("split.dev", e.split_dev);
  e.split_test = c.get_double("split.test", e.split_test);
  e.split_seed = c.get_u64("split.seed", e.split_seed);

  e.variant.kind = parse_variant(c.get_str("model.variant", "SCHOLAR"));
  e.variant.vic.lambda = c.get_double("vic.lambda", e.variant.vic.lambda);
  e.variant.vic.mu = c.get_double("vic.mu", e.variant.vic.mu);
  e.variant.vic.nu = c.get_double("vic.nu", e.variant.vic.nu);
  e.variant.vic.gamma = c.get_double("vic.gamma", e.variant.vic.gamma);
  e.variant.vic.eps = c.get_double("vic.eps", e.variant.vic.eps);
  e.variant.expander_dim = c.get_int("model.expander_dim", 0);
  e.variant.contrastive_weight = c.get_double("contrast.weight", 1.0);
  e.variant.temperature = c.get_double("contrast.temperature", 0.5);
  e.variant.sampler = parse_sampler(c.get_str("sampler.kind", "tfidf"));
  e.variant.t = c.get_int("sampler.t", 5);
  e.sampler_table = c.get_str("sampler.table", "");

  e.train.k = c.get_int("model.k", e.train.k);
  e.train.hidden = c.get_int("model.hidden", e.train.hidden);
  e.train.alpha = c.get_double("model.alpha", 0.0);
  // Batch-size defaults follow the dataset family when not pinned.
  int batch_def = 50;
  std::string lower = e.dataset;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return char(std::tolower(ch)); });
  if (lower.find("imdb") != std::string::npos) batch_def = 1000;
  else if (lower.find("wiki") != std::string::npos) batch_def = 250;
  e.train.batch_size = c.get_int("train.batch_size", batch_def);
  e.train.max_epochs = c.get_int("train.max_epochs", e.train.max_epochs);
  e.train.patience = c.get_int("train.patience", e.train.patience);
  e.train.adam.lr = c.get_double("train.lr", e.train.adam.lr);
  e.train.adam.beta1 = c.get_double("train.beta1", e.train.adam.beta1);
  e.train.adam.beta2 = c.get_double("train.beta2", e.train.adam.beta2);
  e.train.adam.eps = c.get_double("train.adam_eps", e.train.adam.eps);
  e.train.bn_anneal_epochs = c.get_int("train.bn_anneal", e.train.bn_anneal_epochs);
  e.train.background_smoothing = c.get_double("train.bg_smoothing", 1.0);
  e.train.val_top_n = c.get_int("metrics.top_n", 10);

  e.seeds = c.get_u64_list("train.seeds", e.seeds);

  e.metrics.top_n = c.get_int("metrics.top_n", e.metrics.top_n);
  e.metrics.rbo_p = c.get_double("metrics.rbo_p", e.metrics.rbo_p);
  e.metrics.reference = c.get_str("metrics.reference", e.metrics.reference);

  e.adv.cfg.hidden = c.get_int("adv.hidden", e.adv.cfg.hidden);
  e.adv.cfg.ema_decay = c.get_double("adv.decay", e.adv.cfg.ema_decay);
  e.adv.cfg.epochs = c.get_int("adv.epochs", e.adv.cfg.epochs);
  e.adv.cfg.average_window = c.get_int("adv.window", e.adv.cfg.average_window);
  e.adv.cfg.batch_size = c.get_int("adv.batch", e.adv.cfg.batch_size);
  e.adv.cfg.lr = c.get_double("adv.lr", e.adv.cfg.lr);
  e.adv.seed = c.get_u64("adv.seed", e.adv.seed);

  e.search_trials = c.get_int("search.trials", e.search_trials);
  e.search_seed = c.get_u64("search.seed", e.search_seed);
  e.search_bounds.lambda_lo = c.get_double("search.lambda_lo", e.search_bounds.lambda_lo);
  e.search_bounds.lambda_hi = c.get_double("search.lambda_hi", e.search_bounds.lambda_hi);
  e.search_bounds.mu_lo = c.get_double("search.mu_lo", e.search_bounds.mu_lo);
  e.search_bounds.mu_hi = c.get_double("search.mu_hi", e.search_bounds.mu_hi);
  e.search_bounds.nu_lo = c.get_double("search.nu_lo", e.search_bounds.nu_lo);
  e.search_bounds.nu_hi = c.get_double("search.nu_hi", e.search_bounds.nu_hi);
  e.search_bounds.t_lo = c.get_int("search.t_lo", e.search_bounds.t_lo);
  e.search_bounds.t_hi = c.get_int("search.t_hi", e.search_bounds.t_hi);

  e.validate();
  return e;
}

void ExperimentConfig::validate() const {
  if (min_df < 1) throw ConfigError("prep.min_df must be >= 1");
  if (max_df <= 0.0 || max_df > 1.0) throw ConfigError("prep.max_df must be in (0, 1]");
  if (min_types < 1) throw ConfigError("prep.min_types must be >= 1");
  if (split_train <= 0 || split_dev <= 0 || split_test <= 0)
    throw ConfigError("split ratios must all be positive");
  if (std::fabs(split_train + split_dev + split_test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
  if (train.k < 2) throw ConfigError("model.k must be >= 2");
  if (train.hidden < 1) throw ConfigError("model.hidden must be >= 1");
  if (train.batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
  if (train.max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (train.patience < 1) throw ConfigError("train.patience must be >= 1");
  if (train.adam.lr <= 0) throw ConfigError("train.lr must be positive");
  if (variant.vic.lambda < 0 || variant.vic.mu < 0 || variant.vic.nu < 0)
    throw ConfigError("vic weights must be non-negative");
  if (variant.vic.gamma <= 0) throw ConfigError("vic.gamma must be positive");
  if (variant.vic.eps <= 0) throw ConfigError("vic.eps must be positive");
  if (variant.temperature <= 0) throw ConfigError("contrast.temperature must be positive");
  if (variant.t < 1) throw ConfigError("sampler.t must be >= 1");
  if (variant.expander_dim != 0)
    check_expander_dim(train.k, variant.expander_dim);
  if (metrics.top_n < 2) throw ConfigError("metrics.top_n must be >= 2");
  if (metrics.rbo_p <= 0 || metrics.rbo_p >= 1)
    throw ConfigError("metrics.rbo_p must be in (0, 1)");
  if (metrics.reference != "test" && metrics.reference != "dev" &&
      metrics.reference != "train")
    throw ConfigError("metrics.reference must be train, dev, or test");
  if (seeds.empty()) throw ConfigError("train.seeds must not be empty");
  if (search_trials < 1) throw ConfigError("search.trials must be >= 1");
}

std::string manifest_json(const ExperimentConfig& cfg, uint64_t seed,
                          uint64_t vocab_hash) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["dataset"]["name"] = cfg.dataset;
  j["dataset"]["vocab_hash"] = to_hex(vocab_hash);
  j["prep"]["min_df"] = cfg.min_df;
  j["prep"]["max_df"] = cfg.max_df;
  j["prep"]["min_types"] = cfg.min_types;
  j["split"]["train"] = cfg.split_train;
  j["split"]["dev"] = cfg.split_dev;
  j["split"]["test"] = cfg.split_test;
  j["split"]["seed"] = cfg.split_seed;
  j["variant"]["kind"] = variant_name(cfg.variant.kind);
  j["variant"]["vic"]["lambda"] = cfg.variant.vic.lambda;
  j["variant"]["vic"]["mu"] = cfg.variant.vic.mu;
  j["variant"]["vic"]["nu"] = cfg.variant.vic.nu;
  j["variant"]["vic"]["gamma"] = cfg.variant.vic.gamma;
  j["variant"]["vic"]["eps"] = cfg.variant.vic.eps;
  j["variant"]["expander_dim"] = cfg.variant.expander_dim;
  j["variant"]["contrastive_weight"] = cfg.variant.contrastive_weight;
  j["variant"]["temperature"] = cfg.variant.temperature;
  j["variant"]["sampler"] = sampler_name(cfg.variant.sampler);
  j["variant"]["t"] = cfg.variant.t;
  j["train"]["k"] = cfg.train.k;
  j["train"]["hidden"] = cfg.train.hidden;
  j["train"]["batch_size"] = cfg.train.batch_size;
  j["train"]["max_epochs"] = cfg.train.max_epochs;
  j["train"]["patience"] = cfg.train.patience;
  j["train"]["lr"] = cfg.train.adam.lr;
  j["train"]["beta1"] = cfg.train.adam.beta1;
  j["train"]["beta2"] = cfg.train.adam.beta2;
  j["train"]["adam_eps"] = cfg.train.adam.eps;
  j["train"]["alpha"] = cfg.train.alpha;
  j["train"]["bn_anneal"] = cfg.train.bn_anneal_epochs;
  j["train"]["bg_smoothing"] = cfg.train.background_smoothing;
  j["metrics"]["top_n"] = cfg.metrics.top_n;
  j["metrics"]["rbo_p"] = cfg.metrics.rbo_p;
  j["metrics"]["reference"] = cfg.metrics.reference;
  j["seed"] = seed;
  return j.dump(2);
}

std::string manifest_hash_hex(const std::string& manifest) {
  return to_hex(fnv1a64(manifest));
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void run_preprocess(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.input_path.empty())
    throw ConfigError("preprocess needs data.input (path to the raw corpus)");
  std::vector<Document> docs = load_documents(cfg.input_path);
  if (docs.empty()) throw DataError("corpus has no documents: " + cfg.input_path);
  std::string stop_path =
      cfg.stopword_path.empty() ? default_stopwords_path() : cfg.stopword_path;
  auto stops = load_stopwords(stop_path);
  Vocabulary vocab = build_vocabulary(docs, cfg.min_df, cfg.max_df, stops);
  VectorizeResult vec = vectorize_and_filter(docs, vocab, cfg.min_types);
  TfIdfStats tfidf = compute_tfidf(vec.bow);
  CorpusSplit split = split_corpus(vec.bow, vec.kept_ids, cfg.split_train,
                                   cfg.split_dev, cfg.split_test, cfg.split_seed);

  fs::create_directories(cfg.data_dir + "/splits");
  save_vocabulary(vocab, cfg.data_dir + "/vocab.txt");
  save_bow(vec.bow, cfg.data_dir + "/bow.txt");
  save_idf(tfidf.idf, cfg.data_dir + "/idf.txt");
  save_id_list(vec.kept_ids, cfg.data_dir + "/doc_ids.txt");
  save_id_list(split.train_ids, cfg.data_dir + "/splits/train.ids");
  save_id_list(split.dev_ids, cfg.data_dir + "/splits/dev.ids");
  save_id_list(split.test_ids, cfg.data_dir + "/splits/test.ids");

  nlohmann::json meta;
  meta["dataset"] = cfg.dataset;
  meta["source"] = cfg.input_path;
  meta["docs_raw"] = docs.size();
  meta["docs_kept"] = vec.kept_ids.size();
  meta["vocab_size"] = vocab.size();
  meta["vocab_hash"] = to_hex(vocab.hash());
  meta["min_df"] = cfg.min_df;
  meta["max_df"] = cfg.max_df;
  meta["min_types"] = cfg.min_types;
  meta["split"]["train"] = cfg.split_train;
  meta["split"]["dev"] = cfg.split_dev;
  meta["split"]["test"] = cfg.split_test;
  meta["split"]["seed"] = cfg.split_seed;
  meta["split"]["sizes"] = {split.train.rows, split.dev.rows, split.test.rows};
  write_text(cfg.data_dir + "/meta.json", meta.dump(2) + "\n");

  log << "preprocess: " << docs.size() << " documents -> " << vec.kept_ids.size()
      << " kept, vocabulary " << vocab.size() << ", splits " << split.train.rows
      << "/" << split.dev.rows << "/" << split.test.rows << "\n";
}

CorpusArtifacts load_artifacts(const ExperimentConfig& cfg) {
  CorpusArtifacts art;
  std::string meta_path = cfg.data_dir + "/meta.json";
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed corpus metadata " + meta_path + ": " + e.what());
  }
  art.vocab = load_vocabulary(cfg.data_dir + "/vocab.txt");
  art.bow = load_bow(cfg.data_dir + "/bow.txt");
  art.ids = load_id_list(cfg.data_dir + "/doc_ids.txt");
  if (int(art.ids.size()) != art.bow.rows)
    throw DataError("artifact mismatch: doc id count != bow rows in " + cfg.data_dir);
  if (art.bow.cols != art.vocab.size())
    throw DataError("artifact mismatch: bow width != vocabulary size in " + cfg.data_dir);
  std::string stored_hash = meta.value("vocab_hash", "");
  if (!stored_hash.empty() && stored_hash != to_hex(art.vocab.hash()))
    throw DataError("artifact mismatch: vocabulary hash differs from metadata in " +
                    cfg.data_dir);

  std::map<std::string, int> row_of;
  for (int i = 0; i < int(art.ids.size()); ++i) row_of[art.ids[i]] = i;
  auto pick = [&](const std::string& name, BowMatrix& m, std::vector<std::string>& ids) {
    ids = load_id_list(cfg.data_dir + "/splits/" + name + ".ids");
    std::vector<int> idx;
    idx.reserve(ids.size());
    for (const auto& id : ids) {
      auto it = row_of.find(id);
      if (it == row_of.end())
        throw DataError("split id '" + id + "' not present in the corpus artifacts");
      idx.push_back(it->second);
    }
    m = art.bow.select_rows(idx);
  };
  pick("train", art.split.train, art.split.train_ids);
  pick("dev", art.split.dev, art.split.dev_ids);
  pick("test", art.split.test, art.split.test_ids);
  art.split.seed = meta.contains("split") ? meta["split"].value("seed", uint64_t(0))
                                          : uint64_t(0);
  return art;
}

namespace {

const BowMatrix& reference_split(const CorpusArtifacts& art, const std::string& name) {
  if (name == "train") return art.split.train;
  if (name == "dev") return art.split.dev;
  return art.split.test;
}

std::string history_csv(const TrainHistory& h) {
  std::ostringstream out;
  out << "epoch,recon,kl,inv,var,cov,total,val_npmi\n";
  for (const auto& r : h.rows)
    out << r.epoch << ',' << format_g(r.recon) << ',' << format_g(r.kl) << ','
        << format_g(r.inv) << ',' << format_g(r.var) << ',' << format_g(r.cov)
        << ',' << format_g(r.total) << ',' << format_g(r.val_npmi) << '\n';
  return out.str();
}

std::string topics_text(const TopicSet& topics, const Vocabulary& vocab) {
  std::ostringstream out;
  auto words = topics.to_strings(vocab);
  for (const auto& row : words) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ' ';
      out << row[i];
    }
    out << '\n';
  }
  return out.str();
}

std::string latents_csv(const NtmModel& model, const BowMatrix& bow,
                        const std::vector<std::string>& ids) {
  std::ostringstream out;
  out << "id";
  for (int c = 0; c < model.cfg.k; ++c) out << ",z" << c;
  out << '\n';
  const int chunk = 512;
  for (int start = 0; start < bow.rows; start += chunk) {
    int end = std::min(bow.rows, start + chunk);
    std::vector<int> rows;
    for (int r = start; r < end; ++r) rows.push_back(r);
    Matrix x = bow.dense_rows(rows);
    Matrix mu, lv;
    encode_eval(model, x, mu, lv);
    Matrix z = softmax_rows(mu);
    for (int i = 0; i < z.rows; ++i) {
      out << ids[start + i];
      for (int c = 0; c < z.cols; ++c) out << ',' << format_g(z(i, c));
      out << '\n';
    }
  }
  return out.str();
}

std::string metrics_csv_header() {
  return "manifest,dataset,variant,k,seed,npmi,td,irbo,ppl,best_epoch,stop_reason\n";
}

std::string metrics_csv_row(const std::string& hash, const ExperimentConfig& cfg,
                            uint64_t seed, const MetricsReport& r, int best_epoch,
                            const std::string& stop_reason) {
  std::ostringstream out;
  out << hash << ',' << cfg.dataset << ',' << variant_name(cfg.variant.kind) << ','
      << cfg.train.k << ',' << seed << ',' << format_g(r.npmi_mean) << ','
      << format_g(r.td) << ',' << format_g(r.irbo) << ',' << format_g(r.ppl) << ','
      << best_epoch << ',' << stop_reason << '\n';
  return out.str();
}

AdvTable load_adv_table_checked(const ExperimentConfig& cfg, const CorpusArtifacts& art) {
  std::string path = cfg.sampler_table.empty() ? cfg.data_dir + "/positives.bin"
                                               : cfg.sampler_table;
  if (!fs::exists(path))
    throw DataError("adversarial positive table not found: " + path +
                    " (run fit-sampler first)");
  AdvTable t = load_adv_table(path);
  if (t.vocab_hash != art.vocab.hash())
    throw DataError("positive table was fitted against a different vocabulary: " + path);
  return t;
}

}  // namespace

RunOutput run_single_train(const ExperimentConfig& cfg, uint64_t seed,
                           const CorpusArtifacts& art, const AdvTable* adv,
                           std::ostream& log) {
  std::string manifest = manifest_json(cfg, seed, art.vocab.hash());
  std::string hash = manifest_hash_hex(manifest);
  fs::path run_dir = fs::path(cfg.out_dir) / hash;
  fs::create_directories(run_dir);

  TrainResult res = train(cfg.variant, art.split, cfg.train, seed, adv);

  const NtmModel& model = res.state.model;
  const BowMatrix& reference = reference_split(art, cfg.metrics.reference);
  MetricsReport report = evaluate_model(model, reference, art.split.test,
                                        cfg.metrics.top_n, cfg.metrics.rbo_p);

  write_text((run_dir / "manifest.json").string(), manifest + "\n");
  write_text((run_dir / "history.csv").string(), history_csv(res.history));
  write_text((run_dir / "metrics.csv").string(),
             metrics_csv_header() +
                 metrics_csv_row(hash, cfg, seed, report, res.history.best_epoch,
                                 res.history.stop_reason));

  TopicSet topics = top_words(model.params.at("dec.beta"), cfg.metrics.top_n);
  write_text((run_dir / "topics.txt").string(), topics_text(topics, art.vocab));
  {
    std::ostringstream detail;
    detail << "topic,npmi,words\n";
    auto words = topics.to_strings(art.vocab);
    for (size_t i = 0; i < words.size(); ++i) {
      detail << i << ',' << format_g(report.npmi_per_topic[i]) << ',';
      for (size_t w = 0; w < words[i].size(); ++w) {
        if (w) detail << ' ';
        detail << words[i][w];
      }
      detail << '\n';
    }
    write_text((run_dir / "topics_detail.csv").string(), detail.str());
  }
  write_text((run_dir / "latents.csv").string(),
             latents_csv(model, art.split.test, art.split.test_ids));

  Checkpoint ckpt;
  ckpt.model = model;
  ckpt.expander = res.state.expander;
  ckpt.opt = res.opt;
  ckpt.rng_seed = res.rng_seed;
  ckpt.rng_counter = res.rng_counter;
  ckpt.best_epoch = res.history.best_epoch;
  ckpt.variant = variant_name(cfg.variant.kind);
  ckpt.dataset = cfg.dataset;
  ckpt.manifest_hash = hash;
  ckpt.vocab_hash = art.vocab.hash();
  ckpt.save((run_dir / "checkpoint.bin").string());

  log << "run " << hash << " seed " << seed << ": npmi " << format_g(report.npmi_mean)
      << " td " << format_g(report.td) << " irbo " << format_g(report.irbo) << " ppl "
      << format_g(report.ppl) << " best_epoch " << res.history.best_epoch << " ("
      << res.history.stop_reason << ")\n";

  RunOutput out;
  out.run_dir = run_dir.string();
  out.manifest_hash = hash;
  out.report = report;
  out.best_epoch = res.history.best_epoch;
  out.stop_reason = res.history.stop_reason;
  return out;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / double(xs.size() - 1))};
}

}  // namespace

void run_train(const ExperimentConfig& cfg, std::ostream& log) {
  CorpusArtifacts art = load_artifacts(cfg);
  std::optional<AdvTable> adv;
  if (cfg.variant.sampler == SamplerKind::Adversarial && cfg.variant.needs_positives())
    adv = load_adv_table_checked(cfg, art);

  std::vector<double> npmis, tds, irbos, ppls;
  for (uint64_t seed : cfg.seeds) {
    RunOutput out = run_single_train(cfg, seed, art, adv ? &*adv : nullptr, log);
    npmis.push_back(out.report.npmi_mean);
    tds.push_back(out.report.td);
    irbos.push_back(out.report.irbo);
    ppls.push_back(out.report.ppl);
  }

  auto [nm, ns] = mean_std(npmis);
  auto [tm, tsd] = mean_std(tds);
  auto [im, isd] = mean_std(irbos);
  auto [pm, psd] = mean_std(ppls);

  fs::create_directories(cfg.out_dir);
  fs::path summary = fs::path(cfg.out_dir) / "summary.csv";
  bool fresh = !fs::exists(summary);
  std::ofstream out(summary, std::ios::app);
  if (!out) throw DataError("cannot write summary: " + summary.string());
  if (fresh)
    out << "dataset,variant,k,n_seeds,npmi_mean,npmi_std,td_mean,td_std,"
           "irbo_mean,irbo_std,ppl_mean,ppl_std\n";
  out << cfg.dataset << ',' << variant_name(cfg.variant.kind) << ',' << cfg.train.k
      << ',' << cfg.seeds.size() << ',' << format_g(nm) << ',' << format_g(ns) << ','
      << format_g(tm) << ',' << format_g(tsd) << ',' << format_g(im) << ','
      << format_g(isd) << ',' << format_g(pm) << ',' << format_g(psd) << '\n';

  log << variant_name(cfg.variant.kind) << " on " << cfg.dataset << ": npmi "
      << format_g(nm) << " +/- " << format_g(ns) << " over " << cfg.seeds.size()
      << " seed(s)\n";
}

MetricsReport run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                       std::ostream& out) {
  CorpusArtifacts art = load_artifacts(cfg);
  Checkpoint ckpt = Checkpoint::load(checkpoint_path);
  if (ckpt.vocab_hash != art.vocab.hash())
    throw DataError("checkpoint was trained against a different vocabulary: " +
                    checkpoint_path);
  const BowMatrix& reference = reference_split(art, cfg.metrics.reference);
  MetricsReport report = evaluate_model(ckpt.model, reference, art.split.test,
                                        cfg.metrics.top_n, cfg.metrics.rbo_p);
  out << "npmi,td,irbo,ppl\n"
      << format_g(report.npmi_mean) << ',' << format_g(report.td) << ','
      << format_g(report.irbo) << ',' << format_g(report.ppl) << "\n";
  return report;
}

void run_export(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                const std::string& what, const std::string& split_name,
                const std::string& out_path) {
  if (what == "curves") {
    fs::path src = fs::path(checkpoint_path).parent_path() / "history.csv";
    if (!fs::exists(src))
      throw DataError("no history.csv next to the checkpoint: " + src.string());
    write_text(out_path, read_text(src.string()));
    return;
  }
  CorpusArtifacts art = load_artifacts(cfg);
  Checkpoint ckpt = Checkpoint::load(checkpoint_path);
  if (ckpt.vocab_hash != art.vocab.hash())
    throw DataError("checkpoint was trained against a different vocabulary: " +
                    checkpoint_path);
  if (what == "topics") {
    TopicSet topics = top_words(ckpt.model.params.at("dec.beta"), cfg.metrics.top_n);
    write_text(out_path, topics_text(topics, art.vocab));
    return;
  }
  if (what == "latents") {
    const BowMatrix* bow = &art.split.test;
    const std::vector<std::string>* ids = &art.split.test_ids;
    if (split_name == "train") {
      bow = &art.split.train;
      ids = &art.split.train_ids;
    } else if (split_name == "dev") {
      bow = &art.split.dev;
      ids = &art.split.dev_ids;
    } else if (split_name != "test" && !split_name.empty()) {
      throw ConfigError("export: unknown split '" + split_name + "'");
    }
    write_text(out_path, latents_csv(ckpt.model, *bow, *ids));
    return;
  }
  throw ConfigError("export: unknown artifact '" + what +
                    "' (expected topics, latents, or curves)");
}

void run_search(const ExperimentConfig& cfg, std::ostream& log) {
  CorpusArtifacts art = load_artifacts(cfg);
  std::optional<AdvTable> adv;
  if (cfg.variant.sampler == SamplerKind::Adversarial && cfg.variant.needs_positives())
    adv = load_adv_table_checked(cfg, art);
  SearchResult res = random_search(cfg.variant, art.split, cfg.train, cfg.search_trials,
                                   cfg.search_bounds, cfg.search_seed,
                                   adv ? &*adv : nullptr);
  fs::create_directories(cfg.out_dir);
  std::ostringstream csv;
  csv << "trial,lambda,mu,nu,t,expander_dim,val_npmi,best_epoch\n";
  for (size_t i = 0; i < res.log.size(); ++i) {
    const TrialResult& tr = res.log[i];
    csv << i << ',' << format_g(tr.spec.vic.lambda) << ',' << format_g(tr.spec.vic.mu)
        << ',' << format_g(tr.spec.vic.nu) << ',' << tr.spec.t << ','
        << tr.spec.expander_dim << ',' << format_g(tr.val_npmi) << ','
        << tr.best_epoch << '\n';
  }
  fs::path out = fs::path(cfg.out_dir) /
                 ("search_" + variant_name(cfg.variant.kind) + ".csv");
  write_text(out.string(), csv.str());
  log << "search: best val npmi " << format_g(res.best_val_npmi) << " at lambda "
      << format_g(res.best.vic.lambda) << " mu " << format_g(res.best.vic.mu) << " nu "
      << format_g(res.best.vic.nu) << " t " << res.best.t << " dim "
      << res.best.expander_dim << "\n";
}

void run_fit_sampler(const ExperimentConfig& cfg, std::ostream& log) {
  CorpusArtifacts art = load_artifacts(cfg);
  AdvFitInfo info;
  Matrix xprime = adversarial_fit(art.split.train, cfg.adv.cfg, cfg.adv.seed, &info);
  AdvTable table;
  table.ids = art.split.train_ids;
  table.xprime = std::move(xprime);
  table.vocab_hash = art.vocab.hash();
  table.seed = cfg.adv.seed;
  std::string path = cfg.sampler_table.empty() ? cfg.data_dir + "/positives.bin"
                                               : cfg.sampler_table;
  save_adv_table(table, path);
  log << "fit-sampler: " << table.xprime.rows << " positives ("
      << info.epochs_run << " epochs, final target loss "
      << format_g(info.final_target_loss) << ") -> " << path << "\n";
}

}  // namespace vicntm
