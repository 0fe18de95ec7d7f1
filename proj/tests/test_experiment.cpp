#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdlib.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vicntm/errors.hpp"
#include "vicntm/experiment.hpp"
#include "vicntm/synthetic.hpp"

using namespace vicntm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("vicntm_exp_" + std::to_string(::getpid()) + "_" +
            std::to_string(next()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int next() {
    static int c = 0;
    return c++;
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A tiny but fully preprocessable experiment over a generated corpus.
ExperimentConfig tiny_experiment(const TempDir& tmp) {
  auto docs = synthesize_corpus(SyntheticSpec::toy(150, 31));
  write_corpus(docs, tmp.file("corpus.txt"));
  KeyValueConfig kvc = KeyValueConfig::from_string(
      "data.input = " + tmp.file("corpus.txt") + "\n" +
      "data.dir = " + tmp.file("data") + "\n" +
      "out.dir = " + tmp.file("runs") + "\n" +
      "prep.min_df = 2\n"
      "prep.max_df = 0.9\n"
      "prep.min_types = 2\n"
      "split.seed = 5\n"
      "model.k = 3\n"
      "model.hidden = 8\n"
      "train.batch_size = 16\n"
      "train.max_epochs = 2\n"
      "train.patience = 4\n"
      "metrics.top_n = 5\n"
      "train.seeds = 3\n");
  return ExperimentConfig::from(kvc);
}

}  // namespace

TEST_CASE("config parses dotted keys comments and typed getters") {
  KeyValueConfig kvc = KeyValueConfig::from_string(
      "# a comment line\n"
      "model.k = 25\n"
      "vic.lambda=12.5   # trailing comment\n"
      "data.name = twenty_news\n"
      "\n"
      "train.seeds = 1, 2,3\n");
  CHECK(kvc.get_int("model.k", 7) == 25);
  CHECK(kvc.get_double("vic.lambda", 0.0) == 12.5);
  CHECK(kvc.get_str("data.name", "x") == "twenty_news");
  CHECK(kvc.get_str("absent.key", "fallback") == "fallback");
  CHECK(kvc.get_u64_list("train.seeds", {}) ==
        std::vector<uint64_t>{1, 2, 3});
  CHECK(kvc.get_u64_list("absent", {9}) == std::vector<uint64_t>{9});
  CHECK_THROWS_AS(kvc.get_int("data.name", 0), ConfigError);
  CHECK_THROWS_AS(kvc.get_double("data.name", 0.0), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::from_string("not a key value line\n"),
                  ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::load("/does/not/exist.cfg"), ConfigError);
}

TEST_CASE("environment variables override file values") {
  CHECK(env_var_for_key("model.k") == "VICNTM_MODEL_K");
  CHECK(env_var_for_key("train.batch_size") == "VICNTM_TRAIN_BATCH_SIZE");
  KeyValueConfig kvc = KeyValueConfig::from_string("model.k = 10\n");
  ::setenv("VICNTM_MODEL_K", "77", 1);
  CHECK(kvc.get_int("model.k", 1) == 77);
  // The override also fills keys absent from the file.
  ::setenv("VICNTM_VIC_GAMMA", "2.5", 1);
  CHECK(kvc.get_double("vic.gamma", 1.0) == 2.5);
  ::unsetenv("VICNTM_MODEL_K");
  ::unsetenv("VICNTM_VIC_GAMMA");
  CHECK(kvc.get_int("model.k", 1) == 10);
}

TEST_CASE("unknown config keys are rejected with a hint") {
  CHECK_THROWS_WITH_AS(
      ExperimentConfig::from(KeyValueConfig::from_string("min_df = 2\n")),
      doctest::Contains("did you mean 'prep.min_df'"), ConfigError);
  CHECK_THROWS_WITH_AS(
      ExperimentConfig::from(KeyValueConfig::from_string("totally.bogus = 1\n")),
      doctest::Contains("unknown config key 'totally.bogus'"), ConfigError);
  CHECK_NOTHROW(
      ExperimentConfig::from(KeyValueConfig::from_string("prep.min_df = 2\n")));
}

TEST_CASE("experiment config resolves defaults and validates ranges") {
  ExperimentConfig cfg = ExperimentConfig::from(KeyValueConfig::from_string(""));
  CHECK(cfg.train.k == 50);
  CHECK(cfg.min_df == 100);
  CHECK(cfg.split_train == 0.48);
  CHECK(cfg.metrics.top_n == 10);
  CHECK(cfg.variant.kind == VariantKind::Scholar);
  CHECK_NOTHROW(cfg.validate());

  ExperimentConfig bad = cfg;
  bad.split_train = 0.9;  // fractions no longer sum to 1
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.train.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.metrics.rbo_p = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.metrics.reference = "nowhere";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.variant.vic.lambda = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  CHECK_THROWS_AS(
      ExperimentConfig::from(KeyValueConfig::from_string("model.variant = nope\n")),
      ConfigError);
}

TEST_CASE("batch size defaults follow the dataset family") {
  auto mk = [](const std::string& name) {
    return ExperimentConfig::from(
        KeyValueConfig::from_string("data.name = " + name + "\n"));
  };
  CHECK(mk("imdb").train.batch_size == 1000);
  CHECK(mk("wiki40k").train.batch_size == 250);
  CHECK(mk("twenty_news").train.batch_size == 50);
  ExperimentConfig forced = ExperimentConfig::from(KeyValueConfig::from_string(
      "data.name = imdb\ntrain.batch_size = 64\n"));
  CHECK(forced.train.batch_size == 64);  // explicit value wins
}

TEST_CASE("manifests are stable and sensitive to run-shaping fields") {
  ExperimentConfig cfg = ExperimentConfig::from(KeyValueConfig::from_string(""));
  std::string m1 = manifest_json(cfg, 11, 0x1234);
  std::string m2 = manifest_json(cfg, 11, 0x1234);
  CHECK(m1 == m2);
  std::string h1 = manifest_hash_hex(m1);
  CHECK(h1.size() == 16);
  for (char c : h1) CHECK(std::isxdigit(static_cast<unsigned char>(c)));
  CHECK(manifest_hash_hex(manifest_json(cfg, 12, 0x1234)) != h1);
  CHECK(manifest_hash_hex(manifest_json(cfg, 11, 0x9999)) != h1);
  ExperimentConfig other = cfg;
  other.variant.vic.nu = 2.0;
  CHECK(manifest_hash_hex(manifest_json(other, 11, 0x1234)) != h1);
  // Output locations must not shape the hash.
  other = cfg;
  other.out_dir = "elsewhere";
  CHECK(manifest_hash_hex(manifest_json(other, 11, 0x1234)) == h1);
}

TEST_CASE("format_g renders canonical floats") {
  CHECK(format_g(0.0) == "0");
  CHECK(format_g(1.0) == "1");
  CHECK(format_g(-2.5) == "-2.5");
  CHECK(format_g(0.1) == "0.1");
  CHECK(format_g(1234567890123.0) == "1.23456789012e+12");
}

TEST_CASE("preprocess writes artifacts that load back consistently") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_experiment(tmp);
  std::ostringstream log;
  run_preprocess(cfg, log);

  for (const char* name :
       {"vocab.txt", "bow.txt", "idf.txt", "doc_ids.txt", "meta.json"})
    CHECK(fs::exists(fs::path(cfg.data_dir) / name));
  for (const char* name : {"train.ids", "dev.ids", "test.ids"})
    CHECK(fs::exists(fs::path(cfg.data_dir) / "splits" / name));

  CorpusArtifacts art = load_artifacts(cfg);
  CHECK(art.vocab.size() > 0);
  CHECK(art.bow.rows == int(art.ids.size()));
  CHECK(art.split.train.rows + art.split.dev.rows + art.split.test.rows ==
        art.bow.rows);
  CHECK(art.split.train.cols == art.vocab.size());

  // Split membership is reconstructed by id, not by position.
  CHECK(int(art.split.train_ids.size()) == art.split.train.rows);

  // Rerunning preprocess is byte-stable.
  std::string before = slurp(cfg.data_dir + "/bow.txt");
  std::ostringstream log2;
  run_preprocess(cfg, log2);
  CHECK(slurp(cfg.data_dir + "/bow.txt") == before);
  CHECK(slurp(cfg.data_dir + "/vocab.txt") ==
        slurp(cfg.data_dir + "/vocab.txt"));

  // A corrupted vocabulary no longer matches the recorded hash.
  {
    std::ofstream v(cfg.data_dir + "/vocab.txt", std::ios::app);
    v << "zzz_injected_word\n";
  }
  CHECK_THROWS_AS(load_artifacts(cfg), DataError);
}

TEST_CASE("preprocess requires an input corpus") {
  TempDir tmp;
  ExperimentConfig cfg = ExperimentConfig::from(KeyValueConfig::from_string(
      "data.dir = " + tmp.file("data") + "\n"));
  std::ostringstream log;
  CHECK_THROWS_AS(run_preprocess(cfg, log), ConfigError);
  cfg.input_path = tmp.file("missing.txt");
  CHECK_THROWS_AS(run_preprocess(cfg, log), DataError);
}

TEST_CASE("single train run writes the full artifact set deterministically") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_experiment(tmp);
  std::ostringstream log;
  run_preprocess(cfg, log);
  CorpusArtifacts art = load_artifacts(cfg);

  RunOutput out = run_single_train(cfg, 3, art, nullptr, log);
  CHECK(out.manifest_hash.size() == 16);
  fs::path run_dir(out.run_dir);
  CHECK(run_dir.filename().string() == out.manifest_hash);
  for (const char* name : {"manifest.json", "history.csv", "metrics.csv",
                           "topics.txt", "topics_detail.csv", "latents.csv",
                           "checkpoint.bin"})
    CHECK(fs::exists(run_dir / name));

  std::string history = slurp((run_dir / "history.csv").string());
  CHECK(history.rfind("epoch,recon,kl,inv,var,cov,total,val_npmi\n", 0) == 0);
  CHECK(std::count(history.begin(), history.end(), '\n') == 3);  // header + 2 epochs

  std::string metrics = slurp((run_dir / "metrics.csv").string());
  CHECK(metrics.find("manifest,dataset,variant,k,seed") == 0);
  CHECK(metrics.find(out.manifest_hash) != std::string::npos);

  // Re-running the same manifest reproduces the metric bytes exactly.
  std::string history1 = history;
  std::string metrics1 = metrics;
  RunOutput again = run_single_train(cfg, 3, art, nullptr, log);
  CHECK(again.manifest_hash == out.manifest_hash);
  CHECK(slurp((run_dir / "history.csv").string()) == history1);
  CHECK(slurp((run_dir / "metrics.csv").string()) == metrics1);

  // A different seed lands in a different run directory.
  RunOutput other = run_single_train(cfg, 4, art, nullptr, log);
  CHECK(other.manifest_hash != out.manifest_hash);
}

TEST_CASE("train eval and export agree end to end") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_experiment(tmp);
  std::ostringstream log;
  run_preprocess(cfg, log);
  run_train(cfg, log);

  CHECK(fs::exists(fs::path(cfg.out_dir) / "summary.csv"));
  std::string summary = slurp((fs::path(cfg.out_dir) / "summary.csv").string());
  CHECK(summary.find("npmi_mean") != std::string::npos);

  // Locate the run directory produced for seed 3.
  CorpusArtifacts art = load_artifacts(cfg);
  std::string hash =
      manifest_hash_hex(manifest_json(cfg, 3, art.vocab.hash()));
  fs::path run_dir = fs::path(cfg.out_dir) / hash;
  REQUIRE(fs::exists(run_dir / "checkpoint.bin"));
  std::string ckpt = (run_dir / "checkpoint.bin").string();

  std::ostringstream eval_out;
  MetricsReport rep = run_eval(cfg, ckpt, eval_out);
  std::string metrics = slurp((run_dir / "metrics.csv").string());
  // The stored metrics row embeds the same numbers eval recomputes.
  CHECK(metrics.find(format_g(rep.npmi_mean)) != std::string::npos);
  CHECK(metrics.find(format_g(rep.ppl)) != std::string::npos);
  CHECK(eval_out.str().find("npmi") != std::string::npos);

  run_export(cfg, ckpt, "topics", "", tmp.file("topics_out.txt"));
  std::string topics = slurp(tmp.file("topics_out.txt"));
  CHECK(topics == slurp((run_dir / "topics.txt").string()));

  run_export(cfg, ckpt, "latents", "dev", tmp.file("latents_dev.csv"));
  std::string latents = slurp(tmp.file("latents_dev.csv"));
  CHECK(latents.rfind("id,", 0) == 0);
  CHECK(std::count(latents.begin(), latents.end(), '\n') ==
        art.split.dev.rows + 1);

  run_export(cfg, ckpt, "curves", "", tmp.file("curves.csv"));
  CHECK(slurp(tmp.file("curves.csv")) ==
        slurp((run_dir / "history.csv").string()));

  CHECK_THROWS_AS(run_export(cfg, ckpt, "nonsense", "", tmp.file("x")),
                  ConfigError);
  CHECK_THROWS_AS(run_eval(cfg, tmp.file("no_ckpt.bin"), eval_out), DataError);
}

TEST_CASE("eval rejects a checkpoint from a different vocabulary") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_experiment(tmp);
  std::ostringstream log;
  run_preprocess(cfg, log);
  CorpusArtifacts art = load_artifacts(cfg);
  RunOutput out = run_single_train(cfg, 3, art, nullptr, log);
  std::string ckpt = out.run_dir + "/checkpoint.bin";

  Checkpoint ck = Checkpoint::load(ckpt);
  ck.vocab_hash ^= 1;
  ck.save(tmp.file("tampered.bin"));
  std::ostringstream eval_out;
  CHECK_THROWS_AS(run_eval(cfg, tmp.file("tampered.bin"), eval_out), DataError);
}

TEST_CASE("fit-sampler writes a reusable positive table") {
  TempDir tmp;
  ExperimentConfig cfg = tiny_experiment(tmp);
  cfg.adv.cfg.hidden = 8;
  cfg.adv.cfg.epochs = 2;
  cfg.adv.cfg.average_window = 1;
  cfg.adv.cfg.batch_size = 16;
  std::ostringstream log;
  run_preprocess(cfg, log);
  run_fit_sampler(cfg, log);
  std::string table_path = cfg.data_dir + "/positives.bin";
  REQUIRE(fs::exists(table_path));
  AdvTable table = load_adv_table(table_path);
  CorpusArtifacts art = load_artifacts(cfg);
  CHECK(table.ids == art.split.train_ids);
  CHECK(table.vocab_hash == art.vocab.hash());
  CHECK(table.xprime.rows == art.split.train.rows);

  // The table plugs straight into an adversarial-sampler training run.
  cfg.variant.kind = VariantKind::Vicntm;
  cfg.variant.sampler = SamplerKind::Adversarial;
  RunOutput out = run_single_train(cfg, 3, art, &table, log);
  CHECK(fs::exists(fs::path(out.run_dir) / "checkpoint.bin"));
}
