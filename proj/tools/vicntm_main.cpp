// Command-line front end. Every subcommand is a thin wrapper around the
// library entry points; all policy lives in core.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "vicntm/errors.hpp"
#include "vicntm/experiment.hpp"
#include "vicntm/synthetic.hpp"
#include "vicntm/version.hpp"

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

vicntm::ExperimentConfig resolve_config(const std::string& config_path,
                                        const std::vector<std::string>& sets) {
  vicntm::KeyValueConfig kvc;
  if (!config_path.empty()) kvc = vicntm::KeyValueConfig::load(config_path);
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw vicntm::ConfigError("--set expects key=value, got: " + s);
    std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw vicntm::ConfigError("--set has an empty key: " + s);
    kvc.kv[key] = trim(s.substr(eq + 1));
  }
  return vicntm::ExperimentConfig::from(kvc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variance-regularized neural topic models"};
  app.set_version_flag("--version", std::string(vicntm::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_path, "key = value config file");
  app.add_option("--set", sets, "override one config key (key=value), repeatable");

  auto* cmd_prep = app.add_subcommand(
      "preprocess", "tokenize, build the vocabulary, vectorize, and split");

  auto* cmd_train =
      app.add_subcommand("train", "train the configured variant over all seeds");

  std::string eval_ckpt;
  auto* cmd_eval = app.add_subcommand("eval", "re-score a saved checkpoint");
  cmd_eval->add_option("checkpoint", eval_ckpt, "checkpoint file")->required();

  std::string exp_ckpt, exp_what = "topics", exp_split = "test", exp_out;
  auto* cmd_export =
      app.add_subcommand("export", "dump topics, latents, or training curves");
  cmd_export->add_option("checkpoint", exp_ckpt, "checkpoint file")->required();
  cmd_export->add_option("--what", exp_what, "topics | latents | curves");
  cmd_export->add_option("--split", exp_split, "split for latents (train|dev|test)");
  cmd_export->add_option("-o,--out", exp_out, "output path")->required();

  auto* cmd_search =
      app.add_subcommand("search", "random search over the regularizer weights");

  auto* cmd_fit =
      app.add_subcommand("fit-sampler", "fit the adversarial positive sampler");

  std::string gen_profile = "toy", gen_out;
  int gen_docs = 0;
  std::uint64_t gen_seed = 0;
  auto* cmd_gen = app.add_subcommand("gen-corpus", "write a synthetic corpus");
  cmd_gen->add_option("--profile", gen_profile, "desk | news | toy");
  auto* gen_docs_opt = cmd_gen->add_option("--docs", gen_docs, "document count");
  auto* gen_seed_opt = cmd_gen->add_option("--seed", gen_seed, "generator seed");
  cmd_gen->add_option("-o,--out", gen_out, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (cmd_gen->parsed()) {
      vicntm::SyntheticSpec spec;
      if (gen_profile == "desk")
        spec = vicntm::SyntheticSpec::desk();
      else if (gen_profile == "news")
        spec = vicntm::SyntheticSpec::news();
      else if (gen_profile == "toy")
        spec = vicntm::SyntheticSpec::toy();
      else
        throw vicntm::ConfigError("unknown corpus profile: " + gen_profile);
      if (gen_docs_opt->count()) spec.docs = gen_docs;
      if (gen_seed_opt->count()) spec.seed = gen_seed;
      auto docs = vicntm::synthesize_corpus(spec);
      vicntm::write_corpus(docs, gen_out);
      std::cout << "wrote " << docs.size() << " documents to " << gen_out << "\n";
      return 0;
    }

    vicntm::ExperimentConfig cfg = resolve_config(config_path, sets);
    if (cmd_prep->parsed()) {
      vicntm::run_preprocess(cfg, std::cout);
    } else if (cmd_train->parsed()) {
      vicntm::run_train(cfg, std::cout);
    } else if (cmd_eval->parsed()) {
      vicntm::run_eval(cfg, eval_ckpt, std::cout);
    } else if (cmd_export->parsed()) {
      vicntm::run_export(cfg, exp_ckpt, exp_what, exp_split, exp_out);
    } else if (cmd_search->parsed()) {
      vicntm::run_search(cfg, std::cout);
    } else if (cmd_fit->parsed()) {
      vicntm::run_fit_sampler(cfg, std::cout);
    }
    return 0;
  } catch (const vicntm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const vicntm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const vicntm::TrainError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
