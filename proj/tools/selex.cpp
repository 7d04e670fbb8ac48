// Copyright 2026 The Selex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "selex/belief.hpp"
#include "selex/classifier.hpp"
#include "selex/corpus.hpp"
#include "selex/error.hpp"
#include "selex/explainer.hpp"
#include "selex/log.hpp"
#include "selex/random.hpp"
#include "selex/service.hpp"
#include "selex/store.hpp"
#include "selex/study.hpp"
#include "selex/synthetic.hpp"

// Last: resolv.h, pulled in by httplib, defines a macro that breaks Eigen.
#include <httplib.h>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  bool verbose = false;
};

selex::StudyConfig load_config(const Common& common) {
  selex::StudyConfig config;
  if (!common.config_path.empty()) config = selex::StudyConfig::load(common.config_path);
  selex::apply_seed_override(config);
  return config;
}

std::uint64_t seed_or_env(std::optional<std::uint64_t> flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SELEX_SEED"); env && *env) {
    return std::stoull(env);
  }
  return fallback;
}

selex::Splits load_splits(const selex::StudyConfig& config) {
  const auto corpus = selex::load_corpus(config.corpus_path, config.corpus_format);
  return selex::load_split_manifest(config.splits_dir, corpus);
}

std::vector<selex::TokenizedReview> tokenize_all(const std::vector<selex::Document>& docs) {
  std::vector<selex::TokenizedReview> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(selex::tokenize_document(d));
  return out;
}

std::unordered_set<std::string> read_lexicon(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw selex::LoadError("cannot open lexicon " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto tokens = selex::tokenize(line);
    for (const auto& t : tokens) words.insert(t.word);
  }
  return words;
}

// Deterministic clock for scripted runs: one second per call.
selex::Clock virtual_clock() {
  auto t = std::make_shared<std::atomic<std::int64_t>>(1'700'000'000'000);
  return [t] { return t->fetch_add(1000); };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective explanations study toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "Study config JSON");
  app.add_flag("-v,--verbose", common.verbose, "Log progress");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus, embeddings and lexicon");
  std::string synth_dir = "data";
  std::size_t synth_docs = 50000;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out-dir", synth_dir);
  synth->add_option("--n-docs", synth_docs);
  synth->add_option("--seed", synth_seed);

  // split
  auto* split = app.add_subcommand("split", "Draw class-balanced train/dev/test splits");
  std::string split_corpus, split_format = "jsonl", split_out;
  std::optional<std::uint64_t> split_seed;
  std::vector<std::size_t> split_sizes;
  split->add_option("--corpus", split_corpus);
  split->add_option("--format", split_format);
  split->add_option("--out-dir", split_out);
  split->add_option("--seed", split_seed);
  split->add_option("--sizes", split_sizes)->expected(3)->delimiter(',');

  // train-clf
  auto* train = app.add_subcommand("train-clf", "Fit the reference classifier on the train split");
  std::string train_out;
  std::optional<double> train_reg;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--out", train_out);
  train->add_option("--reg", train_reg);
  train->add_option("--seed", train_seed);

  // explain
  auto* explain = app.add_subcommand("explain", "LIME explanations for a split");
  std::string explain_model, explain_split = "dev", explain_out;
  std::optional<std::uint64_t> explain_seed;
  std::optional<std::size_t> explain_samples;
  explain->add_option("--model", explain_model, "Model file or http(s) URL");
  explain->add_option("--split", explain_split)->check(CLI::IsMember({"train", "dev", "test"}));
  explain->add_option("--out", explain_out);
  explain->add_option("--seed", explain_seed);
  explain->add_option("--n-samples", explain_samples);

  // select-input-sample
  auto* select = app.add_subcommand("select-input-sample", "SP-LIME pick of the input reviews");
  std::string select_cache, select_out;
  select->add_option("--cache", select_cache, "Dev explanation cache");
  select->add_option("--out", select_out);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run scripted sessions with oracle participants");
  std::string sim_lexicon, sim_store, sim_export, sim_sampling = "fixed";
  double sim_noise = 0.0;
  std::vector<std::string> sim_conditions;
  std::size_t sim_sessions = 1, sim_panel = 5;
  std::optional<std::uint64_t> sim_seed;
  simulate->add_option("--oracle-lexicon", sim_lexicon)->required();
  simulate->add_option("--noise", sim_noise)->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--condition", sim_conditions, "Condition name, repeatable, or 'all'")
      ->required();
  simulate->add_option("--sampling", sim_sampling)->check(CLI::IsMember({"fixed", "random"}));
  simulate->add_option("--n-sessions", sim_sessions);
  simulate->add_option("--panel-size", sim_panel);
  simulate->add_option("--store", sim_store);
  simulate->add_option("--export", sim_export);
  simulate->add_option("--seed", sim_seed, "Oracle seed");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the study HTTP server");

  // export
  auto* exp = app.add_subcommand("export", "Write decisions, surveys, inputs and metrics");
  std::string export_out;
  exp->add_option("--out", export_out);

  CLI11_PARSE(app, argc, argv);
  selex::set_verbose(common.verbose);

  try {
    if (*synth) {
      const fs::path dir = synth_dir;
      fs::create_directories(dir);
      selex::save_corpus_jsonl(dir / "corpus.jsonl",
                               selex::synthetic::generate_reviews(synth_docs, synth_seed));
      selex::save_embeddings(dir / "embeddings.txt",
                             selex::synthetic::generate_embeddings(synth_seed + 1));
      std::ofstream lex(dir / "lexicon.txt");
      for (const auto& w : selex::synthetic::sentiment_lexicon()) lex << w << "\n";
      const json config = {
          {"corpus", {{"path", "corpus.jsonl"}, {"format", "jsonl"}}},
          {"splits", {{"sizes", {200, 500, 500}}, {"seed", 7}, {"dir", "splits"}}},
          {"classifier", {{"model", "model.json"}, {"reg_strength", 1.0}}},
          {"explanations", {{"dev", "dev_explanations.json"}, {"test", "test_explanations.json"}}},
          {"embeddings", "embeddings.txt"},
          {"roster", json::array({{{"condition", "control"}},
                                  {{"condition", "open_ended"}},
                                  {{"condition", "critique"}}})},
          {"store_dir", "store"},
          {"export_dir", "export"},
      };
      std::ofstream(dir / "config.json") << config.dump(2) << "\n";
      std::cout << "wrote " << synth_docs << " reviews, embeddings, lexicon and config to "
                << dir.string() << "\n";
      return 0;
    }

    selex::StudyConfig config = load_config(common);

    if (*split) {
      if (!split_corpus.empty()) config.corpus_path = split_corpus;
      if (!split_out.empty()) config.splits_dir = split_out;
      if (auto f = selex::parse_corpus_format(split_format); f && !split_corpus.empty()) {
        config.corpus_format = *f;
      }
      if (split_sizes.size() == 3) config.split_sizes = {split_sizes[0], split_sizes[1], split_sizes[2]};
      const auto corpus = selex::load_corpus(config.corpus_path, config.corpus_format);
      const auto splits =
          selex::make_splits(corpus, config.split_sizes, seed_or_env(split_seed, config.split_seed));
      selex::save_split_manifest(config.splits_dir, splits);
      std::cout << "split " << corpus.size() << " reviews into " << splits.train.size() << "/"
                << splits.dev.size() << "/" << splits.test.size() << " -> "
                << config.splits_dir.string() << "\n";
      return 0;
    }

    if (*train) {
      const auto splits = load_splits(config);
      const auto reviews = tokenize_all(splits.train);
      const auto clf = selex::train_reference(reviews, train_reg.value_or(config.classifier_reg),
                                              seed_or_env(train_seed, config.global_seed));
      const fs::path out = train_out.empty() ? fs::path(config.model) : fs::path(train_out);
      clf.save(out);
      std::cout << "train accuracy " << selex::evaluate_accuracy(clf, splits.train)
                << ", dev accuracy " << selex::evaluate_accuracy(clf, splits.dev)
                << ", test accuracy " << selex::evaluate_accuracy(clf, splits.test) << "\n"
                << "saved " << out.string() << "\n";
      return 0;
    }

    if (*explain) {
      const auto splits = load_splits(config);
      const auto& docs = explain_split == "train" ? splits.train
                         : explain_split == "dev" ? splits.dev
                                                  : splits.test;
      const auto clf = selex::open_classifier(explain_model.empty() ? config.model : explain_model);
      selex::LimeParams params = config.lime;
      params.seed = seed_or_env(explain_seed, params.seed);
      if (explain_samples) params.n_samples = *explain_samples;
      const auto reviews = tokenize_all(docs);
      selex::ExplanationCache cache;
      for (auto& e : selex::explain_all(*clf, reviews, params)) cache[e.doc_id] = std::move(e);
      fs::path out = explain_out;
      if (out.empty()) out = explain_split == "test" ? config.test_cache : config.dev_cache;
      selex::save_explanation_cache(out, cache);
      std::cout << "explained " << cache.size() << " reviews -> " << out.string() << "\n";
      return 0;
    }

    if (*select) {
      const auto splits = load_splits(config);
      const auto cache =
          selex::load_explanation_cache(select_cache.empty() ? config.dev_cache : fs::path(select_cache));
      std::vector<selex::Explanation> pool;
      std::map<std::string, selex::Label> truth;
      for (const auto& d : splits.dev) {
        auto it = cache.find(d.id);
        if (it == cache.end()) throw selex::LoadError("cache lacks dev review '" + d.id + "'");
        pool.push_back(it->second);
        truth[d.id] = d.label;
      }
      const auto sample = selex::sample_input_reviews(pool, truth);
      const json out = {{"doc_ids", sample.doc_ids},
                        {"n_prediction_correct", sample.n_prediction_correct}};
      if (select_out.empty()) {
        std::cout << out.dump(2) << "\n";
      } else {
        std::ofstream(select_out) << out.dump(2) << "\n";
        std::cout << "picked " << sample.doc_ids.size() << " reviews ("
                  << sample.n_prediction_correct << " predicted correctly) -> " << select_out << "\n";
      }
      return 0;
    }

    if (*simulate) {
      if (!sim_store.empty()) config.store_dir = sim_store;
      if (!sim_export.empty()) config.export_dir = sim_export;
      const auto sampling = *selex::parse_sampling(sim_sampling);
      std::vector<selex::Condition> conditions;
      for (const auto& c : sim_conditions) {
        if (c == "all") {
          for (auto n : {selex::ConditionName::kControl, selex::ConditionName::kOpenEnded,
                         selex::ConditionName::kCritique, selex::ConditionName::kPanelSelective}) {
            conditions.push_back({n, sampling});
          }
          continue;
        }
        auto name = selex::parse_condition_name(c);
        if (!name) throw selex::InvalidArgument("unknown condition '" + c + "'");
        conditions.push_back({*name, sampling});
      }
      selex::OracleAnnotator oracle{read_lexicon(sim_lexicon), sim_noise,
                                    seed_or_env(sim_seed, config.global_seed)};
      auto materials = std::make_shared<selex::StudyMaterials>(selex::StudyMaterials::load(config));
      const bool needs_panel = std::any_of(conditions.begin(), conditions.end(), [](const auto& c) {
        return c.input_source() == selex::InputSource::kPanel;
      });
      if (needs_panel && !materials->panel_model) {
        const auto records = selex::simulate_panel(*materials, oracle, sim_panel);
        materials->panel_model = selex::train_panel_model(
            *materials, records, selex::derive_seed(config.global_seed, "panel"),
            config.belief_reg, config.belief_threshold);
      }
      auto store = std::make_shared<selex::SessionStore>(config.store_dir);
      selex::StudyServer server(config, materials, store, virtual_clock());
      const auto ids = selex::run_simulation(server, {oracle, conditions, sim_sessions});
      const auto result = server.export_results(config.export_dir);
      std::cout << "simulated " << ids.size() << " sessions\n";
      if (!result.metrics["overall"].is_null()) {
        std::cout << "overall accuracy " << result.metrics["overall"]["accuracy"] << "\n";
      }
      for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
      return 0;
    }

    if (*serve) {
      auto materials =
          std::make_shared<const selex::StudyMaterials>(selex::StudyMaterials::load(config));
      auto store = std::make_shared<selex::SessionStore>(config.store_dir);
      selex::StudyServer server(config, materials, store);
      httplib::Server http;
      selex::register_routes(http, server);
      static httplib::Server* running = &http;
      std::signal(SIGINT, [](int) { running->stop(); });
      std::signal(SIGTERM, [](int) { running->stop(); });
      std::cout << "listening on http://" << config.host << ":" << config.port << "\n"
                << std::flush;
      if (!http.listen(config.host, config.port)) {
        throw selex::IoError("cannot listen on " + config.host + ":" + std::to_string(config.port));
      }
      return 0;
    }

    if (*exp) {
      auto materials =
          std::make_shared<const selex::StudyMaterials>(selex::StudyMaterials::load(config));
      auto store = std::make_shared<selex::SessionStore>(config.store_dir);
      selex::StudyServer server(config, materials, store);
      const fs::path out = export_out.empty() ? config.export_dir : fs::path(export_out);
      for (const auto& f : server.export_results(out).files) std::cout << "wrote " << f.string() << "\n";
      return 0;
    }
  } catch (const selex::Error& e) {
    std::cerr << "error (" << e.code() << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
