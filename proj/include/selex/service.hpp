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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selex/belief.hpp"
#include "selex/classifier.hpp"
#include "selex/corpus.hpp"
#include "selex/explainer.hpp"
#include "selex/selector.hpp"
#include "selex/store.hpp"
#include "selex/study.hpp"

namespace httplib {
class Server;
}

namespace selex {

struct RosterEntry {
  Condition condition;
  unsigned weight = 1;
};

struct StudyConfig {
  std::filesystem::path corpus_path;
  CorpusFormat corpus_format = CorpusFormat::kJsonl;
  SplitSizes split_sizes;
  std::uint64_t split_seed = 7;
  std::filesystem::path splits_dir = "splits";
  std::string model = "model.json";  // file path or http(s) URL
  double classifier_reg = 1.0;
  std::filesystem::path dev_cache = "dev_explanations.json";
  std::filesystem::path test_cache = "test_explanations.json";
  std::filesystem::path embeddings_path;
  std::optional<std::filesystem::path> panel_records;
  std::vector<RosterEntry> roster;
  std::uint64_t global_seed = 0;
  std::uint64_t fixed_sample_seed = 0;
  double belief_reg = 1.0;
  double belief_threshold = 0.5;
  bool gray_unknown = false;
  LimeParams lime;
  std::filesystem::path store_dir = "store";
  std::filesystem::path export_dir = "export";
  std::string host = "127.0.0.1";
  int port = 8080;

  nlohmann::json to_json() const;
  // Relative paths are resolved against `base_dir`.
  static StudyConfig from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir = {});
  static StudyConfig load(const std::filesystem::path& path);

  // Stable hex digest of the canonical JSON form.
  std::string hash() const;
};

// Applies SELEX_SEED, when set, to the global seed.
void apply_seed_override(StudyConfig& config);

// Everything a running study reads but never mutates.
struct StudyMaterials {
  std::map<std::string, TokenizedReview> reviews;  // dev and test splits
  ExplanationCache dev_explanations;
  ExplanationCache test_explanations;
  EmbeddingTable embeddings;
  InputSample input_sample;
  std::map<std::string, TaskItem> task_items;  // test split
  std::optional<BeliefModel> panel_model;

  std::vector<TaskItem> task_candidates() const;
  std::vector<TokenizedReview> input_reviews() const;

  // Reads corpus, split manifest, caches and embeddings named by the config,
  // and trains the panel model when panel records are configured.
  static StudyMaterials load(const StudyConfig& config);
};

// Builds the shared model from a panel's critique records on the input
// sample: majority vote, negative sampling, logistic fit.
BeliefModel train_panel_model(const StudyMaterials& materials,
                              std::span<const InputRecord> panel_records,
                              std::uint64_t seed, double reg_strength,
                              double threshold);

using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

struct ExportResult {
  std::vector<std::filesystem::path> files;
  nlohmann::json metrics;
};

class StudyServer {
 public:
  StudyServer(StudyConfig config, std::shared_ptr<const StudyMaterials> materials,
              std::shared_ptr<SessionStore> store, Clock clock = system_clock_ms);
  ~StudyServer();

  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  // Round-robin over the weighted roster unless a condition is named.
  Session create_session(const std::optional<std::string>& condition = std::nullopt,
                         const std::optional<std::string>& sampling = std::nullopt);
  Session consent(const std::string& session_id);
  nlohmann::json serve_next_item(const std::string& session_id);
  // Words are (word, signal) pairs for the current input review.
  Session submit_input(const std::string& session_id, const std::string& doc_id,
                       const std::vector<std::pair<std::string, std::string>>& words);
  Session submit_decision(const std::string& session_id, const std::string& doc_id,
                          Label human_label);
  Session submit_survey(const std::string& session_id, SurveyResponse response);

  Session session(const std::string& session_id) const;
  void wait_for_training(const std::string& session_id);

  // The rendering a session sees for a task review.
  SelectiveExplanation task_rendering(const Session& s, const std::string& doc_id) const;

  ExportResult export_results(const std::filesystem::path& out_dir) const;

  const StudyConfig& config() const { return config_; }
  const StudyMaterials& materials() const { return *materials_; }
  SessionStore& store() { return *store_; }

 private:
  std::mutex& session_mutex(const std::string& id);
  Session load_session(const std::string& id) const;
  void start_training(const Session& s);
  void train_session(std::string session_id);
  void reconcile();
  std::shared_ptr<const BeliefModel> session_model(const Session& s) const;

  StudyConfig config_;
  std::string config_hash_;
  std::shared_ptr<const StudyMaterials> materials_;
  std::shared_ptr<SessionStore> store_;
  Clock clock_;
  std::vector<Condition> roster_slots_;

  mutable std::mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_mutexes_;
  std::map<std::string, std::shared_future<void>> training_jobs_;
  mutable std::map<std::string, std::shared_ptr<const BeliefModel>> model_cache_;
  std::size_t created_ = 0;
};

// HTTP binding: POST /sessions, POST /sessions/{id}/consent,
// GET /sessions/{id}/next, POST /sessions/{id}/input,
// POST /sessions/{id}/decision, POST /sessions/{id}/survey,
// GET /survey/schema, GET /export.
void register_routes(httplib::Server& http, StudyServer& server);

int http_status_for(const std::string& error_code);

// Scripted sessions with simulated participants.
struct SimulationOptions {
  OracleAnnotator oracle;
  std::vector<Condition> conditions;
  std::size_t sessions_per_condition = 1;
};

std::vector<std::string> run_simulation(StudyServer& server,
                                        const SimulationOptions& options);

// Critique records from `panel_size` simulated annotators on the input sample.
std::vector<InputRecord> simulate_panel(const StudyMaterials& materials,
                                        const OracleAnnotator& oracle,
                                        std::size_t panel_size);

}  // namespace selex
