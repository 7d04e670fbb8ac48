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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "selex/corpus.hpp"
#include "selex/explainer.hpp"

namespace selex {

inline constexpr std::size_t kEmbeddingDimension = 100;

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension = kEmbeddingDimension)
      : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }

  // Replaces an existing entry. Throws when the length is wrong.
  void insert(std::string word, std::vector<double> vector);

  // Absent words yield nullopt, never a zero vector.
  std::optional<std::span<const double>> lookup(std::string_view word) const;

  bool contains(std::string_view word) const { return lookup(word).has_value(); }

  std::vector<std::string> words() const;  // sorted

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Plain-text vectors, one "word v1 ... vD" per line. Duplicate words keep the
// last vector and emit a warning.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               std::size_t dimension = kEmbeddingDimension);

void save_embeddings(const std::filesystem::path& path,
                     const EmbeddingTable& table);

enum class Signal { kSelected, kAgree, kDisagree };
enum class Elicitation { kOpenEnded, kCritique };

std::string_view signal_name(Signal s);
std::string_view elicitation_name(Elicitation e);
std::optional<Signal> parse_signal(std::string_view text);
std::optional<Elicitation> parse_elicitation(std::string_view text);

struct InputRecord {
  std::string session_id;
  std::string doc_id;
  std::string word;
  Signal signal = Signal::kSelected;
  Elicitation elicitation = Elicitation::kOpenEnded;
  std::int64_t timestamp = 0;  // ms since epoch

  bool positive() const {
    return signal == Signal::kSelected || signal == Signal::kAgree;
  }

  friend bool operator==(const InputRecord&, const InputRecord&) = default;
};

// Checks the signal/elicitation pairing and, for critiques, that the word is
// one of the review's keywords.
void validate_record(const InputRecord& record,
                     const Explanation* review_explanation);

inline constexpr std::string_view kPanelSessionId = "panel";

// Majority vote per (doc, word) over critique records; ties resolve to
// disagree. Output is sorted by (doc_id, word).
std::vector<InputRecord> aggregate_panel(std::span<const InputRecord> records);

struct LabeledWord {
  std::string word;
  std::vector<double> embedding;
};

struct BeliefTrainingSet {
  std::vector<LabeledWord> positives;
  std::vector<LabeledWord> negatives;
  std::uint64_t seed = 0;
};

BeliefTrainingSet build_training_set(std::span<const InputRecord> records,
                                     std::span<const TokenizedReview> reviews,
                                     const EmbeddingTable& emb,
                                     std::uint64_t seed);

struct BeliefMeta {
  std::uint64_t seed = 0;
  double reg_strength = 1.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

enum class Relevance { kRelevant, kNotRelevant, kUnknown };

std::string_view relevance_name(Relevance r);

struct BeliefModel {
  std::vector<double> weights;
  double bias = 0.0;
  double threshold = 0.5;
  BeliefMeta training_meta;

  double probability(std::span<const double> embedding) const;

  void save(const std::filesystem::path& path) const;
  static BeliefModel load(const std::filesystem::path& path);
};

BeliefModel train_belief(const BeliefTrainingSet& ts, double reg_strength,
                         double threshold = 0.5);

Relevance predict_relevance(const BeliefModel& model, std::string_view word,
                            const EmbeddingTable& emb);

// JSONL persistence for input records.
std::string record_to_json_line(const InputRecord& r);
InputRecord record_from_json_line(std::string_view line);
std::vector<InputRecord> load_records(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path,
                  std::span<const InputRecord> records);

}  // namespace selex
