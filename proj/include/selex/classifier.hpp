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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "selex/corpus.hpp"

namespace selex {

struct Prediction {
  Label label = Label::kNegative;
  double prob_positive = 0.0;

  static Prediction from_probability(double prob_positive);
};

inline constexpr double kDecisionThreshold = 0.5;

// The model being explained. Implementations must be deterministic and
// safe to call concurrently once constructed.
class BlackBoxClassifier {
 public:
  virtual ~BlackBoxClassifier() = default;

  // One probability of the positive class per input, in input order.
  virtual std::vector<double> predict_proba(
      std::span<const std::string> texts) const = 0;
};

struct ReferenceConfig {
  double reg_strength = 1.0;
  std::uint64_t seed = 0;
};

// L2-regularized logistic regression over bag-of-words counts.
class ReferenceClassifier final : public BlackBoxClassifier {
 public:
  ReferenceClassifier(std::vector<std::string> vocabulary,
                      std::vector<double> weights, double bias,
                      ReferenceConfig config);

  std::vector<double> predict_proba(
      std::span<const std::string> texts) const override;

  double probability(std::string_view text) const;

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  const ReferenceConfig& config() const { return config_; }

  // Coefficient of `word`, or 0 when the word is outside the vocabulary.
  double coefficient(const std::string& word) const;

  void save(const std::filesystem::path& path) const;
  static ReferenceClassifier load(const std::filesystem::path& path);

 private:
  std::vector<std::string> vocabulary_;
  std::vector<double> weights_;
  double bias_ = 0.0;
  ReferenceConfig config_;
  std::unordered_map<std::string, std::size_t> index_;
};

ReferenceClassifier train_reference(std::span<const TokenizedReview> train,
                                    double reg_strength, std::uint64_t seed);

// Client for an external model served over HTTP:
//   POST {base}/predict  {"texts": [...]}  ->  {"probs_positive": [...]}
// Any transport error, non-200 status or malformed body raises
// ClassifierError. No retries.
class RemoteClassifier final : public BlackBoxClassifier {
 public:
  explicit RemoteClassifier(std::string url,
                            std::chrono::milliseconds timeout =
                                std::chrono::seconds(10));

  std::vector<double> predict_proba(
      std::span<const std::string> texts) const override;

  const std::string& url() const { return url_; }

 private:
  std::string url_;
  std::string origin_;  // scheme://host:port
  std::string path_;    // base path + "/predict"
  std::chrono::milliseconds timeout_;
};

// "http://..." or "https://..." selects the remote client; anything else is
// read as a reference model file.
std::shared_ptr<const BlackBoxClassifier> open_classifier(
    const std::string& model);

Prediction predict(const BlackBoxClassifier& clf, const std::string& text);

double evaluate_accuracy(const BlackBoxClassifier& clf,
                         std::span<const Document> docs);

}  // namespace selex
