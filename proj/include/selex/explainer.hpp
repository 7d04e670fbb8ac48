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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "selex/classifier.hpp"
#include "selex/corpus.hpp"

namespace selex {

inline constexpr std::size_t kKeywordCount = 10;

struct LimeParams {
  std::size_t n_samples = 1000;
  double kernel_width = 0.25;
  double ridge_strength = 1.0;
  double keep_probability = 0.5;
  std::uint64_t seed = 0;
};

struct Attribution {
  std::string word;
  double weight = 0.0;  // > 0 pushes toward positive sentiment
};

struct Explanation {
  std::string doc_id;
  Prediction prediction;
  std::vector<Attribution> attributions;  // sorted by |weight| desc
  double surrogate_r2 = 0.0;
  std::uint64_t seed = 0;
  LimeParams params;

  bool has_keyword(const std::string& word) const;
  const Attribution* find(const std::string& word) const;
};

// Keyword mask over a review's unique words (true = kept).
using WordMask = std::vector<bool>;

// Review text with every occurrence of the masked-out words deleted.
std::string mask_text(const TokenizedReview& review,
                      std::span<const std::string> unique_words,
                      const WordMask& mask);

// exp(-d^2 / width^2) with d the cosine distance between the binary mask and
// the all-ones mask.
double mask_proximity(const WordMask& mask, double kernel_width);

// Weighted ridge regression with an unpenalized intercept, solved through the
// normal equations. Rows of `design` are samples.
struct RidgeFit {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double r2 = 0.0;  // weighted coefficient of determination, clamped to [0,1]
};

RidgeFit weighted_ridge(std::span<const WordMask> design,
                        std::span<const double> targets,
                        std::span<const double> sample_weights, double alpha);

Explanation lime_explain(const BlackBoxClassifier& clf,
                         const TokenizedReview& review,
                         const LimeParams& params);

// Explains each review with its seed derived from (params.seed, doc id).
std::vector<Explanation> explain_all(const BlackBoxClassifier& clf,
                                     std::span<const TokenizedReview> reviews,
                                     const LimeParams& params);

// sqrt of the summed |weight| of each word across the pool.
std::map<std::string, double> global_word_importance(
    std::span<const Explanation> pool);

// Greedy coverage pick: returns k doc ids in pick order.
std::vector<std::string> splime_select(std::span<const Explanation> pool,
                                       std::size_t k);

// Value of the coverage objective for a set of picks.
double coverage_value(std::span<const Explanation> pool,
                      std::span<const std::string> picked_ids);

using ExplanationCache = std::map<std::string, Explanation>;

void save_explanation_cache(const std::filesystem::path& path,
                            const ExplanationCache& cache);
ExplanationCache load_explanation_cache(const std::filesystem::path& path);

}  // namespace selex
