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
#include <string>
#include <vector>

#include "selex/belief.hpp"
#include "selex/corpus.hpp"

namespace selex::synthetic {

// Stand-in data for environments without the movie-review corpus or
// pretrained vectors. Reviews mix sentiment words (mostly agreeing with the
// label), topical words, function words and rare names; the vectors place
// sentiment words along a shared direction so relevance is learnable.

struct ReviewGenerator {
  std::size_t min_tokens = 40;
  std::size_t max_tokens = 110;
  double sentiment_rate = 0.13;     // share of tokens that are sentiment words
  double function_rate = 0.40;      // share of function words
  double name_rate = 0.01;          // share of out-of-vocabulary names
  double min_agreement = 0.55;      // per-review share of sentiment words
  double max_agreement = 0.90;      //   that agree with the label
};

std::vector<Document> generate_reviews(std::size_t n_docs, std::uint64_t seed,
                                       const ReviewGenerator& gen = {});

// 100-d vectors for every generator word except the rare names.
EmbeddingTable generate_embeddings(std::uint64_t seed);

// The 50 sentiment-bearing words (25 positive, 25 negative).
const std::vector<std::string>& sentiment_lexicon();
const std::vector<std::string>& positive_words();
const std::vector<std::string>& negative_words();
const std::vector<std::string>& function_words();
const std::vector<std::string>& topical_words();
const std::vector<std::string>& rare_names();

}  // namespace selex::synthetic
