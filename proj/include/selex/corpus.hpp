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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace selex {

enum class Label { kNegative, kPositive };

// Accepts "pos"/"positive"/"1" and "neg"/"negative"/"0", case-insensitive.
std::optional<Label> parse_label(std::string_view text);
std::string_view label_name(Label label);  // "positive" / "negative"

struct Document {
  std::string id;
  std::string text;
  Label label = Label::kNegative;
};

// Half-open byte range into the UTF-8 text.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct Token {
  std::string surface;
  std::string word;  // case-folded surface
  Span span;

  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenizedReview {
  Document doc;
  std::vector<Token> tokens;

  // Distinct words in order of first occurrence.
  std::vector<std::string> unique_words() const;
};

struct SplitSizes {
  std::size_t train = 200;
  std::size_t dev = 500;
  std::size_t test = 500;
};

struct Splits {
  std::vector<Document> train;
  std::vector<Document> dev;
  std::vector<Document> test;
};

enum class CorpusFormat { kJsonl, kCsv };

std::optional<CorpusFormat> parse_corpus_format(std::string_view text);

// Reads every record in file order. Errors name the offending line.
std::vector<Document> load_corpus(const std::filesystem::path& path,
                                  CorpusFormat format);

void save_corpus_jsonl(const std::filesystem::path& path,
                       const std::vector<Document>& docs);

// Class-balanced sampling without replacement. Deterministic in `seed`.
Splits make_splits(const std::vector<Document>& corpus, SplitSizes sizes,
                   std::uint64_t seed);

// Maximal runs of letters/digits with internal apostrophes, case-folded.
std::vector<Token> tokenize(std::string_view text);

std::string casefold(std::string_view text);

TokenizedReview tokenize_document(Document doc);

// Split manifests: one JSON file per split holding a list of ids.
void save_split_manifest(const std::filesystem::path& dir, const Splits& splits);

// Rebuilds splits from a manifest directory against the full corpus.
Splits load_split_manifest(const std::filesystem::path& dir,
                           const std::vector<Document>& corpus);

}  // namespace selex
