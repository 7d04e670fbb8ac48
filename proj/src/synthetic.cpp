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

#include "selex/synthetic.hpp"

#include <cmath>

#include "selex/random.hpp"

namespace selex::synthetic {

const std::vector<std::string>& positive_words() {
  static const std::vector<std::string> words = {
      "great",     "excellent", "wonderful",  "masterpiece", "brilliant",
      "superb",    "enjoyable", "beautiful",  "moving",      "touching",
      "hilarious", "charming",  "delightful", "stunning",    "fantastic",
      "best",      "good",      "loved",      "perfect",     "amazing",
      "gripping",  "clever",    "memorable",  "outstanding", "engaging"};
  return words;
}

const std::vector<std::string>& negative_words() {
  static const std::vector<std::string> words = {
      "bad",      "worst",   "awful",       "terrible",    "boring",
      "dull",     "poor",    "waste",       "horrible",    "annoying",
      "stupid",   "mess",    "weak",        "lame",        "disappointing",
      "pointless", "mediocre", "tedious",   "ridiculous",  "bland",
      "forgettable", "painful", "clumsy",   "unfunny",     "hated"};
  return words;
}

const std::vector<std::string>& sentiment_lexicon() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> all = positive_words();
    all.insert(all.end(), negative_words().begin(), negative_words().end());
    return all;
  }();
  return words;
}

const std::vector<std::string>& function_words() {
  static const std::vector<std::string> words = {
      "the",  "a",     "this",  "is",    "was",   "it",    "to",   "of",
      "and",  "in",    "that",  "for",   "with",  "on",    "but",  "as",
      "at",   "by",    "be",    "are",   "i",     "you",   "he",   "she",
      "they", "we",    "his",   "her",   "its",   "their", "not",  "so",
      "just", "very",  "really", "all",  "there", "what",  "about", "from",
      "have", "has",   "had",   "one",   "out",   "if",    "or",   "more",
      "don't", "isn't", "it's", "can't"};
  return words;
}

const std::vector<std::string>& topical_words() {
  static const std::vector<std::string> words = {
      "movie",     "film",     "plot",      "story",     "actor",
      "actors",    "acting",   "director",  "scene",     "scenes",
      "character", "characters", "script",  "ending",    "music",
      "cast",      "camera",   "time",      "people",    "hour",
      "minutes",   "screen",   "role",      "performance", "dialogue",
      "effects",   "budget",   "sequel",    "series",    "audience",
      "watch",     "watched",  "see",       "seen",      "think",
      "thought",   "make",     "made",      "know",      "seems",
      "look",      "looks",    "find",      "give",      "gives",
      "take",      "takes",    "show",      "shows",     "play",
      "plays",     "played",   "version",   "original",  "book",
      "novel",     "world",    "life",      "love",      "family",
      "friend",    "friends",  "father",    "mother",    "son",
      "daughter",  "wife",     "husband",   "man",       "woman",
      "girl",      "boy",      "kids",      "town",      "city",
      "house",     "night",    "day",       "year",      "years",
      "war",       "police",   "murder",    "killer",    "horror",
      "comedy",    "drama",    "action",    "romance",   "thriller",
      "documentary", "western", "animation", "studio",   "theater",
      "dvd",       "tv",       "episode",   "season",    "production",
      "set",       "costumes", "soundtrack", "song",     "songs",
      "first",     "last",     "second",    "two",       "three",
      "part",      "end",      "beginning", "middle",    "way",
      "thing",     "things",   "lot",       "bit",       "kind",
      "point",     "moment",   "moments",   "line",      "lines",
      "face",      "eyes",     "voice",     "back",      "place",
      "another",   "other",    "some",      "many",      "much",
      "still",     "even",     "also",      "again",     "never",
      "ever",      "always",   "often",     "maybe",     "probably",
      "here",      "now",      "then",      "when",      "while",
      "after",     "before",   "through",   "over",      "into",
      "around",    "because",  "though",    "however",   "although"};
  return words;
}

const std::vector<std::string>& rare_names() {
  static const std::vector<std::string> words = {
      "zorblatt", "kessington", "marvolo", "quendris", "thaddeus",
      "vorlak",   "ibsworth",   "calloway", "drummond", "fenwick",
      "halvorsen", "jessup",    "lindqvist", "montague", "okonkwo",
      "pemberton", "rourke",    "strickland", "thibault", "wexley"};
  return words;
}

namespace {

// Roughly Zipfian pick: index i has weight 1 / (i + 2).
std::size_t zipf_index(Rng& rng, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += 1.0 / static_cast<double>(i + 2);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < n; ++i) {
    u -= 1.0 / static_cast<double>(i + 2);
    if (u <= 0) return i;
  }
  return n - 1;
}

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 32);
  return w;
}

}  // namespace

std::vector<Document> generate_reviews(std::size_t n_docs, std::uint64_t seed,
                                       const ReviewGenerator& gen) {
  Rng rng(seed);
  const auto& fn = function_words();
  const auto& topic = topical_words();
  const auto& names = rare_names();
  std::vector<Document> docs;
  docs.reserve(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) {
    const Label label = d % 2 == 0 ? Label::kPositive : Label::kNegative;
    const auto& agreeing = label == Label::kPositive ? positive_words() : negative_words();
    const auto& opposing = label == Label::kPositive ? negative_words() : positive_words();
    const double agreement =
        gen.min_agreement + (gen.max_agreement - gen.min_agreement) * rng.uniform();
    const std::size_t length =
        gen.min_tokens + rng.uniform_index(gen.max_tokens - gen.min_tokens + 1);

    std::string text;
    std::size_t sentence_left = 0;
    bool sentence_start = true;
    for (std::size_t t = 0; t < length; ++t) {
      if (sentence_left == 0) sentence_left = 6 + rng.uniform_index(10);
      const double u = rng.uniform();
      std::string word;
      if (u < gen.sentiment_rate) {
        const auto& src = rng.bernoulli(agreement) ? agreeing : opposing;
        word = src[zipf_index(rng, src.size())];
      } else if (u < gen.sentiment_rate + gen.function_rate) {
        word = fn[zipf_index(rng, fn.size())];
      } else if (u < gen.sentiment_rate + gen.function_rate + gen.name_rate) {
        word = capitalize(names[rng.uniform_index(names.size())]);
      } else {
        word = topic[zipf_index(rng, topic.size())];
      }
      if (sentence_start) word = capitalize(word);
      if (!text.empty()) text.push_back(' ');
      text += word;
      sentence_start = false;
      if (--sentence_left == 0 || t + 1 == length) {
        text += rng.bernoulli(0.15) ? "!" : ".";
        sentence_start = true;
      } else if (rng.bernoulli(0.05)) {
        text += ",";
      }
    }
    docs.push_back({"r" + std::to_string(d), std::move(text), label});
  }
  return docs;
}

EmbeddingTable generate_embeddings(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t dim = kEmbeddingDimension;
  auto noise = [&](double scale) {
    std::vector<double> v(dim);
    for (auto& x : v) x = scale * rng.normal();
    return v;
  };
  auto unit = [&]() {
    auto v = noise(1.0);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
  };
  const auto sentiment_axis = unit();
  const auto polarity_axis = unit();
  const auto function_axis = unit();
  std::vector<std::vector<double>> topic_centers;
  for (int i = 0; i < 6; ++i) topic_centers.push_back(unit());

  auto combine = [&](std::vector<double> base, const std::vector<double>& axis,
                     double weight) {
    for (std::size_t i = 0; i < dim; ++i) base[i] += weight * axis[i];
    return base;
  };

  constexpr double kNoise = 0.3;
  EmbeddingTable table(dim);
  for (const auto& w : positive_words()) {
    auto v = combine(noise(kNoise), sentiment_axis, 2.0);
    table.insert(w, combine(std::move(v), polarity_axis, 1.5));
  }
  for (const auto& w : negative_words()) {
    auto v = combine(noise(kNoise), sentiment_axis, 2.0);
    table.insert(w, combine(std::move(v), polarity_axis, -1.5));
  }
  for (const auto& w : function_words()) {
    table.insert(w, combine(noise(kNoise), function_axis, 2.0));
  }
  const auto& topic = topical_words();
  for (std::size_t i = 0; i < topic.size(); ++i) {
    table.insert(topic[i],
                 combine(noise(kNoise), topic_centers[i % topic_centers.size()], 1.5));
  }
  return table;
}

}  // namespace selex::synthetic
