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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "selex/belief.hpp"
#include "selex/error.hpp"
#include "selex/log.hpp"
#include "selex/random.hpp"
#include "support.hpp"

using namespace selex;
using selex::testing::make_review;
using selex::testing::TempDir;

namespace {

std::vector<double> axis(double v, std::size_t dim = kEmbeddingDimension) {
  std::vector<double> e(dim, 0.0);
  e[0] = v;
  return e;
}

InputRecord rec(const std::string& session, const std::string& doc, const std::string& word,
                Signal s, Elicitation e = Elicitation::kCritique) {
  return {session, doc, word, s, e, 0};
}

// Words w0..w(n-1), each with a random vector.
EmbeddingTable random_table(const std::vector<std::string>& words, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingTable t;
  for (const auto& w : words) {
    std::vector<double> v(kEmbeddingDimension);
    for (double& x : v) x = rng.normal();
    t.insert(w, v);
  }
  return t;
}

struct WarningCapture {
  std::vector<std::string> messages;
  WarningSink previous;
  WarningCapture() {
    previous = set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { set_warning_sink(previous); }
};

}  // namespace

TEST_SUITE("belief") {

TEST_CASE("embedding file parsing") {
  TempDir dir;
  std::string line = "good";
  for (int i = 0; i < 100; ++i) line += " " + std::to_string(i * 0.01);
  {
    std::ofstream out(dir / "e.txt");
    out << line << "\n";
    out << "bad";
    for (int i = 0; i < 100; ++i) out << " -1";
    out << "\n";
  }
  const auto t = load_embeddings(dir / "e.txt");
  REQUIRE(t.lookup("good").has_value());
  CHECK(t.lookup("good")->size() == 100);
  CHECK((*t.lookup("good"))[1] == doctest::Approx(0.01));
  CHECK_FALSE(t.lookup("zxqv").has_value());
  CHECK(t.words() == std::vector<std::string>{"bad", "good"});

  {
    std::ofstream out(dir / "short.txt");
    out << line << "\n" << "bad";
    for (int i = 0; i < 99; ++i) out << " 0.5";
    out << "\n";
  }
  CHECK_THROWS_WITH_AS(load_embeddings(dir / "short.txt"), doctest::Contains("line 2"),
                       LoadError);
  {
    std::ofstream out(dir / "junk.txt");
    out << "word";
    for (int i = 0; i < 100; ++i) out << (i == 50 ? " x1" : " 0");
    out << "\n";
  }
  CHECK_THROWS_WITH_AS(load_embeddings(dir / "junk.txt"), doctest::Contains("line 1"),
                       LoadError);
}

TEST_CASE("duplicate embedding rows keep the last and warn") {
  TempDir dir;
  {
    std::ofstream out(dir / "d.txt");
    for (int v : {1, 2}) {
      out << "dup";
      for (int i = 0; i < 100; ++i) out << " " << v;
      out << "\n";
    }
  }
  WarningCapture warnings;
  const auto t = load_embeddings(dir / "d.txt");
  CHECK((*t.lookup("dup"))[0] == 2.0);
  CHECK(warnings.messages.size() == 1);
}

TEST_CASE("embedding save/load round-trip is exact") {
  TempDir dir;
  const auto t = random_table({"a", "b", "c"}, 3);
  save_embeddings(dir / "t.txt", t);
  const auto back = load_embeddings(dir / "t.txt");
  for (const auto& w : t.words()) {
    const auto x = *t.lookup(w);
    const auto y = *back.lookup(w);
    CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
  }
  EmbeddingTable small;
  CHECK_THROWS_AS(small.insert("x", std::vector<double>(3)), InvalidArgument);
}

TEST_CASE("record validation") {
  Explanation e;
  e.doc_id = "r1";
  e.attributions = {{"great", 1.0}};
  CHECK_NOTHROW(validate_record(rec("s", "r1", "great", Signal::kAgree), &e));
  CHECK_THROWS_AS(validate_record(rec("s", "r1", "plot", Signal::kAgree), &e), InvalidArgument);
  CHECK_THROWS_AS(validate_record(rec("s", "r1", "great", Signal::kSelected), &e),
                  InvalidArgument);
  CHECK_THROWS_AS(
      validate_record(rec("s", "r1", "x", Signal::kAgree, Elicitation::kOpenEnded), nullptr),
      InvalidArgument);
  CHECK_NOTHROW(
      validate_record(rec("s", "r1", "x", Signal::kSelected, Elicitation::kOpenEnded), nullptr));
}

TEST_CASE("panel majority vote") {
  SUBCASE("two agree, one disagrees") {
    const std::vector<InputRecord> rs = {rec("a", "r1", "annoying", Signal::kAgree),
                                         rec("b", "r1", "annoying", Signal::kAgree),
                                         rec("c", "r1", "annoying", Signal::kDisagree)};
    const auto out = aggregate_panel(rs);
    REQUIRE(out.size() == 1);
    CHECK(out[0].signal == Signal::kAgree);
    CHECK(out[0].session_id == kPanelSessionId);
  }
  SUBCASE("single annotator passes through relabeled") {
    const std::vector<InputRecord> rs = {rec("a", "r1", "good", Signal::kAgree),
                                         rec("a", "r1", "the", Signal::kDisagree)};
    const auto out = aggregate_panel(rs);
    REQUIRE(out.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      InputRecord expected = rs[i];
      expected.session_id = std::string(kPanelSessionId);
      CHECK(out[i] == expected);
    }
  }
  SUBCASE("ties resolve to disagree") {
    const std::vector<InputRecord> rs = {
        rec("a", "r1", "w", Signal::kAgree), rec("b", "r1", "w", Signal::kAgree),
        rec("c", "r1", "w", Signal::kDisagree), rec("d", "r1", "w", Signal::kDisagree)};
    CHECK(aggregate_panel(rs).at(0).signal == Signal::kDisagree);
  }
  SUBCASE("open-ended records are rejected") {
    const std::vector<InputRecord> rs = {
        rec("a", "r1", "w", Signal::kAgree),
        rec("b", "r1", "w", Signal::kSelected, Elicitation::kOpenEnded)};
    CHECK_THROWS_AS(aggregate_panel(rs), InvalidArgument);
  }
}

TEST_CASE("panel vote ignores record order") {
  Rng rng(8);
  const std::vector<std::string> words = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<InputRecord> rs;
    for (int annot = 0; annot < 5; ++annot) {
      for (const auto& doc : {"r1", "r2"}) {
        for (const auto& w : words) {
          rs.push_back(rec("s" + std::to_string(annot), doc, w,
                           rng.bernoulli(0.5) ? Signal::kAgree : Signal::kDisagree));
        }
      }
    }
    const auto reference = aggregate_panel(rs);
    rng.shuffle(rs);
    CHECK(aggregate_panel(rs) == reference);
  }
}

TEST_CASE("training set examples") {
  std::vector<std::string> vocab;
  std::string text;
  for (int i = 0; i < 45; ++i) {
    vocab.push_back("w" + std::to_string(i));
    text += vocab.back() + " ";
  }
  const auto emb = random_table(vocab, 1);
  const std::vector<TokenizedReview> reviews = {make_review("r1", text)};

  SUBCASE("five selected words, forty left over") {
    std::vector<InputRecord> rs;
    for (int i = 0; i < 5; ++i) {
      rs.push_back(rec("s", "r1", vocab[i], Signal::kSelected, Elicitation::kOpenEnded));
    }
    const auto ts = build_training_set(rs, reviews, emb, 3);
    CHECK(ts.positives.size() == 5);
    CHECK(ts.negatives.size() == 5);
  }
  SUBCASE("no positives") {
    const std::vector<InputRecord> rs = {rec("s", "r1", "w1", Signal::kDisagree)};
    CHECK_THROWS_AS(build_training_set(rs, reviews, emb, 3), InsufficientInput);
    CHECK_THROWS_AS(build_training_set(std::vector<InputRecord>{}, reviews, emb, 3),
                    InsufficientInput);
  }
  SUBCASE("pool smaller than the positives") {
    const auto short_review = make_review("r2", "w0 w1 w2 w3 w4 w5 w6 w7 w8 w9 w10");
    std::vector<InputRecord> rs;
    for (int i = 0; i < 8; ++i) {
      rs.push_back(rec("s", "r2", vocab[i], Signal::kSelected, Elicitation::kOpenEnded));
    }
    WarningCapture warnings;
    const auto ts = build_training_set(rs, std::vector<TokenizedReview>{short_review}, emb, 3);
    CHECK(ts.positives.size() == 8);
    CHECK(ts.negatives.size() == 3);
    CHECK(warnings.messages.size() == 1);
  }
  SUBCASE("out-of-vocabulary words are skipped on both sides") {
    const auto r = make_review("r3", "w0 zzz w1 w2 qqq");
    const std::vector<InputRecord> rs = {
        rec("s", "r3", "w0", Signal::kSelected, Elicitation::kOpenEnded),
        rec("s", "r3", "zzz", Signal::kSelected, Elicitation::kOpenEnded)};
    const auto ts = build_training_set(rs, std::vector<TokenizedReview>{r}, emb, 3);
    REQUIRE(ts.positives.size() == 1);
    CHECK(ts.positives[0].word == "w0");
    for (const auto& n : ts.negatives) CHECK(n.word != "qqq");
  }
  SUBCASE("unknown review") {
    const std::vector<InputRecord> rs = {rec("s", "nope", "w0", Signal::kAgree)};
    CHECK_THROWS_AS(build_training_set(rs, reviews, emb, 3), InvalidArgument);
  }
}

TEST_CASE("negative sampling is balanced and disjoint on random inputs") {
  std::vector<std::string> vocab;
  for (int i = 0; i < 60; ++i) vocab.push_back("v" + std::to_string(i));
  const auto emb = random_table(vocab, 2);
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TokenizedReview> reviews;
    std::vector<InputRecord> rs;
    const auto n_reviews = 1 + rng.uniform_index(3);
    for (std::uint64_t d = 0; d < n_reviews; ++d) {
      const auto words = rng.sample(std::span<const std::string>(vocab), 2 + rng.uniform_index(20));
      std::string text;
      for (const auto& w : words) text += w + " ";
      const std::string id = "d" + std::to_string(d);
      reviews.push_back(make_review(id, text));
      for (const auto& w : words) {
        if (rng.bernoulli(0.3)) {
          rs.push_back(rec("s", id, w, rng.bernoulli(0.7) ? Signal::kAgree : Signal::kDisagree));
        }
      }
    }
    std::set<std::string> pos_words, pool, annotated;
    for (const auto& r : rs) {
      annotated.insert(r.doc_id);
      if (r.positive()) pos_words.insert(r.word);
    }
    for (const auto& r : reviews) {
      if (!annotated.contains(r.doc.id)) continue;
      for (const auto& w : r.unique_words()) {
        if (!pos_words.contains(w)) pool.insert(w);
      }
    }
    if (pos_words.empty()) continue;
    WarningCapture quiet;
    const auto ts = build_training_set(rs, reviews, emb, trial);
    CHECK(ts.positives.size() == pos_words.size());
    CHECK(ts.negatives.size() == std::min(pos_words.size(), pool.size()));
    std::set<std::string> neg;
    for (const auto& n : ts.negatives) {
      CHECK_FALSE(pos_words.contains(n.word));
      CHECK(pool.contains(n.word));
      neg.insert(n.word);
    }
    CHECK(neg.size() == ts.negatives.size());
  }
}

TEST_CASE("belief model on separable synthetic clusters") {
  BeliefTrainingSet ts;
  for (int i = 0; i < 5; ++i) {
    auto p = axis(1.0);
    auto n = axis(-1.0);
    p[1 + i] = 0.1;
    n[1 + i] = -0.1;
    ts.positives.push_back({"p" + std::to_string(i), p});
    ts.negatives.push_back({"n" + std::to_string(i), n});
  }
  const auto model = train_belief(ts, 1.0);
  for (const auto& p : ts.positives) CHECK(model.probability(p.embedding) >= 0.5);
  for (const auto& n : ts.negatives) CHECK(model.probability(n.embedding) < 0.5);

  EmbeddingTable emb;
  emb.insert("centroid", axis(1.0));
  CHECK(predict_relevance(model, "centroid", emb) == Relevance::kRelevant);
  CHECK(predict_relevance(model, "missing", emb) == Relevance::kUnknown);

  const auto again = train_belief(ts, 1.0);
  CHECK(again.weights == model.weights);
  CHECK(again.bias == model.bias);
  CHECK(model.training_meta.n_pos == 5);
  CHECK(model.training_meta.n_neg == 5);

  // Monotone along the weight direction.
  double last = -1.0;
  for (double t = -3.0; t <= 3.0; t += 0.5) {
    std::vector<double> v(kEmbeddingDimension);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = t * model.weights[i];
    const double p = model.probability(v);
    CHECK(p > last);
    last = p;
  }
}

TEST_CASE("relevance threshold is inclusive") {
  BeliefModel m;
  m.weights.assign(kEmbeddingDimension, 0.0);
  m.bias = 0.0;  // probability exactly 0.5 everywhere
  EmbeddingTable emb;
  emb.insert("w", axis(3.0));
  CHECK(predict_relevance(m, "w", emb) == Relevance::kRelevant);
  m.bias = -1e-9;
  CHECK(predict_relevance(m, "w", emb) == Relevance::kNotRelevant);
}

TEST_CASE("belief training preconditions") {
  BeliefTrainingSet ts;
  ts.positives.push_back({"a", axis(1.0)});
  CHECK_THROWS_AS(train_belief(ts, 1.0), InvalidArgument);
}

TEST_CASE("model and record persistence") {
  TempDir dir;
  BeliefTrainingSet ts;
  ts.positives.push_back({"a", axis(1.0)});
  ts.negatives.push_back({"b", axis(-1.0)});
  ts.seed = 77;
  const auto m = train_belief(ts, 0.5, 0.6);
  m.save(dir / "m.json");
  const auto back = BeliefModel::load(dir / "m.json");
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.threshold == 0.6);
  CHECK(back.training_meta.seed == 77);
  CHECK(back.training_meta.reg_strength == 0.5);

  const std::vector<InputRecord> rs = {
      {"s1", "r1", "great", Signal::kAgree, Elicitation::kCritique, 1700000000123},
      {"s1", "r1", "caf\xC3\xA9", Signal::kSelected, Elicitation::kOpenEnded, 5}};
  save_records(dir / "r.jsonl", rs);
  CHECK(load_records(dir / "r.jsonl") == rs);
  CHECK(record_from_json_line(record_to_json_line(rs[0])) == rs[0]);
  CHECK_THROWS(record_from_json_line("{\"word\":\"x\"}"));
}

}
