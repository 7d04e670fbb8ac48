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

#include "support.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include "selex/synthetic.hpp"

namespace selex::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("selex-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

TokenizedReview make_review(const std::string& id, const std::string& text, Label label) {
  return tokenize_document(Document{id, text, label});
}

namespace {

std::map<std::string, int> word_counts(const std::string& text) {
  std::map<std::string, int> counts;
  for (const auto& t : tokenize(text)) ++counts[t.word];
  return counts;
}

}  // namespace

LinearProbabilityClassifier::LinearProbabilityClassifier(std::map<std::string, double> coefficients,
                                                         double scale)
    : coefficients_(std::move(coefficients)), scale_(scale) {}

std::vector<double> LinearProbabilityClassifier::predict_proba(
    std::span<const std::string> texts) const {
  std::vector<double> out;
  for (const auto& text : texts) {
    double sum = 0.0;
    for (const auto& [w, n] : word_counts(text)) {
      auto it = coefficients_.find(w);
      if (it != coefficients_.end()) sum += it->second * n;
    }
    out.push_back(0.5 + sum / (2.0 * scale_));
  }
  return out;
}

double LinearProbabilityClassifier::coefficient(const std::string& word) const {
  auto it = coefficients_.find(word);
  return it == coefficients_.end() ? 0.0 : it->second;
}

SigmoidClassifier::SigmoidClassifier(std::map<std::string, double> coefficients, double bias)
    : coefficients_(std::move(coefficients)), bias_(bias) {}

std::vector<double> SigmoidClassifier::predict_proba(std::span<const std::string> texts) const {
  std::vector<double> out;
  for (const auto& text : texts) {
    double z = bias_;
    for (const auto& [w, n] : word_counts(text)) {
      auto it = coefficients_.find(w);
      if (it != coefficients_.end()) z += it->second * n;
    }
    out.push_back(1.0 / (1.0 + std::exp(-z)));
  }
  return out;
}

std::vector<double> CountingClassifier::predict_proba(std::span<const std::string> texts) const {
  ++calls_;
  return inner_.predict_proba(texts);
}

namespace {

const std::vector<Document>& cached_corpus(std::size_t n, std::uint64_t seed) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::uint64_t>, std::vector<Document>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{n, seed}];
  if (slot.empty()) slot = synthetic::generate_reviews(n, seed);
  return slot;
}

const EmbeddingTable& cached_embeddings(std::uint64_t seed) {
  static std::mutex mutex;
  static std::map<std::uint64_t, EmbeddingTable> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(seed);
  if (it == cache.end()) it = cache.emplace(seed, synthetic::generate_embeddings(seed)).first;
  return it->second;
}

std::vector<TokenizedReview> tokenize_all(const std::vector<Document>& docs) {
  std::vector<TokenizedReview> out;
  for (const auto& d : docs) out.push_back(tokenize_document(d));
  return out;
}

}  // namespace

Pipeline build_pipeline(const PipelineOptions& options) {
  Pipeline p;
  p.options = options;
  p.corpus = cached_corpus(options.n_docs, options.corpus_seed);
  p.splits = make_splits(p.corpus, options.sizes, options.seed);
  const auto train = tokenize_all(p.splits.train);
  p.classifier = std::make_shared<const ReferenceClassifier>(
      train_reference(train, 1.0, options.seed));

  LimeParams params;
  params.seed = options.seed;
  params.n_samples = options.lime_samples;
  auto m = std::make_shared<StudyMaterials>();
  const auto dev = tokenize_all(p.splits.dev);
  const auto test = tokenize_all(p.splits.test);
  for (auto& e : explain_all(*p.classifier, dev, params)) m->dev_explanations[e.doc_id] = e;
  for (auto& e : explain_all(*p.classifier, test, params)) m->test_explanations[e.doc_id] = e;
  for (const auto& r : dev) m->reviews.emplace(r.doc.id, r);
  for (const auto& r : test) m->reviews.emplace(r.doc.id, r);
  m->embeddings = cached_embeddings(options.corpus_seed + 1);

  std::vector<Explanation> pool;
  std::map<std::string, Label> truth;
  for (const auto& d : p.splits.dev) {
    pool.push_back(m->dev_explanations.at(d.id));
    truth[d.id] = d.label;
  }
  m->input_sample = sample_input_reviews(pool, truth);
  for (const auto& d : p.splits.test) {
    m->task_items[d.id] = {d.id, d.label, m->test_explanations.at(d.id).prediction.label};
  }
  p.materials = std::move(m);
  return p;
}

OracleAnnotator lexicon_oracle(double noise_rate, std::uint64_t seed) {
  OracleAnnotator o;
  const auto& lex = synthetic::sentiment_lexicon();
  o.lexicon.insert(lex.begin(), lex.end());
  o.noise_rate = noise_rate;
  o.seed = seed;
  return o;
}

StudyConfig write_pipeline_files(const Pipeline& p, const fs::path& dir) {
  fs::create_directories(dir);
  StudyConfig c;
  c.corpus_path = dir / "corpus.jsonl";
  c.splits_dir = dir / "splits";
  c.model = (dir / "model.json").string();
  c.dev_cache = dir / "dev.json";
  c.test_cache = dir / "test.json";
  c.embeddings_path = dir / "embeddings.txt";
  c.store_dir = dir / "store";
  c.export_dir = dir / "export";
  c.split_sizes = p.options.sizes;
  c.split_seed = p.options.seed;
  c.lime.seed = p.options.seed;
  c.lime.n_samples = p.options.lime_samples;

  std::vector<Document> used;
  for (const auto* part : {&p.splits.train, &p.splits.dev, &p.splits.test}) {
    used.insert(used.end(), part->begin(), part->end());
  }
  save_corpus_jsonl(c.corpus_path, used);
  save_split_manifest(c.splits_dir, p.splits);
  p.classifier->save(c.model);
  save_explanation_cache(c.dev_cache, p.materials->dev_explanations);
  save_explanation_cache(c.test_cache, p.materials->test_explanations);
  save_embeddings(c.embeddings_path, p.materials->embeddings);
  return c;
}

}  // namespace selex::testing
