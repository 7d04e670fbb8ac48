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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "selex/classifier.hpp"
#include "selex/corpus.hpp"
#include "selex/explainer.hpp"
#include "selex/service.hpp"
#include "selex/study.hpp"

namespace selex::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

TokenizedReview make_review(const std::string& id, const std::string& text,
                            Label label = Label::kPositive);

// p = 0.5 + sum_w c_w * count_w / (2 * scale). Linear in word counts, so a
// surrogate over word presence is exact up to ridge shrinkage.
class LinearProbabilityClassifier final : public BlackBoxClassifier {
 public:
  LinearProbabilityClassifier(std::map<std::string, double> coefficients, double scale);
  std::vector<double> predict_proba(std::span<const std::string> texts) const override;
  double coefficient(const std::string& word) const;

 private:
  std::map<std::string, double> coefficients_;
  double scale_;
};

// p = sigmoid(bias + sum_w c_w * count_w).
class SigmoidClassifier final : public BlackBoxClassifier {
 public:
  SigmoidClassifier(std::map<std::string, double> coefficients, double bias);
  std::vector<double> predict_proba(std::span<const std::string> texts) const override;

 private:
  std::map<std::string, double> coefficients_;
  double bias_;
};

// Counts calls; delegates to another classifier.
class CountingClassifier final : public BlackBoxClassifier {
 public:
  explicit CountingClassifier(const BlackBoxClassifier& inner) : inner_(inner) {}
  std::vector<double> predict_proba(std::span<const std::string> texts) const override;
  std::size_t calls() const { return calls_; }

 private:
  const BlackBoxClassifier& inner_;
  mutable std::size_t calls_ = 0;
};

struct PipelineOptions {
  std::size_t n_docs = 20000;
  std::uint64_t corpus_seed = 1;
  std::uint64_t seed = 7;  // split, classifier and explanation seed
  std::size_t lime_samples = 1000;
  SplitSizes sizes;
};

// Synthetic corpus -> splits -> reference classifier -> cached explanations.
struct Pipeline {
  PipelineOptions options;
  std::vector<Document> corpus;
  Splits splits;
  std::shared_ptr<const ReferenceClassifier> classifier;
  std::shared_ptr<StudyMaterials> materials;
};

Pipeline build_pipeline(const PipelineOptions& options);

OracleAnnotator lexicon_oracle(double noise_rate = 0.0, std::uint64_t seed = 0);

// Writes every pipeline artifact under `dir` and returns a config naming them.
StudyConfig write_pipeline_files(const Pipeline& p, const std::filesystem::path& dir);

}  // namespace selex::testing
