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

#include "selex/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "selex/error.hpp"
#include "selex/logistic.hpp"

// After Eigen: resolv.h defines a macro named _res.
#include <httplib.h>

namespace selex {

using json = nlohmann::json;

Prediction Prediction::from_probability(double prob_positive) {
  Prediction p;
  p.prob_positive = std::clamp(prob_positive, 0.0, 1.0);
  p.label = p.prob_positive >= kDecisionThreshold ? Label::kPositive
                                                  : Label::kNegative;
  return p;
}

ReferenceClassifier::ReferenceClassifier(std::vector<std::string> vocabulary,
                                         std::vector<double> weights,
                                         double bias, ReferenceConfig config)
    : vocabulary_(std::move(vocabulary)),
      weights_(std::move(weights)),
      bias_(bias),
      config_(config) {
  if (vocabulary_.size() != weights_.size()) {
    throw InvalidArgument("reference model: vocabulary/weights size mismatch");
  }
  index_.reserve(vocabulary_.size());
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!index_.emplace(vocabulary_[i], i).second) {
      throw InvalidArgument("reference model: duplicate vocabulary word '" +
                            vocabulary_[i] + "'");
    }
  }
}

double ReferenceClassifier::coefficient(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? 0.0 : weights_[it->second];
}

double ReferenceClassifier::probability(std::string_view text) const {
  double z = bias_;
  for (const auto& tok : tokenize(text)) {
    auto it = index_.find(tok.word);
    if (it != index_.end()) z += weights_[it->second];
  }
  return sigmoid(z);
}

std::vector<double> ReferenceClassifier::predict_proba(
    std::span<const std::string> texts) const {
  std::vector<double> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(probability(t));
  return out;
}

void ReferenceClassifier::save(const std::filesystem::path& path) const {
  json obj;
  obj["vocabulary"] = vocabulary_;
  obj["weights"] = weights_;
  obj["bias"] = bias_;
  obj["config"] = {{"reg_strength", config_.reg_strength},
                   {"seed", config_.seed}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << obj.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

ReferenceClassifier ReferenceClassifier::load(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open model file " + path.string());
  try {
    const json obj = json::parse(in);
    ReferenceConfig config;
    config.reg_strength = obj.at("config").at("reg_strength").get<double>();
    config.seed = obj.at("config").at("seed").get<std::uint64_t>();
    return ReferenceClassifier(obj.at("vocabulary").get<std::vector<std::string>>(),
                               obj.at("weights").get<std::vector<double>>(),
                               obj.at("bias").get<double>(), config);
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": malformed model file: " + e.what());
  }
}

ReferenceClassifier train_reference(std::span<const TokenizedReview> train,
                                    double reg_strength, std::uint64_t seed) {
  if (train.empty()) throw InvalidArgument("train_reference: empty training set");
  if (!(reg_strength > 0)) {
    throw InvalidArgument("train_reference: reg_strength must be positive");
  }
  bool has_pos = false;
  bool has_neg = false;
  std::map<std::string, std::size_t> vocab;  // sorted for a stable layout
  for (const auto& r : train) {
    (r.doc.label == Label::kPositive ? has_pos : has_neg) = true;
    for (const auto& tok : r.tokens) vocab.emplace(tok.word, 0);
  }
  if (!has_pos || !has_neg) {
    throw InvalidArgument(
        "train_reference: training set must contain both classes");
  }
  std::vector<std::string> words;
  words.reserve(vocab.size());
  for (auto& [word, idx] : vocab) {
    idx = words.size();
    words.push_back(word);
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(train.size()),
      static_cast<Eigen::Index>(words.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (const auto& tok : train[i].tokens) {
      x(row, static_cast<Eigen::Index>(vocab.at(tok.word))) += 1.0;
    }
    y(row) = train[i].doc.label == Label::kPositive ? 1.0 : 0.0;
  }
  const LogisticFit fit = fit_logistic(x, y, reg_strength, 1e-6);
  if (!fit.converged) {
    throw InvalidArgument("train_reference: optimizer did not converge (|g| = " +
                          std::to_string(fit.gradient_norm) + ")");
  }
  std::vector<double> weights(fit.weights.data(),
                              fit.weights.data() + fit.weights.size());
  return ReferenceClassifier(std::move(words), std::move(weights), fit.bias,
                             {reg_strength, seed});
}

RemoteClassifier::RemoteClassifier(std::string url,
                                   std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {
  const auto scheme_end = url_.find("://");
  if (scheme_end == std::string::npos) {
    throw InvalidArgument("remote classifier url needs a scheme: " + url_);
  }
  const auto path_start = url_.find('/', scheme_end + 3);
  origin_ = url_.substr(0, path_start);
  std::string base =
      path_start == std::string::npos ? "" : url_.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  path_ = base + "/predict";
}

std::vector<double> RemoteClassifier::predict_proba(
    std::span<const std::string> texts) const {
  httplib::Client client(origin_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  json body = {{"texts", json::array()}};
  for (const auto& t : texts) body["texts"].push_back(t);
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw ClassifierError("remote classifier " + url_ + ": " +
                          httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ClassifierError("remote classifier " + url_ + ": HTTP " +
                          std::to_string(res->status));
  }
  std::vector<double> probs;
  try {
    const json reply = json::parse(res->body);
    probs = reply.at("probs_positive").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ClassifierError("remote classifier " + url_ +
                          ": malformed response: " + e.what());
  }
  if (probs.size() != texts.size()) {
    throw ClassifierError("remote classifier " + url_ + ": expected " +
                          std::to_string(texts.size()) + " probabilities, got " +
                          std::to_string(probs.size()));
  }
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw ClassifierError("remote classifier " + url_ +
                            ": probability out of range");
    }
  }
  return probs;
}

std::shared_ptr<const BlackBoxClassifier> open_classifier(
    const std::string& model) {
  if (model.starts_with("http://") || model.starts_with("https://")) {
    return std::make_shared<RemoteClassifier>(model);
  }
  return std::make_shared<ReferenceClassifier>(ReferenceClassifier::load(model));
}

Prediction predict(const BlackBoxClassifier& clf, const std::string& text) {
  const auto probs = clf.predict_proba(std::span<const std::string>(&text, 1));
  if (probs.size() != 1) throw ClassifierError("classifier returned no result");
  return Prediction::from_probability(probs.front());
}

double evaluate_accuracy(const BlackBoxClassifier& clf,
                         std::span<const Document> docs) {
  if (docs.empty()) throw InvalidArgument("evaluate_accuracy: no documents");
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(d.text);
  const auto probs = clf.predict_proba(texts);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (Prediction::from_probability(probs[i]).label == docs[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(docs.size());
}

}  // namespace selex
