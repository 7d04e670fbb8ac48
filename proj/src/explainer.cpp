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

#include "selex/explainer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>
#include <unordered_map>

#include "selex/error.hpp"
#include "selex/random.hpp"

namespace selex {

using json = nlohmann::json;

bool Explanation::has_keyword(const std::string& word) const {
  return find(word) != nullptr;
}

const Attribution* Explanation::find(const std::string& word) const {
  for (const auto& a : attributions) {
    if (a.word == word) return &a;
  }
  return nullptr;
}

std::string mask_text(const TokenizedReview& review,
                      std::span<const std::string> unique_words,
                      const WordMask& mask) {
  std::unordered_map<std::string_view, bool> kept;
  kept.reserve(unique_words.size());
  for (std::size_t i = 0; i < unique_words.size(); ++i) {
    kept.emplace(unique_words[i], mask[i]);
  }
  const std::string& text = review.doc.text;
  std::string out;
  out.reserve(text.size());
  std::size_t cursor = 0;
  for (const auto& tok : review.tokens) {
    auto it = kept.find(tok.word);
    if (it == kept.end() || it->second) continue;
    out.append(text, cursor, tok.span.start - cursor);
    cursor = tok.span.end;
  }
  out.append(text, cursor, std::string::npos);
  return out;
}

double mask_proximity(const WordMask& mask, double kernel_width) {
  const auto kept = static_cast<double>(std::count(mask.begin(), mask.end(), true));
  const auto total = static_cast<double>(mask.size());
  // cos(mask, ones) = |mask| / (sqrt(|mask|) sqrt(k)); an empty mask is at
  // distance 1.
  const double distance = kept == 0 ? 1.0 : 1.0 - std::sqrt(kept / total);
  return std::exp(-(distance * distance) / (kernel_width * kernel_width));
}

RidgeFit weighted_ridge(std::span<const WordMask> design,
                        std::span<const double> targets,
                        std::span<const double> sample_weights, double alpha) {
  const auto n = static_cast<Eigen::Index>(design.size());
  if (n == 0 || targets.size() != design.size() ||
      sample_weights.size() != design.size()) {
    throw InvalidArgument("weighted_ridge: inconsistent inputs");
  }
  const auto k = static_cast<Eigen::Index>(design.front().size());
  Eigen::MatrixXd z(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      z(i, j) = design[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                    ? 1.0
                    : 0.0;
    }
  }
  const Eigen::Map<const Eigen::VectorXd> y(targets.data(), n);
  const Eigen::Map<const Eigen::VectorXd> w(sample_weights.data(), n);
  const double wsum = w.sum();
  if (!(wsum > 0)) throw InvalidArgument("weighted_ridge: zero total weight");

  const Eigen::RowVectorXd z_mean = (w.transpose() * z) / wsum;
  const double y_mean = w.dot(y) / wsum;
  const Eigen::MatrixXd zc = z.rowwise() - z_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  const Eigen::MatrixXd zw = zc.array().colwise() * w.array();

  Eigen::MatrixXd gram = zc.transpose() * zw;
  gram.diagonal().array() += alpha;
  const Eigen::VectorXd rhs = zw.transpose() * yc;
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);

  RidgeFit fit;
  fit.coefficients.assign(beta.data(), beta.data() + beta.size());
  fit.intercept = y_mean - z_mean.dot(beta);
  const Eigen::VectorXd resid = yc - zc * beta;
  const double ss_res = w.dot(resid.cwiseProduct(resid));
  const double ss_tot = w.dot(yc.cwiseProduct(yc));
  if (ss_tot <= 1e-300) {
    fit.r2 = ss_res <= 1e-300 ? 1.0 : 0.0;
  } else {
    fit.r2 = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
  }
  return fit;
}

Explanation lime_explain(const BlackBoxClassifier& clf,
                         const TokenizedReview& review,
                         const LimeParams& params) {
  if (review.tokens.empty()) {
    throw InvalidArgument("lime_explain: review '" + review.doc.id +
                          "' has no tokens");
  }
  if (params.n_samples < 10) {
    throw InvalidArgument("lime_explain: n_samples must be at least 10");
  }
  if (!(params.kernel_width > 0) || !(params.ridge_strength > 0)) {
    throw InvalidArgument(
        "lime_explain: kernel_width and ridge_strength must be positive");
  }
  const std::vector<std::string> words = review.unique_words();
  const std::size_t k = words.size();

  Rng rng(params.seed);
  std::vector<WordMask> masks;
  masks.reserve(params.n_samples);
  masks.emplace_back(k, true);
  for (std::size_t s = 1; s < params.n_samples; ++s) {
    WordMask m(k);
    for (std::size_t j = 0; j < k; ++j) m[j] = rng.bernoulli(params.keep_probability);
    masks.push_back(std::move(m));
  }

  std::vector<std::string> variants;
  variants.reserve(masks.size());
  for (const auto& m : masks) variants.push_back(mask_text(review, words, m));

  std::vector<double> probs;
  try {
    probs = clf.predict_proba(variants);
  } catch (const std::exception& e) {
    throw ExplanationError("explaining '" + review.doc.id +
                           "': classifier failed: " + e.what());
  }
  if (probs.size() != variants.size()) {
    throw ExplanationError("explaining '" + review.doc.id +
                           "': classifier returned " +
                           std::to_string(probs.size()) + " results for " +
                           std::to_string(variants.size()) + " inputs");
  }

  std::vector<double> proximity;
  proximity.reserve(masks.size());
  for (const auto& m : masks) {
    proximity.push_back(mask_proximity(m, params.kernel_width));
  }
  const RidgeFit fit = weighted_ridge(masks, probs, proximity, params.ridge_strength);

  Explanation expl;
  expl.doc_id = review.doc.id;
  expl.prediction = Prediction::from_probability(probs.front());
  expl.surrogate_r2 = fit.r2;
  expl.seed = params.seed;
  expl.params = params;
  expl.attributions.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    expl.attributions.push_back({words[j], fit.coefficients[j]});
  }
  std::sort(expl.attributions.begin(), expl.attributions.end(),
            [](const Attribution& a, const Attribution& b) {
              const double fa = std::abs(a.weight);
              const double fb = std::abs(b.weight);
              if (fa != fb) return fa > fb;
              return a.word < b.word;
            });
  if (expl.attributions.size() > kKeywordCount) {
    expl.attributions.resize(kKeywordCount);
  }
  return expl;
}

std::vector<Explanation> explain_all(const BlackBoxClassifier& clf,
                                     std::span<const TokenizedReview> reviews,
                                     const LimeParams& params) {
  std::vector<Explanation> out(reviews.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      LimeParams p = params;
      p.seed = derive_seed(params.seed, reviews[i].doc.id);
      out[i] = lime_explain(clf, reviews[i], p);
      out[i].params.seed = params.seed;
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(
      std::thread::hardware_concurrency(), 1, 16);
  if (workers == 1 || reviews.size() < 2 * workers) {
    run(0, reviews.size());
    return out;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (reviews.size() + workers - 1) / workers;
  for (std::size_t begin = 0; begin < reviews.size(); begin += chunk) {
    jobs.push_back(std::async(std::launch::async, run, begin,
                              std::min(reviews.size(), begin + chunk)));
  }
  for (auto& j : jobs) j.get();
  return out;
}

std::map<std::string, double> global_word_importance(
    std::span<const Explanation> pool) {
  std::map<std::string, double> totals;
  for (const auto& e : pool) {
    for (const auto& a : e.attributions) totals[a.word] += std::abs(a.weight);
  }
  for (auto& [word, value] : totals) value = std::sqrt(value);
  return totals;
}

std::vector<std::string> splime_select(std::span<const Explanation> pool,
                                       std::size_t k) {
  if (pool.empty()) throw InvalidArgument("splime_select: empty pool");
  if (k > pool.size()) {
    throw InvalidArgument("splime_select: k = " + std::to_string(k) +
                          " exceeds pool of " + std::to_string(pool.size()));
  }
  const auto importance = global_word_importance(pool);

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pool[a].doc_id < pool[b].doc_id;
  });

  std::set<std::string> covered;
  std::vector<bool> taken(pool.size(), false);
  std::vector<std::string> picks;
  picks.reserve(k);
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = pool.size();
    double best_gain = -1.0;
    for (std::size_t idx : order) {
      if (taken[idx]) continue;
      std::set<std::string> fresh;
      for (const auto& a : pool[idx].attributions) {
        if (!covered.contains(a.word)) fresh.insert(a.word);
      }
      double gain = 0.0;
      for (const auto& w : fresh) gain += importance.at(w);
      // Strict improvement only, so ties keep the earliest doc id.
      if (gain > best_gain + 1e-12 * std::max(1.0, best_gain)) {
        best_gain = gain;
        best = idx;
      }
    }
    taken[best] = true;
    for (const auto& a : pool[best].attributions) covered.insert(a.word);
    picks.push_back(pool[best].doc_id);
  }
  return picks;
}

double coverage_value(std::span<const Explanation> pool,
                      std::span<const std::string> picked_ids) {
  const auto importance = global_word_importance(pool);
  std::set<std::string> ids(picked_ids.begin(), picked_ids.end());
  std::set<std::string> covered;
  for (const auto& e : pool) {
    if (!ids.contains(e.doc_id)) continue;
    for (const auto& a : e.attributions) covered.insert(a.word);
  }
  double total = 0.0;
  for (const auto& w : covered) total += importance.at(w);
  return total;
}

namespace {

json params_to_json(const LimeParams& p) {
  return {{"n_samples", p.n_samples},
          {"kernel_width", p.kernel_width},
          {"ridge_strength", p.ridge_strength},
          {"keep_probability", p.keep_probability},
          {"seed", p.seed}};
}

LimeParams params_from_json(const json& j) {
  LimeParams p;
  p.n_samples = j.at("n_samples").get<std::size_t>();
  p.kernel_width = j.at("kernel_width").get<double>();
  p.ridge_strength = j.at("ridge_strength").get<double>();
  p.keep_probability = j.value("keep_probability", 0.5);
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace

void save_explanation_cache(const std::filesystem::path& path,
                            const ExplanationCache& cache) {
  json root = json::object();
  for (const auto& [id, e] : cache) {
    json attrs = json::array();
    for (const auto& a : e.attributions) attrs.push_back({a.word, a.weight});
    root[id] = {{"prob_positive", e.prediction.prob_positive},
                {"label", label_name(e.prediction.label)},
                {"attributions", std::move(attrs)},
                {"surrogate_r2", e.surrogate_r2},
                {"seed", e.seed},
                {"params", params_to_json(e.params)}};
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write explanation cache " + path.string());
    out << root.dump() << '\n';
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

ExplanationCache load_explanation_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open explanation cache " + path.string());
  ExplanationCache cache;
  try {
    const json root = json::parse(in);
    for (const auto& [id, v] : root.items()) {
      Explanation e;
      e.doc_id = id;
      e.prediction = Prediction::from_probability(v.at("prob_positive").get<double>());
      for (const auto& pair : v.at("attributions")) {
        e.attributions.push_back(
            {pair.at(0).get<std::string>(), pair.at(1).get<double>()});
      }
      e.surrogate_r2 = v.at("surrogate_r2").get<double>();
      e.seed = v.at("seed").get<std::uint64_t>();
      e.params = params_from_json(v.at("params"));
      cache.emplace(id, std::move(e));
    }
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": malformed explanation cache: " + e.what());
  }
  return cache;
}

}  // namespace selex
