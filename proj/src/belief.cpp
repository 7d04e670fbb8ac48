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

#include "selex/belief.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <unordered_map>

#include "selex/error.hpp"
#include "selex/log.hpp"
#include "selex/logistic.hpp"
#include "selex/random.hpp"

namespace selex {

using json = nlohmann::json;

void EmbeddingTable::insert(std::string word, std::vector<double> vector) {
  if (vector.size() != dimension_) {
    throw InvalidArgument("embedding for '" + word + "' has length " +
                          std::to_string(vector.size()) + ", expected " +
                          std::to_string(dimension_));
  }
  vectors_.insert_or_assign(std::move(word), std::move(vector));
}

std::optional<std::span<const double>> EmbeddingTable::lookup(
    std::string_view word) const {
  auto it = vectors_.find(std::string(word));
  if (it == vectors_.end()) return std::nullopt;
  return std::span<const double>(it->second);
}

std::vector<std::string> EmbeddingTable::words() const {
  std::vector<std::string> out;
  out.reserve(vectors_.size());
  for (const auto& [w, v] : vectors_) out.push_back(w);
  std::sort(out.begin(), out.end());
  return out;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               std::size_t dimension) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open embedding file " + path.string());
  EmbeddingTable table(dimension);
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(' ') == std::string::npos) continue;
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    std::size_t pos = line.find(' ');
    if (pos == std::string::npos || pos == 0) {
      throw LoadError(where + ": malformed entry");
    }
    std::string word = line.substr(0, pos);
    values.clear();
    const char* cur = line.data() + pos;
    const char* end = line.data() + line.size();
    while (cur < end) {
      while (cur < end && *cur == ' ') ++cur;
      if (cur == end) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(cur, end, v);
      if (ec != std::errc() || (next < end && *next != ' ')) {
        throw LoadError(where + ": unparsable number");
      }
      values.push_back(v);
      cur = next;
    }
    if (values.size() != dimension) {
      throw LoadError(where + ": expected " + std::to_string(dimension) +
                      " values, got " + std::to_string(values.size()));
    }
    if (table.contains(word)) {
      warn(where + ": duplicate word '" + word + "', keeping the last vector");
    }
    table.insert(std::move(word), values);
  }
  return table;
}

void save_embeddings(const std::filesystem::path& path,
                     const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[64];
  for (const auto& word : table.words()) {
    out << word;
    const auto vec = *table.lookup(word);
    for (double v : vec) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::string_view signal_name(Signal s) {
  switch (s) {
    case Signal::kSelected:
      return "selected";
    case Signal::kAgree:
      return "agree";
    case Signal::kDisagree:
      return "disagree";
  }
  return "selected";
}

std::string_view elicitation_name(Elicitation e) {
  return e == Elicitation::kOpenEnded ? "open_ended" : "critique";
}

std::optional<Signal> parse_signal(std::string_view text) {
  if (text == "selected") return Signal::kSelected;
  if (text == "agree") return Signal::kAgree;
  if (text == "disagree") return Signal::kDisagree;
  return std::nullopt;
}

std::optional<Elicitation> parse_elicitation(std::string_view text) {
  if (text == "open_ended") return Elicitation::kOpenEnded;
  if (text == "critique") return Elicitation::kCritique;
  return std::nullopt;
}

void validate_record(const InputRecord& record,
                     const Explanation* review_explanation) {
  if (record.elicitation == Elicitation::kOpenEnded) {
    if (record.signal != Signal::kSelected) {
      throw InvalidArgument("open-ended input for '" + record.word +
                            "' must be 'selected'");
    }
    return;
  }
  if (record.signal == Signal::kSelected) {
    throw InvalidArgument("critique input for '" + record.word +
                          "' must be 'agree' or 'disagree'");
  }
  if (review_explanation && !review_explanation->has_keyword(record.word)) {
    throw InvalidArgument("critique word '" + record.word +
                          "' is not a keyword of review '" + record.doc_id + "'");
  }
}

std::vector<InputRecord> aggregate_panel(std::span<const InputRecord> records) {
  struct Tally {
    std::size_t agree = 0;
    std::size_t disagree = 0;
    std::int64_t timestamp = 0;
  };
  std::map<std::pair<std::string, std::string>, Tally> tallies;
  for (const auto& r : records) {
    if (r.elicitation != Elicitation::kCritique) {
      throw InvalidArgument(
          "aggregate_panel: only critique records can be aggregated (got " +
          std::string(elicitation_name(r.elicitation)) + " from session '" +
          r.session_id + "')");
    }
    auto& t = tallies[{r.doc_id, r.word}];
    (r.signal == Signal::kAgree ? t.agree : t.disagree) += 1;
    t.timestamp = std::max(t.timestamp, r.timestamp);
  }
  std::vector<InputRecord> out;
  out.reserve(tallies.size());
  for (const auto& [key, t] : tallies) {
    InputRecord r;
    r.session_id = std::string(kPanelSessionId);
    r.doc_id = key.first;
    r.word = key.second;
    r.signal = t.agree > t.disagree ? Signal::kAgree : Signal::kDisagree;
    r.elicitation = Elicitation::kCritique;
    r.timestamp = t.timestamp;
    out.push_back(std::move(r));
  }
  return out;
}

BeliefTrainingSet build_training_set(std::span<const InputRecord> records,
                                     std::span<const TokenizedReview> reviews,
                                     const EmbeddingTable& emb,
                                     std::uint64_t seed) {
  std::unordered_map<std::string, const TokenizedReview*> by_id;
  for (const auto& r : reviews) by_id.emplace(r.doc.id, &r);

  std::set<std::string> annotated;
  std::set<std::string> positive_words;
  for (const auto& r : records) {
    if (!by_id.contains(r.doc_id)) {
      throw InvalidArgument("build_training_set: no review for doc '" +
                            r.doc_id + "'");
    }
    annotated.insert(r.doc_id);
    if (r.positive()) positive_words.insert(r.word);
  }

  BeliefTrainingSet ts;
  ts.seed = seed;
  for (const auto& w : positive_words) {
    if (auto v = emb.lookup(w)) {
      ts.positives.push_back({w, std::vector<double>(v->begin(), v->end())});
    }
  }
  if (ts.positives.empty()) {
    throw InsufficientInput(
        "insufficient input: no selected or agreed words with embeddings");
  }

  std::set<std::string> pool_set;
  for (const auto& doc_id : annotated) {
    for (const auto& tok : by_id.at(doc_id)->tokens) {
      if (positive_words.contains(tok.word)) continue;
      if (!emb.contains(tok.word)) continue;
      pool_set.insert(tok.word);
    }
  }
  const std::vector<std::string> pool(pool_set.begin(), pool_set.end());
  if (pool.size() < ts.positives.size()) {
    warn("negative pool holds " + std::to_string(pool.size()) +
         " words for " + std::to_string(ts.positives.size()) +
         " positives; training set will be unbalanced");
  }
  Rng rng(seed);
  const auto drawn =
      rng.sample(std::span<const std::string>(pool), ts.positives.size());
  for (const auto& w : drawn) {
    auto v = emb.lookup(w);
    ts.negatives.push_back({w, std::vector<double>(v->begin(), v->end())});
  }
  return ts;
}

std::string_view relevance_name(Relevance r) {
  switch (r) {
    case Relevance::kRelevant:
      return "relevant";
    case Relevance::kNotRelevant:
      return "not_relevant";
    case Relevance::kUnknown:
      return "unknown";
  }
  return "unknown";
}

double BeliefModel::probability(std::span<const double> embedding) const {
  if (embedding.size() != weights.size()) {
    throw InvalidArgument("belief model expects embeddings of length " +
                          std::to_string(weights.size()));
  }
  double z = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * embedding[i];
  return sigmoid(z);
}

void BeliefModel::save(const std::filesystem::path& path) const {
  json obj = {{"weights", weights},
              {"bias", bias},
              {"threshold", threshold},
              {"training_meta",
               {{"seed", training_meta.seed},
                {"reg_strength", training_meta.reg_strength},
                {"n_pos", training_meta.n_pos},
                {"n_neg", training_meta.n_neg}}}};
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write belief model " + path.string());
    out << obj.dump() << '\n';
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

BeliefModel BeliefModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open belief model " + path.string());
  try {
    const json obj = json::parse(in);
    BeliefModel m;
    m.weights = obj.at("weights").get<std::vector<double>>();
    m.bias = obj.at("bias").get<double>();
    m.threshold = obj.at("threshold").get<double>();
    const auto& meta = obj.at("training_meta");
    m.training_meta.seed = meta.at("seed").get<std::uint64_t>();
    m.training_meta.reg_strength = meta.at("reg_strength").get<double>();
    m.training_meta.n_pos = meta.at("n_pos").get<std::size_t>();
    m.training_meta.n_neg = meta.at("n_neg").get<std::size_t>();
    return m;
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": malformed belief model: " + e.what());
  }
}

BeliefModel train_belief(const BeliefTrainingSet& ts, double reg_strength,
                         double threshold) {
  if (ts.positives.empty() || ts.negatives.empty()) {
    throw InvalidArgument(
        "train_belief: need at least one positive and one negative example");
  }
  const std::size_t dim = ts.positives.front().embedding.size();
  const auto n = static_cast<Eigen::Index>(ts.positives.size() + ts.negatives.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(dim));
  Eigen::VectorXd y(n);
  Eigen::Index row = 0;
  auto add = [&](const LabeledWord& lw, double label) {
    if (lw.embedding.size() != dim) {
      throw InvalidArgument("train_belief: inconsistent embedding length");
    }
    for (std::size_t j = 0; j < dim; ++j) {
      x(row, static_cast<Eigen::Index>(j)) = lw.embedding[j];
    }
    y(row++) = label;
  };
  for (const auto& p : ts.positives) add(p, 1.0);
  for (const auto& q : ts.negatives) add(q, 0.0);

  const LogisticFit fit = fit_logistic(x, y, reg_strength, 1e-6);
  if (!fit.converged) {
    throw InvalidArgument("train_belief: optimizer did not converge");
  }
  BeliefModel model;
  model.weights.assign(fit.weights.data(), fit.weights.data() + fit.weights.size());
  model.bias = fit.bias;
  model.threshold = threshold;
  model.training_meta = {ts.seed, reg_strength, ts.positives.size(),
                         ts.negatives.size()};
  return model;
}

Relevance predict_relevance(const BeliefModel& model, std::string_view word,
                            const EmbeddingTable& emb) {
  auto v = emb.lookup(word);
  if (!v) return Relevance::kUnknown;
  return model.probability(*v) >= model.threshold ? Relevance::kRelevant
                                                  : Relevance::kNotRelevant;
}

std::string record_to_json_line(const InputRecord& r) {
  json obj = {{"session_id", r.session_id},
              {"doc_id", r.doc_id},
              {"word", r.word},
              {"signal", signal_name(r.signal)},
              {"elicitation", elicitation_name(r.elicitation)},
              {"timestamp", r.timestamp}};
  return obj.dump();
}

InputRecord record_from_json_line(std::string_view line) {
  try {
    const json obj = json::parse(line);
    InputRecord r;
    r.session_id = obj.at("session_id").get<std::string>();
    r.doc_id = obj.at("doc_id").get<std::string>();
    r.word = obj.at("word").get<std::string>();
    auto signal = parse_signal(obj.at("signal").get<std::string>());
    auto elicitation = parse_elicitation(obj.at("elicitation").get<std::string>());
    if (!signal || !elicitation) {
      throw InvalidArgument("input record: unknown signal or elicitation");
    }
    r.signal = *signal;
    r.elicitation = *elicitation;
    r.timestamp = obj.value("timestamp", std::int64_t{0});
    return r;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed input record: ") + e.what());
  }
}

std::vector<InputRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open input records " + path.string());
  std::vector<InputRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const Error& e) {
      throw LoadError(path.string() + ": line " + std::to_string(line_no) +
                      ": " + e.what());
    }
  }
  return out;
}

void save_records(const std::filesystem::path& path,
                  std::span<const InputRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace selex
