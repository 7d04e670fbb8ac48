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

// Prints one PASS/FAIL line per acceptance criterion; exits nonzero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "selex/belief.hpp"
#include "selex/classifier.hpp"
#include "selex/explainer.hpp"
#include "selex/log.hpp"
#include "selex/random.hpp"
#include "selex/selector.hpp"
#include "selex/service.hpp"
#include "selex/store.hpp"
#include "selex/study.hpp"
#include "selex/synthetic.hpp"
#include "support.hpp"

namespace {

using namespace selex;
namespace st = selex::testing;

// Pinned thresholds.
constexpr std::size_t kSignTrials = 20;
constexpr double kMinSignMatch = 0.90;
constexpr double kMinR2 = 0.90;
constexpr double kMaxSignSeconds = 60.0;
constexpr std::size_t kExhaustiveSeeds = 10;
constexpr double kExhaustiveTolerance = 0.05;
constexpr std::size_t kCoveragePools = 25;
constexpr std::size_t kBalanceTrials = 100;
constexpr double kMinAuc = 0.90;
constexpr std::size_t kPipelineSeeds = 5;
constexpr std::size_t kMinSelectiveWins = 4;
constexpr std::size_t kMetricLogs = 1000;
constexpr double kIdentityTolerance = 1e-12;
constexpr double kMinTestAccuracy = 0.70;
constexpr double kMaxTestAccuracy = 0.90;
constexpr std::size_t kMinWrongPerClass = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double between(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

std::string word(std::size_t i) { return "w" + std::to_string(i); }

// Reviews with `n_unique` distinct words, each repeated one to three times.
TokenizedReview random_review(Rng& rng, const std::string& id, std::size_t n_unique) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n_unique; ++i) {
    const auto reps = 1 + rng.uniform_index(3);
    for (std::uint64_t r = 0; r < reps; ++r) tokens.push_back(word(i));
  }
  rng.shuffle(tokens);
  std::string text;
  for (const auto& t : tokens) text += t + " ";
  return st::make_review(id, text);
}

std::vector<std::string> first_occurrence_words(const TokenizedReview& r) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : r.tokens) {
    if (seen.insert(t.word).second) out.push_back(t.word);
  }
  return out;
}

Outcome sign_recovery() {
  const auto start = std::chrono::steady_clock::now();
  std::size_t matched = 0, total = 0;
  double min_r2 = 1.0;
  for (std::size_t trial = 0; trial < kSignTrials; ++trial) {
    Rng rng(derive_seed(101, std::to_string(trial)));
    const auto n_unique = 5 + rng.uniform_index(46);
    const auto review = random_review(rng, "r" + std::to_string(trial), n_unique);
    std::map<std::string, double> coef;
    double mass = 0.0;
    for (std::size_t i = 0; i < n_unique; ++i) {
      const double magnitude = between(rng, 0.2, 1.0);
      coef[word(i)] = rng.bernoulli(0.5) ? magnitude : -magnitude;
    }
    for (const auto& t : review.tokens) mass += std::abs(coef.at(t.word));
    const st::LinearProbabilityClassifier clf(coef, mass);
    LimeParams params;
    params.seed = trial;
    const auto e = lime_explain(clf, review, params);
    for (const auto& a : e.attributions) {
      ++total;
      if ((a.weight > 0) == (clf.coefficient(a.word) > 0)) ++matched;
    }
    min_r2 = std::min(min_r2, e.surrogate_r2);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double share = static_cast<double>(matched) / static_cast<double>(total);
  return {share >= kMinSignMatch && min_r2 >= kMinR2 && seconds < kMaxSignSeconds,
          fmt("sign match %.3f", share) + fmt(", min r2 %.3f", min_r2) + fmt(", %.1f s", seconds)};
}

Outcome exhaustive_equivalence() {
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::size_t s = 0; s < kExhaustiveSeeds; ++s) {
    Rng rng(derive_seed(202, std::to_string(s)));
    const auto n_unique = 3 + rng.uniform_index(8);
    const auto review = random_review(rng, "r", n_unique);
    std::map<std::string, double> coef;
    for (std::size_t i = 0; i < n_unique; ++i) coef[word(i)] = between(rng, -1.5, 1.5);
    const st::SigmoidClassifier clf(coef, between(rng, -0.5, 0.5));
    LimeParams params;
    params.seed = s;
    params.n_samples = 1000;
    const auto e = lime_explain(clf, review, params);
    const auto expected = st::exhaustive_lime(clf, review, params);
    const auto words = first_occurrence_words(review);
    double diff = 0.0;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto* a = e.find(words[i]);
      diff = std::max(diff, std::abs((a ? a->weight : 0.0) - expected[i]));
    }
    worst = std::max(worst, diff);
    if (diff <= kExhaustiveTolerance) ++ok;
  }
  return {ok == kExhaustiveSeeds,
          std::to_string(ok) + "/" + std::to_string(kExhaustiveSeeds) + " seeds" +
              fmt(", max |diff| %.4f", worst)};
}

Explanation pool_entry(const std::string& id, const std::map<std::string, double>& weights) {
  Explanation e;
  e.doc_id = id;
  for (const auto& [w, v] : weights) e.attributions.push_back({w, v});
  std::sort(e.attributions.begin(), e.attributions.end(),
            [](const auto& a, const auto& b) { return std::abs(a.weight) > std::abs(b.weight); });
  return e;
}

std::vector<std::size_t> indices_of(std::span<const Explanation> pool,
                                    const std::vector<std::string>& ids) {
  std::vector<std::size_t> out;
  for (const auto& id : ids) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i].doc_id == id) out.push_back(i);
    }
  }
  return out;
}

Outcome splime_optimality(const StudyMaterials& reference) {
  const double bound = 1.0 - std::exp(-1.0);
  double worst_ratio = 1.0;
  bool all_ok = true;
  for (std::size_t p = 0; p < kCoveragePools; ++p) {
    Rng rng(derive_seed(303, std::to_string(p)));
    const auto n = 2 + rng.uniform_index(7);
    std::vector<Explanation> pool;
    for (std::size_t i = 0; i < n; ++i) {
      std::map<std::string, double> weights;
      const auto n_words = 1 + rng.uniform_index(5);
      for (std::size_t w = 0; w < n_words; ++w) {
        weights[word(rng.uniform_index(12))] = between(rng, -1.0, 1.0);
      }
      pool.push_back(pool_entry("d" + std::to_string(i), weights));
    }
    const auto k = std::min<std::size_t>(1 + rng.uniform_index(3), n);
    const double greedy = st::coverage_oracle(pool, indices_of(pool, splime_select(pool, k)));
    const double best = st::brute_force_coverage(pool, k);
    const double ratio = best > 0 ? greedy / best : 1.0;
    worst_ratio = std::min(worst_ratio, ratio);
    if (greedy < bound * best - 1e-12) all_ok = false;
  }

  // Disjoint features: greedy is optimal.
  bool disjoint_ok = true;
  for (std::size_t f = 0; f < 5; ++f) {
    Rng rng(derive_seed(304, std::to_string(f)));
    std::vector<Explanation> pool;
    for (std::size_t i = 0; i < 6; ++i) {
      std::map<std::string, double> weights;
      for (std::size_t w = 0; w < 2; ++w) weights[word(i * 2 + w)] = between(rng, 0.1, 2.0);
      pool.push_back(pool_entry("d" + std::to_string(i), weights));
    }
    for (std::size_t k = 1; k <= 3; ++k) {
      const double greedy = st::coverage_oracle(pool, indices_of(pool, splime_select(pool, k)));
      if (std::abs(greedy - st::brute_force_coverage(pool, k)) > 1e-12) disjoint_ok = false;
    }
  }

  std::vector<Explanation> dev;
  for (const auto& [id, e] : reference.dev_explanations) dev.push_back(e);
  const auto picked = splime_select(dev, kKeywordCount);
  const bool config_ok = dev.size() == 500 && picked.size() == 10 &&
                         reference.input_sample.doc_ids == picked;

  return {all_ok && disjoint_ok && config_ok,
          fmt("min greedy/optimum %.3f", worst_ratio) + fmt(" (bound %.3f)", bound) +
              (disjoint_ok ? ", disjoint fixtures exact" : ", disjoint fixtures NOT exact") +
              ", k=" + std::to_string(picked.size()) + " from " + std::to_string(dev.size()) +
              " dev explanations"};
}

Outcome negative_balance() {
  std::vector<std::string> vocab;
  for (int i = 0; i < 80; ++i) vocab.push_back(word(i));
  EmbeddingTable emb(4);
  Rng erng(404);
  // Every fifth word is out of vocabulary.
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (i % 5 == 4) continue;
    emb.insert(vocab[i], {erng.normal(), erng.normal(), erng.normal(), erng.normal()});
  }
  std::size_t checked = 0, ok = 0;
  Rng rng(405);
  const auto previous = set_warning_sink([](const std::string&) {});
  while (checked < kBalanceTrials) {
    std::vector<TokenizedReview> reviews;
    std::vector<InputRecord> records;
    const auto n_reviews = 1 + rng.uniform_index(4);
    for (std::uint64_t d = 0; d < n_reviews; ++d) {
      const auto words = rng.sample(std::span<const std::string>(vocab), 2 + rng.uniform_index(25));
      std::string text;
      for (const auto& w : words) text += w + " ";
      const std::string id = "d" + std::to_string(d);
      reviews.push_back(st::make_review(id, text));
      for (const auto& w : words) {
        if (rng.bernoulli(0.25)) {
          InputRecord r;
          r.session_id = "s";
          r.doc_id = id;
          r.word = w;
          r.elicitation = Elicitation::kCritique;
          r.signal = rng.bernoulli(0.7) ? Signal::kAgree : Signal::kDisagree;
          records.push_back(r);
        }
      }
    }
    std::set<std::string> positives, pool, annotated;
    for (const auto& r : records) {
      annotated.insert(r.doc_id);
      if (r.positive() && emb.contains(r.word)) positives.insert(r.word);
    }
    if (positives.empty()) continue;
    std::set<std::string> any_positive;
    for (const auto& r : records) {
      if (r.positive()) any_positive.insert(r.word);
    }
    for (const auto& r : reviews) {
      if (!annotated.contains(r.doc.id)) continue;
      for (const auto& t : r.tokens) {
        if (!any_positive.contains(t.word) && emb.contains(t.word)) pool.insert(t.word);
      }
    }
    ++checked;
    const auto ts = build_training_set(records, reviews, emb, checked);
    std::set<std::string> pos, neg;
    for (const auto& p : ts.positives) pos.insert(p.word);
    for (const auto& n : ts.negatives) neg.insert(n.word);
    bool good = pos == positives && neg.size() == ts.negatives.size() &&
                ts.negatives.size() == std::min(positives.size(), pool.size());
    for (const auto& n : neg) good = good && pool.contains(n) && !pos.contains(n);
    if (good) ++ok;
  }
  set_warning_sink(previous);
  return {ok == kBalanceTrials,
          std::to_string(ok) + "/" + std::to_string(kBalanceTrials) + " input sets"};
}

std::vector<st::Pipeline>& pipelines() {
  static std::vector<st::Pipeline> built = [] {
    std::vector<st::Pipeline> out;
    for (std::size_t i = 0; i < kPipelineSeeds; ++i) {
      st::PipelineOptions o;
      o.seed = 7 + i;
      out.push_back(st::build_pipeline(o));
    }
    return out;
  }();
  return built;
}

Outcome belief_recovery() {
  const auto oracle = st::lexicon_oracle();
  const auto& lexicon = synthetic::sentiment_lexicon();
  const std::set<std::string> lex(lexicon.begin(), lexicon.end());
  double sum = 0.0;
  std::string per_seed;
  for (const auto& p : pipelines()) {
    const auto& m = *p.materials;
    const auto reviews = m.input_reviews();
    const auto records = simulate_input(oracle, reviews, m.dev_explanations,
                                        Elicitation::kCritique, "oracle");
    const auto ts = build_training_set(records, reviews, m.embeddings, p.options.seed);
    const auto model = train_belief(ts, 1.0);
    std::set<std::string> seen;
    for (const auto& w : ts.positives) seen.insert(w.word);
    for (const auto& w : ts.negatives) seen.insert(w.word);

    std::vector<double> pos, neg;
    std::vector<std::string> others;
    for (const auto& w : m.embeddings.words()) {
      if (seen.contains(w)) continue;
      if (lex.contains(w)) {
        pos.push_back(model.probability(*m.embeddings.lookup(w)));
      } else {
        others.push_back(w);
      }
    }
    Rng rng(derive_seed(p.options.seed, "auc"));
    for (const auto& w : rng.sample(std::span<const std::string>(others), 50)) {
      neg.push_back(model.probability(*m.embeddings.lookup(w)));
    }
    const double a = st::auc(pos, neg);
    sum += a;
    per_seed += fmt(" %.3f", a);
  }
  const double mean = sum / static_cast<double>(pipelines().size());
  return {mean >= kMinAuc, fmt("mean AUC %.3f", mean) + " (per seed" + per_seed + ")"};
}

Outcome selective_support() {
  const auto oracle = st::lexicon_oracle();
  std::size_t wins = 0;
  std::string per_seed;
  for (const auto& p : pipelines()) {
    const auto& m = *p.materials;
    const auto panel = simulate_panel(m, oracle, 5);
    const auto model = train_panel_model(m, panel, p.options.seed, 1.0, 0.5);
    const auto candidates = m.task_candidates();
    double orig_sum = 0.0, sel_sum = 0.0;
    std::size_t orig_n = 0, sel_n = 0;
    for (std::size_t session = 0; session < 10; ++session) {
      const auto ids = sample_task_reviews(candidates, Sampling::kRandom, 0,
                                           derive_seed(p.options.seed, std::to_string(session)));
      for (const auto& id : ids) {
        const auto& item = m.task_items.at(id);
        if (item.ai_correct()) continue;
        const auto& e = m.test_explanations.at(id);
        const auto& r = m.reviews.at(id);
        if (auto f = supporting_fraction(render_states(e, r, nullptr, m.embeddings), item.groundtruth)) {
          orig_sum += *f;
          ++orig_n;
        }
        if (auto f = supporting_fraction(render_states(e, r, &model, m.embeddings), item.groundtruth)) {
          sel_sum += *f;
          ++sel_n;
        }
      }
    }
    const double orig = orig_n ? orig_sum / orig_n : 0.0;
    const double sel = sel_n ? sel_sum / sel_n : 0.0;
    if (sel > orig) ++wins;
    per_seed += fmt(" %.3f", orig) + fmt("->%.3f", sel);
  }
  return {wins >= kMinSelectiveWins,
          std::to_string(wins) + "/" + std::to_string(pipelines().size()) +
              " seeds higher under selective (original->selective" + per_seed + ")"};
}

Outcome metric_identities() {
  std::size_t ok = 0;
  for (std::size_t log = 0; log < kMetricLogs; ++log) {
    Rng rng(derive_seed(707, std::to_string(log)));
    const auto n = 1 + rng.uniform_index(60);
    std::vector<Decision> ds;
    std::size_t cells[2][2] = {{0, 0}, {0, 0}};  // [agree][ai correct]
    for (std::size_t i = 0; i < n; ++i) {
      Decision d;
      d.groundtruth = rng.bernoulli(0.5) ? Label::kPositive : Label::kNegative;
      d.ai_label = rng.bernoulli(0.7) ? d.groundtruth
                                      : (d.groundtruth == Label::kPositive ? Label::kNegative
                                                                           : Label::kPositive);
      d.human_label = rng.bernoulli(0.5) ? Label::kPositive : Label::kNegative;
      d.elapsed_ms = static_cast<std::int64_t>(rng.uniform_index(10000));
      ++cells[d.human_label == d.ai_label][d.ai_label == d.groundtruth];
      ds.push_back(d);
    }
    const auto m = compute_metrics(ds);
    const double nn = static_cast<double>(n);
    std::size_t correct = 0;
    for (const auto& d : ds) correct += d.human_label == d.groundtruth;
    const bool cells_ok = m.agree_correct == cells[1][1] && m.agree_wrong == cells[1][0] &&
                          m.disagree_correct == cells[0][1] && m.disagree_wrong == cells[0][0] &&
                          m.n_decisions == n;
    const double acc = static_cast<double>(correct) / nn;
    const bool acc_ok =
        std::abs(m.accuracy - acc) < kIdentityTolerance &&
        std::abs(m.accuracy - (m.appropriate_agreement + m.appropriate_disagreement)) <
            kIdentityTolerance &&
        std::abs(m.appropriate_agreement - cells[1][1] / nn) < kIdentityTolerance &&
        std::abs(m.appropriate_disagreement - cells[0][0] / nn) < kIdentityTolerance;
    const bool reliance_ok =
        std::abs(m.reliance - (cells[1][1] + cells[1][0]) / nn) < kIdentityTolerance;
    if (cells_ok && acc_ok && reliance_ok) ++ok;
  }
  return {ok == kMetricLogs, std::to_string(ok) + "/" + std::to_string(kMetricLogs) + " logs"};
}

Clock virtual_clock() {
  auto t = std::make_shared<std::int64_t>(1'700'000'000'000);
  return [t] { return *t += 1000; };
}

Outcome protocol_fidelity() {
  const auto& p = pipelines().front();
  auto materials = std::make_shared<StudyMaterials>(*p.materials);
  const auto oracle = st::lexicon_oracle();
  materials->panel_model =
      train_panel_model(*materials, simulate_panel(*materials, oracle, 5), p.options.seed, 1.0, 0.5);

  SimulationOptions options;
  options.oracle = oracle;
  for (auto name : {ConditionName::kControl, ConditionName::kOpenEnded, ConditionName::kCritique,
                    ConditionName::kPanelSelective}) {
    options.conditions.push_back({name, Sampling::kFixed});
    options.conditions.push_back({name, Sampling::kRandom});
  }
  options.sessions_per_condition = 2;

  st::TempDir dir;
  std::vector<std::string> exports[2];
  bool sessions_ok = true;
  std::size_t n_sessions = 0;
  std::optional<std::vector<std::string>> fixed_ids;
  bool fixed_ok = true;
  for (int run = 0; run < 2; ++run) {
    StudyConfig config;
    config.store_dir = dir / ("store" + std::to_string(run));
    for (const auto& c : options.conditions) config.roster.push_back({c, 1});
    const auto out = dir / ("export" + std::to_string(run));
    auto store = std::make_shared<SessionStore>(config.store_dir);
    {
      StudyServer server(config, materials, store, virtual_clock());
      const auto ids = run_simulation(server, options);
      n_sessions = ids.size();
      for (const auto& id : ids) {
        const auto s = server.session(id);
        std::set<std::string> input_docs;
        for (const auto& r : store->inputs_for(id)) input_docs.insert(r.doc_id);
        const std::size_t want_inputs = s.has_input_phase() ? kInputItems : 0;
        std::size_t decided = 0, correct = 0;
        for (const auto& d : store->decisions()) {
          if (d.session_id != id) continue;
          ++decided;
          correct += d.ai_label == d.groundtruth;
        }
        sessions_ok = sessions_ok && s.phase == Phase::kDone && s.inputs_done == want_inputs &&
                      s.input_review_ids.size() == want_inputs && decided == kTaskItems &&
                      correct == kTaskItems / 2;
        if (s.has_input_phase() && s.condition.name == ConditionName::kOpenEnded) {
          sessions_ok = sessions_ok && input_docs.size() <= kInputItems;
        }
        if (s.condition.name == ConditionName::kCritique) {
          sessions_ok = sessions_ok && input_docs.size() == kInputItems;
        }
        if (s.condition.sampling == Sampling::kFixed) {
          if (!fixed_ids) fixed_ids = s.task_review_ids;
          fixed_ok = fixed_ok && *fixed_ids == s.task_review_ids;
        }
      }
      server.export_results(out);
    }
    for (const char* f : {"decisions.csv", "surveys.csv", "inputs.jsonl", "metrics.json"}) {
      exports[run].push_back(st::read_file(out / f));
    }
  }
  const bool bytes_ok = exports[0] == exports[1];
  return {sessions_ok && fixed_ok && bytes_ok && n_sessions == 16,
          std::to_string(n_sessions) + " sessions" +
              (sessions_ok ? ", item counts ok" : ", item counts WRONG") +
              (fixed_ok ? ", fixed task lists identical" : ", fixed task lists differ") +
              (bytes_ok ? ", exports byte-identical" : ", exports differ")};
}

Outcome classifier_sanity() {
  const auto& p = pipelines().front();
  std::size_t correct = 0, wrong_pos = 0, wrong_neg = 0;
  for (const auto& [id, item] : p.materials->task_items) {
    if (item.ai_correct()) {
      ++correct;
    } else if (item.groundtruth == Label::kPositive) {
      ++wrong_pos;
    } else {
      ++wrong_neg;
    }
  }
  const double acc = static_cast<double>(correct) / p.materials->task_items.size();
  const bool sizes_ok = p.splits.train.size() == 200 && p.splits.dev.size() == 500 &&
                        p.splits.test.size() == 500 && p.options.seed == 7;
  return {sizes_ok && acc >= kMinTestAccuracy && acc <= kMaxTestAccuracy &&
              wrong_pos >= kMinWrongPerClass && wrong_neg >= kMinWrongPerClass,
          fmt("test accuracy %.3f", acc) + ", wrong positives " + std::to_string(wrong_pos) +
              ", wrong negatives " + std::to_string(wrong_neg)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"LIME sign recovery", sign_recovery},
      {"LIME exhaustive equivalence", exhaustive_equivalence},
      {"SP-LIME coverage optimality", [] { return splime_optimality(*pipelines().front().materials); }},
      {"negative sampling balance", negative_balance},
      {"belief model recovery", belief_recovery},
      {"selective rendering support", selective_support},
      {"metric identities", metric_identities},
      {"protocol fidelity", protocol_fidelity},
      {"reference classifier sanity", classifier_sanity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
