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

#include "selex/study.hpp"

#include <algorithm>

#include "selex/error.hpp"
#include "selex/log.hpp"
#include "selex/random.hpp"

namespace selex {

using json = nlohmann::json;

std::string_view condition_name(ConditionName c) {
  switch (c) {
    case ConditionName::kControl:
      return "control";
    case ConditionName::kOpenEnded:
      return "open_ended";
    case ConditionName::kCritique:
      return "critique";
    case ConditionName::kPanelSelective:
      return "panel_selective";
  }
  return "control";
}

std::optional<ConditionName> parse_condition_name(std::string_view text) {
  for (auto c : {ConditionName::kControl, ConditionName::kOpenEnded,
                 ConditionName::kCritique, ConditionName::kPanelSelective}) {
    if (condition_name(c) == text) return c;
  }
  return std::nullopt;
}

std::string_view sampling_name(Sampling s) {
  return s == Sampling::kFixed ? "fixed" : "random";
}

std::optional<Sampling> parse_sampling(std::string_view text) {
  if (text == "fixed") return Sampling::kFixed;
  if (text == "random") return Sampling::kRandom;
  return std::nullopt;
}

InputSource Condition::input_source() const {
  switch (name) {
    case ConditionName::kControl:
      return InputSource::kNone;
    case ConditionName::kOpenEnded:
    case ConditionName::kCritique:
      return InputSource::kSelf;
    case ConditionName::kPanelSelective:
      return InputSource::kPanel;
  }
  return InputSource::kNone;
}

std::optional<Elicitation> Condition::elicitation() const {
  if (name == ConditionName::kOpenEnded) return Elicitation::kOpenEnded;
  if (name == ConditionName::kCritique) return Elicitation::kCritique;
  return std::nullopt;
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::kConsent:
      return "consent";
    case Phase::kInput:
      return "input";
    case Phase::kTask:
      return "task";
    case Phase::kSurvey:
      return "survey";
    case Phase::kDone:
      return "done";
  }
  return "consent";
}

std::optional<Phase> parse_phase(std::string_view text) {
  for (auto p : {Phase::kConsent, Phase::kInput, Phase::kTask, Phase::kSurvey,
                 Phase::kDone}) {
    if (phase_name(p) == text) return p;
  }
  return std::nullopt;
}

bool Session::decided(const std::string& doc_id) const {
  return std::find(decided_ids.begin(), decided_ids.end(), doc_id) !=
         decided_ids.end();
}

std::optional<std::string> Session::current_item() const {
  if (phase == Phase::kInput && !training && inputs_done < input_review_ids.size()) {
    return input_review_ids[inputs_done];
  }
  if (phase == Phase::kTask) {
    for (const auto& id : task_review_ids) {
      if (!decided(id)) return id;
    }
  }
  return std::nullopt;
}

json session_to_json(const Session& s) {
  json j = {{"session_id", s.session_id},
            {"condition", condition_name(s.condition.name)},
            {"sampling", sampling_name(s.condition.sampling)},
            {"phase", phase_name(s.phase)},
            {"seed", s.seed},
            {"input_review_ids", s.input_review_ids},
            {"task_review_ids", s.task_review_ids},
            {"inputs_done", s.inputs_done},
            {"decided_ids", s.decided_ids},
            {"training", s.training},
            {"clock", s.clock},
            {"served_at", s.served_at}};
  j["belief_model_ref"] = s.belief_model_ref ? json(*s.belief_model_ref) : json();
  j["training_error"] = s.training_error ? json(*s.training_error) : json();
  return j;
}

Session session_from_json(const json& j) {
  Session s;
  s.session_id = j.at("session_id").get<std::string>();
  auto name = parse_condition_name(j.at("condition").get<std::string>());
  auto sampling = parse_sampling(j.at("sampling").get<std::string>());
  auto phase = parse_phase(j.at("phase").get<std::string>());
  if (!name || !sampling || !phase) {
    throw InvalidArgument("session '" + s.session_id + "': corrupt snapshot");
  }
  s.condition = {*name, *sampling};
  s.phase = *phase;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.input_review_ids = j.at("input_review_ids").get<std::vector<std::string>>();
  s.task_review_ids = j.at("task_review_ids").get<std::vector<std::string>>();
  s.inputs_done = j.at("inputs_done").get<std::size_t>();
  s.decided_ids = j.at("decided_ids").get<std::vector<std::string>>();
  s.training = j.at("training").get<bool>();
  s.clock = j.at("clock").get<std::map<std::string, std::int64_t>>();
  s.served_at = j.at("served_at").get<std::map<std::string, std::int64_t>>();
  if (!j.at("belief_model_ref").is_null()) {
    s.belief_model_ref = j.at("belief_model_ref").get<std::string>();
  }
  if (!j.at("training_error").is_null()) {
    s.training_error = j.at("training_error").get<std::string>();
  }
  return s;
}

namespace {

[[noreturn]] void wrong_phase(const Session& s, std::string_view action) {
  throw ProtocolError("wrong_phase", std::string(action) + " is not allowed in phase '" +
                                         std::string(phase_name(s.phase)) +
                                         (s.training ? "' (training)" : "'") +
                                         " of session '" + s.session_id + "'");
}

void enter(Session& s, Phase p, std::int64_t now_ms) {
  s.phase = p;
  s.clock[std::string(phase_name(p))] = now_ms;
}

}  // namespace

void begin_session(Session& s, std::int64_t now_ms) {
  if (s.phase != Phase::kConsent) wrong_phase(s, "consent");
  enter(s, s.has_input_phase() ? Phase::kInput : Phase::kTask, now_ms);
}

bool complete_input_item(Session& s, const std::string& doc_id,
                         std::int64_t now_ms) {
  if (s.phase != Phase::kInput || s.training) wrong_phase(s, "input");
  const auto current = s.current_item();
  if (!current || *current != doc_id) {
    throw ProtocolError("unknown_doc", "review '" + doc_id +
                                           "' is not the current input item of session '" +
                                           s.session_id + "'");
  }
  ++s.inputs_done;
  if (s.inputs_done < s.input_review_ids.size()) return false;
  s.training = true;
  s.clock["training"] = now_ms;
  return true;
}

void finish_training(Session& s, std::optional<std::string> model_ref,
                     std::optional<std::string> error, std::int64_t now_ms) {
  if (s.phase != Phase::kInput || !s.training) wrong_phase(s, "finish_training");
  s.training = false;
  s.belief_model_ref = std::move(model_ref);
  s.training_error = std::move(error);
  enter(s, Phase::kTask, now_ms);
}

json decision_to_json(const Decision& d) {
  return {{"session_id", d.session_id},
          {"doc_id", d.doc_id},
          {"human_label", label_name(d.human_label)},
          {"ai_label", label_name(d.ai_label)},
          {"groundtruth", label_name(d.groundtruth)},
          {"elapsed_ms", d.elapsed_ms}};
}

Decision decision_from_json(const json& j) {
  Decision d;
  d.session_id = j.at("session_id").get<std::string>();
  d.doc_id = j.at("doc_id").get<std::string>();
  auto human = parse_label(j.at("human_label").get<std::string>());
  auto ai = parse_label(j.at("ai_label").get<std::string>());
  auto truth = parse_label(j.at("groundtruth").get<std::string>());
  if (!human || !ai || !truth) throw InvalidArgument("decision: bad label");
  d.human_label = *human;
  d.ai_label = *ai;
  d.groundtruth = *truth;
  d.elapsed_ms = j.at("elapsed_ms").get<std::int64_t>();
  return d;
}

Decision record_decision(Session& s, const std::map<std::string, TaskItem>& items,
                         const std::string& doc_id, Label human_label,
                         std::int64_t elapsed_ms, std::int64_t now_ms) {
  if (s.phase != Phase::kTask) wrong_phase(s, "decision");
  if (std::find(s.task_review_ids.begin(), s.task_review_ids.end(), doc_id) ==
      s.task_review_ids.end()) {
    throw ProtocolError("unknown_doc", "review '" + doc_id +
                                           "' is not assigned to session '" +
                                           s.session_id + "'");
  }
  if (s.decided(doc_id)) {
    throw ProtocolError("duplicate", "review '" + doc_id +
                                         "' was already decided in session '" +
                                         s.session_id + "'");
  }
  auto it = items.find(doc_id);
  if (it == items.end()) {
    throw ProtocolError("unknown_doc", "no prediction cached for '" + doc_id + "'");
  }
  Decision d;
  d.session_id = s.session_id;
  d.doc_id = doc_id;
  d.human_label = human_label;
  d.ai_label = it->second.ai_label;
  d.groundtruth = it->second.groundtruth;
  d.elapsed_ms = elapsed_ms;
  s.decided_ids.push_back(doc_id);
  if (s.decided_ids.size() == s.task_review_ids.size()) {
    enter(s, Phase::kSurvey, now_ms);
  }
  return d;
}

MetricsReport compute_metrics(std::span<const Decision> decisions) {
  if (decisions.empty()) throw InvalidArgument("compute_metrics: no decisions");
  MetricsReport m;
  m.n_decisions = decisions.size();
  for (const auto& d : decisions) {
    const bool agree = d.human_label == d.ai_label;
    const bool correct = d.ai_label == d.groundtruth;
    if (agree && correct) ++m.agree_correct;
    if (agree && !correct) ++m.agree_wrong;
    if (!agree && correct) ++m.disagree_correct;
    if (!agree && !correct) ++m.disagree_wrong;
    m.total_task_ms += d.elapsed_ms;
  }
  const auto n = static_cast<double>(m.n_decisions);
  // Human is right when agreeing with a correct AI or overriding a wrong one.
  m.accuracy = static_cast<double>(m.agree_correct + m.disagree_wrong) / n;
  m.reliance = static_cast<double>(m.agree_correct + m.agree_wrong) / n;
  m.appropriate_agreement = static_cast<double>(m.agree_correct) / n;
  m.appropriate_disagreement = static_cast<double>(m.disagree_wrong) / n;
  if (m.n_ai_wrong() > 0) {
    m.over_reliance = static_cast<double>(m.agree_wrong) /
                      static_cast<double>(m.n_ai_wrong());
  }
  if (m.n_ai_correct() > 0) {
    m.under_reliance = static_cast<double>(m.disagree_correct) /
                       static_cast<double>(m.n_ai_correct());
  }
  return m;
}

json metrics_to_json(const MetricsReport& m) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
  return {{"n_decisions", m.n_decisions},
          {"accuracy", m.accuracy},
          {"reliance", m.reliance},
          {"over_reliance", opt(m.over_reliance)},
          {"under_reliance", opt(m.under_reliance)},
          {"appropriate_agreement", m.appropriate_agreement},
          {"appropriate_disagreement", m.appropriate_disagreement},
          {"total_task_ms", m.total_task_ms},
          {"cells",
           {{"agree_correct", m.agree_correct},
            {"agree_wrong", m.agree_wrong},
            {"disagree_correct", m.disagree_correct},
            {"disagree_wrong", m.disagree_wrong}}}};
}

InputSample sample_input_reviews(std::span<const Explanation> dev_pool,
                                 const std::map<std::string, Label>& groundtruth) {
  if (dev_pool.size() < kInputItems) {
    throw InvalidArgument("sample_input_reviews: pool of " +
                          std::to_string(dev_pool.size()) +
                          " explanations is smaller than " +
                          std::to_string(kInputItems));
  }
  InputSample sample;
  sample.doc_ids = splime_select(dev_pool, kInputItems);
  for (const auto& id : sample.doc_ids) {
    auto expl = std::find_if(dev_pool.begin(), dev_pool.end(),
                             [&](const Explanation& e) { return e.doc_id == id; });
    auto truth = groundtruth.find(id);
    if (truth != groundtruth.end() && expl->prediction.label == truth->second) {
      ++sample.n_prediction_correct;
    }
  }
  info("input sample: " + std::to_string(sample.n_prediction_correct) + " of " +
       std::to_string(sample.doc_ids.size()) + " predicted correctly");
  return sample;
}

std::vector<std::string> sample_task_reviews(std::span<const TaskItem> candidates,
                                             Sampling mode,
                                             std::uint64_t fixed_seed,
                                             std::uint64_t session_seed) {
  struct Cell {
    Label truth;
    bool correct;
    std::vector<std::string> ids;
  };
  std::vector<Cell> cells = {{Label::kPositive, true, {}},
                             {Label::kPositive, false, {}},
                             {Label::kNegative, true, {}},
                             {Label::kNegative, false, {}}};
  for (const auto& c : candidates) {
    for (auto& cell : cells) {
      if (cell.truth == c.groundtruth && cell.correct == c.ai_correct()) {
        cell.ids.push_back(c.doc_id);
      }
    }
  }
  for (auto& cell : cells) {
    if (cell.ids.size() < kTaskItemsPerCell) {
      throw InvalidArgument(
          "sample_task_reviews: cell " + std::string(label_name(cell.truth)) +
          "/" + (cell.correct ? "correct" : "incorrect") + " has " +
          std::to_string(cell.ids.size()) + " candidates, need " +
          std::to_string(kTaskItemsPerCell));
    }
    std::sort(cell.ids.begin(), cell.ids.end());
  }
  Rng rng(mode == Sampling::kFixed ? fixed_seed : session_seed);
  std::vector<std::string> picked;
  picked.reserve(kTaskItems);
  for (const auto& cell : cells) {
    auto drawn = rng.sample(std::span<const std::string>(cell.ids), kTaskItemsPerCell);
    picked.insert(picked.end(), drawn.begin(), drawn.end());
  }
  rng.shuffle(picked);
  return picked;
}

std::vector<InputRecord> simulate_input(const OracleAnnotator& oracle,
                                        std::span<const TokenizedReview> reviews,
                                        const ExplanationCache& explanations,
                                        Elicitation elicitation,
                                        const std::string& session_id,
                                        std::int64_t timestamp) {
  Rng rng(derive_seed(oracle.seed, session_id));
  auto judged_relevant = [&](const std::string& word) {
    bool relevant = oracle.lexicon.contains(word);
    if (rng.bernoulli(oracle.noise_rate)) relevant = !relevant;
    return relevant;
  };
  std::vector<InputRecord> out;
  for (const auto& review : reviews) {
    auto make = [&](const std::string& word, Signal signal) {
      return InputRecord{session_id, review.doc.id, word, signal, elicitation,
                         timestamp};
    };
    if (elicitation == Elicitation::kOpenEnded) {
      for (const auto& word : review.unique_words()) {
        if (judged_relevant(word)) out.push_back(make(word, Signal::kSelected));
      }
      continue;
    }
    auto it = explanations.find(review.doc.id);
    if (it == explanations.end()) {
      throw InvalidArgument("simulate_input: no explanation for '" +
                            review.doc.id + "'");
    }
    for (const auto& a : it->second.attributions) {
      out.push_back(make(a.word, judged_relevant(a.word) ? Signal::kAgree
                                                         : Signal::kDisagree));
    }
  }
  return out;
}

Label oracle_decision(const OracleAnnotator& oracle,
                      const TokenizedReview& review,
                      const SelectiveExplanation& rendering, Label ai_label) {
  long score = 0;
  for (std::size_t i = 0; i < review.tokens.size() && i < rendering.states.size(); ++i) {
    const auto& s = rendering.states[i];
    if (!s.is_highlighted() || !oracle.lexicon.contains(review.tokens[i].word)) continue;
    score += s.direction == Direction::kPositive ? s.intensity : -s.intensity;
  }
  if (score > 0) return Label::kPositive;
  if (score < 0) return Label::kNegative;
  return ai_label;
}

const std::vector<SurveyItem>& survey_items() {
  static const std::vector<SurveyItem> items = {
      {"mental_demand", "Completing the task took a lot of mental effort.", false},
      {"success", "I did well on the task.", true},
      {"negative_emotion", "I felt stressed or irritated during the task.", false},
      {"helpfulness", "The AI's predictions and highlights helped me decide.", false},
      {"ease", "The AI made judging the reviews easier.", false},
      {"confidence", "The AI made me more confident in my judgments.", false},
      {"understanding", "I understand how the AI reaches its predictions.", false},
  };
  return items;
}

json survey_schema() {
  json items = json::array();
  for (const auto& it : survey_items()) {
    items.push_back({{"key", it.key}, {"prompt", it.prompt}, {"reversed", it.reversed}});
  }
  return {{"scale", {{"min", 1}, {"max", 5}}}, {"items", std::move(items)}};
}

void validate_survey(const SurveyResponse& r) {
  for (const auto& item : survey_items()) {
    auto it = r.ratings.find(item.key);
    if (it == r.ratings.end()) {
      throw InvalidArgument("survey: missing rating for '" + item.key + "'");
    }
    if (it->second < 1 || it->second > 5) {
      throw InvalidArgument("survey: rating for '" + item.key + "' must be in 1..5");
    }
  }
  for (const auto& [key, value] : r.ratings) {
    const auto& items = survey_items();
    if (std::none_of(items.begin(), items.end(),
                     [&](const SurveyItem& i) { return i.key == key; })) {
      throw InvalidArgument("survey: unknown item '" + key + "'");
    }
  }
}

json survey_to_json(const SurveyResponse& r) {
  return {{"session_id", r.session_id},
          {"ratings", r.ratings},
          {"demographics", r.demographics}};
}

SurveyResponse survey_from_json(const json& j) {
  SurveyResponse r;
  r.session_id = j.value("session_id", std::string());
  r.ratings = j.at("ratings").get<std::map<std::string, int>>();
  if (j.contains("demographics")) {
    r.demographics = j.at("demographics").get<std::map<std::string, std::string>>();
  }
  return r;
}

void record_survey(Session& s, std::int64_t now_ms) {
  if (s.phase != Phase::kSurvey) wrong_phase(s, "survey");
  enter(s, Phase::kDone, now_ms);
}

HighlightSupport highlight_support_report(
    std::span<const std::string> task_ids, const ExplanationCache& explanations,
    const std::map<std::string, SelectiveExplanation>& renderings,
    const std::map<std::string, Label>& groundtruths) {
  double sum_correct = 0.0;
  double sum_wrong = 0.0;
  std::size_t n_correct = 0;
  std::size_t n_wrong = 0;
  for (const auto& id : task_ids) {
    auto r = renderings.find(id);
    auto e = explanations.find(id);
    auto g = groundtruths.find(id);
    if (r == renderings.end() || e == explanations.end() || g == groundtruths.end()) {
      throw InvalidArgument("highlight_support_report: missing data for '" + id + "'");
    }
    const auto fraction = supporting_fraction(r->second, g->second);
    if (!fraction) continue;
    if (e->second.prediction.label == g->second) {
      sum_correct += *fraction;
      ++n_correct;
    } else {
      sum_wrong += *fraction;
      ++n_wrong;
    }
  }
  HighlightSupport out;
  if (n_correct > 0) out.when_ai_correct = sum_correct / static_cast<double>(n_correct);
  if (n_wrong > 0) out.when_ai_wrong = sum_wrong / static_cast<double>(n_wrong);
  return out;
}

namespace {

std::vector<RankedWord> rank(const std::map<std::string, std::size_t>& counts,
                             std::size_t limit) {
  std::vector<RankedWord> out;
  for (const auto& [w, c] : counts) out.push_back({w, c});
  // std::map iteration is already lexicographic; stable sort keeps that for ties.
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedWord& a, const RankedWord& b) { return a.count > b.count; });
  if (out.size() > limit) out.resize(limit);
  return out;
}

}  // namespace

TopWords top_words_report(std::span<const InputRecord> records,
                          std::span<const SelectiveExplanation> renderings,
                          const std::map<std::string, TokenizedReview>& reviews,
                          std::size_t limit) {
  std::map<std::string, std::size_t> selected;
  for (const auto& r : records) {
    if (r.positive()) ++selected[r.word];
  }
  std::map<std::string, std::size_t> grayed;
  for (const auto& rendering : renderings) {
    auto it = reviews.find(rendering.doc_id);
    if (it == reviews.end()) {
      throw InvalidArgument("top_words_report: unknown review '" + rendering.doc_id + "'");
    }
    const auto& tokens = it->second.tokens;
    for (std::size_t i = 0; i < rendering.states.size() && i < tokens.size(); ++i) {
      if (rendering.states[i].is_grayed()) ++grayed[tokens[i].word];
    }
  }
  return {rank(selected, limit), rank(grayed, limit)};
}

}  // namespace selex
