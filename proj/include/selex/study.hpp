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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "selex/belief.hpp"
#include "selex/corpus.hpp"
#include "selex/explainer.hpp"
#include "selex/selector.hpp"

namespace selex {

inline constexpr std::size_t kInputItems = 10;
inline constexpr std::size_t kTaskItems = 20;
inline constexpr std::size_t kTaskItemsPerCell = kTaskItems / 4;

// ---------------------------------------------------------------------------
// Conditions and sessions

enum class ConditionName { kControl, kOpenEnded, kCritique, kPanelSelective };
enum class Sampling { kFixed, kRandom };
enum class InputSource { kNone, kSelf, kPanel };

std::string_view condition_name(ConditionName c);
std::optional<ConditionName> parse_condition_name(std::string_view text);
std::string_view sampling_name(Sampling s);
std::optional<Sampling> parse_sampling(std::string_view text);

struct Condition {
  ConditionName name = ConditionName::kControl;
  Sampling sampling = Sampling::kFixed;

  InputSource input_source() const;
  // Elicitation used in the input phase, if the condition has one.
  std::optional<Elicitation> elicitation() const;
  bool selective() const { return input_source() != InputSource::kNone; }

  friend bool operator==(const Condition&, const Condition&) = default;
};

enum class Phase { kConsent, kInput, kTask, kSurvey, kDone };

std::string_view phase_name(Phase p);
std::optional<Phase> parse_phase(std::string_view text);

struct Session {
  std::string session_id;
  Condition condition;
  Phase phase = Phase::kConsent;
  std::uint64_t seed = 0;
  std::vector<std::string> input_review_ids;
  std::vector<std::string> task_review_ids;
  std::size_t inputs_done = 0;
  std::vector<std::string> decided_ids;  // in decision order
  bool training = false;
  std::optional<std::string> belief_model_ref;
  std::optional<std::string> training_error;
  std::map<std::string, std::int64_t> clock;      // phase name -> entry time
  std::map<std::string, std::int64_t> served_at;  // doc id -> first serve time

  bool has_input_phase() const {
    return condition.input_source() == InputSource::kSelf;
  }
  bool decided(const std::string& doc_id) const;
  // Next item of the current phase, or nullopt when the phase is exhausted.
  std::optional<std::string> current_item() const;
};

nlohmann::json session_to_json(const Session& s);
Session session_from_json(const nlohmann::json& j);

// consent -> input (self-input conditions) or task.
void begin_session(Session& s, std::int64_t now_ms);

// Marks the current input item answered. Returns true when this completes the
// input phase, which leaves the session in the training sub-state.
bool complete_input_item(Session& s, const std::string& doc_id,
                         std::int64_t now_ms);

// Ends the training sub-state and enters the task phase.
void finish_training(Session& s, std::optional<std::string> model_ref,
                     std::optional<std::string> error, std::int64_t now_ms);

// ---------------------------------------------------------------------------
// Decisions and metrics

struct TaskItem {
  std::string doc_id;
  Label groundtruth = Label::kNegative;
  Label ai_label = Label::kNegative;

  bool ai_correct() const { return groundtruth == ai_label; }
};

struct Decision {
  std::string session_id;
  std::string doc_id;
  Label human_label = Label::kNegative;
  Label ai_label = Label::kNegative;
  Label groundtruth = Label::kNegative;
  std::int64_t elapsed_ms = 0;
};

nlohmann::json decision_to_json(const Decision& d);
Decision decision_from_json(const nlohmann::json& j);

// Validates the protocol, appends to the session and returns the decision.
// Moves the session to the survey phase after the last task item.
Decision record_decision(Session& s, const std::map<std::string, TaskItem>& items,
                         const std::string& doc_id, Label human_label,
                         std::int64_t elapsed_ms, std::int64_t now_ms);


struct MetricsReport {
  std::size_t n_decisions = 0;
  // 2x2 cells: human agrees/disagrees with the AI x AI correct/wrong.
  std::size_t agree_correct = 0;
  std::size_t agree_wrong = 0;
  std::size_t disagree_correct = 0;
  std::size_t disagree_wrong = 0;

  double accuracy = 0.0;
  double reliance = 0.0;
  std::optional<double> over_reliance;   // agree | AI wrong
  std::optional<double> under_reliance;  // disagree | AI correct
  double appropriate_agreement = 0.0;     // P(agree and AI correct)
  double appropriate_disagreement = 0.0;  // P(disagree and AI wrong)
  std::int64_t total_task_ms = 0;

  std::size_t n_ai_correct() const { return agree_correct + disagree_correct; }
  std::size_t n_ai_wrong() const { return agree_wrong + disagree_wrong; }
};

MetricsReport compute_metrics(std::span<const Decision> decisions);
nlohmann::json metrics_to_json(const MetricsReport& m);

// ---------------------------------------------------------------------------
// Sampling

struct InputSample {
  std::vector<std::string> doc_ids;
  std::size_t n_prediction_correct = 0;
};

// SP-LIME pick of the input-phase reviews; logs how many carry a correct
// model prediction.
InputSample sample_input_reviews(std::span<const Explanation> dev_pool,
                                 const std::map<std::string, Label>& groundtruth);

// Five reviews per (groundtruth x AI-correctness) cell, shuffled. Fixed mode
// draws with `fixed_seed`, random mode with `session_seed`.
std::vector<std::string> sample_task_reviews(std::span<const TaskItem> candidates,
                                             Sampling mode,
                                             std::uint64_t fixed_seed,
                                             std::uint64_t session_seed);

// ---------------------------------------------------------------------------
// Simulated participants

struct OracleAnnotator {
  std::unordered_set<std::string> lexicon;
  double noise_rate = 0.0;
  std::uint64_t seed = 0;
};

std::vector<InputRecord> simulate_input(const OracleAnnotator& oracle,
                                        std::span<const TokenizedReview> reviews,
                                        const ExplanationCache& explanations,
                                        Elicitation elicitation,
                                        const std::string& session_id,
                                        std::int64_t timestamp = 0);

// Simulated decision: weighs the visible highlights of lexicon words by
// intensity and direction; follows the AI when that evidence is balanced.
Label oracle_decision(const OracleAnnotator& oracle,
                      const TokenizedReview& review,
                      const SelectiveExplanation& rendering, Label ai_label);

// ---------------------------------------------------------------------------
// Survey

struct SurveyItem {
  std::string key;
  std::string prompt;
  bool reversed = false;
};

// Likert items rated 1 (strongly disagree) .. 5 (strongly agree).
const std::vector<SurveyItem>& survey_items();
nlohmann::json survey_schema();

struct SurveyResponse {
  std::string session_id;
  std::map<std::string, int> ratings;
  std::map<std::string, std::string> demographics;
};

void validate_survey(const SurveyResponse& r);
nlohmann::json survey_to_json(const SurveyResponse& r);
SurveyResponse survey_from_json(const nlohmann::json& j);

void record_survey(Session& s, std::int64_t now_ms);

// ---------------------------------------------------------------------------
// Analyses

struct HighlightSupport {
  std::optional<double> when_ai_correct;
  std::optional<double> when_ai_wrong;
};

HighlightSupport highlight_support_report(
    std::span<const std::string> task_ids, const ExplanationCache& explanations,
    const std::map<std::string, SelectiveExplanation>& renderings,
    const std::map<std::string, Label>& groundtruths);

struct RankedWord {
  std::string word;
  std::size_t count = 0;
};

struct TopWords {
  std::vector<RankedWord> top_selected;
  std::vector<RankedWord> top_misaligned;
};

TopWords top_words_report(std::span<const InputRecord> records,
                          std::span<const SelectiveExplanation> renderings,
                          const std::map<std::string, TokenizedReview>& reviews,
                          std::size_t limit = 10);

}  // namespace selex
