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

#include "selex/selector.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "selex/error.hpp"

namespace selex {

int intensity_bucket(double abs_weight, double max_abs_weight) {
  if (!(max_abs_weight > 0)) return 1;
  const double r = abs_weight / max_abs_weight;
  if (r > 2.0 / 3.0) return 3;
  if (r > 1.0 / 3.0) return 2;
  return 1;
}

SelectiveExplanation render_states(const Explanation& expl,
                                   const TokenizedReview& review,
                                   const BeliefModel* belief,
                                   const EmbeddingTable& emb,
                                   const RenderOptions& options) {
  if (expl.doc_id != review.doc.id) {
    throw InvalidArgument("render_states: explanation for '" + expl.doc_id +
                          "' does not match review '" + review.doc.id + "'");
  }
  double max_abs = 0.0;
  for (const auto& a : expl.attributions) {
    max_abs = std::max(max_abs, std::abs(a.weight));
  }
  // One state per keyword keeps every occurrence of a word uniform.
  std::unordered_map<std::string, DisplayState> by_word;
  for (const auto& a : expl.attributions) {
    bool keep = true;
    if (belief) {
      const Relevance rel = predict_relevance(*belief, a.word, emb);
      keep = rel == Relevance::kRelevant ||
             (rel == Relevance::kUnknown && !options.gray_unknown);
    }
    by_word[a.word] =
        keep ? DisplayState::highlighted(
                   a.weight >= 0 ? Direction::kPositive : Direction::kNegative,
                   intensity_bucket(std::abs(a.weight), max_abs))
             : DisplayState::grayed();
  }

  SelectiveExplanation out;
  out.doc_id = review.doc.id;
  out.mode = belief ? RenderMode::kSelective : RenderMode::kOriginal;
  out.states.reserve(review.tokens.size());
  for (const auto& tok : review.tokens) {
    auto it = by_word.find(tok.word);
    out.states.push_back(it == by_word.end() ? DisplayState::plain() : it->second);
  }
  return out;
}

std::optional<double> supporting_fraction(const SelectiveExplanation& states,
                                          Label groundtruth) {
  const Direction truth =
      groundtruth == Label::kPositive ? Direction::kPositive : Direction::kNegative;
  std::size_t highlighted = 0;
  std::size_t supporting = 0;
  for (const auto& s : states.states) {
    if (!s.is_highlighted()) continue;
    ++highlighted;
    if (s.direction == truth) ++supporting;
  }
  if (highlighted == 0) return std::nullopt;
  return static_cast<double>(supporting) / static_cast<double>(highlighted);
}

std::string_view mode_name(RenderMode mode) {
  return mode == RenderMode::kOriginal ? "original" : "selective";
}

nlohmann::json rendering_to_json(const SelectiveExplanation& rendering,
                                 const TokenizedReview& review) {
  if (rendering.states.size() != review.tokens.size()) {
    throw InvalidArgument("rendering does not align with review '" +
                          review.doc.id + "'");
  }
  nlohmann::json tokens = nlohmann::json::array();
  for (std::size_t i = 0; i < review.tokens.size(); ++i) {
    const auto& tok = review.tokens[i];
    const auto& s = rendering.states[i];
    nlohmann::json t = {{"surface", tok.surface},
                        {"span", {tok.span.start, tok.span.end}}};
    switch (s.kind) {
      case DisplayState::Kind::kPlain:
        t["state"] = "plain";
        break;
      case DisplayState::Kind::kGrayed:
        t["state"] = "grayed";
        break;
      case DisplayState::Kind::kHighlighted:
        t["state"] = "highlighted";
        t["direction"] =
            s.direction == Direction::kPositive ? "positive" : "negative";
        t["intensity"] = s.intensity;
        break;
    }
    tokens.push_back(std::move(t));
  }
  return {{"doc_id", rendering.doc_id},
          {"mode", mode_name(rendering.mode)},
          {"tokens", std::move(tokens)}};
}

}  // namespace selex
