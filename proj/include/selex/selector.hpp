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

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selex/belief.hpp"
#include "selex/corpus.hpp"
#include "selex/explainer.hpp"

namespace selex {

enum class Direction { kPositive, kNegative };

struct DisplayState {
  enum class Kind { kPlain, kHighlighted, kGrayed };

  Kind kind = Kind::kPlain;
  Direction direction = Direction::kPositive;  // meaningful when highlighted
  int intensity = 0;                           // 1..3 when highlighted

  static DisplayState plain() { return {}; }
  static DisplayState grayed() { return {Kind::kGrayed, Direction::kPositive, 0}; }
  static DisplayState highlighted(Direction d, int intensity) {
    return {Kind::kHighlighted, d, intensity};
  }

  bool is_highlighted() const { return kind == Kind::kHighlighted; }
  bool is_grayed() const { return kind == Kind::kGrayed; }

  friend bool operator==(const DisplayState&, const DisplayState&) = default;
};

enum class RenderMode { kOriginal, kSelective };

struct SelectiveExplanation {
  std::string doc_id;
  RenderMode mode = RenderMode::kOriginal;
  std::vector<DisplayState> states;  // aligned with the review's tokens
};

struct RenderOptions {
  // Gray out keywords the belief model cannot assess (no embedding).
  bool gray_unknown = false;
};

// Intensity bucket of |weight| relative to the largest |weight|:
// (2/3, 1] -> 3, (1/3, 2/3] -> 2, [0, 1/3] -> 1.
int intensity_bucket(double abs_weight, double max_abs_weight);

// Original mode when `belief` is null; otherwise keywords predicted
// not relevant are grayed.
SelectiveExplanation render_states(const Explanation& expl,
                                   const TokenizedReview& review,
                                   const BeliefModel* belief,
                                   const EmbeddingTable& emb,
                                   const RenderOptions& options = {});

// Share of highlighted token occurrences whose direction matches the
// groundtruth. nullopt when nothing is highlighted.
std::optional<double> supporting_fraction(const SelectiveExplanation& states,
                                          Label groundtruth);

// Wire format consumed by the browser client.
nlohmann::json rendering_to_json(const SelectiveExplanation& rendering,
                                 const TokenizedReview& review);

std::string_view mode_name(RenderMode mode);

}  // namespace selex
