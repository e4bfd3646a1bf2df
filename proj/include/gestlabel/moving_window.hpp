// Copyright 2026 The gestlabel Authors. All Rights Reserved.
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

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "gestlabel/core.hpp"
#include "gestlabel/fixed_window.hpp"
#include "gestlabel/similarity.hpp"

namespace gestlabel {

/// Every (gesture, ref, start, win) the moving-window labeler may score for a
/// sentence of `n` tokens, windows capped at w_max.
inline std::vector<ScoreKey> moving_window_keys(const ReferenceSet& refs, std::size_t n,
                                                std::size_t w_max) {
  std::vector<ScoreKey> keys;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t g = 0; g < refs.size(); ++g) {
      for (std::size_t i = 0; i < refs.sentences(g).size(); ++i) {
        for (std::size_t win = 1; win <= std::min(w_max, n - j); ++win) {
          keys.push_back({g, i, j, win});
        }
      }
    }
  }
  return keys;
}

/// Best candidate at position j over all non-excluded gestures and windows,
/// subject to the context-change check: the winning window is grown by one
/// token and the gesture is dropped (retrying up to p times in total) when
/// the score moves by more than th1 in the direction selected by
/// check1_mode. The check only runs when the grown window still fits both
/// the sentence and w_max.
inline std::optional<Candidate> select_candidate(const TokenizedSentence& s, std::size_t j,
                                                 const EngineConfig& cfg, CachedScorer& scorer,
                                                 std::set<std::size_t> excluded = {},
                                                 int tries = 0) {
  const auto& refs = scorer.refs();
  const std::size_t n = s.n();
  if (j >= n) return std::nullopt;
  const std::size_t max_win = std::min(cfg.wmax(), n - j);
  std::vector<Candidate> cands;
  for (; tries < cfg.p; ++tries) {
    cands.clear();
    for (std::size_t g = 0; g < refs.size(); ++g) {
      if (excluded.contains(g)) continue;
      for (std::size_t i = 0; i < refs.sentences(g).size(); ++i) {
        for (std::size_t win = 1; win <= max_win; ++win) {
          cands.push_back({scorer.score(s, {g, i, j, win}), g, i, win, j});
        }
      }
    }
    if (cands.empty()) return std::nullopt;
    auto best = rank_candidates(cands);
    if (!(best.score > cfg.th0)) return std::nullopt;

    const std::size_t grown = best.win + 1;
    if (j + grown > n || grown > cfg.wmax()) return best;
    const double check = scorer.score(s, {best.gesture_index, best.ref_index, j, grown});
    const double delta =
        cfg.check1_mode == Check1Mode::drop ? best.score - check : check - best.score;
    if (!(delta > cfg.th1)) return best;
    excluded.insert(best.gesture_index);
  }
  return std::nullopt;
}

/// Moving-window labeling. After a candidate is selected at j, each interior
/// start j+1 .. j+win-1 is searched again (with its own context-change
/// check); the best of those strictly above the original score replaces it.
/// Tokens skipped by a replacement stay unlabeled.
inline std::vector<LabelSpan> label_moving(const TokenizedSentence& s, const EngineConfig& cfg,
                                           CachedScorer& scorer) {
  const auto& refs = scorer.refs();
  if (cfg.prefetch && s.n() > 0) {
    scorer.prefetch(s, moving_window_keys(refs, s.n(), cfg.wmax()));
  }
  std::vector<LabelSpan> out;
  std::size_t j = 0;
  while (j < s.n()) {
    auto picked = select_candidate(s, j, cfg, scorer);
    if (!picked) {
      ++j;
      continue;
    }
    std::optional<Candidate> better;
    for (std::size_t jc = j + 1; jc < j + picked->win; ++jc) {
      auto r = select_candidate(s, jc, cfg, scorer);
      if (!r || !(r->score > picked->score)) continue;
      // equal scores keep the earlier start
      if (!better || r->score > better->score) better = r;
    }
    const Candidate& chosen = better ? *better : *picked;
    out.push_back(detail::to_label(s, refs, chosen));
    j = chosen.start + chosen.win;
  }
  return out;
}

}  // namespace gestlabel
