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

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gestlabel/core.hpp"
#include "gestlabel/io.hpp"
#include "gestlabel/similarity.hpp"

namespace gestlabel {

struct WindowDiagnostics {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double score = 0.0;  // mean - std
};

struct WindowEntry {
  std::optional<std::size_t> win;  // nullopt: uncalibrated
  std::string reason;
  std::map<std::size_t, WindowDiagnostics> diagnostics;
};

/// Per-gesture window sizes for the fixed-window labeler.
struct WindowTable {
  std::map<std::string, WindowEntry> entries;

  std::optional<std::size_t> window(const std::string& gesture_id) const {
    auto it = entries.find(gesture_id);
    return it == entries.end() ? std::nullopt : it->second.win;
  }

  void force(const std::string& gesture_id, std::size_t win) {
    auto& e = entries[gesture_id];
    e.win = win;
    e.reason.clear();
  }

  void validate(const ReferenceSet& refs, const EngineConfig& cfg) const {
    for (const auto& g : refs.gestures()) {
      auto it = entries.find(g.id);
      if (it == entries.end()) {
        throw ValidationError("windows: no entry for gesture '" + g.id + "'");
      }
      if (it->second.win && (*it->second.win < 1 || *it->second.win > cfg.wmax())) {
        throw ValidationError("windows: window of '" + g.id + "' outside [1, w_max]");
      }
    }
  }
};

/// A gesture index with the single window it is scored at.
struct ActiveWindow {
  std::size_t gesture = 0;
  std::size_t win = 0;
};

namespace detail {

// The fixed-window scan. Returns the accepted candidates in emission order.
inline std::vector<Candidate> fixed_scan(const TokenizedSentence& s,
                                         std::span<const ActiveWindow> active,
                                         const EngineConfig& cfg, CachedScorer& scorer) {
  const auto& refs = scorer.refs();
  std::vector<Candidate> accepted;
  std::vector<Candidate> cands;
  const std::size_t n = s.n();
  std::size_t j = 0;
  while (j < n) {
    cands.clear();
    for (const auto& a : active) {
      if (j + a.win > n) continue;  // gesture does not fit here
      for (std::size_t i = 0; i < refs.sentences(a.gesture).size(); ++i) {
        ScoreKey key{a.gesture, i, j, a.win};
        cands.push_back({scorer.score(s, key), a.gesture, i, a.win, j});
      }
    }
    if (cands.empty()) {
      ++j;
      continue;
    }
    auto best = rank_candidates(cands);
    if (!(best.score > cfg.th0)) {
      ++j;
      continue;
    }
    accepted.push_back(best);
    j += best.win;
  }
  return accepted;
}

inline LabelSpan to_label(const TokenizedSentence& s, const ReferenceSet& refs,
                          const Candidate& c) {
  LabelSpan l;
  l.sentence_id = s.id;
  l.gesture_id = refs.gesture(c.gesture_index).id;
  l.start = c.start;
  l.len = c.win;
  l.score = c.score;
  l.source = LabelSource::predicted;
  l.ref_sentence_index = c.ref_index;
  return l;
}

}  // namespace detail

/// Labels `s` scoring every calibrated gesture at its own window size.
/// Uncalibrated gestures take no part.
inline std::vector<LabelSpan> label_fixed(const TokenizedSentence& s, const WindowTable& wt,
                                          const EngineConfig& cfg, CachedScorer& scorer) {
  const auto& refs = scorer.refs();
  wt.validate(refs, cfg);
  std::vector<ActiveWindow> active;
  for (std::size_t g = 0; g < refs.size(); ++g) {
    if (auto win = wt.window(refs.gesture(g).id)) active.push_back({g, *win});
  }
  std::vector<LabelSpan> out;
  for (const auto& c : detail::fixed_scan(s, active, cfg, scorer)) {
    out.push_back(detail::to_label(s, refs, c));
  }
  return out;
}

/// For each gesture in isolation and each window 1..w_max, runs the fixed
/// scan over the corpus and collects the accepted scores. A window is valid
/// with at least `min_count` of them; the valid window maximizing
/// mean - std (population) wins, smaller windows winning ties.
inline WindowTable calibrate_windows(std::span<const TokenizedSentence> corpus,
                                     const EngineConfig& cfg, CachedScorer& scorer,
                                     std::size_t min_count = 10) {
  if (corpus.empty()) throw ValidationError("calibrate: empty corpus");
  const auto& refs = scorer.refs();
  WindowTable table;
  for (std::size_t g = 0; g < refs.size(); ++g) {
    WindowEntry entry;
    std::optional<double> best_score;
    std::size_t best_count = 0;
    for (std::size_t win = 1; win <= cfg.wmax(); ++win) {
      const ActiveWindow only[] = {{g, win}};
      std::vector<double> values;
      for (const auto& s : corpus) {
        for (const auto& c : detail::fixed_scan(s, only, cfg, scorer)) values.push_back(c.score);
      }
      WindowDiagnostics d;
      d.count = values.size();
      if (!values.empty()) {
        for (double v : values) d.mean += v;
        d.mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - d.mean) * (v - d.mean);
        d.std = std::sqrt(var / static_cast<double>(values.size()));
        d.score = d.mean - d.std;
      }
      best_count = std::max(best_count, d.count);
      if (d.count >= min_count && (!best_score || d.score > *best_score)) {
        best_score = d.score;
        entry.win = win;
      }
      entry.diagnostics.emplace(win, d);
    }
    if (!entry.win) {
      entry.reason = "insufficient samples: at most " + std::to_string(best_count) +
                     " accepted scores for any window, need " + std::to_string(min_count);
    }
    table.entries.emplace(refs.gesture(g).id, std::move(entry));
  }
  return table;
}

inline ordered_json to_json(const WindowTable& wt) {
  ordered_json windows = ordered_json::object();
  ordered_json diagnostics = ordered_json::object();
  ordered_json reasons = ordered_json::object();
  for (const auto& [id, e] : wt.entries) {
    windows[id] = e.win ? ordered_json(*e.win) : ordered_json(nullptr);
    if (!e.reason.empty()) reasons[id] = e.reason;
    ordered_json per = ordered_json::object();
    for (const auto& [win, d] : e.diagnostics) {
      per[std::to_string(win)] = {
          {"count", d.count}, {"mean", d.mean}, {"std", d.std}, {"score", d.score}};
    }
    diagnostics[id] = std::move(per);
  }
  ordered_json out;
  out["windows"] = std::move(windows);
  out["diagnostics"] = std::move(diagnostics);
  out["reasons"] = std::move(reasons);
  return out;
}

inline WindowTable window_table_from_json(const json& j, const std::string& where = "windows") {
  if (!j.is_object() || !j.contains("windows") || !j.at("windows").is_object()) {
    throw ValidationError(where + ": missing 'windows' object");
  }
  WindowTable wt;
  for (const auto& [id, v] : j.at("windows").items()) {
    WindowEntry e;
    if (!v.is_null()) {
      if (!v.is_number_integer() || v.get<long long>() < 1) {
        throw ValidationError(where + ": window of '" + id + "' must be a positive integer");
      }
      e.win = v.get<std::size_t>();
    }
    if (j.contains("reasons") && j.at("reasons").contains(id)) {
      e.reason = j.at("reasons").at(id).get<std::string>();
    }
    if (j.contains("diagnostics") && j.at("diagnostics").contains(id)) {
      for (const auto& [win, d] : j.at("diagnostics").at(id).items()) {
        WindowDiagnostics diag;
        diag.count = d.value("count", std::size_t{0});
        diag.mean = d.value("mean", 0.0);
        diag.std = d.value("std", 0.0);
        diag.score = d.value("score", 0.0);
        e.diagnostics.emplace(static_cast<std::size_t>(std::stoul(win)), diag);
      }
    }
    wt.entries.emplace(id, std::move(e));
  }
  return wt;
}

inline WindowTable load_window_table(const std::filesystem::path& path) {
  return window_table_from_json(parse_json(read_file(path), path.string()),
                                path.filename().string());
}

/// Parses "GESTURE=WIN".
inline std::pair<std::string, std::size_t> parse_force_window(const std::string& spec) {
  auto eq = spec.rfind('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ValidationError("--force-window expects GESTURE=WIN, got '" + spec + "'");
  }
  std::size_t win = 0;
  try {
    std::size_t used = 0;
    win = std::stoul(spec.substr(eq + 1), &used);
    if (used != spec.size() - eq - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ValidationError("--force-window: bad window in '" + spec + "'");
  }
  if (win == 0) throw ValidationError("--force-window: window must be >= 1");
  return {spec.substr(0, eq), win};
}

}  // namespace gestlabel
