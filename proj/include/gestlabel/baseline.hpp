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
#include <cmath>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gestlabel/core.hpp"
#include "gestlabel/io.hpp"

namespace gestlabel {

/// Label distribution used by the similarity-free baseline labeler.
struct BaselineStats {
  std::map<std::string, double> gesture_probs;
  std::map<std::string, double> window_mean;
  std::map<std::string, double> window_std;
  double start_rate = 0.05;  // chance of opening a label at a scanned token

  void validate() const {
    double total = 0.0;
    for (const auto& [id, prob] : gesture_probs) {
      if (!(prob >= 0.0 && prob <= 1.0)) {
        throw ValidationError("stats: probability of '" + id + "' outside [0,1]");
      }
      if (prob == 0.0) continue;
      total += prob;
      auto m = window_mean.find(id);
      auto s = window_std.find(id);
      if (m == window_mean.end() || s == window_std.end()) {
        throw ValidationError("stats: no window model for '" + id + "'");
      }
      if (!(m->second >= 1.0)) throw ValidationError("stats: window_mean of '" + id + "' < 1");
      if (!(s->second >= 0.0)) throw ValidationError("stats: window_std of '" + id + "' < 0");
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("stats: gesture probabilities sum to " + std::to_string(total));
    }
    if (!(start_rate >= 0.0 && start_rate <= 1.0)) {
      throw ValidationError("stats: start_rate outside [0,1]");
    }
  }
};

/// Frequencies and window-size moments of the ground truth. Standard
/// deviations use the population convention.
inline BaselineStats derive_stats(std::span<const LabelSpan> gt,
                                  std::span<const TokenizedSentence> corpus) {
  if (gt.empty()) {
    throw ValidationError("stats: no ground-truth labels; supply manual stats instead");
  }
  auto lengths = sentence_lengths(corpus);
  std::map<std::string, std::vector<double>> windows;
  for (const auto& l : gt) {
    if (!lengths.contains(l.sentence_id)) {
      throw ValidationError("stats: label references unknown sentence '" + l.sentence_id + "'");
    }
    windows[l.gesture_id].push_back(static_cast<double>(l.len));
  }
  std::size_t tokens = 0;
  for (const auto& s : corpus) tokens += s.n();

  BaselineStats stats;
  const auto total = static_cast<double>(gt.size());
  for (const auto& [id, sizes] : windows) {
    const auto count = static_cast<double>(sizes.size());
    double mean = 0.0;
    for (double w : sizes) mean += w;
    mean /= count;
    double var = 0.0;
    for (double w : sizes) var += (w - mean) * (w - mean);
    stats.gesture_probs[id] = count / total;
    stats.window_mean[id] = mean;
    stats.window_std[id] = std::sqrt(var / count);
  }
  stats.start_rate = tokens == 0 ? 0.0 : std::min(1.0, total / static_cast<double>(tokens));
  return stats;
}

/// Used when no ground truth exists: uniform over gestures, windows ~ N(3, 1).
inline BaselineStats fallback_stats(const ReferenceSet& refs, double start_rate = 0.05) {
  BaselineStats stats;
  for (const auto& g : refs.gestures()) {
    stats.gesture_probs[g.id] = 1.0 / static_cast<double>(refs.size());
    stats.window_mean[g.id] = 3.0;
    stats.window_std[g.id] = 1.0;
  }
  stats.start_rate = start_rate;
  stats.validate();
  return stats;
}

/// Scans the sentence left to right; at each position a label starts with
/// probability start_rate, its gesture drawn from gesture_probs and its length
/// from the gesture's rounded Gaussian, clamped to [1, min(w_max, remaining)].
/// Scores are uniform in (th0, 1]. Seeded per sentence id.
inline std::vector<LabelSpan> label_baseline(const TokenizedSentence& s,
                                             const BaselineStats& stats,
                                             const EngineConfig& cfg) {
  std::vector<LabelSpan> out;
  // No score can lie strictly above 1.
  if (cfg.th0 >= 1.0) return out;

  std::vector<std::pair<const std::string*, double>> cumulative;
  double acc = 0.0;
  for (const auto& [id, prob] : stats.gesture_probs) {
    if (prob <= 0.0) continue;
    acc += prob;
    cumulative.emplace_back(&id, acc);
  }
  if (cumulative.empty()) return out;

  std::mt19937_64 rng(mix_seed(cfg.seed, s.id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = s.n();
  std::size_t j = 0;
  while (j < n) {
    if (!(unit(rng) < stats.start_rate)) {
      ++j;
      continue;
    }
    double u = unit(rng) * acc;
    const std::string* gesture = cumulative.back().first;
    for (const auto& [id, upper] : cumulative) {
      if (u < upper) {
        gesture = id;
        break;
      }
    }
    const double mean = stats.window_mean.at(*gesture);
    const double sd = stats.window_std.at(*gesture);
    double raw = sd > 0.0 ? std::normal_distribution<double>(mean, sd)(rng) : mean;
    const auto cap = static_cast<double>(std::min(cfg.wmax(), n - j));
    const auto win = static_cast<std::size_t>(std::clamp(std::round(raw), 1.0, cap));

    LabelSpan label;
    label.sentence_id = s.id;
    label.gesture_id = *gesture;
    label.start = j;
    label.len = win;
    label.score = 1.0 - unit(rng) * (1.0 - cfg.th0);
    label.source = LabelSource::predicted;
    out.push_back(std::move(label));
    j += win;
  }
  return out;
}

inline ordered_json to_json(const BaselineStats& stats) {
  ordered_json j;
  j["gesture_probs"] = stats.gesture_probs;
  j["window_mean"] = stats.window_mean;
  j["window_std"] = stats.window_std;
  j["start_rate"] = stats.start_rate;
  return j;
}

inline BaselineStats baseline_stats_from_json(const json& j, const std::string& where = "stats") {
  BaselineStats stats;
  try {
    stats.gesture_probs = j.at("gesture_probs").get<std::map<std::string, double>>();
    stats.window_mean = j.at("window_mean").get<std::map<std::string, double>>();
    stats.window_std = j.at("window_std").get<std::map<std::string, double>>();
    stats.start_rate = j.at("start_rate").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  stats.validate();
  return stats;
}

inline BaselineStats load_baseline_stats(const std::filesystem::path& path) {
  return baseline_stats_from_json(parse_json(read_file(path), path.string()),
                                  path.filename().string());
}

}  // namespace gestlabel
