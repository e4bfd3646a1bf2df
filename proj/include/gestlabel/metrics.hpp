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
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gestlabel/core.hpp"
#include "gestlabel/io.hpp"
#include "gestlabel/similarity.hpp"

namespace gestlabel {

/// Token-level intersection over union of two spans in the same sentence.
inline double span_iou(const LabelSpan& a, const LabelSpan& b) {
  if (a.sentence_id != b.sentence_id) {
    throw PreconditionError("span_iou: spans belong to different sentences");
  }
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end(), b.end());
  const std::size_t inter = hi > lo ? hi - lo : 0;
  const std::size_t uni = a.len + b.len - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

using TokenSet = std::set<std::pair<std::string, std::size_t>>;

inline TokenSet covered_tokens(std::span<const LabelSpan> labels, const std::string& gesture_id,
                               std::optional<double> score_min) {
  TokenSet out;
  for (const auto& l : labels) {
    if (l.gesture_id != gesture_id) continue;
    if (score_min && l.score < *score_min) continue;
    for (std::size_t t = l.start; t < l.end(); ++t) out.emplace(l.sentence_id, t);
  }
  return out;
}

}  // namespace detail

/// Pooled token IOU between predictions (score >= score_min) and ground
/// truth for one gesture. nullopt when neither side covers any token.
inline std::optional<double> corpus_iou(std::span<const LabelSpan> pred,
                                        std::span<const LabelSpan> gt,
                                        const std::string& gesture_id, double score_min) {
  auto p = detail::covered_tokens(pred, gesture_id, score_min);
  auto g = detail::covered_tokens(gt, gesture_id, std::nullopt);
  std::size_t inter = 0;
  for (const auto& t : p) inter += g.count(t);
  const std::size_t uni = p.size() + g.size() - inter;
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// All-point average precision: predictions ranked by score (ties by
/// sentence id, then start) greedily claim the unmatched ground-truth span of
/// the same sentence with the highest IOU; a claim with IOU >= iou_min is a
/// true positive. nullopt when the gesture has no ground truth.
inline std::optional<double> average_precision(std::span<const LabelSpan> pred,
                                               std::span<const LabelSpan> gt,
                                               const std::string& gesture_id, double iou_min) {
  std::map<std::string, std::vector<const LabelSpan*>> truth;
  std::size_t n_gt = 0;
  for (const auto& l : gt) {
    if (l.gesture_id != gesture_id) continue;
    truth[l.sentence_id].push_back(&l);
    ++n_gt;
  }
  if (n_gt == 0) return std::nullopt;
  for (auto& [id, v] : truth) {
    std::stable_sort(v.begin(), v.end(),
                     [](const LabelSpan* a, const LabelSpan* b) { return a->start < b->start; });
  }

  std::vector<const LabelSpan*> ranked;
  for (const auto& l : pred) {
    if (l.gesture_id == gesture_id) ranked.push_back(&l);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const LabelSpan* a, const LabelSpan* b) {
    if (a->score != b->score) return a->score > b->score;
    if (a->sentence_id != b->sentence_id) return a->sentence_id < b->sentence_id;
    return a->start < b->start;
  });

  std::set<const LabelSpan*> matched;
  std::size_t tp = 0;
  double ap = 0.0;
  for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
    const auto* p = ranked[rank];
    const LabelSpan* best = nullptr;
    double best_iou = -1.0;
    if (auto it = truth.find(p->sentence_id); it != truth.end()) {
      for (const auto* g : it->second) {
        if (matched.contains(g)) continue;
        double iou = span_iou(*p, *g);
        if (iou > best_iou) {
          best_iou = iou;
          best = g;
        }
      }
    }
    if (best && best_iou >= iou_min) {
      matched.insert(best);
      ++tp;
      // recall rises by 1/n_gt at this rank
      ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(n_gt);
}

struct GestureMetrics {
  std::optional<double> ap;
  std::optional<double> iou;
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
};

struct ActStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t sentences = 0;
};

inline ActStats act_stats(std::span<const double> seconds) {
  ActStats a;
  a.sentences = seconds.size();
  if (seconds.empty()) return a;
  for (double t : seconds) a.mean += t;
  a.mean /= static_cast<double>(seconds.size());
  double var = 0.0;
  for (double t : seconds) var += (t - a.mean) * (t - a.mean);
  a.std = std::sqrt(var / static_cast<double>(seconds.size()));
  return a;
}

struct EvaluationReport {
  std::vector<std::string> gesture_order;
  std::map<std::string, GestureMetrics> per_gesture;
  std::optional<double> mean_ap;
  std::optional<double> mean_iou;
  std::vector<std::string> ap_excluded;
  std::vector<std::string> iou_excluded;
  ActStats act;
  CallStats backend_calls;
  ordered_json config_echo = ordered_json::object();
};

/// Per-gesture AP and IOU plus their means over the gestures where each is
/// defined. `gestures` is the gesture inventory (e.g. a reference set's
/// order); labels naming anything else are rejected.
inline EvaluationReport evaluate(std::span<const LabelSpan> pred, std::span<const LabelSpan> gt,
                                 std::span<const std::string> gestures,
                                 std::span<const double> timings, const EngineConfig& cfg,
                                 CallStats calls = {}) {
  std::set<std::string> known(gestures.begin(), gestures.end());
  std::set<std::string> offenders;
  for (const auto* side : {&pred, &gt}) {
    for (const auto& l : *side) {
      if (!known.contains(l.gesture_id)) offenders.insert(l.gesture_id);
    }
  }
  if (!offenders.empty()) {
    std::string msg = "evaluate: unknown gesture ids:";
    for (const auto& o : offenders) msg += " " + o;
    throw ValidationError(msg);
  }

  EvaluationReport r;
  r.gesture_order.assign(gestures.begin(), gestures.end());
  double ap_sum = 0.0, iou_sum = 0.0;
  std::size_t ap_n = 0, iou_n = 0;
  for (const auto& id : gestures) {
    GestureMetrics m;
    m.n_gt = static_cast<std::size_t>(
        std::count_if(gt.begin(), gt.end(), [&](const LabelSpan& l) { return l.gesture_id == id; }));
    m.n_pred = static_cast<std::size_t>(std::count_if(
        pred.begin(), pred.end(), [&](const LabelSpan& l) { return l.gesture_id == id; }));
    m.ap = average_precision(pred, gt, id, cfg.iou_valid_min);
    m.iou = corpus_iou(pred, gt, id, cfg.score_min);
    if (m.ap) {
      ap_sum += *m.ap;
      ++ap_n;
    } else {
      r.ap_excluded.push_back(id);
    }
    if (m.iou) {
      iou_sum += *m.iou;
      ++iou_n;
    } else {
      r.iou_excluded.push_back(id);
    }
    r.per_gesture.emplace(id, m);
  }
  if (ap_n) r.mean_ap = ap_sum / static_cast<double>(ap_n);
  if (iou_n) r.mean_iou = iou_sum / static_cast<double>(iou_n);
  r.act = act_stats(timings);
  r.backend_calls = calls;
  return r;
}

inline ordered_json to_json(const EvaluationReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  ordered_json out;
  ordered_json per = ordered_json::object();
  for (const auto& id : r.gesture_order) {
    const auto& m = r.per_gesture.at(id);
    per[id] = {{"ap", opt(m.ap)}, {"iou", opt(m.iou)}, {"n_gt", m.n_gt}, {"n_pred", m.n_pred}};
  }
  out["per_gesture"] = std::move(per);
  out["mean_ap"] = opt(r.mean_ap);
  out["mean_iou"] = opt(r.mean_iou);
  out["excluded"] = {{"ap", r.ap_excluded}, {"iou", r.iou_excluded}};
  out["act_seconds"] = {{"mean", r.act.mean}, {"std", r.act.std}, {"sentences", r.act.sentences}};
  out["backend_calls"] = {{"total", r.backend_calls.total},
                          {"distinct", r.backend_calls.distinct}};
  out["config_echo"] = r.config_echo;
  return out;
}

/// Table-style CSV; AP and IOU in percent, undefined cells left empty.
inline std::string to_csv(const EvaluationReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  auto pct = [&](const std::optional<double>& v) {
    if (v) out << *v * 100.0;
  };
  out << "gesture,ap_pct,iou_pct,n_gt,n_pred\n";
  for (const auto& id : r.gesture_order) {
    const auto& m = r.per_gesture.at(id);
    out << id << ',';
    pct(m.ap);
    out << ',';
    pct(m.iou);
    out << ',' << m.n_gt << ',' << m.n_pred << '\n';
  }
  out << "MEAN,";
  pct(r.mean_ap);
  out << ',';
  pct(r.mean_iou);
  out << ",,\n";
  return out.str();
}

}  // namespace gestlabel
