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

#include <chrono>
#include <cstdio>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gestlabel/baseline.hpp"
#include "gestlabel/core.hpp"
#include "gestlabel/fixed_window.hpp"
#include "gestlabel/io.hpp"
#include "gestlabel/moving_window.hpp"
#include "gestlabel/similarity.hpp"

namespace gestlabel {

enum class Algorithm { baseline, fixed, moving };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::baseline: return "baseline";
    case Algorithm::fixed: return "fixed";
    case Algorithm::moving: return "moving";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "baseline") return Algorithm::baseline;
  if (s == "fixed") return Algorithm::fixed;
  if (s == "moving") return Algorithm::moving;
  throw ValidationError("unknown algorithm '" + std::string(s) + "'");
}

inline ordered_json to_json(const EngineConfig& c) {
  ordered_json j;
  j["th0"] = c.th0;
  j["th1"] = c.th1;
  j["p"] = c.p;
  j["w_max"] = c.w_max;
  j["seed"] = c.seed;
  j["check1_mode"] = to_string(c.check1_mode);
  j["iou_valid_min"] = c.iou_valid_min;
  j["score_min"] = c.score_min;
  j["prefetch"] = c.prefetch;
  return j;
}

/// Overlays the keys present in `j` onto `base`.
inline EngineConfig config_from_json(const json& j, EngineConfig base = {}) {
  if (!j.is_object()) throw ValidationError("config: expected an object");
  try {
    base.th0 = j.value("th0", base.th0);
    base.th1 = j.value("th1", base.th1);
    base.p = j.value("p", base.p);
    base.w_max = j.value("w_max", base.w_max);
    base.seed = j.value("seed", base.seed);
    base.iou_valid_min = j.value("iou_valid_min", base.iou_valid_min);
    base.score_min = j.value("score_min", base.score_min);
    base.prefetch = j.value("prefetch", base.prefetch);
    if (j.contains("check1_mode")) {
      auto mode = j.at("check1_mode").get<std::string>();
      if (mode == "drop") {
        base.check1_mode = Check1Mode::drop;
      } else if (mode == "paper_literal") {
        base.check1_mode = Check1Mode::paper_literal;
      } else {
        throw ValidationError("config: unknown check1_mode '" + mode + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  base.validate();
  return base;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Identifies the labeling configuration plus tokenizer version.
inline std::string config_hash(const EngineConfig& c) {
  return hex64(fnv1a64(to_json(c).dump() + "|" + std::string(kTokenizerVersion)));
}

/// "jaccard", "scripted:FILE" or "remote:URL".
inline std::unique_ptr<SimilarityBackend> make_backend(const std::string& spec,
                                                       RemoteOptions opts = {}) {
  if (spec == "jaccard") return std::make_unique<JaccardBackend>();
  if (spec.starts_with("scripted:")) {
    auto path = spec.substr(9);
    return std::make_unique<ScriptedBackend>(ScriptedTable::load(path), "scripted:" + path);
  }
  if (spec.starts_with("remote:")) return std::make_unique<RemoteBackend>(spec.substr(7), opts);
  throw ValidationError("unknown backend '" + spec + "' (jaccard | scripted:FILE | remote:URL)");
}

struct SentenceTiming {
  std::string sentence_id;
  double seconds = 0.0;
  std::size_t distinct_calls = 0;
};

struct RunResult {
  std::vector<LabelSpan> labels;
  std::vector<SentenceTiming> timings;
  CallStats calls;
};

struct RunInputs {
  Algorithm algorithm = Algorithm::moving;
  const ReferenceSet* refs = nullptr;
  const WindowTable* windows = nullptr;     // fixed
  const BaselineStats* stats = nullptr;     // baseline
  SimilarityBackend* backend = nullptr;     // fixed / moving
};

/// Labels every sentence of the corpus in order, timing each one.
inline RunResult run_labeler(std::span<const TokenizedSentence> corpus, const RunInputs& in,
                             const EngineConfig& cfg) {
  cfg.validate();
  if (!in.refs) throw ValidationError("run: reference set required");
  if (in.algorithm == Algorithm::fixed && !in.windows) {
    throw ValidationError("run: the fixed algorithm requires a window table");
  }
  if (in.algorithm == Algorithm::baseline && !in.stats) {
    throw ValidationError("run: the baseline algorithm requires label statistics");
  }
  if (in.algorithm != Algorithm::baseline && !in.backend) {
    throw ValidationError("run: a similarity backend is required");
  }
  if (in.windows) in.windows->validate(*in.refs, cfg);
  if (in.stats) in.stats->validate();

  JaccardBackend unused;
  CachedScorer scorer(in.backend ? *in.backend : unused, *in.refs);
  RunResult result;
  for (const auto& s : corpus) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<LabelSpan> labels;
    switch (in.algorithm) {
      case Algorithm::baseline: labels = label_baseline(s, *in.stats, cfg); break;
      case Algorithm::fixed: labels = label_fixed(s, *in.windows, cfg, scorer); break;
      case Algorithm::moving: labels = label_moving(s, cfg, scorer); break;
    }
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    result.timings.push_back({s.id, dt.count(), scorer.distinct_for(s.id)});
    result.labels.insert(result.labels.end(), labels.begin(), labels.end());
  }
  result.calls = scorer.stats();
  return result;
}

inline ordered_json run_manifest(const RunResult& r, const RunInputs& in, const EngineConfig& cfg) {
  ordered_json m;
  m["config_hash"] = config_hash(cfg);
  m["tokenizer_version"] = kTokenizerVersion;
  m["algorithm"] = to_string(in.algorithm);
  m["backend"] = in.algorithm == Algorithm::baseline || !in.backend ? "none"
                                                                    : in.backend->identity();
  m["config"] = to_json(cfg);
  m["sentences"] = r.timings.size();
  m["labels"] = r.labels.size();
  m["backend_calls"] = {{"total", r.calls.total}, {"distinct", r.calls.distinct}};
  ordered_json timings = ordered_json::array();
  for (const auto& t : r.timings) {
    timings.push_back(
        {{"sentence_id", t.sentence_id}, {"seconds", t.seconds}, {"distinct_calls", t.distinct_calls}});
  }
  m["timings"] = std::move(timings);
  return m;
}

}  // namespace gestlabel
