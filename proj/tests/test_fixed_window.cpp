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

#include <gtest/gtest.h>

#include "gestlabel/fixed_window.hpp"
#include "support/scenarios.hpp"
#include "support/test_support.hpp"

namespace gestlabel {
namespace {

using namespace gestlabel::testing;

WindowTable table_of(std::initializer_list<std::pair<std::string, std::optional<std::size_t>>> e) {
  WindowTable wt;
  for (const auto& [id, win] : e) wt.entries[id].win = win;
  return wt;
}

TEST(LabelFixed, HandTrace) {
  auto sc = fixed_trace();
  ScriptedBackend backend(sc.table);
  CachedScorer scorer(backend, sc.refs);
  auto labels = label_fixed(sc.corpus[0], table_of({{"A", 1}, {"B", 3}}), sc.cfg, scorer);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels[0].gesture_id, "A");
  EXPECT_EQ(labels[0].start, 0u);
  EXPECT_EQ(labels[0].len, 1u);
  EXPECT_DOUBLE_EQ(labels[0].score, 0.8);
  EXPECT_EQ(labels[0].ref_sentence_index, 0u);
  EXPECT_EQ(labels[1].gesture_id, "B");
  EXPECT_EQ(labels[1].start, 1u);
  EXPECT_EQ(labels[1].len, 3u);
  EXPECT_DOUBLE_EQ(labels[1].score, 0.7);
  // j=0: A,B; j=1: A,B; j=4: A only
  EXPECT_EQ(scorer.stats().distinct, 5u);
}

TEST(LabelFixed, ThresholdOneNeverAccepts) {
  JaccardBackend backend;
  auto refs = make_refs({{"A", {"hello"}}});
  CachedScorer scorer(backend, refs);
  EngineConfig cfg;
  cfg.th0 = 1.0;
  EXPECT_TRUE(label_fixed(tokenize("hello hello", "s"), table_of({{"A", 1}}), cfg, scorer).empty());
}

TEST(LabelFixed, SkipRuleMakesNoCalls) {
  JaccardBackend jaccard;
  CountingBackend counting(jaccard);
  auto refs = make_refs({{"A", {"a"}}, {"B", {"b"}}});
  CachedScorer scorer(counting, refs);
  auto labels =
      label_fixed(tokenize("a b", "s"), table_of({{"A", 3}, {"B", 3}}), EngineConfig{}, scorer);
  EXPECT_TRUE(labels.empty());
  EXPECT_EQ(counting.calls(), 0u);
}

TEST(LabelFixed, UncalibratedGesturesAreExcluded) {
  auto sc = fixed_trace();
  ScriptedBackend backend(sc.table);
  CachedScorer scorer(backend, sc.refs);
  auto labels = label_fixed(sc.corpus[0], table_of({{"A", std::nullopt}, {"B", 3}}), sc.cfg, scorer);
  ASSERT_EQ(labels.size(), 1u);
  EXPECT_EQ(labels[0].gesture_id, "B");
}

TEST(LabelFixed, MissingEntryIsError) {
  auto sc = fixed_trace();
  ScriptedBackend backend(sc.table);
  CachedScorer scorer(backend, sc.refs);
  EXPECT_THROW(label_fixed(sc.corpus[0], table_of({{"A", 1}}), sc.cfg, scorer), ValidationError);
  EXPECT_THROW(label_fixed(sc.corpus[0], table_of({{"A", 1}, {"B", 11}}), sc.cfg, scorer),
               ValidationError);
}

TEST(LabelFixed, InvariantsOnRandomBackends) {
  auto refs = make_refs({{"A", {"r0", "r1"}}, {"B", {"r2"}}, {"C", {"r3", "r4", "r5"}}});
  std::mt19937_64 rng(5);
  for (int round = 0; round < 100; ++round) {
    HashBackend hash(rng());
    CountingBackend counting(hash);
    CachedScorer scorer(counting, refs);
    EngineConfig cfg;
    cfg.th0 = static_cast<double>(rng() % 10) / 10.0;
    std::string text;
    const std::size_t n = rng() % 25;
    for (std::size_t t = 0; t < n; ++t) text += "w" + std::to_string(rng() % 4) + " ";
    auto s = tokenize(text, "s");
    auto wt = table_of({{"A", 1 + rng() % 4}, {"B", 1 + rng() % 4}, {"C", 1 + rng() % 4}});
    auto labels = label_fixed(s, wt, cfg, scorer);
    std::size_t prev_end = 0;
    for (const auto& l : labels) {
      EXPECT_GT(l.score, cfg.th0);
      EXPECT_EQ(l.len, *wt.window(l.gesture_id));
      EXPECT_GE(l.start, prev_end);
      prev_end = l.end();
    }
    // at most every reference at every position
    EXPECT_LE(counting.calls(), refs.sentence_count() * n);

    // a warmed cache answers everything
    auto before = counting.calls();
    EXPECT_EQ(label_fixed(s, wt, cfg, scorer), labels);
    EXPECT_EQ(counting.calls(), before);
  }
}

TEST(Calibrate, SelectsWindowsAndHonoursMinimumCount) {
  auto sc = calibration();
  ScriptedBackend backend(sc.table);
  CachedScorer scorer(backend, sc.refs);
  auto wt = calibrate_windows(sc.corpus, sc.cfg, scorer);

  EXPECT_EQ(wt.window("A"), 2u);
  EXPECT_DOUBLE_EQ(wt.entries.at("A").diagnostics.at(2).score, 0.8);
  EXPECT_EQ(wt.entries.at("A").diagnostics.at(2).count, 12u);
  EXPECT_DOUBLE_EQ(wt.entries.at("A").diagnostics.at(1).score, 0.5);

  EXPECT_EQ(wt.window("B"), std::nullopt);
  EXPECT_EQ(wt.entries.at("B").diagnostics.at(1).count, 9u);
  EXPECT_NE(wt.entries.at("B").reason.find("insufficient"), std::string::npos);

  EXPECT_EQ(wt.window("C"), 1u);
  EXPECT_EQ(wt.entries.at("C").diagnostics.at(1).count, 10u);

  EXPECT_EQ(wt.window("D"), 1u);
  EXPECT_DOUBLE_EQ(wt.entries.at("D").diagnostics.at(1).score,
                   wt.entries.at("D").diagnostics.at(2).score);

  // diagnostics for every window, including ones that never fit
  EXPECT_EQ(wt.entries.at("A").diagnostics.size(), 10u);
  EXPECT_EQ(wt.entries.at("A").diagnostics.at(7).count, 0u);
}

TEST(Calibrate, Deterministic) {
  auto sc = calibration();
  ScriptedBackend b1(sc.table), b2(sc.table);
  CachedScorer s1(b1, sc.refs), s2(b2, sc.refs);
  EXPECT_EQ(to_json(calibrate_windows(sc.corpus, sc.cfg, s1)).dump(),
            to_json(calibrate_windows(sc.corpus, sc.cfg, s2)).dump());
}

TEST(Calibrate, EmptyCorpusIsError) {
  auto sc = calibration();
  ScriptedBackend backend(sc.table);
  CachedScorer scorer(backend, sc.refs);
  EXPECT_THROW(calibrate_windows({}, sc.cfg, scorer), ValidationError);
}

TEST(WindowTableJson, RoundTripAndForce) {
  auto sc = calibration();
  ScriptedBackend backend(sc.table);
  CachedScorer scorer(backend, sc.refs);
  auto wt = calibrate_windows(sc.corpus, sc.cfg, scorer);
  auto back = window_table_from_json(json::parse(to_json(wt).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(wt).dump());
  back.force("B", 4);
  EXPECT_EQ(back.window("B"), 4u);
  EXPECT_EQ(parse_force_window("i_beg_you=3"), (std::pair<std::string, std::size_t>{"i_beg_you", 3}));
  EXPECT_THROW(parse_force_window("x"), ValidationError);
  EXPECT_THROW(parse_force_window("x=0"), ValidationError);
  EXPECT_THROW(parse_force_window("x=2a"), ValidationError);
}

}  // namespace
}  // namespace gestlabel
