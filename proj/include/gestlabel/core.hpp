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
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gestlabel {

// Bumped whenever tokenize() changes behaviour; label files produced under
// different versions are not comparable.
inline constexpr std::string_view kTokenizerVersion = "ws-1";

/// Input files or arguments that fail validation. CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (e.g. span out of range).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class GestureKind { symbolic, deictic };

inline std::string_view to_string(GestureKind k) {
  return k == GestureKind::symbolic ? "symbolic" : "deictic";
}

struct Gesture {
  std::string id;
  std::string name;
  std::string description;
  GestureKind kind = GestureKind::symbolic;
};

/// Gestures and the reference sentences that describe the contexts in which
/// each one is produced. Gesture order is the tie-breaking order used by
/// rank_candidates, so it is preserved exactly as loaded.
class ReferenceSet {
 public:
  ReferenceSet() = default;

  /// Throws ValidationError on empty/duplicate ids or gestures without
  /// reference sentences. Sentences shared between gestures are tolerated and
  /// reported through warnings().
  ReferenceSet(std::string author, std::vector<Gesture> gestures,
               std::vector<std::vector<std::string>> sentences)
      : author_(std::move(author)),
        gestures_(std::move(gestures)),
        sentences_(std::move(sentences)) {
    if (gestures_.size() != sentences_.size()) {
      throw ValidationError("reference set: gesture/sentence list size mismatch");
    }
    std::map<std::string, std::size_t> seen_sentence;
    for (std::size_t g = 0; g < gestures_.size(); ++g) {
      const auto& id = gestures_[g].id;
      if (id.empty()) throw ValidationError("reference set: empty gesture id");
      if (index_.contains(id)) {
        throw ValidationError("reference set: duplicate gesture id '" + id + "'");
      }
      index_.emplace(id, g);
      if (sentences_[g].empty()) {
        throw ValidationError("reference set: gesture '" + id +
                              "' has no reference sentences");
      }
      for (const auto& s : sentences_[g]) {
        if (s.empty()) {
          throw ValidationError("reference set: gesture '" + id +
                                "' has an empty reference sentence");
        }
        auto [it, inserted] = seen_sentence.emplace(s, g);
        if (!inserted && it->second != g) {
          warnings_.push_back("reference sentence \"" + s + "\" shared by '" +
                              gestures_[it->second].id + "' and '" + id + "'");
        }
      }
    }
  }

  const std::string& author() const { return author_; }
  std::size_t size() const { return gestures_.size(); }
  const std::vector<Gesture>& gestures() const { return gestures_; }
  const Gesture& gesture(std::size_t g) const { return gestures_.at(g); }
  const std::vector<std::string>& sentences(std::size_t g) const {
    return sentences_.at(g);
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view id) const { return index_of(id).has_value(); }

  /// Total number of reference sentences across gestures.
  std::size_t sentence_count() const {
    std::size_t total = 0;
    for (const auto& s : sentences_) total += s.size();
    return total;
  }

 private:
  std::string author_;
  std::vector<Gesture> gestures_;
  std::vector<std::vector<std::string>> sentences_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> warnings_;
};

struct TokenizedSentence {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;

  std::size_t n() const { return tokens.size(); }
};

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

/// Splits on runs of ASCII whitespace. Punctuation stays attached and casing
/// is preserved, so "I'm" and "can't" are single words.
inline TokenizedSentence tokenize(std::string text, std::string id = {}) {
  TokenizedSentence s;
  s.id = std::move(id);
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) s.tokens.emplace_back(text.substr(start, i - start));
  }
  s.text = std::move(text);
  return s;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

/// The `win` tokens starting at `start`, joined by single spaces.
inline std::string span_text(const TokenizedSentence& s, std::size_t start,
                             std::size_t win) {
  if (win == 0) throw PreconditionError("span_text: window must be >= 1");
  if (start > s.n() || win > s.n() - start) {
    throw PreconditionError("span_text: span [" + std::to_string(start) + ", +" +
                            std::to_string(win) + ") exceeds sentence of " +
                            std::to_string(s.n()) + " tokens");
  }
  return join_tokens(std::span(s.tokens).subspan(start, win));
}

enum class LabelSource { predicted, ground_truth };

inline std::string_view to_string(LabelSource s) {
  return s == LabelSource::predicted ? "predicted" : "ground_truth";
}

struct LabelSpan {
  std::string sentence_id;
  std::string gesture_id;
  std::size_t start = 0;
  std::size_t len = 0;
  double score = 0.0;
  LabelSource source = LabelSource::predicted;
  std::optional<std::size_t> ref_sentence_index;
  std::optional<std::string> annotator_id;

  std::size_t end() const { return start + len; }

  friend bool operator==(const LabelSpan&, const LabelSpan&) = default;
};

/// One scored (reference sentence, window) pair at a sentence position.
struct Candidate {
  double score = 0.0;
  std::size_t gesture_index = 0;
  std::size_t ref_index = 0;
  std::size_t win = 0;
  std::size_t start = 0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Strict "ranks ahead of" relation: higher score, then smaller gesture index,
/// ref index, window and finally start position.
inline bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.gesture_index != b.gesture_index) return a.gesture_index < b.gesture_index;
  if (a.ref_index != b.ref_index) return a.ref_index < b.ref_index;
  if (a.win != b.win) return a.win < b.win;
  return a.start < b.start;
}

inline Candidate rank_candidates(std::span<const Candidate> cands) {
  if (cands.empty()) throw PreconditionError("rank_candidates: empty candidate list");
  return *std::min_element(cands.begin(), cands.end(), ranks_before);
}

enum class Check1Mode {
  drop,          // reject when the score falls by more than th1 on expansion
  paper_literal  // reject when the score rises by more than th1 on expansion
};

inline std::string_view to_string(Check1Mode m) {
  return m == Check1Mode::drop ? "drop" : "paper_literal";
}

struct EngineConfig {
  double th0 = 0.3;
  double th1 = 0.3;
  int p = 3;
  int w_max = 10;
  std::uint64_t seed = 0;
  Check1Mode check1_mode = Check1Mode::drop;
  double iou_valid_min = 0.5;
  double score_min = 0.5;
  bool prefetch = true;

  void validate() const {
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError(std::string("config: ") + name + " must be in [0,1]");
      }
    };
    unit(th0, "th0");
    unit(th1, "th1");
    unit(iou_valid_min, "iou_valid_min");
    unit(score_min, "score_min");
    if (p < 1) throw ValidationError("config: p must be >= 1");
    if (w_max < 1) throw ValidationError("config: w_max must be >= 1");
  }

  std::size_t wmax() const { return static_cast<std::size_t>(w_max); }
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable per-item seed, independent of iteration order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view key) {
  return splitmix64(seed ^ splitmix64(fnv1a64(key)));
}

}  // namespace gestlabel
