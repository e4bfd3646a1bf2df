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

#include <cctype>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "gestlabel/core.hpp"
#include "gestlabel/io.hpp"

namespace gestlabel {

/// The scoring service could not be reached (after retries). Labeling runs
/// abort on this; CLI exit code 3.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The scoring service answered, but not with a valid response.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

struct TextPair {
  std::string reference;
  std::string candidate;
};

/// Semantic similarity of an ordered (reference, candidate) pair, in [0,1].
/// Implementations must be deterministic; symmetry is not required.
class SimilarityBackend {
 public:
  virtual ~SimilarityBackend() = default;

  virtual double score(std::string_view reference, std::string_view candidate) = 0;

  virtual std::vector<double> batch_score(std::span<const TextPair> pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(score(p.reference, p.candidate));
    return out;
  }

  /// Recorded in run manifests.
  virtual std::string identity() const = 0;
};

// ---------------------------------------------------------------------------
// Token-set Jaccard

namespace detail {

inline bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

inline std::set<std::string> normalized_token_set(std::string_view text) {
  std::set<std::string> out;
  for (auto& tok : tokenize(std::string(text)).tokens) {
    std::size_t b = 0, e = tok.size();
    while (b < e && is_ascii_punct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && is_ascii_punct(static_cast<unsigned char>(tok[e - 1]))) --e;
    if (b == e) continue;
    std::string word = tok.substr(b, e - b);
    for (auto& c : word) {
      if (static_cast<unsigned char>(c) < 128) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
    }
    out.insert(std::move(word));
  }
  return out;
}

}  // namespace detail

/// |A ∩ B| / |A ∪ B| over lowercased tokens with edge punctuation stripped.
inline double jaccard_score(std::string_view reference, std::string_view candidate) {
  auto a = detail::normalized_token_set(reference);
  auto b = detail::normalized_token_set(candidate);
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& w : a) common += b.count(w);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

class JaccardBackend final : public SimilarityBackend {
 public:
  double score(std::string_view reference, std::string_view candidate) override {
    return jaccard_score(reference, candidate);
  }
  std::string identity() const override { return "jaccard"; }
};

// ---------------------------------------------------------------------------
// Scripted lookup

/// Exact (reference, candidate) → score table. Ordered pairs: ("a","b") and
/// ("b","a") are unrelated entries.
class ScriptedTable {
 public:
  explicit ScriptedTable(double default_score = 0.0) : default_(default_score) {
    check_range(default_score, "default");
  }

  ScriptedTable& set(std::string reference, std::string candidate, double score) {
    check_range(score, "\"" + reference + "\" / \"" + candidate + "\"");
    table_[{std::move(reference), std::move(candidate)}] = score;
    return *this;
  }

  double lookup(std::string_view reference, std::string_view candidate) const {
    auto it = table_.find({std::string(reference), std::string(candidate)});
    return it == table_.end() ? default_ : it->second;
  }

  double default_score() const { return default_; }
  std::size_t size() const { return table_.size(); }

  /// {"default": 0.0, "scores": [["ref", "candidate", 0.7], ...]}
  static ScriptedTable from_json(const json& j, const std::string& where = "scripted") {
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    ScriptedTable t(j.value("default", 0.0));
    if (j.contains("scores")) {
      for (const auto& row : j.at("scores")) {
        if (!row.is_array() || row.size() != 3 || !row[0].is_string() ||
            !row[1].is_string() || !row[2].is_number()) {
          throw ValidationError(where + ": score rows must be [ref, candidate, score]");
        }
        try {
          t.set(row[0].get<std::string>(), row[1].get<std::string>(), row[2].get<double>());
        } catch (const ValidationError& e) {
          throw ValidationError(where + ": " + e.what());
        }
      }
    }
    return t;
  }

  static ScriptedTable load(const std::filesystem::path& path) {
    return from_json(parse_json(read_file(path), path.string()), path.filename().string());
  }

 private:
  static void check_range(double v, const std::string& what) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("scripted score for " + what + " outside [0,1]");
    }
  }

  double default_;
  std::map<std::pair<std::string, std::string>, double> table_;
};

inline double scripted_score(const ScriptedTable& table, std::string_view reference,
                             std::string_view candidate) {
  return table.lookup(reference, candidate);
}

class ScriptedBackend final : public SimilarityBackend {
 public:
  explicit ScriptedBackend(ScriptedTable table, std::string name = "scripted")
      : table_(std::move(table)), name_(std::move(name)) {}

  double score(std::string_view reference, std::string_view candidate) override {
    return table_.lookup(reference, candidate);
  }
  std::string identity() const override { return name_; }
  const ScriptedTable& table() const { return table_; }

 private:
  ScriptedTable table_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Remote cross-encoder client

struct RemoteOptions {
  std::size_t batch_size = 64;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::seconds timeout{30};
};

/// Client for a scoring service speaking
///   POST /similarity {"pairs": [[ref, cand], ...]} -> {"scores": [...]}
///   GET  /health -> {"model": "..."}
class RemoteBackend final : public SimilarityBackend {
 public:
  explicit RemoteBackend(std::string url, RemoteOptions opts = {})
      : url_(std::move(url)), opts_(opts) {
    if (opts_.batch_size == 0) throw ValidationError("remote: batch size must be >= 1");
    auto scheme_end = url_.find("://");
    if (scheme_end == std::string::npos || url_.substr(0, scheme_end) != "http") {
      throw ValidationError("remote: only http:// endpoints are supported: " + url_);
    }
    auto path_start = url_.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      host_ = url_;
    } else {
      host_ = url_.substr(0, path_start);
      prefix_ = url_.substr(path_start);
      while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
  }

  double score(std::string_view reference, std::string_view candidate) override {
    TextPair p{std::string(reference), std::string(candidate)};
    return batch_score(std::span(&p, 1)).front();
  }

  std::vector<double> batch_score(std::span<const TextPair> pairs) override {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (std::size_t off = 0; off < pairs.size(); off += opts_.batch_size) {
      auto chunk = pairs.subspan(off, std::min(opts_.batch_size, pairs.size() - off));
      auto scores = post_chunk(chunk);
      out.insert(out.end(), scores.begin(), scores.end());
    }
    return out;
  }

  /// Model name reported by GET /health.
  std::string health() {
    auto res = with_retries([&](httplib::Client& cli) { return cli.Get(prefix_ + "/health"); });
    auto body = parse_body(res->body);
    if (!body.is_object() || !body.contains("model") || !body.at("model").is_string()) {
      throw ProtocolError("remote: /health response lacks a 'model' string");
    }
    return body.at("model").get<std::string>();
  }

  std::string identity() const override { return "remote:" + url_; }

 private:
  std::vector<double> post_chunk(std::span<const TextPair> chunk) {
    json req;
    req["pairs"] = json::array();
    for (const auto& p : chunk) req["pairs"].push_back({p.reference, p.candidate});
    auto payload = req.dump();
    auto res = with_retries([&](httplib::Client& cli) {
      return cli.Post(prefix_ + "/similarity", payload, "application/json");
    });
    auto body = parse_body(res->body);
    if (!body.is_object() || !body.contains("scores") || !body.at("scores").is_array()) {
      throw ProtocolError("remote: response lacks a 'scores' array");
    }
    const auto& scores = body.at("scores");
    if (scores.size() != chunk.size()) {
      throw ProtocolError("remote: expected " + std::to_string(chunk.size()) +
                          " scores, got " + std::to_string(scores.size()));
    }
    std::vector<double> out;
    out.reserve(scores.size());
    for (const auto& s : scores) {
      if (!s.is_number()) throw ProtocolError("remote: non-numeric score");
      double v = s.get<double>();
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ProtocolError("remote: score " + s.dump() + " outside [0,1]");
      }
      out.push_back(v);
    }
    return out;
  }

  static json parse_body(const std::string& body) {
    try {
      return json::parse(body);
    } catch (const json::parse_error& e) {
      throw ProtocolError(std::string("remote: malformed JSON: ") + e.what());
    }
  }

  // Retries transport failures and 5xx with exponential backoff; any other
  // non-200 status is a protocol error.
  template <typename Fn>
  httplib::Result with_retries(Fn&& send) {
    auto backoff = opts_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= opts_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Client cli(host_);
      cli.set_connection_timeout(opts_.timeout);
      cli.set_read_timeout(opts_.timeout);
      cli.set_write_timeout(opts_.timeout);
      auto res = send(cli);
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw ProtocolError("remote: unexpected HTTP " + std::to_string(res->status));
      }
      return res;
    }
    throw BackendError("remote: " + url_ + " unavailable after " +
                       std::to_string(opts_.max_retries + 1) + " attempts (" + last_error +
                       ")");
  }

  std::string url_;
  std::string host_;
  std::string prefix_;
  RemoteOptions opts_;
};

// ---------------------------------------------------------------------------
// Memoization

/// Identifies a score within one reference set: reference sentence `ref` of
/// gesture `gesture` against the window [start, start + win) of a sentence.
struct ScoreKey {
  std::size_t gesture = 0;
  std::size_t ref = 0;
  std::size_t start = 0;
  std::size_t win = 0;

  auto operator<=>(const ScoreKey&) const = default;
};

struct CallStats {
  std::uint64_t total = 0;     // score lookups requested by labelers
  std::uint64_t distinct = 0;  // backend invocations (cache misses)
};

/// Memoizes backend scores for one reference set, keyed by
/// (reference, sentence id, start, win). The backend sees each key at most once.
class CachedScorer {
 public:
  CachedScorer(SimilarityBackend& backend, const ReferenceSet& refs)
      : backend_(&backend), refs_(&refs) {}

  CachedScorer(const CachedScorer&) = delete;
  CachedScorer& operator=(const CachedScorer&) = delete;

  double score(const TokenizedSentence& s, const ScoreKey& key) {
    std::lock_guard lock(mu_);
    ++stats_.total;
    auto full = std::make_tuple(s.id, key);
    if (auto it = cache_.find(full); it != cache_.end()) return it->second;
    double v = backend_->score(reference_text(key), span_text(s, key.start, key.win));
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ProtocolError(backend_->identity() + ": score outside [0,1]");
    }
    ++stats_.distinct;
    cache_.emplace(std::move(full), v);
    return v;
  }

  /// Scores every uncached key in a single backend batch.
  void prefetch(const TokenizedSentence& s, std::span<const ScoreKey> keys) {
    std::lock_guard lock(mu_);
    std::vector<ScoreKey> missing;
    std::set<ScoreKey> queued;
    for (const auto& k : keys) {
      if (!cache_.contains(std::make_tuple(s.id, k)) && queued.insert(k).second) {
        missing.push_back(k);
      }
    }
    if (missing.empty()) return;
    std::vector<TextPair> pairs;
    pairs.reserve(missing.size());
    for (const auto& k : missing) {
      pairs.push_back({reference_text(k), span_text(s, k.start, k.win)});
    }
    auto scores = backend_->batch_score(pairs);
    if (scores.size() != missing.size()) {
      throw ProtocolError(backend_->identity() + ": batch size mismatch");
    }
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
        throw ProtocolError(backend_->identity() + ": score outside [0,1]");
      }
      cache_.emplace(std::make_tuple(s.id, missing[i]), scores[i]);
    }
    stats_.distinct += missing.size();
  }

  CallStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

  /// Distinct backend calls attributed to sentence `id`.
  std::size_t distinct_for(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto lo = cache_.lower_bound(std::make_tuple(id, ScoreKey{}));
    std::size_t count = 0;
    for (auto it = lo; it != cache_.end() && std::get<0>(it->first) == id; ++it) ++count;
    return count;
  }

  const ReferenceSet& refs() const { return *refs_; }
  const SimilarityBackend& backend() const { return *backend_; }

 private:
  const std::string& reference_text(const ScoreKey& k) const {
    return refs_->sentences(k.gesture).at(k.ref);
  }

  SimilarityBackend* backend_;
  const ReferenceSet* refs_;
  mutable std::mutex mu_;
  std::map<std::tuple<std::string, ScoreKey>, double> cache_;
  CallStats stats_;
};

}  // namespace gestlabel
