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

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "httplib.h"

#include "gestlabel/core.hpp"
#include "gestlabel/io.hpp"
#include "gestlabel/run.hpp"

namespace gestlabel {

/// A rejected annotation submission (HTTP 422).
class SubmissionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Unknown session or annotator (HTTP 404).
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServiceOptions {
  std::filesystem::path gt_out;
  std::size_t session_size = 30;
  std::uint64_t seed = 0;
  std::size_t w_max = 10;
};

/// Ground-truth collection: per-annotator sessions of randomly sampled
/// sentences and sequential span submissions appended to a labels file.
///
/// Every submission is also recorded in `<gt_out>.progress.jsonl` so that
/// "no gesture" answers survive a restart; both files are replayed on
/// construction.
class AnnotationService {
 public:
  AnnotationService(ReferenceSet refs, std::vector<TokenizedSentence> corpus, ServiceOptions opts)
      : refs_(std::move(refs)), corpus_(std::move(corpus)), opts_(std::move(opts)) {
    for (std::size_t i = 0; i < corpus_.size(); ++i) by_sentence_.emplace(corpus_[i].id, i);
    restore();
  }

  const ReferenceSet& refs() const { return refs_; }

  ordered_json gestures() const {
    ordered_json out = ordered_json::array();
    for (const auto& g : refs_.gestures()) {
      out.push_back({{"id", g.id},
                     {"name", g.name},
                     {"kind", to_string(g.kind)},
                     {"description", g.description}});
    }
    return out;
  }

  /// Creates the annotator's session, or returns the existing one.
  ordered_json open_session(const std::string& annotator) {
    if (annotator.empty()) throw SubmissionError("annotator_id must be non-empty");
    std::lock_guard lock(mu_);
    auto& s = session_for(annotator);
    ordered_json sentences = ordered_json::array();
    for (auto idx : s.sentences) sentences.push_back(sentence_json(corpus_[idx]));
    return {{"session_id", s.id}, {"annotator_id", s.annotator}, {"sentences", std::move(sentences)}};
  }

  ordered_json next(const std::string& session_id) {
    std::lock_guard lock(mu_);
    const auto& s = session_by_id(session_id);
    const auto& st = state_[s.annotator];
    for (std::size_t k = 0; k < s.sentences.size(); ++k) {
      const auto& sentence = corpus_[s.sentences[k]];
      if (st.submitted.contains(sentence.id)) continue;
      return {{"done", false},
              {"index", k},
              {"total", s.sentences.size()},
              {"sentence", sentence_json(sentence)},
              {"committed", committed_json(s.annotator, sentence.id)}};
    }
    return {{"done", true}, {"index", s.sentences.size()}, {"total", s.sentences.size()}};
  }

  /// Validates and persists the labels for one sentence. Labels must be
  /// ordered, non-overlapping, and start at or after the end of anything the
  /// annotator already committed for that sentence.
  ordered_json submit(const std::string& session_id, const json& body) {
    std::lock_guard lock(mu_);
    const auto& s = session_by_id(session_id);
    if (!body.is_object() || !body.contains("sentence_id") || !body.at("sentence_id").is_string()) {
      throw SubmissionError("body must carry a string 'sentence_id'");
    }
    const auto sentence_id = body.at("sentence_id").get<std::string>();
    auto pos = by_sentence_.find(sentence_id);
    if (pos == by_sentence_.end() ||
        std::find(s.sentences.begin(), s.sentences.end(), pos->second) == s.sentences.end()) {
      throw SubmissionError("sentence '" + sentence_id + "' is not part of this session");
    }
    const auto& sentence = corpus_[pos->second];
    if (!body.contains("labels") || !body.at("labels").is_array()) {
      throw SubmissionError("body must carry a 'labels' array");
    }
    auto& st = state_[s.annotator];
    std::size_t cursor = st.committed_end[sentence_id];
    std::vector<LabelSpan> fresh;
    for (const auto& item : body.at("labels")) {
      LabelSpan l;
      try {
        l.gesture_id = item.at("gesture_id").get<std::string>();
        auto start = item.at("start").get<long long>();
        auto len = item.at("len").get<long long>();
        if (start < 0 || len < 0) throw SubmissionError("negative start or len");
        l.start = static_cast<std::size_t>(start);
        l.len = static_cast<std::size_t>(len);
      } catch (const json::exception&) {
        throw SubmissionError("each label needs gesture_id, start and len");
      }
      if (!refs_.contains(l.gesture_id)) {
        throw SubmissionError("unknown gesture '" + l.gesture_id + "'");
      }
      if (l.len < 1 || l.len > opts_.w_max) {
        throw SubmissionError("len must be in [1, " + std::to_string(opts_.w_max) + "]");
      }
      if (l.end() > sentence.n()) throw SubmissionError("span exceeds the sentence");
      if (l.start < cursor) {
        throw SubmissionError("labels must be given sequentially: start " +
                              std::to_string(l.start) + " precedes token " +
                              std::to_string(cursor));
      }
      cursor = l.end();
      l.sentence_id = sentence_id;
      l.score = 1.0;
      l.source = LabelSource::ground_truth;
      l.annotator_id = s.annotator;
      fresh.push_back(std::move(l));
    }

    std::string lines = labels_to_jsonl(fresh);
    ordered_json mark = {{"annotator_id", s.annotator}, {"sentence_id", sentence_id},
                         {"labels", fresh.size()}};
    append(opts_.gt_out, lines);
    append(progress_path(), mark.dump() + "\n");

    st.submitted.insert(sentence_id);
    st.committed_end[sentence_id] = cursor;
    auto& kept = st.labels[sentence_id];
    kept.insert(kept.end(), fresh.begin(), fresh.end());
    return {{"accepted", fresh.size()}, {"sentence_id", sentence_id}};
  }

  ordered_json progress(const std::string& annotator) {
    std::lock_guard lock(mu_);
    auto it = session_of_.find(annotator);
    if (it == session_of_.end()) throw NotFoundError("no session for annotator '" + annotator + "'");
    const auto& s = sessions_.at(it->second);
    const auto& st = state_[annotator];
    std::size_t done = 0;
    ordered_json labels = ordered_json::array();
    for (auto idx : s.sentences) {
      const auto& id = corpus_[idx].id;
      if (st.submitted.contains(id)) ++done;
      for (const auto& l : committed_json(annotator, id)) labels.push_back(l);
    }
    return {{"annotator_id", annotator},
            {"session_id", s.id},
            {"completed", done},
            {"total", s.sentences.size()},
            {"labels", std::move(labels)}};
  }

 private:
  struct Session {
    std::string id;
    std::string annotator;
    std::vector<std::size_t> sentences;
  };

  struct AnnotatorState {
    std::set<std::string> submitted;
    std::map<std::string, std::size_t> committed_end;
    std::map<std::string, std::vector<LabelSpan>> labels;
  };

  static ordered_json sentence_json(const TokenizedSentence& s) {
    return {{"id", s.id}, {"text", s.text}, {"tokens", s.tokens}};
  }

  ordered_json committed_json(const std::string& annotator, const std::string& sentence_id) {
    ordered_json out = ordered_json::array();
    auto& st = state_[annotator];
    if (auto it = st.labels.find(sentence_id); it != st.labels.end()) {
      for (const auto& l : it->second) out.push_back(to_json(l));
    }
    return out;
  }

  std::filesystem::path progress_path() const {
    auto p = opts_.gt_out;
    p += ".progress.jsonl";
    return p;
  }

  static void append(const std::filesystem::path& path, const std::string& text) {
    if (text.empty()) return;
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
  }

  // Seeded by (seed, annotator): the same annotator always gets the same
  // sentences, in the same order.
  Session& session_for(const std::string& annotator) {
    if (auto it = session_of_.find(annotator); it != session_of_.end()) {
      return sessions_.at(it->second);
    }
    const auto mixed = mix_seed(opts_.seed, annotator);
    Session s;
    s.id = "s-" + hex64(mixed);
    s.annotator = annotator;
    std::vector<std::size_t> order(corpus_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(mixed);
    const std::size_t take = std::min(opts_.session_size, order.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    order.resize(take);
    s.sentences = std::move(order);
    session_of_.emplace(annotator, s.id);
    return sessions_.emplace(s.id, std::move(s)).first->second;
  }

  const Session& session_by_id(const std::string& id) const {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
  }

  void restore() {
    if (std::filesystem::exists(opts_.gt_out)) {
      auto lengths = sentence_lengths(corpus_);
      LabelContext ctx{&refs_, &lengths, opts_.w_max};
      for (auto& l : load_labels(opts_.gt_out, ctx)) {
        if (!l.annotator_id) continue;
        auto& st = state_[*l.annotator_id];
        st.submitted.insert(l.sentence_id);
        auto& end = st.committed_end[l.sentence_id];
        end = std::max(end, l.end());
        st.labels[l.sentence_id].push_back(std::move(l));
      }
    }
    if (std::filesystem::exists(progress_path())) {
      detail::for_each_jsonl(progress_path(), [&](std::size_t, const json& j, const std::string&) {
        state_[j.value("annotator_id", "")].submitted.insert(j.value("sentence_id", ""));
      });
    }
    for (const auto& [annotator, st] : state_) {
      if (!annotator.empty()) session_for(annotator);
    }
  }

  ReferenceSet refs_;
  std::vector<TokenizedSentence> corpus_;
  ServiceOptions opts_;
  std::map<std::string, std::size_t> by_sentence_;
  std::mutex mu_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::string> session_of_;
  std::map<std::string, AnnotatorState> state_;
};

inline constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>gestlabel</title></head>"
    "<body><p>The annotation UI bundle is not installed. Start the server with "
    "<code>--ui-dir</code> pointing at the built bundle.</p></body></html>";

/// Registers the annotation HTTP API on `server`.
inline void mount_annotation_api(httplib::Server& server, AnnotationService& svc,
                                 const std::optional<std::filesystem::path>& ui_dir = {}) {
  auto reply = [](httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [reply](auto fn) {
    return [fn, reply](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const NotFoundError& e) {
        reply(res, 404, {{"error", e.what()}});
      } catch (const ValidationError& e) {
        reply(res, 422, {{"error", e.what()}});
      } catch (const json::exception& e) {
        reply(res, 400, {{"error", e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
      }
    };
  };

  server.Get("/gestures", guarded([&svc, reply](const httplib::Request&, httplib::Response& res) {
               reply(res, 200, svc.gestures());
             }));
  server.Post("/sessions", guarded([&svc, reply](const httplib::Request& req, httplib::Response& res) {
                auto body = json::parse(req.body);
                if (!body.is_object() || !body.contains("annotator_id") ||
                    !body.at("annotator_id").is_string()) {
                  throw SubmissionError("body must carry a string 'annotator_id'");
                }
                reply(res, 200, svc.open_session(body.at("annotator_id").get<std::string>()));
              }));
  server.Get(R"(/sessions/([^/]+)/next)",
             guarded([&svc, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, 200, svc.next(req.matches[1]));
             }));
  server.Post(R"(/sessions/([^/]+)/labels)",
              guarded([&svc, reply](const httplib::Request& req, httplib::Response& res) {
                reply(res, 200, svc.submit(req.matches[1], json::parse(req.body)));
              }));
  server.Get(R"(/progress/([^/]+))",
             guarded([&svc, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, 200, svc.progress(req.matches[1]));
             }));
  if (ui_dir) {
    if (!server.set_mount_point("/", ui_dir->string())) {
      throw ValidationError("ui dir '" + ui_dir->string() + "' does not exist");
    }
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html");
    });
  }
}

}  // namespace gestlabel
