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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "gestlabel/core.hpp"

namespace gestlabel {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a sibling temp file and renames, so readers never observe a
/// partially written artifact.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ValidationError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

namespace detail {

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(where + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& obj, const char* key,
                                const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

inline std::size_t require_index(const json& obj, const char* key,
                                 const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_number_integer()) {
    throw ValidationError(where + ": field '" + key + "' must be an integer");
  }
  auto v = obj.at(key).get<long long>();
  if (v < 0) throw ValidationError(where + ": field '" + key + "' is negative");
  return static_cast<std::size_t>(v);
}

// Calls fn(line_number, json) for each non-blank line.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto where = path.filename().string() + ":" + std::to_string(lineno);
    fn(lineno, parse_json(line, where), where);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Reference sets

inline ReferenceSet reference_set_from_json(const json& j,
                                            const std::string& where = "refs") {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  auto author = detail::optional_field<std::string>(j, "author", where).value_or("");
  if (!j.contains("gestures") || !j.at("gestures").is_array()) {
    throw ValidationError(where + ": 'gestures' must be an array");
  }
  std::vector<Gesture> gestures;
  std::vector<std::vector<std::string>> sentences;
  for (const auto& g : j.at("gestures")) {
    Gesture gesture;
    gesture.id = detail::require<std::string>(g, "id", where);
    gesture.name = detail::optional_field<std::string>(g, "name", where).value_or(gesture.id);
    gesture.description =
        detail::optional_field<std::string>(g, "description", where).value_or("");
    auto kind = detail::optional_field<std::string>(g, "kind", where).value_or("symbolic");
    if (kind == "symbolic") {
      gesture.kind = GestureKind::symbolic;
    } else if (kind == "deictic") {
      gesture.kind = GestureKind::deictic;
    } else {
      throw ValidationError(where + ": gesture '" + gesture.id + "' has unknown kind '" +
                            kind + "'");
    }
    gestures.push_back(std::move(gesture));
    sentences.push_back(
        detail::require<std::vector<std::string>>(g, "reference_sentences", where));
  }
  return ReferenceSet(std::move(author), std::move(gestures), std::move(sentences));
}

inline ordered_json to_json(const ReferenceSet& refs) {
  ordered_json out;
  out["author"] = refs.author();
  out["gestures"] = ordered_json::array();
  for (std::size_t g = 0; g < refs.size(); ++g) {
    const auto& gesture = refs.gesture(g);
    ordered_json entry;
    entry["id"] = gesture.id;
    entry["name"] = gesture.name;
    entry["kind"] = to_string(gesture.kind);
    entry["description"] = gesture.description;
    entry["reference_sentences"] = refs.sentences(g);
    out["gestures"].push_back(std::move(entry));
  }
  return out;
}

inline ReferenceSet load_reference_set(const std::filesystem::path& path) {
  return reference_set_from_json(parse_json(read_file(path), path.string()),
                                 path.filename().string());
}

// ---------------------------------------------------------------------------
// Corpora

inline std::vector<TokenizedSentence> load_corpus(const std::filesystem::path& path) {
  std::vector<TokenizedSentence> corpus;
  std::set<std::string> ids;
  detail::for_each_jsonl(path, [&](std::size_t, const json& j, const std::string& where) {
    auto id = detail::require<std::string>(j, "id", where);
    auto text = detail::require<std::string>(j, "text", where);
    if (id.empty()) throw ValidationError(where + ": empty sentence id");
    if (!ids.insert(id).second) {
      throw ValidationError(where + ": duplicate sentence id '" + id + "'");
    }
    corpus.push_back(tokenize(std::move(text), std::move(id)));
  });
  return corpus;
}

inline std::map<std::string, std::size_t> sentence_lengths(
    std::span<const TokenizedSentence> corpus) {
  std::map<std::string, std::size_t> out;
  for (const auto& s : corpus) out.emplace(s.id, s.n());
  return out;
}

// ---------------------------------------------------------------------------
// Labels

inline LabelSpan label_from_json(const json& j, const std::string& where) {
  LabelSpan l;
  l.sentence_id = detail::require<std::string>(j, "sentence_id", where);
  l.gesture_id = detail::require<std::string>(j, "gesture_id", where);
  l.start = detail::require_index(j, "start", where);
  l.len = detail::require_index(j, "len", where);
  l.score = detail::require<double>(j, "score", where);
  auto source = detail::require<std::string>(j, "source", where);
  if (source == "predicted") {
    l.source = LabelSource::predicted;
  } else if (source == "ground_truth") {
    l.source = LabelSource::ground_truth;
  } else {
    throw ValidationError(where + ": unknown source '" + source + "'");
  }
  if (j.contains("ref_sentence_index") && !j.at("ref_sentence_index").is_null()) {
    l.ref_sentence_index = detail::require_index(j, "ref_sentence_index", where);
  }
  l.annotator_id = detail::optional_field<std::string>(j, "annotator_id", where);
  return l;
}

inline ordered_json to_json(const LabelSpan& l) {
  ordered_json j;
  j["sentence_id"] = l.sentence_id;
  j["gesture_id"] = l.gesture_id;
  j["start"] = l.start;
  j["len"] = l.len;
  j["score"] = l.score;
  j["source"] = to_string(l.source);
  j["ref_sentence_index"] =
      l.ref_sentence_index ? ordered_json(*l.ref_sentence_index) : ordered_json(nullptr);
  j["annotator_id"] = l.annotator_id ? ordered_json(*l.annotator_id) : ordered_json(nullptr);
  return j;
}

inline std::string labels_to_jsonl(std::span<const LabelSpan> labels) {
  std::string out;
  for (const auto& l : labels) {
    out += to_json(l).dump();
    out.push_back('\n');
  }
  return out;
}

/// What a label set is checked against. Null members skip that check.
struct LabelContext {
  const ReferenceSet* refs = nullptr;
  const std::map<std::string, std::size_t>* lengths = nullptr;
  std::size_t w_max = 10;
};

/// Enforces the LabelSpan invariants. `lines` (optional, parallel to
/// `labels`) supplies the source line numbers used in error messages.
inline void validate_labels(std::span<const LabelSpan> labels, const LabelContext& ctx,
                            std::span<const std::size_t> lines = {}) {
  auto where = [&](std::size_t i) {
    return "line " + std::to_string(lines.empty() ? i + 1 : lines[i]);
  };
  using GroupKey = std::tuple<std::string, LabelSource, std::string>;
  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    if (l.len < 1 || l.len > ctx.w_max) {
      throw ValidationError(where(i) + ": len " + std::to_string(l.len) +
                            " outside [1, " + std::to_string(ctx.w_max) + "]");
    }
    if (!(l.score >= 0.0 && l.score <= 1.0)) {
      throw ValidationError(where(i) + ": score outside [0,1]");
    }
    if (ctx.refs && !ctx.refs->contains(l.gesture_id)) {
      throw ValidationError(where(i) + ": unknown gesture_id '" + l.gesture_id + "'");
    }
    if (ctx.lengths) {
      auto it = ctx.lengths->find(l.sentence_id);
      if (it == ctx.lengths->end()) {
        throw ValidationError(where(i) + ": unknown sentence_id '" + l.sentence_id + "'");
      }
      if (l.end() > it->second) {
        throw ValidationError(where(i) + ": span exceeds sentence '" + l.sentence_id +
                              "' of " + std::to_string(it->second) + " tokens");
      }
    }
    groups[{l.sentence_id, l.source, l.annotator_id.value_or("")}].push_back(i);
  }
  for (auto& [key, idx] : groups) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return labels[a].start != labels[b].start ? labels[a].start < labels[b].start : a < b;
    });
    for (std::size_t k = 1; k < idx.size(); ++k) {
      const auto& prev = labels[idx[k - 1]];
      const auto& cur = labels[idx[k]];
      if (cur.start < prev.end()) {
        throw ValidationError(where(std::max(idx[k - 1], idx[k])) +
                              ": overlapping spans in sentence '" + cur.sentence_id + "'");
      }
    }
  }
}

inline std::vector<LabelSpan> load_labels(const std::filesystem::path& path,
                                          const LabelContext& ctx = {}) {
  std::vector<LabelSpan> labels;
  std::vector<std::size_t> lines;
  detail::for_each_jsonl(path, [&](std::size_t lineno, const json& j, const std::string& where) {
    labels.push_back(label_from_json(j, where));
    lines.push_back(lineno);
  });
  try {
    validate_labels(labels, ctx, lines);
  } catch (const ValidationError& e) {
    throw ValidationError(path.filename().string() + ": " + e.what());
  }
  return labels;
}

}  // namespace gestlabel
