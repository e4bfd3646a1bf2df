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

// gestlabel: batch labeling, window calibration, evaluation, baseline
// statistics and the annotation service.
//
// Exit codes: 0 success, 2 validation error, 3 backend failure / bind failure.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gestlabel/baseline.hpp"
#include "gestlabel/fixed_window.hpp"
#include "gestlabel/io.hpp"
#include "gestlabel/metrics.hpp"
#include "gestlabel/run.hpp"
#include "gestlabel/service.hpp"

namespace fs = std::filesystem;
using namespace gestlabel;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;

struct ConfigFlags {
  std::string config_path;
  std::optional<double> th0, th1, iou_min, score_min;
  std::optional<int> p, w_max;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> check1_mode;
  std::optional<bool> prefetch;

  void add_to(CLI::App* cmd, bool labeling) {
    cmd->add_option("--config", config_path, "JSON engine config");
    cmd->add_option("--th0", th0, "acceptance threshold");
    cmd->add_option("--wmax", w_max, "maximum window size");
    if (labeling) {
      cmd->add_option("--th1", th1, "context-change margin");
      cmd->add_option("--p", p, "context-change retries");
      cmd->add_option("--seed", seed, "random seed");
      cmd->add_option("--check1-mode", check1_mode, "drop | paper_literal");
      cmd->add_option("--prefetch", prefetch, "batch all moving-window scores up front");
    }
  }

  EngineConfig resolve() const {
    json j = json::object();
    if (!config_path.empty()) j = parse_json(read_file(config_path), config_path);
    if (!j.is_object()) throw ValidationError("config: expected an object");
    if (th0) j["th0"] = *th0;
    if (th1) j["th1"] = *th1;
    if (p) j["p"] = *p;
    if (w_max) j["w_max"] = *w_max;
    if (seed) j["seed"] = *seed;
    if (check1_mode) j["check1_mode"] = *check1_mode;
    if (prefetch) j["prefetch"] = *prefetch;
    if (iou_min) j["iou_valid_min"] = *iou_min;
    if (score_min) j["score_min"] = *score_min;
    return config_from_json(j);
  }
};

struct BackendFlags {
  std::string spec = "jaccard";
  std::size_t batch_size = 64;
  int retries = 3;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--backend", spec, "jaccard | scripted:FILE | remote:URL");
    cmd->add_option("--batch-size", batch_size, "remote request batch size");
    cmd->add_option("--retries", retries, "remote retry limit");
  }

  std::unique_ptr<SimilarityBackend> make() const {
    RemoteOptions opts;
    opts.batch_size = batch_size;
    opts.max_retries = retries;
    return make_backend(spec, opts);
  }
};

ordered_json meta(const EngineConfig& cfg) {
  return {{"config_hash", config_hash(cfg)}, {"tokenizer_version", kTokenizerVersion}};
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

// --- label -----------------------------------------------------------------

struct LabelArgs {
  std::string algo, refs, corpus, out, manifest, windows, stats;
  std::vector<std::string> force_windows;
  bool fallback_stats = false;
  double start_rate = 0.05;
  ConfigFlags config;
  BackendFlags backend;
};

int cmd_label(const LabelArgs& a) {
  auto cfg = a.config.resolve();
  auto algo = parse_algorithm(a.algo);
  auto refs = load_reference_set(a.refs);
  auto corpus = load_corpus(a.corpus);

  RunInputs in;
  in.algorithm = algo;
  in.refs = &refs;
  std::optional<WindowTable> windows;
  std::optional<BaselineStats> stats;
  std::unique_ptr<SimilarityBackend> backend;
  if (algo == Algorithm::fixed) {
    if (a.windows.empty() && a.force_windows.empty()) {
      throw ValidationError("--algo fixed requires a window table (--windows windows.json)");
    }
    windows = a.windows.empty() ? WindowTable{} : load_window_table(a.windows);
    for (const auto& f : a.force_windows) {
      auto [id, win] = parse_force_window(f);
      windows->force(id, win);
    }
    in.windows = &*windows;
  }
  if (algo == Algorithm::baseline) {
    if (!a.stats.empty()) {
      stats = load_baseline_stats(a.stats);
    } else if (a.fallback_stats) {
      stats = fallback_stats(refs, a.start_rate);
    } else {
      throw ValidationError("--algo baseline requires --stats stats.json or --fallback-stats");
    }
    in.stats = &*stats;
  } else {
    backend = a.backend.make();
    in.backend = backend.get();
  }

  auto result = run_labeler(corpus, in, cfg);
  auto manifest_path = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
  write_file_atomic(a.out, labels_to_jsonl(result.labels));
  write_json(manifest_path, run_manifest(result, in, cfg));
  std::cerr << "labeled " << corpus.size() << " sentences, " << result.labels.size()
            << " labels, " << result.calls.distinct << " backend calls\n";
  return 0;
}

// --- calibrate ---------------------------------------------------------------

struct CalibrateArgs {
  std::string refs, corpus, out;
  std::size_t min_count = 10;
  ConfigFlags config;
  BackendFlags backend;
};

int cmd_calibrate(const CalibrateArgs& a) {
  auto cfg = a.config.resolve();
  auto refs = load_reference_set(a.refs);
  auto corpus = load_corpus(a.corpus);
  auto backend = a.backend.make();
  CachedScorer scorer(*backend, refs);
  auto table = calibrate_windows(corpus, cfg, scorer, a.min_count);
  auto j = to_json(table);
  j["min_count"] = a.min_count;
  j["meta"] = meta(cfg);
  j["meta"]["backend"] = backend->identity();
  write_json(a.out, j);
  for (const auto& [id, e] : table.entries) {
    std::cerr << id << ": " << (e.win ? std::to_string(*e.win) : "uncalibrated (" + e.reason + ")")
              << "\n";
  }
  return 0;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  std::string pred, gt, corpus, refs, out, csv, pred_manifest, gt_manifest;
  ConfigFlags config;
};

int cmd_evaluate(const EvaluateArgs& a) {
  auto cfg = a.config.resolve();
  auto corpus = load_corpus(a.corpus);
  auto lengths = sentence_lengths(corpus);
  LabelContext ctx{nullptr, &lengths, cfg.wmax()};
  auto pred = load_labels(a.pred, ctx);
  auto gt = load_labels(a.gt, ctx);

  std::vector<std::string> inventory;
  if (!a.refs.empty()) {
    auto refs = load_reference_set(a.refs);
    for (const auto& g : refs.gestures()) inventory.push_back(g.id);
  } else {
    std::set<std::string> ids;
    for (const auto& l : pred) ids.insert(l.gesture_id);
    for (const auto& l : gt) ids.insert(l.gesture_id);
    inventory.assign(ids.begin(), ids.end());
  }

  std::vector<double> timings;
  CallStats calls;
  std::optional<std::string> pred_tok, gt_tok;
  if (!a.pred_manifest.empty()) {
    auto m = parse_json(read_file(a.pred_manifest), a.pred_manifest);
    pred_tok = m.value("tokenizer_version", "");
    for (const auto& t : m.value("timings", json::array())) timings.push_back(t.value("seconds", 0.0));
    if (m.contains("backend_calls")) {
      calls.total = m["backend_calls"].value("total", std::uint64_t{0});
      calls.distinct = m["backend_calls"].value("distinct", std::uint64_t{0});
    }
  }
  if (!a.gt_manifest.empty()) {
    auto m = parse_json(read_file(a.gt_manifest), a.gt_manifest);
    gt_tok = m.value("tokenizer_version", "");
  }
  for (const auto& tok : {pred_tok, gt_tok}) {
    if (tok && *tok != kTokenizerVersion) {
      throw ValidationError("label files were produced with tokenizer '" + *tok +
                            "', this build uses '" + std::string(kTokenizerVersion) + "'");
    }
  }

  auto report = evaluate(pred, gt, inventory, timings, cfg, calls);
  report.config_echo = to_json(cfg);
  auto j = to_json(report);
  j["meta"] = meta(cfg);
  write_json(a.out, j);
  if (!a.csv.empty()) write_file_atomic(a.csv, to_csv(report));
  std::cout << to_csv(report);
  return 0;
}

// --- stats -------------------------------------------------------------------

struct StatsArgs {
  std::string gt, corpus, out;
};

int cmd_stats(const StatsArgs& a) {
  auto corpus = load_corpus(a.corpus);
  auto lengths = sentence_lengths(corpus);
  LabelContext ctx{nullptr, &lengths, std::numeric_limits<std::size_t>::max()};
  auto gt = load_labels(a.gt, ctx);
  auto stats = derive_stats(gt, corpus);
  auto j = to_json(stats);
  j["meta"] = {{"tokenizer_version", kTokenizerVersion}, {"labels", gt.size()}};
  write_json(a.out, j);
  return 0;
}

// --- serve -------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string refs, corpus, gt_out, ui_dir;
  std::size_t session_size = 30;
  std::uint64_t seed = 0;
  int w_max = 10;
};

httplib::Server* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
  if (a.w_max < 1) throw ValidationError("--wmax must be >= 1");
  ServiceOptions opts;
  opts.gt_out = a.gt_out;
  opts.session_size = a.session_size;
  opts.seed = a.seed;
  opts.w_max = static_cast<std::size_t>(a.w_max);
  AnnotationService svc(load_reference_set(a.refs), load_corpus(a.corpus), opts);
  httplib::Server server;
  mount_annotation_api(server, svc,
                       a.ui_dir.empty() ? std::nullopt : std::optional<fs::path>(a.ui_dir));
  if (!server.bind_to_port(a.host, a.port)) {
    std::cerr << "error: cannot bind " << a.host << ":" << a.port << "\n";
    return kExitBackend;
  }
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  std::cerr << "serving on http://" << a.host << ":" << a.port << "\n";
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gesture span labeling engine"};
  app.require_subcommand(1);

  LabelArgs label;
  auto* c_label = app.add_subcommand("label", "label a corpus");
  c_label->add_option("--algo", label.algo, "baseline | fixed | moving")->required();
  c_label->add_option("--refs", label.refs, "reference set (refs.json)")->required();
  c_label->add_option("--corpus", label.corpus, "corpus.jsonl")->required();
  c_label->add_option("--out", label.out, "output labels.jsonl")->required();
  c_label->add_option("--manifest", label.manifest, "run manifest (default OUT.manifest.json)");
  c_label->add_option("--windows", label.windows, "windows.json (fixed)");
  c_label->add_option("--force-window", label.force_windows, "GESTURE=WIN override (fixed)");
  c_label->add_option("--stats", label.stats, "stats.json (baseline)");
  c_label->add_flag("--fallback-stats", label.fallback_stats, "uniform baseline statistics");
  c_label->add_option("--start-rate", label.start_rate, "fallback label start rate");
  label.config.add_to(c_label, true);
  label.backend.add_to(c_label);

  CalibrateArgs calibrate;
  auto* c_cal = app.add_subcommand("calibrate", "compute per-gesture fixed windows");
  c_cal->add_option("--refs", calibrate.refs)->required();
  c_cal->add_option("--corpus", calibrate.corpus)->required();
  c_cal->add_option("--out", calibrate.out, "windows.json")->required();
  c_cal->add_option("--min-count", calibrate.min_count, "accepted scores needed per window");
  calibrate.config.add_to(c_cal, false);
  calibrate.backend.add_to(c_cal);

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "AP / IOU / ACT report");
  c_eval->add_option("--pred", eval.pred)->required();
  c_eval->add_option("--gt", eval.gt)->required();
  c_eval->add_option("--corpus", eval.corpus)->required();
  c_eval->add_option("--refs", eval.refs, "gesture inventory; labels outside it are rejected");
  c_eval->add_option("--out", eval.out, "report.json")->required();
  c_eval->add_option("--csv", eval.csv, "CSV rendering (percent)");
  c_eval->add_option("--pred-manifest", eval.pred_manifest, "manifest of the predicted run");
  c_eval->add_option("--gt-manifest", eval.gt_manifest, "manifest of the reference labels");
  c_eval->add_option("--iou-min", eval.config.iou_min, "IOU for a valid AP match");
  c_eval->add_option("--score-min", eval.config.score_min, "minimum prediction score for IOU");
  eval.config.add_to(c_eval, false);

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "baseline statistics from ground truth");
  c_stats->add_option("--gt", stats.gt)->required();
  c_stats->add_option("--corpus", stats.corpus)->required();
  c_stats->add_option("--out", stats.out)->required();

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "annotation service");
  c_serve->add_option("--host", serve.host);
  c_serve->add_option("--port", serve.port);
  c_serve->add_option("--refs", serve.refs)->required();
  c_serve->add_option("--corpus", serve.corpus)->required();
  c_serve->add_option("--gt-out", serve.gt_out)->required();
  c_serve->add_option("--session-size", serve.session_size);
  c_serve->add_option("--seed", serve.seed);
  c_serve->add_option("--wmax", serve.w_max);
  c_serve->add_option("--ui-dir", serve.ui_dir, "static annotation UI bundle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*c_label) return cmd_label(label);
    if (*c_cal) return cmd_calibrate(calibrate);
    if (*c_eval) return cmd_evaluate(eval);
    if (*c_stats) return cmd_stats(stats);
    if (*c_serve) return cmd_serve(serve);
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
