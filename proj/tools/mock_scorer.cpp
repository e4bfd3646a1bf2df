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

// Scripted stand-in for a cross-encoder scoring service. Serves
// POST /similarity and GET /health from a scripted score table, or from
// token Jaccard when no table is given.

#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "httplib.h"

#include "gestlabel/similarity.hpp"

using namespace gestlabel;

int main(int argc, char** argv) {
  CLI::App app{"Mock similarity server"};
  std::string host = "127.0.0.1";
  int port = 8090;
  std::string table_path;
  app.add_option("--host", host);
  app.add_option("--port", port);
  app.add_option("--scripted", table_path, "scripted score table (JSON)");
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<SimilarityBackend> backend;
  try {
    if (table_path.empty()) {
      backend = std::make_unique<JaccardBackend>();
    } else {
      backend = std::make_unique<ScriptedBackend>(ScriptedTable::load(table_path));
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  httplib::Server server;
  server.Get("/health", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"model", "mock:" + backend->identity()}}.dump(), "application/json");
  });
  server.Post("/similarity", [&](const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = json::parse(req.body);
      json scores = json::array();
      for (const auto& pair : body.at("pairs")) {
        scores.push_back(backend->score(pair.at(0).get<std::string>(),
                                        pair.at(1).get<std::string>()));
      }
      res.set_content(json{{"scores", scores}}.dump(), "application/json");
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });
  if (!server.bind_to_port(host, port)) {
    std::cerr << "error: cannot bind " << host << ":" << port << "\n";
    return 3;
  }
  std::cerr << "mock scorer on http://" << host << ":" << port << "\n";
  server.listen_after_bind();
  return 0;
}
