#pragma once

// JSON-over-HTTP review service backed by a ReviewStore.
//
//   GET  /api/review/pending          array of review summaries, oldest first
//   GET  /api/dialogue/{id}           the full manifest entry
//   GET  /api/audio/{id}[?turn=k]     mixed track (or one utterance) as audio/wav
//   POST /api/review/{id}/verdict     {"verdict": "approved"|"rejected", "reason"?, "reviewer"}
//   GET  /api/stats                   corpus statistics
//
// Errors are {"code", "message"}: 400 bad_request, 403 forbidden, 404 not_found
// or audio_missing, 409 already_decided or not_reviewable, 500 internal.

#include <memory>
#include <string>

#include "dialoforge/review_store.hpp"

namespace dialoforge {

struct ApiOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// Serve audio only for machine-passed, human-approved entries.
  bool finalized_only = false;
};

class ApiServer {
 public:
  ApiServer(std::shared_ptr<ReviewStore> store, ApiOptions options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds the listening socket; throws StartupError when the port is taken.
  /// Returns the bound port.
  int bind();
  /// Blocks serving requests until stop() (binds first if needed).
  void serve();
  /// Serves on a background thread.
  void start();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dialoforge
