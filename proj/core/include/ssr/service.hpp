#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "ssr/checkpoint.hpp"

namespace ssr {

/// Read-only recognition over a loaded checkpoint. All methods are const and
/// safe to call concurrently.
class RecognitionService {
 public:
  struct Response {
    int status = 200;
    nlohmann::json body;
  };

  explicit RecognitionService(LoadedCheckpoint checkpoint);

  nlohmann::json health() const { return {{"status", "ok"}}; }
  nlohmann::json model_info() const;

  /// Handles a POST /recognize body: 400 for malformed JSON or shapes, 422
  /// for an empty sketch or more strokes than the model accepts.
  Response recognize(const std::string& body) const;
  Response recognize(const nlohmann::json& request) const;

  const SsrModel& model() const { return checkpoint_.model; }

 private:
  LoadedCheckpoint checkpoint_;
};

/// HTTP front end: GET /healthz, GET /model, POST /recognize.
class HttpServer {
 public:
  explicit HttpServer(const RecognitionService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket; port 0 picks a free port. Returns the bound port and
  /// throws if the port is unavailable.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ssr
