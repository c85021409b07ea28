#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <semaphore>
#include <string>

#include <json.hpp>

#include "sqseg/palette.hpp"
#include "sqseg/pipeline.hpp"

namespace sqseg {

struct ServiceConfig {
  std::shared_ptr<const SegmentationModel> model;
  Palette palette = default_palette();
  std::size_t max_image_bytes = 16u << 20;
  std::optional<std::filesystem::path> data_dir;  // root for {"path": ...} images
  std::optional<StainStats> stain_target;
  int max_concurrent = 0;                         // forward passes; 0 = CPU cores
  std::ostream* log = nullptr;                    // JSON lines
};

struct HttpResult {
  int status = 200;
  std::string body;  // JSON
};

/// Request handling without the socket layer. Every handler is stateless
/// apart from the forward-pass limit and may be called concurrently.
class SegmentService {
 public:
  explicit SegmentService(ServiceConfig config);

  HttpResult health() const;
  HttpResult palette() const;
  HttpResult segment(const std::string& body);
  HttpResult export_annotations(const std::string& body) const;

  /// Routes "GET /api/health" etc.; 404 for anything else.
  HttpResult handle(const std::string& method, const std::string& path, const std::string& body);

  const ServiceConfig& config() const noexcept { return config_; }

 private:
  void log_line(const nlohmann::json& line) const;

  ServiceConfig config_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  mutable std::atomic<std::uint64_t> error_counter_{0};
};

/// Blocking HTTP server on host:port. `on_ready`, when given, receives the
/// bound port before requests are accepted.
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<SegmentService> service, int worker_threads = 8);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free port) and returns the port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string base64_encode(const std::string& bytes);
/// Throws std::invalid_argument on malformed input.
std::string base64_decode(const std::string& text);

}  // namespace sqseg
