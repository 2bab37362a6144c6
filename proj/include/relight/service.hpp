#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relight/inference.hpp"

namespace httplib {
class Server;
}

namespace relight::service {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on characters outside the standard alphabet
/// or bad padding. Whitespace is skipped.
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct ServiceOptions {
  std::size_t max_body_bytes = 64u << 20;
  std::int64_t max_pixels = 4096 * 4096;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Endpoint logic independent of the transport. Handlers are safe to call
/// concurrently; the loaded model is immutable once published.
class Service {
 public:
  explicit Service(ServiceOptions options = {});

  void load(std::shared_ptr<const inference::Relighter> relighter);
  [[nodiscard]] bool ready() const;

  /// POST /relight. See docs/service.md for the request and response shape.
  [[nodiscard]] Response relight(const std::string& body) const;
  /// GET /health.
  [[nodiscard]] Response health() const;
  /// GET /model-info.
  [[nodiscard]] Response model_info() const;

  /// Registers the three routes and the body-size limit on `server`.
  void mount(httplib::Server& server) const;

 private:
  [[nodiscard]] std::shared_ptr<const inference::Relighter> current() const;

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::shared_ptr<const inference::Relighter> relighter_;
};

/// Blocks serving on host:port until the server stops.
void serve(const Service& service, const std::string& host, int port);

}  // namespace relight::service
