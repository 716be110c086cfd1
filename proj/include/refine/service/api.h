#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refine/common/error.h"
#include "refine/service/service.h"

namespace refine::service {

struct ApiRequest {
  std::string method;  // "GET", "POST", "PUT"
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string content_type;
  std::vector<std::string> uploads;  // multipart file parts, in order
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
  std::map<std::string, std::string> headers;
};

int http_status(ErrorCode code);

/// {"error": {"code": ..., "message": ...}} plus code-specific extras.
ApiResponse error_response(const Error& error);

/// Routes /v1 requests onto a Service. Independent of any socket layer so the
/// endpoints can be exercised in-process.
class Api {
 public:
  explicit Api(Service& service) : service_(service) {}

  ApiResponse handle(const ApiRequest& request);

 private:
  ApiResponse create_session(const ApiRequest& request);
  ApiResponse route_session(const ApiRequest& request, const std::vector<std::string>& parts);

  Service& service_;
};

/// Blocking HTTP server exposing Api, optionally serving a static directory
/// at "/".
class HttpServer {
 public:
  HttpServer(Service& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~HttpServer();

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace refine::service
