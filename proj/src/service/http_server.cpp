#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "refine/service/api.h"

namespace refine::service {

struct HttpServer::Impl {
  explicit Impl(Service& service) : api(service) {}

  void dispatch(const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [key, value] : req.params) r.query.emplace(key, value);
    r.content_type = req.get_header_value("Content-Type");
    if (req.is_multipart_form_data()) {
      for (const auto& [name, file] : req.files) r.uploads.push_back(file.content);
    } else {
      r.body = req.body;
    }
    ApiResponse out = api.handle(r);
    res.status = out.status;
    for (const auto& [key, value] : out.headers) res.set_header(key, value);
    res.set_content(out.body.dump(), "application/json");
    spdlog::info("{} {} -> {}", req.method, req.path, out.status);
  }

  Api api;
  httplib::Server server;
};

HttpServer::HttpServer(Service& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    impl_->dispatch(req, res);
  };
  const char* pattern = R"(/v1/.*)";
  impl_->server.Get(pattern, handler);
  impl_->server.Post(pattern, handler);
  impl_->server.Put(pattern, handler);
  if (static_dir && !impl_->server.set_mount_point("/", static_dir->string())) {
    throw IoError(fmt::format("cannot serve static files from {}", static_dir->string()));
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : port;
  if (port != 0 && !impl_->server.bind_to_port(host, port)) bound = -1;
  if (bound < 0) throw IoError(fmt::format("cannot bind {}:{}", host, port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace refine::service
