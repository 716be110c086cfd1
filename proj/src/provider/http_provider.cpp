#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "refine/provider/http_provider.h"

#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"

namespace refine::provider {

using nlohmann::json;

namespace {

class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

  HttpResult post_json(const std::string& url, const std::string& body,
                       const std::map<std::string, std::string>& headers) override {
    // Split "scheme://host[:port]/path" into client origin and request path.
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return {0, "", "URL lacks a scheme: " + url};
    auto path_start = url.find('/', scheme_end + 3);
    std::string origin = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }

 private:
  std::chrono::seconds timeout_;
};

bool is_transient(int status) {
  return status <= 0 || status == 408 || status == 429 || status >= 500;
}

std::string join_url(const std::string& base, std::string_view suffix) {
  if (!base.empty() && base.back() == '/') return base + std::string(suffix.substr(1));
  return base + std::string(suffix);
}

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(timeout);
}

HttpProvider::HttpProvider(HttpProviderConfig config, std::unique_ptr<HttpTransport> transport,
                           Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  if (config_.embed_url.empty()) config_.embed_url = config_.chat_url;
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

json HttpProvider::chat_body(const ProviderRequest& request, const std::string& model) {
  json content = json::array();
  for (const auto& part : request.user_parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      content.push_back({{"type", "text"}, {"text", t->text}});
    } else {
      const auto& img = std::get<ImagePart>(part);
      content.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:image/png;base64," + base64_encode(img.png_bytes)}}}});
    }
  }
  json messages = json::array();
  if (!request.system_instruction.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_instruction}});
  }
  messages.push_back({{"role", "user"}, {"content", std::move(content)}});
  return {{"model", model}, {"messages", std::move(messages)}, {"temperature", 0}};
}

HttpResult HttpProvider::post_with_retries(const std::string& url, const std::string& body) {
  std::map<std::string, std::string> headers;
  if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;
  auto backoff = config_.initial_backoff;
  HttpResult result;
  for (int attempt = 0;; ++attempt) {
    result = transport_->post_json(url, body, headers);
    if (result.status >= 200 && result.status < 300) return result;
    if (!is_transient(result.status) || attempt >= config_.max_retries) break;
    spdlog::warn("provider call to {} failed (status {} {}); retry {} in {} ms", url,
                 result.status, result.error, attempt + 1, backoff.count());
    sleeper_(backoff);
    backoff *= 2;
  }
  throw TransportError(fmt::format("POST {} failed with status {}{}{}", url, result.status,
                                   result.error.empty() ? "" : ": ", result.error));
}

ProviderResponse HttpProvider::complete(const ProviderRequest& request) {
  request.validate();
  auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  if (request.kind == RequestKind::kEmbed) {
    const auto& text = std::get<TextPart>(request.user_parts.front()).text;
    json body = {{"model", config_.embed_model}, {"input", text}};
    HttpResult res = post_with_retries(join_url(config_.embed_url, "/embeddings"), body.dump());
    json j = json::parse(res.body, nullptr, false);
    try {
      auto vec = j.at("data").at(0).at("embedding").get<std::vector<float>>();
      return ProviderResponse::of_vector(std::move(vec), elapsed());
    } catch (const json::exception& e) {
      throw SchemaError(fmt::format("unexpected embeddings payload: {}", e.what()));
    }
  }
  const std::string& model =
      request.kind == RequestKind::kVisionChat ? config_.vision_model : config_.chat_model;
  HttpResult res = post_with_retries(join_url(config_.chat_url, "/chat/completions"),
                                     chat_body(request, model).dump());
  json j = json::parse(res.body, nullptr, false);
  try {
    auto text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    return ProviderResponse::of_text(std::move(text), elapsed());
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("unexpected chat payload: {}", e.what()));
  }
}

}  // namespace refine::provider
