#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "refine/provider/provider.h"

namespace refine::provider {

struct HttpResult {
  int status = 0;  // <= 0 means the request never produced an HTTP response
  std::string body;
  std::string error;
};

/// Minimal POST-a-JSON-body transport so retry logic can be tested without
/// sockets.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post_json(const std::string& url, const std::string& body,
                               const std::map<std::string, std::string>& headers) = 0;
};

/// cpp-httplib backed transport; https URLs use OpenSSL.
std::unique_ptr<HttpTransport> make_httplib_transport(std::chrono::seconds timeout);

struct HttpProviderConfig {
  std::string chat_url;   // base URL of an OpenAI-compatible API, e.g. http://host/v1
  std::string embed_url;  // defaults to chat_url when empty
  std::string api_key;
  std::string chat_model = "gpt-4o";
  std::string vision_model = "gpt-4o";
  std::string embed_model = "text-embedding-3-small";
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
};

/// Speaks the OpenAI-compatible `/chat/completions` and `/embeddings` wire
/// format. Transient failures (no response, 408, 429, 5xx) are retried with
/// exponential backoff: initial_backoff, then x2 per retry.
class HttpProvider : public Provider {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpProvider(HttpProviderConfig config, std::unique_ptr<HttpTransport> transport,
               Sleeper sleeper = {});

  ProviderResponse complete(const ProviderRequest& request) override;

  static nlohmann::json chat_body(const ProviderRequest& request, const std::string& model);

 private:
  HttpResult post_with_retries(const std::string& url, const std::string& body);

  HttpProviderConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
};

}  // namespace refine::provider
