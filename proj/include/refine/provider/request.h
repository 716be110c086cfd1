#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace refine::provider {

enum class RequestKind { kChat, kVisionChat, kEmbed };
enum class ResponseKind { kText, kVector };

std::string_view to_string(RequestKind kind);
std::string_view to_string(ResponseKind kind);

struct TextPart {
  std::string text;
};

struct ImagePart {
  std::string png_bytes;
};

using Part = std::variant<TextPart, ImagePart>;

struct ProviderRequest {
  RequestKind kind = RequestKind::kChat;
  std::string system_instruction;
  std::vector<Part> user_parts;
  std::optional<std::string> response_schema_hint;

  static ProviderRequest embed(std::string text);

  /// Throws PreconditionError when the part mix contradicts `kind`.
  void validate() const;

  /// Stage tag from a rendered template ("[refine:<stage>@v<n>]"), or "embed".
  std::string stage() const;
  std::size_t image_count() const;
};

struct ProviderResponse {
  ResponseKind kind = ResponseKind::kText;
  std::optional<std::string> text;
  std::optional<std::vector<float>> vector;
  double latency_seconds = 0.0;

  static ProviderResponse of_text(std::string text, double latency = 0.0);
  static ProviderResponse of_vector(std::vector<float> vector, double latency = 0.0);

  bool operator==(const ProviderResponse&) const = default;
};

/// Canonical byte form: NFC text, images replaced by their SHA-256, JSON-valued
/// text parts re-serialized with sorted keys, fields in fixed order.
std::string canonicalize(const ProviderRequest& request);
std::string request_digest(const ProviderRequest& request);

/// Short human-readable description stored next to fixtures.
nlohmann::json request_summary(const ProviderRequest& request);

nlohmann::json response_to_json(const ProviderResponse& response);
ProviderResponse response_from_json(const nlohmann::json& j);

}  // namespace refine::provider
