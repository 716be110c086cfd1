#include "refine/provider/request.h"

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"

namespace refine::provider {

using nlohmann::json;

std::string_view to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::kChat: return "chat";
    case RequestKind::kVisionChat: return "vision_chat";
    case RequestKind::kEmbed: return "embed";
  }
  return "chat";
}

std::string_view to_string(ResponseKind kind) {
  return kind == ResponseKind::kVector ? "vector" : "text";
}

ProviderRequest ProviderRequest::embed(std::string text) {
  ProviderRequest r;
  r.kind = RequestKind::kEmbed;
  r.user_parts.emplace_back(TextPart{std::move(text)});
  return r;
}

std::size_t ProviderRequest::image_count() const {
  std::size_t n = 0;
  for (const auto& p : user_parts) n += std::holds_alternative<ImagePart>(p) ? 1 : 0;
  return n;
}

void ProviderRequest::validate() const {
  std::size_t images = image_count();
  switch (kind) {
    case RequestKind::kVisionChat:
      if (images == 0) throw PreconditionError("vision_chat request carries no image part");
      break;
    case RequestKind::kChat:
      if (images != 0) throw PreconditionError("chat request must not carry image parts");
      break;
    case RequestKind::kEmbed:
      if (images != 0 || user_parts.size() != 1) {
        throw PreconditionError("embed request must carry exactly one text part");
      }
      break;
  }
}

std::string ProviderRequest::stage() const {
  if (kind == RequestKind::kEmbed) return "embed";
  static constexpr std::string_view kPrefix = "[refine:";
  if (system_instruction.rfind(kPrefix, 0) != 0) return "";
  auto end = system_instruction.find_first_of("@]", kPrefix.size());
  if (end == std::string::npos) return "";
  return system_instruction.substr(kPrefix.size(), end - kPrefix.size());
}

ProviderResponse ProviderResponse::of_text(std::string text, double latency) {
  ProviderResponse r;
  r.kind = ResponseKind::kText;
  r.text = std::move(text);
  r.latency_seconds = latency;
  return r;
}

ProviderResponse ProviderResponse::of_vector(std::vector<float> vector, double latency) {
  ProviderResponse r;
  r.kind = ResponseKind::kVector;
  r.vector = std::move(vector);
  r.latency_seconds = latency;
  return r;
}

namespace {

std::string canonical_text(const std::string& text) {
  std::string normalized = nfc(text);
  // Structured payloads are digested by content, not key order.
  auto first = normalized.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (normalized[first] == '{' || normalized[first] == '[')) {
    json parsed = json::parse(normalized, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && (parsed.is_object() || parsed.is_array())) {
      return parsed.dump();
    }
  }
  return normalized;
}

}  // namespace

std::string canonicalize(const ProviderRequest& request) {
  // nlohmann::json objects are key-sorted, which fixes the field order.
  json parts = json::array();
  for (const auto& part : request.user_parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      parts.push_back({{"type", "text"}, {"text", canonical_text(t->text)}});
    } else {
      const auto& img = std::get<ImagePart>(part);
      parts.push_back({{"type", "image"}, {"sha256", sha256_hex(img.png_bytes)}});
    }
  }
  json doc = {
      {"kind", to_string(request.kind)},
      {"system_instruction", nfc(request.system_instruction)},
      {"user_parts", std::move(parts)},
      {"response_schema_hint",
       request.response_schema_hint ? json(nfc(*request.response_schema_hint)) : json(nullptr)},
  };
  return doc.dump();
}

std::string request_digest(const ProviderRequest& request) {
  return sha256_hex(canonicalize(request));
}

json request_summary(const ProviderRequest& request) {
  json s = {{"kind", to_string(request.kind)}, {"stage", request.stage()}};
  if (request.kind == RequestKind::kEmbed) {
    const auto& text = std::get<TextPart>(request.user_parts.front()).text;
    s["text"] = text.size() > 120 ? text.substr(0, utf8_offset(text, 117)) + "..." : text;
  } else {
    s["images"] = request.image_count();
    s["text_parts"] = request.user_parts.size() - request.image_count();
  }
  return s;
}

json response_to_json(const ProviderResponse& response) {
  json j = {{"kind", to_string(response.kind)}, {"latency", response.latency_seconds}};
  if (response.kind == ResponseKind::kText) {
    j["text"] = response.text.value_or("");
  } else {
    const auto& v = response.vector.value();
    j["dim"] = v.size();
    j["vector_f32"] = encode_f32_base64(v);
  }
  return j;
}

ProviderResponse response_from_json(const json& j) {
  try {
    ProviderResponse r;
    r.latency_seconds = j.value("latency", 0.0);
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "text") {
      r.kind = ResponseKind::kText;
      r.text = j.at("text").get<std::string>();
    } else if (kind == "vector") {
      r.kind = ResponseKind::kVector;
      r.vector = decode_f32_base64(j.at("vector_f32").get<std::string>());
      if (j.contains("dim") && j["dim"].get<std::size_t>() != r.vector->size()) {
        throw SchemaError("stored vector length disagrees with its dim field");
      }
    } else {
      throw SchemaError(fmt::format("unknown response kind '{}'", kind));
    }
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed stored response: {}", e.what()));
  }
}

}  // namespace refine::provider
