#include "refine/provider/structured.h"

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"

namespace refine::provider {

using nlohmann::json;

std::string strip_code_fence(std::string_view text) {
  std::string body = trim(text);
  auto open = body.find("```");
  if (open == std::string::npos) return body;
  auto line_end = body.find('\n', open);
  if (line_end == std::string::npos) return body;
  auto close = body.find("```", line_end + 1);
  if (close == std::string::npos) close = body.size();
  return body.substr(line_end + 1, close - line_end - 1);
}

namespace {

std::string excerpt(std::string_view text, std::size_t begin, std::size_t end) {
  end = std::min(end, text.size());
  std::string_view span = text.substr(begin, end - begin);
  if (span.size() > 60) {
    return fmt::format("{}...{}", span.substr(0, 28), span.substr(span.size() - 28));
  }
  return std::string(span);
}

// End offset (exclusive) of the balanced JSON value opening at `start`, or npos.
std::size_t balanced_end(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

bool type_matches(const json& value, std::string_view type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "integer") return value.is_number_integer();
  if (type == "number") return value.is_number();
  if (type == "null") return value.is_null();
  return true;
}

void validate_at(const json& value, const json& schema, const std::string& path) {
  if (!schema.is_object()) return;
  if (auto t = schema.find("type"); t != schema.end()) {
    bool ok = false;
    if (t->is_string()) {
      ok = type_matches(value, t->get<std::string>());
    } else if (t->is_array()) {
      for (const auto& alt : *t) ok = ok || type_matches(value, alt.get<std::string>());
    }
    if (!ok) {
      throw SchemaError(fmt::format("at {}: expected type {}, got {}", path, t->dump(),
                                    value.type_name()));
    }
  }
  if (value.is_object()) {
    if (auto req = schema.find("required"); req != schema.end()) {
      for (const auto& key : *req) {
        if (!value.contains(key.get<std::string>())) {
          throw SchemaError(fmt::format("at {}: missing required field '{}'", path,
                                        key.get<std::string>()));
        }
      }
    }
    if (auto props = schema.find("properties"); props != schema.end()) {
      for (const auto& [key, sub] : props->items()) {
        if (value.contains(key)) validate_at(value[key], sub, path + "." + key);
      }
    }
  }
  if (value.is_array()) {
    if (auto mn = schema.find("minItems"); mn != schema.end() && value.size() < mn->get<std::size_t>()) {
      throw SchemaError(fmt::format("at {}: expected at least {} items", path, mn->dump()));
    }
    if (auto mx = schema.find("maxItems"); mx != schema.end() && value.size() > mx->get<std::size_t>()) {
      throw SchemaError(fmt::format("at {}: expected at most {} items", path, mx->dump()));
    }
    if (auto items = schema.find("items"); items != schema.end()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        validate_at(value[i], *items, fmt::format("{}[{}]", path, i));
      }
    }
  }
}

}  // namespace

void validate_against_hint(const json& value, const json& schema) {
  validate_at(value, schema, "$");
}

json parse_structured(std::string_view text, std::string_view schema_hint) {
  std::string body = strip_code_fence(text);
  std::size_t start = body.find_first_of("{[");
  if (start == std::string::npos) {
    throw SchemaError(fmt::format("no JSON value in model output [0,{}): \"{}\"", body.size(),
                                  excerpt(body, 0, body.size())));
  }
  // Prose may itself contain brackets ("[see below]"), so a balanced but
  // malformed candidate is skipped. An unterminated candidate swallows the
  // rest of the text, so nothing after it is considered.
  json value;
  std::string first_error;
  for (std::size_t pos = start; pos != std::string::npos;) {
    std::size_t end = balanced_end(body, pos);
    if (end == std::string_view::npos) {
      if (first_error.empty()) {
        first_error = fmt::format("unterminated JSON value at [{},{}): \"{}\"", pos, body.size(),
                                  excerpt(body, pos, body.size()));
      }
      break;
    }
    value = json::parse(body.begin() + static_cast<std::ptrdiff_t>(pos),
                        body.begin() + static_cast<std::ptrdiff_t>(end), nullptr, false);
    if (!value.is_discarded()) break;
    if (first_error.empty()) {
      first_error = fmt::format("malformed JSON at [{},{}): \"{}\"", pos, end,
                                excerpt(body, pos, end));
    }
    pos = body.find_first_of("{[", end);
  }
  if (value.is_discarded() || value.is_null()) throw SchemaError(first_error);
  if (!trim(schema_hint).empty()) {
    json schema = json::parse(schema_hint, nullptr, false);
    if (schema.is_discarded()) throw SchemaError("schema hint is not valid JSON");
    validate_against_hint(value, schema);
  }
  return value;
}

}  // namespace refine::provider
