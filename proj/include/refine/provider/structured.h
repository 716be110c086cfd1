#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace refine::provider {

/// Extracts and parses the first top-level JSON value from raw model output.
///
/// Code fences and any prose before or after the value are ignored. When
/// `schema_hint` is non-empty it is read as a small JSON-Schema subset
/// (`type`, `required`, `properties`, `items`, `minItems`, `maxItems`) and
/// the parsed value is validated against it. Failures raise SchemaError whose
/// message names the offending byte span of `text`.
nlohmann::json parse_structured(std::string_view text, std::string_view schema_hint);

/// Validates `value` against a schema hint; throws SchemaError naming the
/// JSON path of the first violation.
void validate_against_hint(const nlohmann::json& value, const nlohmann::json& schema);

/// Removes a surrounding Markdown code fence (```lang ... ```) if present.
std::string strip_code_fence(std::string_view text);

}  // namespace refine::provider
