#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace refine {

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
/// Throws SchemaError on malformed input.
std::string base64_decode(std::string_view text);

/// Little-endian float32 packing used for every persisted vector.
std::string encode_f32_base64(std::span<const float> values);
std::vector<float> decode_f32_base64(std::string_view text);

/// Unicode NFC normalization of UTF-8 text. Invalid UTF-8 is passed through
/// unchanged rather than rejected.
std::string nfc(std::string_view utf8);

/// Collapses runs of ASCII/Unicode-space whitespace to one space and trims.
std::string collapse_whitespace(std::string_view text);

std::string trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

/// Number of Unicode code points in UTF-8 text.
std::size_t utf8_length(std::string_view text);
/// Byte offset of the `count`-th code point (or text.size()).
std::size_t utf8_offset(std::string_view text, std::size_t count);

/// ISO-8601 UTC timestamp honoring SOURCE_DATE_EPOCH for reproducible output.
std::string reproducible_timestamp();
/// Like reproducible_timestamp() but falls back to the Unix epoch, for
/// outputs that must be byte-identical across runs.
std::string deterministic_timestamp();

}  // namespace refine
