#pragma once

#include <json.hpp>

#include <string>
#include <string_view>

namespace devmetrics {

using Json = nlohmann::json;

/// Sorted keys, no whitespace, shortest round-trip numbers, strict UTF-8.
/// Throws nlohmann::json::type_error on invalid UTF-8.
inline std::string canonical_json(const Json& value) {
  return value.dump(-1, ' ', false, Json::error_handler_t::strict);
}

/// Parses agent-supplied JSON text. A comma directly before a closing bracket
/// or brace is tolerated (hand-written agent documents often carry one).
/// Throws nlohmann::json::parse_error on anything else malformed.
Json parse_wire_json(std::string_view text);

}  // namespace devmetrics
