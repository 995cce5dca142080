#pragma once

#include <string>
#include <string_view>

namespace devmetrics {

/// True for RFC 4122 text form: 8-4-4-4-12 hex digits, either case.
bool is_uuid(std::string_view text);

/// Random version-4 UUID, lowercase.
std::string random_uuid();

/// Deterministic UUID-formatted digest of `material` (SHA-256, first 16 bytes,
/// version/variant bits set as for name-based UUIDs).
std::string derived_uuid(std::string_view material);

}  // namespace devmetrics
