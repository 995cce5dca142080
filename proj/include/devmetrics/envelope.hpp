#pragma once

// The three-part document every agent submits:
//
//   { "timestamp": "...Z", "agent": { code_name, full_name, secret_key, install_guid },
//     "metrics": { "event_id": ..., "event_type": ..., <agent-defined> } }
//
// The top level and the agent block are closed; metrics is open apart from the
// two reserved keys.

#include "devmetrics/json.hpp"
#include "devmetrics/time.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace devmetrics {

inline constexpr std::size_t kMaxCodeNameLength = 64;
inline constexpr std::size_t kMaxPayloadBytes = 1 << 20;
inline constexpr int kMaxPayloadDepth = 32;

struct AgentDescriptor {
  std::string code_name;
  std::string full_name;
  std::string secret_key;
  std::string install_guid;

  bool operator==(const AgentDescriptor&) const = default;
};

struct MetricEnvelope {
  Instant timestamp{};
  AgentDescriptor agent;
  Json metrics = Json::object();

  const std::string& event_id() const { return metrics.at("event_id").get_ref<const std::string&>(); }
  const std::string& event_type() const { return metrics.at("event_type").get_ref<const std::string&>(); }

  // Payload compared by canonical bytes, so 1800 and 1800.0 differ.
  bool operator==(const MetricEnvelope& other) const;
};

enum class ErrorKind {
  MissingField,
  BadTimestamp,
  BadUuid,
  PayloadTooLarge,
  MissingReservedKey,
  UnknownTopLevelField,
  InvalidField,
  CredentialMismatch,
};

std::string_view to_string(ErrorKind kind);

struct ValidationError {
  ErrorKind kind;
  std::string path;
  std::string message;

  bool operator==(const ValidationError&) const = default;
};

Json to_json(const ValidationError& error);

/// Outcome of validate_envelope: either a typed envelope or every violated rule.
class Validation {
 public:
  explicit Validation(MetricEnvelope envelope) : value_(std::move(envelope)) {}
  explicit Validation(std::vector<ValidationError> errors) : value_(std::move(errors)) {}

  bool ok() const { return std::holds_alternative<MetricEnvelope>(value_); }
  explicit operator bool() const { return ok(); }

  const MetricEnvelope& envelope() const& { return std::get<MetricEnvelope>(value_); }
  MetricEnvelope&& envelope() && { return std::get<MetricEnvelope>(std::move(value_)); }
  const std::vector<ValidationError>& errors() const { return std::get<std::vector<ValidationError>>(value_); }

  bool has_error(ErrorKind kind, std::string_view path) const;

 private:
  std::variant<MetricEnvelope, std::vector<ValidationError>> value_;
};

Validation validate_envelope(const Json& raw);

/// Lowercase token: [a-z0-9] followed by [a-z0-9._-]*.
bool is_event_type_token(std::string_view s);

Json to_json(const MetricEnvelope& e);
std::string canonical_bytes(const MetricEnvelope& e);

}  // namespace devmetrics
