#include "devmetrics/envelope.hpp"

#include "devmetrics/uuid.hpp"

#include <algorithm>
#include <cmath>

namespace devmetrics {
namespace {

constexpr std::string_view kTopLevel[] = {"timestamp", "agent", "metrics"};
constexpr std::string_view kAgentFields[] = {"code_name", "full_name", "secret_key", "install_guid"};

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

bool has_control(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x20 || u == 0x7F;
  });
}

// Container depth, metrics object itself counting as 1. Stops descending past
// the limit so hostile inputs cost O(limit) stack.
int depth_of(const Json& j, int limit) {
  if (!j.is_structured()) return 0;
  if (limit <= 0) return 1;
  int deepest = 0;
  for (const auto& child : j) deepest = std::max(deepest, depth_of(child, limit - 1));
  return 1 + deepest;
}

bool all_numbers_finite(const Json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_structured()) return std::all_of(j.begin(), j.end(), all_numbers_finite);
  return true;
}

class Checker {
 public:
  void add(ErrorKind kind, std::string path, std::string message) {
    errors_.push_back({kind, std::move(path), std::move(message)});
  }
  bool clean() const { return errors_.empty(); }
  std::vector<ValidationError> take() { return std::move(errors_); }

 private:
  std::vector<ValidationError> errors_;
};

void check_agent(const Json& agent, AgentDescriptor& out, Checker& c) {
  if (!agent.is_object()) {
    c.add(ErrorKind::InvalidField, "agent", "agent must be an object");
    return;
  }
  for (const auto& [key, _] : agent.items()) {
    if (std::find(std::begin(kAgentFields), std::end(kAgentFields), key) == std::end(kAgentFields)) {
      c.add(ErrorKind::InvalidField, "agent." + key, "unknown agent field");
    }
  }
  auto string_field = [&](std::string_view name, std::string& dst) -> bool {
    const std::string path = "agent." + std::string(name);
    auto it = agent.find(name);
    if (it == agent.end()) {
      c.add(ErrorKind::MissingField, path, "required field missing");
      return false;
    }
    if (!it->is_string()) {
      c.add(ErrorKind::InvalidField, path, "must be a string");
      return false;
    }
    dst = it->get<std::string>();
    return true;
  };

  if (string_field("code_name", out.code_name)) {
    if (out.code_name.empty() || utf8_length(out.code_name) > kMaxCodeNameLength || has_control(out.code_name)) {
      c.add(ErrorKind::InvalidField, "agent.code_name", "must be 1-64 characters without control characters");
    }
  }
  string_field("full_name", out.full_name);
  for (auto [name, dst] : {std::pair{"secret_key", &out.secret_key}, std::pair{"install_guid", &out.install_guid}}) {
    auto it = agent.find(name);
    const std::string path = std::string("agent.") + name;
    if (it == agent.end()) {
      c.add(ErrorKind::MissingField, path, "required field missing");
    } else if (!it->is_string() || !is_uuid(it->get_ref<const std::string&>())) {
      c.add(ErrorKind::BadUuid, path, "must be UUID text (8-4-4-4-12 hex)");
    } else {
      *dst = it->get<std::string>();
    }
  }
}

void check_metrics(const Json& metrics, Checker& c) {
  if (!metrics.is_object()) {
    c.add(ErrorKind::InvalidField, "metrics", "metrics must be an object");
    return;
  }
  for (std::string_view key : {"event_id", "event_type"}) {
    const std::string path = "metrics." + std::string(key);
    auto it = metrics.find(key);
    if (it == metrics.end() || (it->is_string() && it->get_ref<const std::string&>().empty())) {
      c.add(ErrorKind::MissingReservedKey, path, "reserved key missing or empty");
    } else if (!it->is_string()) {
      c.add(ErrorKind::InvalidField, path, "must be a string");
    } else if (key == "event_type" && !is_event_type_token(it->get_ref<const std::string&>())) {
      c.add(ErrorKind::InvalidField, path, "must be a lowercase token");
    }
  }

  if (depth_of(metrics, kMaxPayloadDepth + 1) > kMaxPayloadDepth) {
    c.add(ErrorKind::PayloadTooLarge, "metrics", "nesting deeper than 32 levels");
    return;
  }
  if (!all_numbers_finite(metrics)) {
    c.add(ErrorKind::InvalidField, "metrics", "non-finite number");
    return;
  }
  try {
    if (canonical_json(metrics).size() > kMaxPayloadBytes) {
      c.add(ErrorKind::PayloadTooLarge, "metrics", "serialized payload exceeds 1 MiB");
    }
  } catch (const Json::type_error&) {
    c.add(ErrorKind::InvalidField, "metrics", "invalid UTF-8 in payload");
  }
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::BadTimestamp: return "BadTimestamp";
    case ErrorKind::BadUuid: return "BadUuid";
    case ErrorKind::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorKind::MissingReservedKey: return "MissingReservedKey";
    case ErrorKind::UnknownTopLevelField: return "UnknownTopLevelField";
    case ErrorKind::InvalidField: return "InvalidField";
    case ErrorKind::CredentialMismatch: return "CredentialMismatch";
  }
  return "Unknown";
}

Json to_json(const ValidationError& error) {
  return Json{{"kind", to_string(error.kind)}, {"path", error.path}, {"message", error.message}};
}

bool Validation::has_error(ErrorKind kind, std::string_view path) const {
  if (ok()) return false;
  const auto& errs = errors();
  return std::any_of(errs.begin(), errs.end(), [&](const auto& e) { return e.kind == kind && e.path == path; });
}

bool MetricEnvelope::operator==(const MetricEnvelope& other) const {
  return timestamp == other.timestamp && agent == other.agent &&
         canonical_json(metrics) == canonical_json(other.metrics);
}

bool is_event_type_token(std::string_view s) {
  if (s.empty()) return false;
  auto word = [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); };
  if (!word(s.front())) return false;
  return std::all_of(s.begin(), s.end(), [&](char c) { return word(c) || c == '-' || c == '_' || c == '.'; });
}

Validation validate_envelope(const Json& raw) {
  Checker c;
  if (!raw.is_object()) {
    c.add(ErrorKind::InvalidField, "", "document must be a JSON object");
    return Validation{c.take()};
  }
  for (const auto& [key, _] : raw.items()) {
    if (std::find(std::begin(kTopLevel), std::end(kTopLevel), key) == std::end(kTopLevel)) {
      c.add(ErrorKind::UnknownTopLevelField, key, "unknown top-level field");
    }
  }

  MetricEnvelope e;
  if (auto it = raw.find("timestamp"); it == raw.end()) {
    c.add(ErrorKind::MissingField, "timestamp", "required field missing");
  } else if (auto t = it->is_string() ? parse_instant(it->get_ref<const std::string&>()) : std::nullopt) {
    e.timestamp = *t;
  } else {
    c.add(ErrorKind::BadTimestamp, "timestamp", "expected ISO-8601 UTC with Z suffix");
  }

  if (auto it = raw.find("agent"); it == raw.end()) {
    c.add(ErrorKind::MissingField, "agent", "required field missing");
  } else {
    check_agent(*it, e.agent, c);
  }

  if (auto it = raw.find("metrics"); it == raw.end()) {
    c.add(ErrorKind::MissingField, "metrics", "required field missing");
  } else {
    check_metrics(*it, c);
    if (c.clean()) e.metrics = *it;
  }

  if (!c.clean()) return Validation{c.take()};
  return Validation{std::move(e)};
}

Json to_json(const MetricEnvelope& e) {
  return Json{{"timestamp", format_instant(e.timestamp)},
              {"agent",
               {{"code_name", e.agent.code_name},
                {"full_name", e.agent.full_name},
                {"secret_key", e.agent.secret_key},
                {"install_guid", e.agent.install_guid}}},
              {"metrics", e.metrics}};
}

std::string canonical_bytes(const MetricEnvelope& e) { return canonical_json(to_json(e)); }

}  // namespace devmetrics
