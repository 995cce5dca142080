#pragma once

// Types shared by both ends of the collector HTTP API.

#include "devmetrics/envelope.hpp"
#include "devmetrics/store.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace devmetrics {

inline constexpr std::size_t kMaxBatchSize = 1000;

inline constexpr const char* kSecretKeyHeader = "X-Secret-Key";
inline constexpr const char* kInstallGuidHeader = "X-Install-Guid";
inline constexpr const char* kRegistrationTokenHeader = "X-Registration-Token";

struct Credentials {
  std::string install_guid;
  std::string secret_key;

  bool empty() const { return install_guid.empty() && secret_key.empty(); }
  bool operator==(const Credentials&) const = default;
};

/// Reader credentials derived from a shared seed, so the server and any
/// unifier configured with the same seed agree without exchanging secrets.
Credentials reader_credentials_from_seed(std::string_view seed);

struct Registration {
  AgentDescriptor agent;
  Instant created_at{};

  Credentials credentials() const { return {agent.install_guid, agent.secret_key}; }
};

Json to_json(const Registration& r);
Registration registration_from_json(const Json& j);

struct RejectedElement {
  std::size_t index = 0;
  std::vector<ValidationError> errors;
};

struct SubmitReceipt {
  std::size_t accepted = 0;
  std::size_t duplicates = 0;
  std::vector<RejectedElement> rejected;

  std::size_t total() const { return accepted + duplicates + rejected.size(); }
};

Json to_json(const SubmitReceipt& r);
SubmitReceipt receipt_from_json(const Json& j);

/// Inverse of to_json(StoredRecord); `generation` is not on the wire.
StoredRecord stored_record_from_json(const Json& j);

struct Health {
  std::string version;
  std::size_t partition_count = 0;
  double uptime_s = 0;
};

Json to_json(const Health& h);

// Query-string form of a scan filter (install_guid, event_type, from, to).
// Throws std::invalid_argument for unparseable instants.
ScanFilter filter_from_query(const std::optional<std::string>& install_guid,
                             const std::optional<std::string>& event_type, const std::optional<std::string>& from,
                             const std::optional<std::string>& to);

}  // namespace devmetrics
