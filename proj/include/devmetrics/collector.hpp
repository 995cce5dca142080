#pragma once

// Transport-independent collector: registration, push (submit_events) and
// pull (pull_events) over one Store. http_server.hpp puts it on the wire.

#include "devmetrics/protocol.hpp"
#include "devmetrics/store.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>

namespace devmetrics {

class CollectorError : public std::runtime_error {
 public:
  enum class Code { Unauthorized, BatchTooLarge, EmptyBatch };
  CollectorError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct CollectorOptions {
  StoreOptions store;
  // Empty: a random seed is created once and kept in <data dir>/reader.seed.
  std::string reader_seed;
};

class Collector {
 public:
  explicit Collector(CollectorOptions options);

  Registration register_agent(const std::string& code_name, const std::string& full_name);

  /// Provisions an installation whose credentials were issued elsewhere
  /// (migrated agents, fixtures). Not reachable over HTTP.
  Registration enroll(const AgentDescriptor& agent);

  /// Validates and appends each element independently. Throws Unauthorized
  /// (nothing stored) for unknown credentials, BatchTooLarge / EmptyBatch for
  /// batch sizes outside 1..1000.
  SubmitReceipt submit_events(const Credentials& auth, const std::vector<Json>& batch, Instant received_at);
  SubmitReceipt submit_events(const Credentials& auth, const std::vector<Json>& batch) {
    return submit_events(auth, batch, now_instant());
  }

  ScanPage pull_events(const Credentials& reader, const Cursor& from, std::size_t limit,
                       const ScanFilter& filter = {}) const;

  Health health() const;

  bool is_agent(const Credentials& c) const;
  bool is_reader(const Credentials& c) const;
  const Credentials& reader_credentials() const { return reader_; }

  const Store& store() const { return store_; }
  Store& store() { return store_; }

 private:
  void load_registrations();
  Registration persist(Registration r);

  std::filesystem::path registrations_path_;
  Store store_;
  Credentials reader_;
  std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();

  mutable std::shared_mutex registrations_mu_;
  std::map<std::string, std::string> secrets_by_guid_;
};

/// Comparison whose duration does not depend on where the inputs differ.
bool constant_time_equal(std::string_view a, std::string_view b);

}  // namespace devmetrics
