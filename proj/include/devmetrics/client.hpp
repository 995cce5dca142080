#pragma once

#include "devmetrics/protocol.hpp"

#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace httplib {
class Client;
}

namespace devmetrics {

/// Network failure or unexpected server reply. Always safe to retry.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The server refused the credentials (HTTP 401).
class UnauthorizedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The server understood the request and refused it (HTTP 4xx other than 401).
class RequestError : public std::runtime_error {
 public:
  RequestError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Push channel as seen by an agent.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual SubmitReceipt submit(const Credentials& auth, const std::vector<Json>& batch) = 0;
};

class CollectorClient : public Transport {
 public:
  explicit CollectorClient(const std::string& base_url,
                           std::chrono::milliseconds timeout = std::chrono::seconds{30});
  ~CollectorClient() override;

  Registration register_agent(const std::string& code_name, const std::string& full_name,
                              const std::string& registration_token = {});
  SubmitReceipt submit(const Credentials& auth, const std::vector<Json>& batch) override;
  ScanPage pull(const Credentials& reader, const Cursor& from, std::size_t limit, const ScanFilter& filter = {});
  /// Raw pull response body, for byte-level comparisons.
  std::string pull_raw(const Credentials& reader, const std::string& cursor_token, std::size_t limit,
                       const ScanFilter& filter = {});
  Health health();
  Json over_time(const Credentials& reader, const std::string& from, const std::string& to,
                 const std::string& event_type = {});
  Json breakdown(const Credentials& reader, const std::string& dimension, const std::string& from = {},
                 const std::string& to = {});

 private:
  Json get_json(const std::string& path, const Credentials* auth);
  std::unique_ptr<httplib::Client> http_;
};

std::string query_string(const std::vector<std::pair<std::string, std::string>>& params);

}  // namespace devmetrics
