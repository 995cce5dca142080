#pragma once

#include "devmetrics/envelope.hpp"
#include "devmetrics/uuid.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace devmetrics::testing {

// The example document exactly as agents send it (note the comma after
// sw_version).
inline constexpr const char* kListingDocument = R"doc({
  "timestamp": "2016-11-15T13:25:43.511Z",
  "agent": {
    "code_name": "MacOS developer's agent",
    "full_name": "Developer's activity collector",
    "secret_key": "6a81d622-5e24-4d9e-adc0-e3f7f2d93ac7",
    "install_guid": "2187b011-6b9d-4d86-8083-dd09a0d73019"
  },
  "metrics": {
    "event_id": "4a8acf6e7fbadc242de5b4f3",
    "event_type": "web-browsing",
    "event_duration": 1800,
    "user": {
          "username": "student",
          "company": "Innopolis University"
        },
    "host": {
          "host_name": "lab5_pc1",
          "ip_address": "10.90.121.49",
          "mac_address": "FF-FF-FF-FF-FF-FF",
          "os_version": "macOS 10 Sierra Version 10.12.1",
          "sw_version": "Safari Version 10.0.2 (12602.3.12.0.1)",
        },
     "sample_metric_data" : [
     	"stackoverflow.com", "google.com", "youtube.com"
     ]
  }
})doc";

inline Json listing_json() { return parse_wire_json(kListingDocument); }

inline MetricEnvelope listing_envelope() { return validate_envelope(listing_json()).envelope(); }

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("devmetrics-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string seeded_uuid(std::mt19937_64& rng) {
  return derived_uuid("seed-" + std::to_string(rng()));
}

/// Valid envelope with the given identity; payload varies with `rng`.
inline MetricEnvelope make_envelope(const std::string& install_guid, const std::string& event_id,
                                    const std::string& event_type, Instant ts, std::mt19937_64& rng) {
  MetricEnvelope e;
  e.timestamp = ts;
  e.agent = {"test-agent", "Test agent", derived_uuid("key-" + install_guid), install_guid};
  e.metrics = Json{{"event_id", event_id}, {"event_type", event_type},
                   {"event_duration", static_cast<int>(rng() % 3600)}, {"noise", std::to_string(rng())}};
  return e;
}

}  // namespace devmetrics::testing

namespace devmetrics::testing {

/// Random document tree over every JSON value kind, bounded depth.
inline Json random_tree(std::mt19937_64& rng, int depth) {
  const int kind = static_cast<int>(rng() % (depth > 0 ? 8 : 6));
  switch (kind) {
    case 0: return nullptr;
    case 1: return (rng() & 1) != 0;
    case 2: return static_cast<std::int64_t>(rng() % 2000001) - 1000000;
    case 3: return static_cast<double>(static_cast<std::int64_t>(rng() % 2000001) - 1000000) / 64.0 + 0.5;
    case 4:
    case 5: {
      static const char* words[] = {"alpha", "Beta", "stack overflow", "ünïcødé", "comma,sep", "quote\"d", "", "x"};
      return std::string(words[rng() % 8]) + std::to_string(rng() % 100);
    }
    case 6: {
      Json arr = Json::array();
      const auto n = rng() % 4;
      for (std::uint64_t i = 0; i < n; ++i) arr.push_back(random_tree(rng, depth - 1));
      return arr;
    }
    default: {
      Json obj = Json::object();
      const auto n = rng() % 4;
      for (std::uint64_t i = 0; i < n; ++i) obj["k" + std::to_string(rng() % 10)] = random_tree(rng, depth - 1);
      return obj;
    }
  }
}

}  // namespace devmetrics::testing
