#pragma once

// Append-only, partitioned, deduplicating document store for raw envelopes.
//
// Layout under the data directory:
//
//   partitions/<YYYY-MM-DD>/<install_guid>.log   one line per record:
//       <crc32 hex> <generation> <seq> <received_at ms> <canonical envelope>\n
//   generation.floor                              written only after a failed append
//
// The logs are the only durable state; the record_id index and per-partition
// offsets are rebuilt at open. A torn final line (crash mid-write) is
// truncated away; any other damage is CorruptPartition.
//
// Every record also receives a store-wide generation number at append time.
// Cursors carry a generation window [lo, hi) in addition to the scan position,
// so a consumer resuming from an old cursor sees records appended later to
// partitions that sort before its position.

#include "devmetrics/envelope.hpp"

#include <atomic>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace devmetrics {

inline constexpr std::size_t kMaxScanLimit = 10'000;

struct PartitionKey {
  Day day{};
  std::string install_guid;

  auto operator<=>(const PartitionKey&) const = default;
  bool operator==(const PartitionKey&) const = default;
  std::string to_string() const { return format_day(day) + "/" + install_guid; }
};

struct RecordId {
  std::string install_guid;
  std::string event_id;

  auto operator<=>(const RecordId&) const = default;
  bool operator==(const RecordId&) const = default;
};

struct StoredRecord {
  MetricEnvelope envelope;
  Instant received_at{};
  PartitionKey partition;
  std::uint64_t seq = 0;
  std::uint64_t generation = 0;
  std::string document;  // canonical_bytes(envelope), as persisted

  RecordId record_id() const { return {envelope.agent.install_guid, envelope.event_id()}; }
};

/// Wire form of a record as served by the pull route.
Json to_json(const StoredRecord& record);

enum class AppendStatus { fresh, duplicate };

struct AppendResult {
  StoredRecord record;
  AppendStatus status;
};

class StoreError : public std::runtime_error {
 public:
  enum class Code { StorageFull, CorruptPartition, BadCursor, Io };
  StoreError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

class Cursor {
 public:
  static Cursor start() { return Cursor{}; }
  /// Throws StoreError(BadCursor) for tokens this store could not have issued.
  static Cursor decode(std::string_view token);
  std::string encode() const;  // empty string for start()

  bool operator==(const Cursor&) const = default;

 private:
  friend class Store;
  std::uint64_t lo_ = 0;
  std::uint64_t hi_ = 0;
  std::optional<PartitionKey> after_partition_;
  std::uint64_t after_seq_ = 0;
};

struct ScanFilter {
  std::optional<std::string> install_guid;
  std::optional<std::string> event_type;
  std::optional<Instant> from;  // inclusive, over envelope.timestamp
  std::optional<Instant> to;    // exclusive

  bool matches(const MetricEnvelope& e) const;
};

struct ScanPage {
  std::vector<StoredRecord> records;
  Cursor next;
};

struct PartitionStats {
  PartitionKey partition;
  std::uint64_t count = 0;
  std::uint64_t bytes = 0;
  Instant min_timestamp{};
  Instant max_timestamp{};

  bool operator==(const PartitionStats&) const = default;
};

struct StoreOptions {
  std::filesystem::path directory;
  std::uint64_t max_bytes = 0;  // 0 = unlimited
  bool sync_writes = false;     // fsync after every append
};

class Store {
 public:
  explicit Store(StoreOptions options);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  AppendResult append(const MetricEnvelope& envelope, Instant received_at);

  /// Pages through records in (day, install_guid, seq) order. limit in 1..10'000.
  ScanPage scan(const Cursor& from, std::size_t limit, const ScanFilter& filter = {}) const;

  /// Visits every visible record matching `filter` in scan order.
  void for_each(const ScanFilter& filter, const std::function<void(const StoredRecord&)>& visit) const;

  std::vector<PartitionStats> stats() const;
  std::size_t partition_count() const;
  std::uint64_t total_bytes() const { return total_bytes_.load(); }

 private:
  struct Entry {
    std::uint64_t generation;
    std::uint64_t offset;
    std::uint32_t length;
    Instant timestamp;
    std::string event_type;
  };
  struct Partition;
  struct IndexShard {
    std::mutex mu;
    std::map<RecordId, std::pair<PartitionKey, std::uint64_t>> ids;
  };

  Partition& partition_for(const PartitionKey& key);
  std::vector<Partition*> partitions_snapshot() const;
  void recover();
  void recover_partition(Partition& p);
  StoredRecord read_record(const Partition& p, std::uint64_t seq) const;
  StoredRecord read_entry(const Partition& p, const Entry& e, std::uint64_t seq) const;
  IndexShard& shard_for(const RecordId& id);
  std::uint64_t visible_watermark() const;
  std::uint64_t begin_generation();
  void end_generation(std::uint64_t gen, bool failed);

  // Walks records with generation in [lo, hi) strictly after `after`, in scan
  // order. When `emit` returns false the walk stops and returns the position
  // of that record; nullopt means the window was exhausted.
  std::optional<std::pair<PartitionKey, std::uint64_t>> walk(
      std::uint64_t lo, std::uint64_t hi, const std::optional<std::pair<PartitionKey, std::uint64_t>>& after,
      const ScanFilter& filter, const std::function<bool(StoredRecord&&)>& emit) const;

  StoreOptions options_;
  mutable std::shared_mutex partitions_mu_;
  std::map<PartitionKey, std::unique_ptr<Partition>> partitions_;
  static constexpr std::size_t kShards = 64;
  std::unique_ptr<IndexShard[]> shards_;

  mutable std::mutex gen_mu_;
  std::uint64_t next_gen_ = 0;
  std::set<std::uint64_t> inflight_;

  std::atomic<std::uint64_t> total_bytes_{0};
};

}  // namespace devmetrics
