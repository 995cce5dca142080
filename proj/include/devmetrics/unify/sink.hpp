#pragma once

#include "devmetrics/unify/mapping.hpp"

#include <filesystem>
#include <memory>
#include <mutex>

struct sqlite3;

namespace devmetrics::unify {

class SinkError : public std::runtime_error {
 public:
  enum class Code { SinkUnavailable, SchemaConflict, UnknownTable };
  SinkError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct UnifyCheckpoint {
  std::string mapping;  // the mapping's table name
  std::string cursor;   // encoded Cursor; empty at the start
  std::uint64_t rows_emitted = 0;
  std::uint64_t quarantined = 0;
  std::uint64_t skipped = 0;

  bool operator==(const UnifyCheckpoint&) const = default;
};

struct QuarantineEntry {
  std::string install_guid;
  std::string event_id;
  std::string path;
  std::string reason;
  std::string document;  // canonical envelope bytes

  bool operator==(const QuarantineEntry&) const = default;
};

/// Relational destination for unified rows. Implementations must accept
/// concurrent writes to distinct tables.
class Sink {
 public:
  virtual ~Sink() = default;

  /// Idempotent for an identical mapping; SchemaConflict if the table exists
  /// with a different one.
  virtual void create_table(const MappingSpec& m) = 0;
  /// Upserts keyed by (install_guid, event_id); the last write wins.
  virtual void upsert_rows(const std::string& table, const std::vector<Row>& rows) = 0;
  virtual Table read_table(const std::string& table) const = 0;
  virtual std::vector<QuarantineEntry> read_quarantine(const std::string& table) const = 0;
  virtual std::vector<std::string> tables() const = 0;

  virtual std::optional<UnifyCheckpoint> load_checkpoint(const std::string& mapping) const = 0;
  /// Rows, quarantine entries and the checkpoint land together or not at all.
  virtual void commit(const std::string& table, const std::vector<Row>& rows,
                      const std::vector<QuarantineEntry>& quarantine, const UnifyCheckpoint& checkpoint) = 0;
};

/// Single-file embedded sink. Tables are plain SQLite tables keyed by
/// (install_guid, event_id); mappings live in _tables, checkpoints in
/// _checkpoints, rejected documents in <table>__quarantine.
class SqliteSink : public Sink {
 public:
  explicit SqliteSink(const std::filesystem::path& file);
  ~SqliteSink() override;
  SqliteSink(const SqliteSink&) = delete;
  SqliteSink& operator=(const SqliteSink&) = delete;

  void create_table(const MappingSpec& m) override;
  void upsert_rows(const std::string& table, const std::vector<Row>& rows) override;
  Table read_table(const std::string& table) const override;
  std::vector<QuarantineEntry> read_quarantine(const std::string& table) const override;
  std::vector<std::string> tables() const override;
  std::optional<UnifyCheckpoint> load_checkpoint(const std::string& mapping) const override;
  void commit(const std::string& table, const std::vector<Row>& rows, const std::vector<QuarantineEntry>& quarantine,
              const UnifyCheckpoint& checkpoint) override;

 private:
  void exec(const std::string& sql) const;
  std::optional<MappingSpec> mapping_of(const std::string& table) const;
  void write_rows(const MappingSpec& m, const std::vector<Row>& rows);
  void write_quarantine(const std::string& table, const std::vector<QuarantineEntry>& entries);
  void write_checkpoint(const UnifyCheckpoint& c);

  sqlite3* db_ = nullptr;
  mutable std::recursive_mutex mu_;
};

}  // namespace devmetrics::unify
