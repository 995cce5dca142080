#pragma once

#include "devmetrics/client.hpp"
#include "devmetrics/unify/sink.hpp"

#include <atomic>
#include <chrono>

namespace devmetrics::unify {

/// Where raw documents come from: the store in-process or the collector's
/// pull route.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual ScanPage pull(const Cursor& from, std::size_t limit, const ScanFilter& filter) = 0;
};

class StoreSource : public RecordSource {
 public:
  explicit StoreSource(const Store& store) : store_(store) {}
  ScanPage pull(const Cursor& from, std::size_t limit, const ScanFilter& filter) override {
    return store_.scan(from, limit, filter);
  }

 private:
  const Store& store_;
};

class HttpSource : public RecordSource {
 public:
  HttpSource(CollectorClient& client, Credentials reader) : client_(client), reader_(std::move(reader)) {}
  ScanPage pull(const Cursor& from, std::size_t limit, const ScanFilter& filter) override {
    return client_.pull(reader_, from, limit, filter);
  }

 private:
  CollectorClient& client_;
  Credentials reader_;
};

struct UnifyOptions {
  std::size_t batch_limit = 1000;  // records per pull and per sink commit
  std::size_t max_batches = 0;     // 0: until the source is drained
};

/// Resumes from the sink's checkpoint for `m` (or the start), pulls
/// documents of m.source_event_type, projects them and commits each batch's
/// rows, quarantine entries and advanced checkpoint together. Returns the
/// last committed checkpoint. If the sink fails the checkpoint is not
/// advanced past the failed batch and the error propagates.
UnifyCheckpoint run_unify(const MappingSpec& m, RecordSource& source, Sink& sink, UnifyOptions options = {});

}  // namespace devmetrics::unify
