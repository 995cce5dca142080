#pragma once

// Agent-side store-then-transfer buffer. Collection only ever appends
// pending events; transfer happens later, on the user's say-so, through
// submit_selected.
//
// On disk the buffer is a journal of JSON lines replayed at open:
//   {"op":"record","created_at":...,"envelope":{...}}
//   {"op":"submitted","event_id":...,"at":...}
//   {"op":"rejected","event_id":...,"errors":[...]}
// One buffer belongs to one installation; events are keyed by event_id.

#include "devmetrics/client.hpp"
#include "devmetrics/envelope.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace devmetrics::agent {

enum class EventState { pending, submitted };

std::string_view to_string(EventState s);
std::optional<EventState> parse_event_state(std::string_view s);

struct LocalEvent {
  MetricEnvelope envelope;
  EventState state = EventState::pending;
  Instant created_at{};
  std::optional<Instant> submitted_at;       // set iff submitted
  std::vector<ValidationError> last_error;   // from the latest rejection, pending only

  const std::string& event_id() const { return envelope.event_id(); }
};

Json to_json(const LocalEvent& e);

/// Conjunction of the fields that are set; the empty filter matches everything.
struct ReviewFilter {
  std::optional<std::string> keyword;      // case-insensitive substring of any string leaf of metrics
  std::optional<std::string> application;  // exact match on metrics.application
  std::optional<Instant> from;             // inclusive, over envelope.timestamp
  std::optional<Instant> to;               // exclusive
  std::optional<EventState> state;

  bool matches(const LocalEvent& e) const;
};

class BufferError : public std::runtime_error {
 public:
  enum class Code { BufferFull, Duplicate, UnknownEvent, NotPending, Io };
  BufferError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct BufferOptions {
  std::filesystem::path path;
  std::size_t max_pending = 100'000;
};

class LocalBuffer {
 public:
  explicit LocalBuffer(BufferOptions options);

  /// Persists `e` as pending. Throws BufferFull when the pending cap is
  /// reached (nothing is evicted) and Duplicate for a known event_id.
  LocalEvent record(const MetricEnvelope& e);

  bool contains(const std::string& event_id) const;
  std::optional<LocalEvent> get(const std::string& event_id) const;

  /// Matching events in recording order.
  std::vector<LocalEvent> list(const ReviewFilter& filter = {}) const;
  std::vector<std::string> pending_ids() const;
  std::size_t size() const;

  /// Sends the selected pending events (in chunks of at most 1000) and marks
  /// accepted or duplicate ones submitted; rejected ones stay pending with the
  /// error attached. If any chunk fails in transport, TransportError
  /// propagates and every selected event stays pending.
  SubmitReceipt submit_selected(const std::vector<std::string>& event_ids, Transport& transport,
                                const Credentials& auth);

 private:
  void replay();
  void journal(const Json& line);

  BufferOptions options_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::vector<std::string> order_;
  std::map<std::string, LocalEvent> events_;
  std::size_t pending_ = 0;
};

}  // namespace devmetrics::agent
