#pragma once

// Dashboard aggregations computed directly over the raw store, so charts work
// before any unifier mapping exists. All day boundaries are UTC.

#include "devmetrics/store.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace devmetrics {

inline constexpr int kMaxRangeDays = 3660;
inline constexpr const char* kNoneLabel = "(none)";

enum class Dimension { day, event_type, application, host };

std::string_view to_string(Dimension d);
std::optional<Dimension> parse_dimension(std::string_view s);

struct Bucket {
  std::string label;
  std::uint64_t count = 0;
  double total_duration_s = 0;

  bool operator==(const Bucket&) const = default;
};

struct AggregateSeries {
  Dimension dimension = Dimension::day;
  std::vector<Bucket> buckets;  // sorted by label

  bool operator==(const AggregateSeries&) const = default;
};

Json to_json(const AggregateSeries& s);

class AnalyticsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;  // BadRange
};

/// Half-open [from, to) over envelope timestamps.
struct TimeRange {
  Instant from{};
  Instant to{};
};

/// One bucket per UTC day intersecting the range, zero-filled. `filter` may
/// narrow by install_guid / event_type; its time bounds are replaced by `range`.
AggregateSeries events_over_time(const Store& store, const TimeRange& range, ScanFilter filter = {});

/// Groups by the dimension's reserved path; documents without a string value
/// there land in "(none)". No range means the whole store.
AggregateSeries breakdown(const Store& store, Dimension dimension, const std::optional<TimeRange>& range = {});

/// Reserved path per dimension: metrics.event_type, metrics.application,
/// metrics.host.host_name. Returns nullopt when absent or not a string.
std::optional<std::string> dimension_label(const MetricEnvelope& e, Dimension d);

/// metrics.event_duration when it is a number, else 0.
double event_duration_s(const MetricEnvelope& e);

}  // namespace devmetrics
