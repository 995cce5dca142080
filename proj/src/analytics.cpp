#include "devmetrics/analytics.hpp"

#include <map>

namespace devmetrics {

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::day: return "day";
    case Dimension::event_type: return "event_type";
    case Dimension::application: return "application";
    case Dimension::host: return "host";
  }
  return "day";
}

std::optional<Dimension> parse_dimension(std::string_view s) {
  for (auto d : {Dimension::day, Dimension::event_type, Dimension::application, Dimension::host}) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

Json to_json(const AggregateSeries& s) {
  Json buckets = Json::array();
  for (const auto& b : s.buckets) {
    buckets.push_back({{"label", b.label}, {"count", b.count}, {"total_duration_s", b.total_duration_s}});
  }
  return Json{{"dimension", to_string(s.dimension)}, {"buckets", buckets}};
}

std::optional<std::string> dimension_label(const MetricEnvelope& e, Dimension d) {
  const Json* node = nullptr;
  switch (d) {
    case Dimension::day: return format_day(day_of(e.timestamp));
    case Dimension::event_type: return e.event_type();
    case Dimension::application: {
      auto it = e.metrics.find("application");
      if (it != e.metrics.end()) node = &*it;
      break;
    }
    case Dimension::host: {
      auto host = e.metrics.find("host");
      if (host != e.metrics.end() && host->is_object()) {
        auto it = host->find("host_name");
        if (it != host->end()) node = &*it;
      }
      break;
    }
  }
  if (node && node->is_string()) return node->get<std::string>();
  return std::nullopt;
}

double event_duration_s(const MetricEnvelope& e) {
  auto it = e.metrics.find("event_duration");
  return it != e.metrics.end() && it->is_number() ? it->get<double>() : 0.0;
}

namespace {

void check_range(const TimeRange& r) {
  if (r.from >= r.to) throw AnalyticsError("range must satisfy from < to");
  const auto days = (day_of(r.to - std::chrono::milliseconds{1}) - day_of(r.from)).count() + 1;
  if (days > kMaxRangeDays) throw AnalyticsError("range spans more than 3660 days");
}

}  // namespace

AggregateSeries events_over_time(const Store& store, const TimeRange& range, ScanFilter filter) {
  check_range(range);
  filter.from = range.from;
  filter.to = range.to;

  const Day first = day_of(range.from);
  const Day last = day_of(range.to - std::chrono::milliseconds{1});
  AggregateSeries series{Dimension::day, {}};
  for (Day d = first; d <= last; d += std::chrono::days{1}) series.buckets.push_back({format_day(d), 0, 0});

  store.for_each(filter, [&](const StoredRecord& r) {
    auto& b = series.buckets[static_cast<std::size_t>((day_of(r.envelope.timestamp) - first).count())];
    ++b.count;
    b.total_duration_s += event_duration_s(r.envelope);
  });
  return series;
}

AggregateSeries breakdown(const Store& store, Dimension dimension, const std::optional<TimeRange>& range) {
  ScanFilter filter;
  if (range) {
    check_range(*range);
    filter.from = range->from;
    filter.to = range->to;
  }
  std::map<std::string, Bucket> groups;
  store.for_each(filter, [&](const StoredRecord& r) {
    const std::string label = dimension_label(r.envelope, dimension).value_or(kNoneLabel);
    auto& b = groups[label];
    b.label = label;
    ++b.count;
    b.total_duration_s += event_duration_s(r.envelope);
  });
  AggregateSeries series{dimension, {}};
  for (auto& [_, b] : groups) series.buckets.push_back(std::move(b));
  return series;
}

}  // namespace devmetrics
