#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace devmetrics {

/// Wall-clock instant with millisecond resolution, always UTC.
using Instant = std::chrono::sys_time<std::chrono::milliseconds>;
using Day = std::chrono::sys_days;

// Accepts "YYYY-MM-DDTHH:MM:SS[.fraction]Z". Digits past milliseconds are
// truncated. Anything else (offsets, missing Z, out-of-range fields) fails.
std::optional<Instant> parse_instant(std::string_view text);

// parse_instant, or a bare "YYYY-MM-DD" meaning midnight UTC of that day.
std::optional<Instant> parse_instant_or_date(std::string_view text);

std::optional<Day> parse_day(std::string_view text);

std::string format_instant(Instant t);  // 2016-11-15T13:25:43.511Z
std::string format_day(Day d);          // 2016-11-15

inline Day day_of(Instant t) { return std::chrono::floor<std::chrono::days>(t); }

inline Instant now_instant() {
  return std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

}  // namespace devmetrics
