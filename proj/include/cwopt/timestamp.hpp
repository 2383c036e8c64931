#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace cwopt {

// Local wall-clock time at one-second resolution. Series and schedules are
// interpreted in the schedule's zone; no offsets are carried.
class Timestamp {
 public:
  Timestamp() = default;
  explicit Timestamp(std::chrono::local_seconds t) : t_(t) {}

  static Timestamp from_civil(int year, unsigned month, unsigned day, int hour = 0,
                              int minute = 0, int second = 0);

  /// Accepts `YYYY-MM-DDTHH:MM[:SS]` (a space may replace `T`). Explicit
  /// offsets or `Z` are rejected: timestamps are local wall-clock.
  static Timestamp parse(std::string_view text);

  std::string iso() const;

  std::chrono::local_seconds time() const { return t_; }
  std::chrono::year_month_day date() const;
  std::chrono::year_month year_month() const;
  std::chrono::weekday weekday() const;
  /// Seconds since local midnight.
  int seconds_of_day() const;
  int minute_of_day() const { return seconds_of_day() / 60; }
  std::int64_t epoch_seconds() const { return t_.time_since_epoch().count(); }

  Timestamp plus_minutes(std::int64_t minutes) const {
    return Timestamp(t_ + std::chrono::minutes(minutes));
  }

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;

 private:
  std::chrono::local_seconds t_{};
};

/// Parses `YYYY-MM`.
std::chrono::year_month parse_year_month(std::string_view text);
std::string format_year_month(std::chrono::year_month ym);
/// First instant of the month and first instant of the next month.
Timestamp month_start(std::chrono::year_month ym);
Timestamp month_end(std::chrono::year_month ym);

}  // namespace cwopt
