#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cwopt/timestamp.hpp"

namespace cwopt {

inline constexpr int kTariffSchemaVersion = 1;

// A period applies on the listed ISO weekdays (1 = Monday .. 7 = Sunday) and
// months, over the half-open local-time window [start, end) in minutes after
// midnight. end < start wraps past midnight; the weekday and month filters
// always refer to the calendar day of the instant being classified.
struct TariffPeriod {
  std::string label;
  std::vector<unsigned> weekdays;
  int start_minute = 0;
  int end_minute = 1440;
  std::vector<unsigned> months;

  bool contains(const Timestamp& t) const;
};

struct TariffSchedule {
  int schema_version = kTariffSchemaVersion;
  std::string name;
  std::string timezone;  // IANA name, informational; timestamps are local
  double fixed_monthly_charge = 0.0;
  std::vector<TariffPeriod> periods;
  std::map<std::string, double> energy_rates;  // $/kWh
  std::map<std::string, double> demand_rates;  // $/kW-month

  /// Rates non-negative, every label rated, and every minute of every
  /// weekday of each covered month falls in exactly one period.
  /// Throws ErrorKind::Config or ErrorKind::ScheduleGap.
  void validate() const;

  std::vector<std::string> labels() const;
  double energy_rate(const std::string& label) const;
  double demand_rate(const std::string& label) const;
};

TariffSchedule parse_tariff(const std::string& json_text, const std::string& source_name = "tariff");
TariffSchedule load_tariff(const std::filesystem::path& path);
std::string format_tariff(const TariffSchedule& schedule);

/// Throws ErrorKind::ScheduleGap naming the timestamp when no period covers it.
const std::string& period_of(const TariffSchedule& schedule, const Timestamp& t);

struct IntervalSeries {
  int interval_minutes = 15;
  std::vector<Timestamp> timestamps;  // interval start
  std::vector<double> power_kw;

  std::size_t size() const { return timestamps.size(); }
  /// Strictly increasing on the interval grid, finite non-negative power.
  /// Gaps are legal here; compute_bill reports them.
  void validate() const;
};

/// `timestamp,power_kw`; the interval is taken from the first two rows.
IntervalSeries read_interval_csv(const std::filesystem::path& path);
void write_interval_csv(const IntervalSeries& series, const std::filesystem::path& path);

using Cents = std::int64_t;

/// Half-up rounding of a dollar amount to cents.
Cents to_cents(double dollars);
std::string format_dollars(Cents cents);

struct PeriodCharge {
  double energy_kwh = 0.0;
  double peak_kw = 0.0;
  Cents energy_charge = 0;
  Cents demand_charge = 0;
};

struct BillResult {
  std::chrono::year_month month;
  std::map<std::string, PeriodCharge> periods;
  Cents fixed_charge = 0;
  Cents total = 0;

  double total_kwh() const;
  Cents energy_total() const;
  Cents demand_total() const;
};

/// Bills the intervals starting inside `month`. Each line item is rounded
/// half-up to the cent; total is the sum of rounded line items.
BillResult compute_bill(const TariffSchedule& schedule, const IntervalSeries& series,
                        std::chrono::year_month month);

struct SavingsReport {
  std::chrono::year_month month;
  BillResult baseline;
  BillResult optimized;
  double kwh_saved = 0.0;
  Cents kwh_dollar_saved = 0;
  Cents demand_dollar_saved = 0;
  Cents total_saved = 0;
  double percent_saved = 0.0;
};

/// Throws ErrorKind::Alignment unless both series share timestamps and interval.
SavingsReport compare_costs(const TariffSchedule& schedule, const IntervalSeries& baseline,
                            const IntervalSeries& optimized, std::chrono::year_month month);

/// Fixed-width text table with the columns
/// Month | kWh Sav. ($) | kWh Sav. (kWh) | kW Sav. ($) | Total Sav. ($) | Sav. (%)
std::string format_savings_table(const std::vector<SavingsReport>& reports);
std::string format_bill(const BillResult& bill);

}  // namespace cwopt
