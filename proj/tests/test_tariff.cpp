#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cwopt/error.hpp"
#include "cwopt/tariff.hpp"
#include "tariff_fixtures.hpp"

using namespace cwopt;
using namespace std::chrono;

namespace {

constexpr year_month kFeb = year{2023} / February;

TariffSchedule sched(const char* json) {
  TariffSchedule s = parse_tariff(json);
  s.validate();
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Service;
}

}  // namespace

TEST_CASE("hand-computed bills") {
  for (const auto& fx : fixtures::bill_fixtures()) {
    CAPTURE(fx.name);
    BillResult b = compute_bill(sched(fx.schedule), fx.series, kFeb);
    CHECK(b.total == fx.expected_total);
    CHECK(b.total == b.fixed_charge + b.energy_total() + b.demand_total());
  }
  BillResult b = compute_bill(sched(fixtures::kFlat), fixtures::bill_fixtures()[0].series, kFeb);
  CHECK(format_dollars(b.total) == "$1,005.00");
  CHECK(b.periods.at("all").energy_kwh == doctest::Approx(50.0));
  CHECK(b.periods.at("all").peak_kw == 100.0);
}

TEST_CASE("period lookup") {
  TariffSchedule flat = sched(fixtures::kFlat);
  CHECK(period_of(flat, Timestamp::from_civil(2023, 6, 3, 4, 5)) == "all");

  TariffSchedule tou = sched(fixtures::kTou);
  CHECK(period_of(tou, Timestamp::from_civil(2023, 2, 4, 12)) == "off");  // Saturday
  CHECK(period_of(tou, Timestamp::from_civil(2023, 2, 6, 12)) == "peak");  // Monday
  CHECK(period_of(tou, Timestamp::from_civil(2023, 2, 6, 17, 59, 59)) == "peak");
  CHECK(period_of(tou, Timestamp::from_civil(2023, 2, 6, 18)) == "off");
  CHECK(period_of(tou, Timestamp::from_civil(2023, 2, 6, 7, 59)) == "off");
  CHECK(kind_of([&] { period_of(tou, Timestamp::from_civil(2023, 3, 1, 12)); }) == ErrorKind::ScheduleGap);
}

TEST_CASE("schedule validation catches gaps and overlaps") {
  const char* gap = R"({"schema_version": 1, "name": "gap",
    "periods": [{"label": "day", "weekdays": [1,2,3,4,5,6,7], "start": "06:00", "end": "22:00", "months": [2]}],
    "energy_rates": {"day": 0.1}})";
  const char* overlap = R"({"schema_version": 1, "name": "overlap",
    "periods": [{"label": "a", "weekdays": [1,2,3,4,5,6,7], "start": "00:00", "end": "24:00", "months": [2]},
                {"label": "b", "weekdays": [1], "start": "10:00", "end": "11:00", "months": [2]}],
    "energy_rates": {"a": 0.1, "b": 0.2}})";
  const char* unrated = R"({"schema_version": 1, "name": "unrated",
    "periods": [{"label": "a", "weekdays": [1,2,3,4,5,6,7], "start": "00:00", "end": "24:00", "months": [2]}],
    "energy_rates": {}})";
  const char* negative = R"({"schema_version": 1, "name": "neg",
    "periods": [{"label": "a", "weekdays": [1,2,3,4,5,6,7], "start": "00:00", "end": "24:00", "months": [2]}],
    "energy_rates": {"a": -0.1}})";
  const char* empty_window = R"({"schema_version": 1, "name": "empty",
    "periods": [{"label": "a", "weekdays": [1], "start": "10:00", "end": "10:00", "months": [2]}],
    "energy_rates": {"a": 0.1}})";
  CHECK(kind_of([&] { sched(gap); }) == ErrorKind::ScheduleGap);
  CHECK(kind_of([&] { sched(overlap); }) == ErrorKind::ScheduleGap);
  CHECK(kind_of([&] { sched(unrated); }) == ErrorKind::Config);
  CHECK(kind_of([&] { sched(negative); }) == ErrorKind::Config);
  CHECK(kind_of([&] { sched(empty_window); }) == ErrorKind::Config);
  CHECK(kind_of([&] { parse_tariff("{not json"); }) == ErrorKind::Config);
}

TEST_CASE("every minute of a validated month maps to one period") {
  TariffSchedule tou = sched(fixtures::kTou);
  const Timestamp end = month_end(kFeb);
  std::map<std::string, int> minutes;
  for (Timestamp t = month_start(kFeb); t < end; t = t.plus_minutes(1)) ++minutes[period_of(tou, t)];
  CHECK(minutes["peak"] == 200 * 60);
  CHECK(minutes["off"] == 472 * 60);
}

TEST_CASE("coverage errors list the gaps") {
  IntervalSeries s = fixtures::february(15, [](const Timestamp&) { return 1.0; });
  s.timestamps.erase(s.timestamps.begin() + 100, s.timestamps.begin() + 104);
  s.power_kw.erase(s.power_kw.begin() + 100, s.power_kw.begin() + 104);
  try {
    compute_bill(sched(fixtures::kFlat), s, kFeb);
    FAIL("gap accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Coverage);
    CHECK(std::string(e.what()).find("2023-02-02T01:00:00 (+4)") != std::string::npos);
  }
  IntervalSeries off = fixtures::february(15, [](const Timestamp&) { return 1.0; });
  off.timestamps[5] = off.timestamps[5].plus_minutes(1);
  CHECK(kind_of([&] { off.validate(); }) == ErrorKind::Schema);
  IntervalSeries tail = fixtures::february(15, [](const Timestamp&) { return 1.0; });
  tail.timestamps.resize(tail.size() - 8);
  tail.power_kw.resize(tail.power_kw.size() - 8);
  try {
    compute_bill(sched(fixtures::kFlat), tail, kFeb);
    FAIL("short series accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Coverage);
    CHECK(std::string(e.what()).find("8 missing") != std::string::npos);
    CHECK(std::string(e.what()).find("2023-02-28T22:00:00") != std::string::npos);
  }
}

TEST_CASE("bill linearity") {
  TariffSchedule tou = sched(fixtures::kTou);
  auto f = [](const Timestamp& t) { return 50.0 + (t.minute_of_day() % 97); };
  BillResult one = compute_bill(tou, fixtures::february(15, f), kFeb);
  BillResult two = compute_bill(tou, fixtures::february(15, [&](const Timestamp& t) { return 2.0 * f(t); }), kFeb);
  for (const auto& [label, pc] : one.periods) {
    CHECK(two.periods.at(label).energy_kwh == doctest::Approx(2.0 * pc.energy_kwh));
    CHECK(two.periods.at(label).peak_kw == doctest::Approx(2.0 * pc.peak_kw));
    CHECK(std::abs(two.periods.at(label).demand_charge - 2 * pc.demand_charge) <= 1);
  }
}

TEST_CASE("compare costs") {
  TariffSchedule tou = sched(fixtures::kTou);
  auto f = [](const Timestamp& t) { return fixtures::weekday_peak(t) ? 300.0 : 120.0; };
  IntervalSeries base = fixtures::february(15, f);
  SavingsReport same = compare_costs(tou, base, base, kFeb);
  CHECK(same.kwh_saved == 0.0);
  CHECK(same.total_saved == 0);
  CHECK(same.kwh_dollar_saved == 0);
  CHECK(same.demand_dollar_saved == 0);
  CHECK(same.percent_saved == 0.0);

  IntervalSeries less = fixtures::february(15, [&](const Timestamp& t) { return f(t) - 10.0; });
  SavingsReport r = compare_costs(tou, base, less, kFeb);
  CHECK(r.kwh_saved == doctest::Approx(10.0 * 672));
  // 10 kW less in each period: 10 * 15 + 10 * 5
  CHECK(r.demand_dollar_saved == 20000);
  // 2000 kWh * 0.20 + 4720 kWh * 0.05
  CHECK(r.kwh_dollar_saved == 63600);
  CHECK(r.total_saved == 83600);

  IntervalSeries hourly = fixtures::february(60, f);
  CHECK(kind_of([&] { compare_costs(tou, base, hourly, kFeb); }) == ErrorKind::Alignment);

  std::string table = format_savings_table({r});
  for (const char* col : {"kWh Sav. ($)", "kWh Sav. (kWh)", "kW Sav. ($)", "Total Sav. ($)", "Sav. (%)", "2023-02"})
    CHECK(table.find(col) != std::string::npos);
}

TEST_CASE("money") {
  CHECK(to_cents(1005.0) == 100500);
  CHECK(to_cents(0.005) == 1);
  CHECK(to_cents(0.004999) == 0);
  CHECK(to_cents(2.675) == 268);
  CHECK(format_dollars(123456789) == "$1,234,567.89");
  CHECK(format_dollars(-150) == "-$1.50");
  CHECK(format_dollars(7) == "$0.07");
}

TEST_CASE("interval csv round trip") {
  IntervalSeries s = fixtures::february(15, [](const Timestamp& t) { return t.minute_of_day() / 7.0; });
  auto path = std::filesystem::temp_directory_path() / "cwopt_series_test.csv";
  write_interval_csv(s, path);
  IntervalSeries back = read_interval_csv(path);
  CHECK(back.interval_minutes == 15);
  CHECK(back.timestamps == s.timestamps);
  CHECK(back.power_kw == s.power_kw);
  std::filesystem::remove(path);
}

TEST_CASE("shipped synthetic tariff validates") {
  TariffSchedule t = load_tariff(std::filesystem::path(CWOPT_DATA_DIR) / "tariff_synthetic.json");
  CHECK_NOTHROW(t.validate());
  CHECK(t.name.find("ynthetic") != std::string::npos);
  TariffSchedule again = parse_tariff(format_tariff(t));
  CHECK(format_tariff(again) == format_tariff(t));
}
