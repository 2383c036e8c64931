#include "cwopt/tariff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cwopt/csv.hpp"
#include "cwopt/error.hpp"

namespace cwopt {

using nlohmann::json;

namespace {

constexpr const char* kWeekdayNames[] = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};

std::string clock_text(int minute) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minute / 60, minute % 60);
  return buf;
}

int parse_clock(const std::string& text, const std::string& where) {
  int h = -1, m = -1;
  char tail = 0;
  if (text.size() != 5 || std::sscanf(text.c_str(), "%2d:%2d%c", &h, &m, &tail) != 2 || m < 0 || m > 59 || h < 0 ||
      h > 24 || (h == 24 && m != 0))
    fail(ErrorKind::Config, where + ": bad clock time '" + text + "' (expected HH:MM)");
  return h * 60 + m;
}

unsigned parse_weekday(const json& j, const std::string& where) {
  if (j.is_number_integer()) {
    int v = j.get<int>();
    if (v < 1 || v > 7) fail(ErrorKind::Config, where + ": weekday numbers run 1 (Mon) .. 7 (Sun)");
    return static_cast<unsigned>(v);
  }
  std::string s = j.get<std::string>();
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  for (unsigned i = 0; i < 7; ++i)
    if (s == kWeekdayNames[i]) return i + 1;
  fail(ErrorKind::Config, where + ": unknown weekday '" + s + "'");
}

bool covers(const TariffPeriod& p, unsigned month, unsigned iso_weekday, int minute) {
  if (std::find(p.months.begin(), p.months.end(), month) == p.months.end()) return false;
  if (std::find(p.weekdays.begin(), p.weekdays.end(), iso_weekday) == p.weekdays.end()) return false;
  if (p.start_minute < p.end_minute) return minute >= p.start_minute && minute < p.end_minute;
  return minute >= p.start_minute || minute < p.end_minute;
}

}  // namespace

bool TariffPeriod::contains(const Timestamp& t) const {
  return covers(*this, static_cast<unsigned>(t.date().month()), t.weekday().iso_encoding(), t.minute_of_day());
}

std::vector<std::string> TariffSchedule::labels() const {
  std::vector<std::string> out;
  for (const auto& p : periods)
    if (std::find(out.begin(), out.end(), p.label) == out.end()) out.push_back(p.label);
  return out;
}

double TariffSchedule::energy_rate(const std::string& label) const {
  auto it = energy_rates.find(label);
  if (it == energy_rates.end()) fail(ErrorKind::Config, "tariff has no energy rate for period '" + label + "'");
  return it->second;
}

double TariffSchedule::demand_rate(const std::string& label) const {
  auto it = demand_rates.find(label);
  return it == demand_rates.end() ? 0.0 : it->second;
}

void TariffSchedule::validate() const {
  if (schema_version != kTariffSchemaVersion)
    fail(ErrorKind::Config, "unsupported tariff schema_version " + std::to_string(schema_version));
  if (periods.empty()) fail(ErrorKind::Config, "tariff has no periods");
  if (!(fixed_monthly_charge >= 0.0) || !std::isfinite(fixed_monthly_charge))
    fail(ErrorKind::Config, "fixed_monthly_charge must be a non-negative number");
  for (const auto& [label, rate] : energy_rates)
    if (!(rate >= 0.0) || !std::isfinite(rate)) fail(ErrorKind::Config, "energy rate for '" + label + "' must be >= 0");
  for (const auto& [label, rate] : demand_rates)
    if (!(rate >= 0.0) || !std::isfinite(rate)) fail(ErrorKind::Config, "demand rate for '" + label + "' must be >= 0");

  std::set<unsigned> months;
  for (const auto& p : periods) {
    if (p.label.empty()) fail(ErrorKind::Config, "tariff period with empty label");
    if (!energy_rates.count(p.label)) fail(ErrorKind::Config, "period '" + p.label + "' has no energy rate");
    if (p.weekdays.empty() || p.months.empty())
      fail(ErrorKind::Config, "period '" + p.label + "' needs at least one weekday and one month");
    if (p.start_minute < 0 || p.start_minute >= 1440 || p.end_minute <= 0 || p.end_minute > 1440 ||
        p.start_minute == p.end_minute)
      fail(ErrorKind::Config, "period '" + p.label + "' has an empty or out-of-range window");
    for (unsigned m : p.months) {
      if (m < 1 || m > 12) fail(ErrorKind::Config, "period '" + p.label + "' lists month " + std::to_string(m));
      months.insert(m);
    }
  }
  for (const auto& label : energy_rates) {
    auto l = labels();
    if (std::find(l.begin(), l.end(), label.first) == l.end())
      fail(ErrorKind::Config, "energy rate for unknown period '" + label.first + "'");
  }

  for (unsigned m : months) {
    for (unsigned wd = 1; wd <= 7; ++wd) {
      for (int minute = 0; minute < 1440; ++minute) {
        int hits = 0;
        for (const auto& p : periods) hits += covers(p, m, wd, minute);
        if (hits == 1) continue;
        fail(ErrorKind::ScheduleGap, std::string(hits == 0 ? "gap" : "overlap") + " in tariff periods: month " +
                                         std::to_string(m) + ", " + kWeekdayNames[wd - 1] + " " + clock_text(minute));
      }
    }
  }
}

const std::string& period_of(const TariffSchedule& schedule, const Timestamp& t) {
  for (const auto& p : schedule.periods)
    if (p.contains(t)) return p.label;
  fail(ErrorKind::ScheduleGap, "no tariff period covers " + t.iso());
}

TariffSchedule parse_tariff(const std::string& text, const std::string& source_name) {
  TariffSchedule s;
  try {
    json j = json::parse(text);
    s.schema_version = j.at("schema_version").get<int>();
    s.name = j.at("name").get<std::string>();
    s.timezone = j.value("timezone", std::string{});
    s.fixed_monthly_charge = j.value("fixed_monthly_charge", 0.0);
    for (const auto& pj : j.at("periods")) {
      TariffPeriod p;
      p.label = pj.at("label").get<std::string>();
      std::string where = source_name + ": period '" + p.label + "'";
      for (const auto& wd : pj.at("weekdays")) p.weekdays.push_back(parse_weekday(wd, where));
      p.start_minute = parse_clock(pj.at("start").get<std::string>(), where);
      p.end_minute = parse_clock(pj.at("end").get<std::string>(), where);
      p.months = pj.at("months").get<std::vector<unsigned>>();
      s.periods.push_back(std::move(p));
    }
    s.energy_rates = j.at("energy_rates").get<std::map<std::string, double>>();
    s.demand_rates = j.value("demand_rates", std::map<std::string, double>{});
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, source_name + ": " + e.what());
  }
  s.validate();
  return s;
}

TariffSchedule load_tariff(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open tariff '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_tariff(buf.str(), path.string());
}

std::string format_tariff(const TariffSchedule& s) {
  json periods = json::array();
  for (const auto& p : s.periods) {
    json wds = json::array();
    for (unsigned wd : p.weekdays) wds.push_back(kWeekdayNames[wd - 1]);
    periods.push_back({{"label", p.label},
                       {"weekdays", wds},
                       {"start", clock_text(p.start_minute)},
                       {"end", clock_text(p.end_minute)},
                       {"months", p.months}});
  }
  json j = {{"schema_version", s.schema_version},
            {"name", s.name},
            {"timezone", s.timezone},
            {"fixed_monthly_charge", s.fixed_monthly_charge},
            {"periods", periods},
            {"energy_rates", s.energy_rates},
            {"demand_rates", s.demand_rates}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Interval series
// ---------------------------------------------------------------------------

void IntervalSeries::validate() const {
  if (interval_minutes <= 0) fail(ErrorKind::Schema, "interval_minutes must be positive");
  if (timestamps.size() != power_kw.size()) fail(ErrorKind::Schema, "timestamps and power have different lengths");
  const std::int64_t step = std::int64_t{interval_minutes} * 60;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!std::isfinite(power_kw[i]) || power_kw[i] < 0.0)
      fail(ErrorKind::Schema, "power at " + timestamps[i].iso() + " must be finite and >= 0");
    // Missing intervals are allowed here and reported by billing as gaps.
    if (i > 0) {
      std::int64_t d = timestamps[i].epoch_seconds() - timestamps[i - 1].epoch_seconds();
      if (d <= 0 || d % step != 0)
        fail(ErrorKind::Schema, "interval series off its " + std::to_string(interval_minutes) +
                                    " min grid or not increasing near " + timestamps[i].iso());
    }
  }
}

IntervalSeries read_interval_csv(const std::filesystem::path& path) {
  csv::Table t = csv::read(path);
  if (t.header != std::vector<std::string>{"timestamp", "power_kw"})
    fail(ErrorKind::Schema, path.string() + ": expected header 'timestamp,power_kw'");
  IntervalSeries s;
  for (const auto& row : t.rows) {
    if (row.fields.size() != 2)
      fail(ErrorKind::Schema, path.string() + ":" + std::to_string(row.line) + ": expected 2 fields");
    auto kw = csv::to_double(row.fields[1]);
    if (!kw) fail(ErrorKind::Schema, path.string() + ":" + std::to_string(row.line) + ": bad power '" + row.fields[1] + "'");
    try {
      s.timestamps.push_back(Timestamp::parse(row.fields[0]));
    } catch (const Error& e) {
      fail(ErrorKind::Schema, path.string() + ":" + std::to_string(row.line) + ": " + e.what());
    }
    s.power_kw.push_back(*kw);
  }
  if (s.size() >= 2) {
    auto dt = s.timestamps[1].epoch_seconds() - s.timestamps[0].epoch_seconds();
    if (dt <= 0 || dt % 60 != 0) fail(ErrorKind::Schema, path.string() + ": interval must be a positive whole minute");
    s.interval_minutes = static_cast<int>(dt / 60);
  }
  s.validate();
  return s;
}

void write_interval_csv(const IntervalSeries& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Schema, "cannot write '" + path.string() + "'");
  out << "timestamp,power_kw\n";
  for (std::size_t i = 0; i < s.size(); ++i) out << s.timestamps[i].iso() << ',' << csv::format_double(s.power_kw[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Billing
// ---------------------------------------------------------------------------

Cents to_cents(double dollars) {
  if (!std::isfinite(dollars)) fail(ErrorKind::Domain, "non-finite money amount");
  // The epsilon keeps values like 5.0000000000000003 from drifting across a
  // half-cent boundary; it is far below any representable cent difference.
  double scaled = dollars * 100.0;
  double eps = 1e-9 * std::max(1.0, std::abs(scaled));
  return static_cast<Cents>(std::floor(scaled + 0.5 + eps));
}

std::string format_dollars(Cents cents) {
  std::string sign = cents < 0 ? "-" : "";
  Cents a = cents < 0 ? -cents : cents;
  std::string whole = std::to_string(a / 100);
  std::string grouped;
  for (std::size_t i = 0; i < whole.size(); ++i) {
    if (i > 0 && (whole.size() - i) % 3 == 0) grouped += ',';
    grouped += whole[i];
  }
  char frac[4];
  std::snprintf(frac, sizeof frac, "%02lld", static_cast<long long>(a % 100));
  return sign + "$" + grouped + "." + frac;
}

double BillResult::total_kwh() const {
  double s = 0;
  for (const auto& [l, p] : periods) s += p.energy_kwh;
  return s;
}

Cents BillResult::energy_total() const {
  Cents s = 0;
  for (const auto& [l, p] : periods) s += p.energy_charge;
  return s;
}

Cents BillResult::demand_total() const {
  Cents s = 0;
  for (const auto& [l, p] : periods) s += p.demand_charge;
  return s;
}

BillResult compute_bill(const TariffSchedule& schedule, const IntervalSeries& series, std::chrono::year_month month) {
  series.validate();
  const Timestamp begin = month_start(month);
  const Timestamp end = month_end(month);
  const std::int64_t step = std::int64_t{series.interval_minutes} * 60;

  auto first = std::lower_bound(series.timestamps.begin(), series.timestamps.end(), begin);
  std::size_t idx = static_cast<std::size_t>(first - series.timestamps.begin());

  // Walk the expected interval starts and collect any missing ranges.
  std::vector<std::pair<Timestamp, std::size_t>> gaps;
  std::size_t missing = 0;
  BillResult bill;
  bill.month = month;
  for (const auto& label : schedule.labels()) bill.periods[label];
  for (Timestamp t = begin; t < end; t = Timestamp(t.time() + std::chrono::seconds(step))) {
    if (idx < series.size() && series.timestamps[idx] == t) {
      PeriodCharge& pc = bill.periods[period_of(schedule, t)];
      double kw = series.power_kw[idx];
      pc.energy_kwh += kw * series.interval_minutes / 60.0;
      pc.peak_kw = std::max(pc.peak_kw, kw);
      ++idx;
      continue;
    }
    ++missing;
    if (!gaps.empty() && gaps.back().first.epoch_seconds() + step * std::int64_t(gaps.back().second) == t.epoch_seconds())
      ++gaps.back().second;
    else
      gaps.emplace_back(t, 1);
  }
  if (missing > 0) {
    std::string msg = "series does not cover " + format_year_month(month) + ": " + std::to_string(missing) +
                      " missing intervals";
    for (std::size_t g = 0; g < gaps.size() && g < 5; ++g)
      msg += (g == 0 ? " at " : ", ") + gaps[g].first.iso() + " (+" + std::to_string(gaps[g].second) + ")";
    if (gaps.size() > 5) msg += ", ...";
    fail(ErrorKind::Coverage, msg);
  }

  bill.fixed_charge = to_cents(schedule.fixed_monthly_charge);
  bill.total = bill.fixed_charge;
  for (auto& [label, pc] : bill.periods) {
    pc.energy_charge = to_cents(pc.energy_kwh * schedule.energy_rate(label));
    pc.demand_charge = to_cents(pc.peak_kw * schedule.demand_rate(label));
    bill.total += pc.energy_charge + pc.demand_charge;
  }
  return bill;
}

SavingsReport compare_costs(const TariffSchedule& schedule, const IntervalSeries& baseline,
                            const IntervalSeries& optimized, std::chrono::year_month month) {
  if (baseline.interval_minutes != optimized.interval_minutes || baseline.timestamps != optimized.timestamps)
    fail(ErrorKind::Alignment, "baseline and optimized series do not share timestamps");
  SavingsReport r;
  r.month = month;
  r.baseline = compute_bill(schedule, baseline, month);
  r.optimized = compute_bill(schedule, optimized, month);
  r.kwh_saved = r.baseline.total_kwh() - r.optimized.total_kwh();
  r.kwh_dollar_saved = r.baseline.energy_total() - r.optimized.energy_total();
  r.demand_dollar_saved = r.baseline.demand_total() - r.optimized.demand_total();
  r.total_saved = r.baseline.total - r.optimized.total;
  r.percent_saved = r.baseline.total > 0 ? 100.0 * static_cast<double>(r.total_saved) / static_cast<double>(r.baseline.total) : 0.0;
  return r;
}

std::string format_savings_table(const std::vector<SavingsReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(9) << "Month" << std::right << std::setw(15) << "kWh Sav. ($)" << std::setw(16)
     << "kWh Sav. (kWh)" << std::setw(14) << "kW Sav. ($)" << std::setw(16) << "Total Sav. ($)" << std::setw(10)
     << "Sav. (%)" << '\n';
  for (const auto& r : reports) {
    os << std::left << std::setw(9) << format_year_month(r.month) << std::right << std::setw(15)
       << format_dollars(r.kwh_dollar_saved) << std::setw(16) << std::fixed << std::setprecision(0) << r.kwh_saved
       << std::setw(14) << format_dollars(r.demand_dollar_saved) << std::setw(16) << format_dollars(r.total_saved)
       << std::setw(10) << std::setprecision(1) << r.percent_saved << '\n';
  }
  return os.str();
}

std::string format_bill(const BillResult& bill) {
  std::ostringstream os;
  os << "bill " << format_year_month(bill.month) << '\n';
  os << std::left << std::setw(14) << "period" << std::right << std::setw(14) << "kWh" << std::setw(14) << "energy $"
     << std::setw(12) << "peak kW" << std::setw(14) << "demand $" << '\n';
  for (const auto& [label, pc] : bill.periods) {
    os << std::left << std::setw(14) << label << std::right << std::fixed << std::setprecision(2) << std::setw(14)
       << pc.energy_kwh << std::setw(14) << format_dollars(pc.energy_charge) << std::setw(12) << pc.peak_kw
       << std::setw(14) << format_dollars(pc.demand_charge) << '\n';
  }
  os << "fixed " << format_dollars(bill.fixed_charge) << '\n';
  os << "total " << format_dollars(bill.total) << '\n';
  return os.str();
}

}  // namespace cwopt
