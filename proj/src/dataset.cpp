#include "cwopt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cwopt/csv.hpp"
#include "cwopt/error.hpp"
#include "cwopt/units.hpp"

namespace cwopt {

namespace {

constexpr int kDefaultStages[] = {2, 4, 6, 8};

const std::vector<std::string>& expected_header() {
  static const std::vector<std::string> header = csv::split(kDatasetHeader);
  return header;
}

}  // namespace

std::string_view to_string(Source source) {
  return source == Source::Synthetic ? "synthetic" : "measured";
}

std::string_view column_name(Column column) {
  switch (column) {
    case Column::TWb: return "t_wb_f";
    case Column::QLoad: return "q_load_tons";
    case Column::TCws: return "t_cws_f";
    case Column::TCwr: return "t_cwr_f";
    case Column::NFans: return "n_fans";
    case Column::PChiller: return "p_chiller_kw";
    case Column::PFan: return "p_fan_kw";
    case Column::PPump: return "p_pump_kw";
    case Column::QRej: return "q_rej_tons";
  }
  return "";
}

const std::vector<Column>& numeric_columns() {
  static const std::vector<Column> cols = {Column::TWb,      Column::QLoad, Column::TCws,
                                           Column::TCwr,     Column::NFans, Column::PChiller,
                                           Column::PFan,     Column::PPump, Column::QRej};
  return cols;
}

std::optional<Column> column_from_name(std::string_view name) {
  for (Column c : numeric_columns())
    if (column_name(c) == name) return c;
  return std::nullopt;
}

double column_value(const SampleRecord& r, Column column) {
  switch (column) {
    case Column::TWb: return r.t_wb;
    case Column::QLoad: return r.q_load;
    case Column::TCws: return r.t_cws;
    case Column::TCwr: return r.t_cwr;
    case Column::NFans: return r.n_fans;
    case Column::PChiller: return r.p_chiller;
    case Column::PFan: return r.p_fan;
    case Column::PPump: return r.p_pump;
    case Column::QRej: return r.q_rej;
  }
  return 0.0;
}

std::vector<double> Dataset::column(Column c) const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(column_value(r, c));
  return out;
}

std::optional<std::string> check_record(const SampleRecord& r, std::span<const int> fan_stages) {
  if (fan_stages.empty()) fan_stages = kDefaultStages;
  for (Column c : numeric_columns())
    if (!std::isfinite(column_value(r, c))) return std::string(column_name(c)) + " is not finite";
  if (std::find(fan_stages.begin(), fan_stages.end(), r.n_fans) == fan_stages.end())
    return "n_fans " + std::to_string(r.n_fans) + " is not a valid fan stage";
  if (r.p_chiller < 0 || r.p_fan < 0 || r.p_pump < 0) return "negative power";
  if (r.source == Source::Synthetic) {
    double expected = r.q_load + r.p_chiller / units::kKwPerTon;
    if (std::abs(r.q_rej - expected) > kEnergyBalanceTolerance * std::max(std::abs(r.q_rej), 1.0))
      return "heat balance violated";
  }
  return std::nullopt;
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto table = csv::read(path);
  if (table.header != expected_header())
    fail(ErrorKind::Schema, path.string() + ": header must be exactly '" + std::string(kDatasetHeader) + "'");
  Dataset data;
  data.provenance = "file:" + path.string();
  data.records.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    auto where = path.string() + ":" + std::to_string(row.line);
    if (row.fields.size() != expected_header().size())
      fail(ErrorKind::Schema, where + ": expected " + std::to_string(expected_header().size()) + " fields");
    SampleRecord r;
    r.timestamp = Timestamp::parse(row.fields[0]);
    double* targets[] = {&r.t_wb, &r.q_load, &r.t_cws, &r.t_cwr};
    for (int i = 0; i < 4; ++i) {
      auto v = csv::to_double(row.fields[1 + i]);
      if (!v) fail(ErrorKind::Schema, where + ": non-numeric " + expected_header()[1 + i]);
      *targets[i] = *v;
    }
    auto fans = csv::to_int(row.fields[5]);
    if (!fans) fail(ErrorKind::Schema, where + ": non-integer n_fans");
    r.n_fans = static_cast<int>(*fans);
    double* rest[] = {&r.p_chiller, &r.p_fan, &r.p_pump, &r.q_rej};
    for (int i = 0; i < 4; ++i) {
      auto v = csv::to_double(row.fields[6 + i]);
      if (!v) fail(ErrorKind::Schema, where + ": non-numeric " + expected_header()[6 + i]);
      *rest[i] = *v;
    }
    if (row.fields[10] == "synthetic")
      r.source = Source::Synthetic;
    else if (row.fields[10] == "measured")
      r.source = Source::Measured;
    else
      fail(ErrorKind::Schema, where + ": source must be 'synthetic' or 'measured'");
    data.records.push_back(r);
  }
  return data;
}

void write_dataset(const Dataset& data, std::ostream& out) {
  out << kDatasetHeader << '\n';
  auto num = [](double v) { return csv::format_double(v); };
  for (const auto& r : data.records) {
    out << r.timestamp.iso() << ',' << num(r.t_wb) << ',' << num(r.q_load) << ',' << num(r.t_cws)
        << ',' << num(r.t_cwr) << ',' << r.n_fans << ',' << num(r.p_chiller) << ',' << num(r.p_fan)
        << ',' << num(r.p_pump) << ',' << num(r.q_rej) << ',' << to_string(r.source) << '\n';
  }
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Schema, "cannot write '" + path.string() + "'");
  write_dataset(data, out);
}

std::string fingerprint(const Dataset& data) {
  std::ostringstream buf;
  write_dataset(data, buf);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : buf.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace cwopt
