#include "cwopt/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include <json.hpp>

#include "cwopt/error.hpp"

namespace cwopt {

using nlohmann::json;

void SweepSpec::validate() const {
  if (t_cws_values.empty()) fail(ErrorKind::Config, "sweep spec: t_cws_values is empty");
  if (n_fans_values.empty()) fail(ErrorKind::Config, "sweep spec: n_fans_values is empty");
  for (double t : t_cws_values)
    if (!(t >= 60.0 && t <= 90.0))
      fail(ErrorKind::Config, "sweep spec: setpoint " + std::to_string(t) + " °F outside [60, 90]");
  for (unsigned m : months)
    if (m < 1 || m > 12) fail(ErrorKind::Config, "sweep spec: month " + std::to_string(m) + " out of range");
  if (hour_stride == 0) fail(ErrorKind::Config, "sweep spec: hour_stride must be >= 1");
  if (!(t_cws_jitter >= 0.0) || !std::isfinite(t_cws_jitter))
    fail(ErrorKind::Config, "sweep spec: t_cws_jitter must be finite and >= 0");
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open sweep spec '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
  SweepSpec spec;
  try {
    spec.t_cws_values = j.at("t_cws_values").get<std::vector<double>>();
    spec.n_fans_values = j.at("n_fans_values").get<std::vector<int>>();
    spec.months = j.at("months").get<std::vector<unsigned>>();
    spec.hour_stride = j.value("hour_stride", 1u);
    spec.t_cws_jitter = j.value("t_cws_jitter", 0.0);
    spec.jitter_seed = j.value("jitter_seed", std::uint64_t{0});
    const auto& src = j.at("conditions");
    if (src.contains("path")) {
      std::filesystem::path p = src.at("path").get<std::string>();
      spec.conditions_path = p.is_relative() ? path.parent_path() / p : p;
    } else {
      spec.synthetic_year = src.value("synthetic_year", 2023);
      spec.synthetic_seed = src.value("seed", 1u);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

std::pair<WeatherSeries, LoadProfile> sweep_conditions(const PlantConfig& config, const SweepSpec& spec) {
  if (spec.conditions_path) return read_conditions(*spec.conditions_path);
  return synthetic_conditions_year(config, spec.synthetic_year, spec.synthetic_seed);
}

Dataset run_sweep(const PlantConfig& config, const SweepSpec& spec) {
  auto [weather, load] = sweep_conditions(config, spec);
  return run_sweep(config, spec, weather, load);
}

Dataset run_sweep(const PlantConfig& config, const SweepSpec& spec, const WeatherSeries& weather,
                  const LoadProfile& load) {
  spec.validate();
  for (int n : spec.n_fans_values)
    if (!config.is_fan_stage(n)) fail(ErrorKind::Config, "sweep spec: invalid fan stage " + std::to_string(n));
  if (weather.timestamps.size() != load.timestamps.size())
    fail(ErrorKind::Schema, "weather and load series are misaligned");

  Dataset data;
  data.provenance = "sweep: " + std::to_string(spec.t_cws_values.size()) + " setpoints x " +
                    std::to_string(spec.n_fans_values.size()) + " fan stages, stride " +
                    std::to_string(spec.hour_stride);
  if (spec.t_cws_jitter > 0.0) data.provenance += ", setpoint jitter " + std::to_string(spec.t_cws_jitter);
  const auto [grid_lo, grid_hi] = std::minmax_element(spec.t_cws_values.begin(), spec.t_cws_values.end());
  std::mt19937_64 rng(spec.jitter_seed);
  std::uniform_real_distribution<double> jitter(-spec.t_cws_jitter, spec.t_cws_jitter);
  std::size_t surviving = 0;
  for (std::size_t i = 0; i < weather.timestamps.size(); ++i) {
    const Timestamp& ts = weather.timestamps[i];
    unsigned month = static_cast<unsigned>(ts.date().month());
    if (std::find(spec.months.begin(), spec.months.end(), month) == spec.months.end()) continue;
    if (surviving++ % spec.hour_stride != 0) continue;
    for (double grid_setpoint : spec.t_cws_values) {
      for (int n_fans : spec.n_fans_values) {
        double setpoint = grid_setpoint;
        if (spec.t_cws_jitter > 0.0) setpoint = std::clamp(setpoint + jitter(rng), *grid_lo, *grid_hi);
        PlantState s;
        try {
          s = simulate_point(config, weather.t_wb[i], load.q_load[i], setpoint, n_fans);
        } catch (const Error& e) {
          fail(e.kind(), std::string(e.what()) + " [at " + ts.iso() + ", setpoint " +
                             std::to_string(setpoint) + ", fans " + std::to_string(n_fans) + "]");
        }
        data.records.push_back(to_record(ts, s));
      }
    }
  }
  return data;
}

SampleRecord to_record(const Timestamp& timestamp, const PlantState& s, Source source) {
  SampleRecord r;
  r.timestamp = timestamp;
  r.t_wb = s.t_wb;
  r.q_load = s.q_load;
  r.t_cws = s.t_cws;
  r.t_cwr = s.t_cwr;
  r.n_fans = s.n_fans;
  r.p_chiller = s.p_chiller;
  r.p_fan = s.p_fan;
  r.p_pump = s.p_pump;
  r.q_rej = s.q_rej;
  r.source = source;
  return r;
}

std::pair<WeatherSeries, LoadProfile> resample_conditions(const WeatherSeries& weather, const LoadProfile& load,
                                                          int interval_minutes) {
  if (interval_minutes < 1 || 60 % interval_minutes != 0)
    fail(ErrorKind::Config, "interval must divide an hour");
  if (weather.timestamps.size() != load.timestamps.size() || weather.timestamps.empty())
    fail(ErrorKind::Config, "weather and load must be non-empty and aligned");
  const int per_hour = 60 / interval_minutes;
  WeatherSeries w;
  LoadProfile l;
  const std::size_t n = weather.timestamps.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int steps = i + 1 < n ? per_hour : 1;
    for (int k = 0; k < steps; ++k) {
      const double f = static_cast<double>(k) / per_hour;
      const std::size_t j = std::min(i + 1, n - 1);
      Timestamp ts = weather.timestamps[i].plus_minutes(static_cast<std::int64_t>(k) * interval_minutes);
      w.timestamps.push_back(ts);
      l.timestamps.push_back(ts);
      w.t_wb.push_back(weather.t_wb[i] + f * (weather.t_wb[j] - weather.t_wb[i]));
      l.q_load.push_back(load.q_load[i] + f * (load.q_load[j] - load.q_load[i]));
    }
  }
  return {w, l};
}

Dataset simulate_measured(const PlantConfig& config, const WeatherSeries& weather, const LoadProfile& load,
                          const SettingsPolicy& policy) {
  auto states = simulate_year(config, weather, load, policy);
  Dataset data;
  data.provenance = "simulated stand-in for metered data";
  for (std::size_t i = 0; i < states.size(); ++i)
    data.records.push_back(to_record(weather.timestamps[i], states[i], Source::Measured));
  return data;
}

std::size_t CleaningReport::dropped() const {
  std::size_t total = 0;
  for (const auto& [rule, n] : drops) total += n;
  return total;
}

std::pair<Dataset, CleaningReport> clean(const Dataset& data, const CleaningRules& rules) {
  CleaningReport report;
  report.input_rows = data.size();
  for (const char* rule : {kRuleNonFinite, kRuleMinLoad, kRuleReversedDeltaT, kRuleDuplicateKey})
    report.drops[rule] = 0;

  Dataset out;
  out.schema_version = data.schema_version;
  out.provenance = data.provenance;
  std::set<std::tuple<std::int64_t, double, int>> seen;
  for (const auto& r : data.records) {
    bool finite = true;
    for (Column c : numeric_columns()) finite = finite && std::isfinite(column_value(r, c));
    if (!finite) {
      ++report.drops[kRuleNonFinite];
      continue;
    }
    if (r.q_load <= rules.min_load) {
      ++report.drops[kRuleMinLoad];
      continue;
    }
    if (r.t_cwr <= r.t_cws) {
      ++report.drops[kRuleReversedDeltaT];
      continue;
    }
    if (rules.drop_duplicate_keys && !seen.emplace(r.timestamp.epoch_seconds(), r.t_cws, r.n_fans).second) {
      ++report.drops[kRuleDuplicateKey];
      continue;
    }
    out.records.push_back(r);
  }
  report.kept_rows = out.size();
  return {std::move(out), report};
}

double CorrelationMatrix::at(const std::string& a, const std::string& b) const {
  auto ia = std::find(names.begin(), names.end(), a);
  auto ib = std::find(names.begin(), names.end(), b);
  if (ia == names.end() || ib == names.end())
    fail(ErrorKind::Schema, "correlation matrix has no column '" + (ia == names.end() ? a : b) + "'");
  return values[ia - names.begin()][ib - names.begin()];
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) fail(ErrorKind::Domain, "pearson needs equal non-empty samples");
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const Dataset& data, const std::vector<std::string>& columns,
                                     unsigned noise_seed) {
  if (data.size() < 3) fail(ErrorKind::Domain, "correlation needs at least 3 rows");
  if (columns.empty()) fail(ErrorKind::Domain, "no columns selected");
  std::vector<std::vector<double>> samples;
  for (const auto& name : columns) {
    if (name == kNoiseColumn) {
      std::mt19937_64 rng(noise_seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> noise(data.size());
      for (double& v : noise) v = u(rng);
      samples.push_back(std::move(noise));
      continue;
    }
    auto col = column_from_name(name);
    if (!col) fail(ErrorKind::Schema, "unknown or non-numeric column '" + name + "'");
    samples.push_back(data.column(*col));
  }
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    if (!std::isfinite(*lo) || !std::isfinite(*hi))
      fail(ErrorKind::FlaggedColumn, "column '" + columns[k] + "' has non-finite values");
    if (*lo == *hi) fail(ErrorKind::FlaggedColumn, "column '" + columns[k] + "' has zero variance");
  }
  CorrelationMatrix m;
  m.names = columns;
  m.values.assign(columns.size(), std::vector<double>(columns.size(), 1.0));
  for (std::size_t i = 0; i < columns.size(); ++i)
    for (std::size_t j = i + 1; j < columns.size(); ++j)
      m.values[i][j] = m.values[j][i] = pearson(samples[i], samples[j]);
  return m;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, unsigned seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) fail(ErrorKind::Domain, "split fraction must lie in (0, 1)");
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  if (n_train == 0 || n_train >= data.size())
    fail(ErrorKind::Domain, "split of " + std::to_string(data.size()) + " rows leaves an empty side");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  Dataset train, test;
  train.schema_version = test.schema_version = data.schema_version;
  train.provenance = data.provenance + " | train split seed " + std::to_string(seed);
  test.provenance = data.provenance + " | test split seed " + std::to_string(seed);
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < n_train ? train : test).records.push_back(data.records[order[k]]);
  return {std::move(train), std::move(test)};
}

}  // namespace cwopt
