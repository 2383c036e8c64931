#include "cwopt/plant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "cwopt/csv.hpp"
#include "cwopt/error.hpp"
#include "cwopt/units.hpp"

namespace cwopt {

namespace {

constexpr int kMaxFixedPointIterations = 100;
constexpr double kFixedPointTolerance = 0.01;  // °F

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::Config, "plant config: " + what);
}

}  // namespace

Biquadratic Biquadratic::centered(double x0, double y0, double ax, double axx, double ay,
                                  double ayy, double axy) {
  // Expand 1 + ax dx + axx dx^2 + ay dy + ayy dy^2 + axy dx dy with dx = x - x0.
  Biquadratic b;
  b.c[0] = 1.0 - ax * x0 + axx * x0 * x0 - ay * y0 + ayy * y0 * y0 + axy * x0 * y0;
  b.c[1] = ax - 2.0 * axx * x0 - axy * y0;
  b.c[2] = axx;
  b.c[3] = ay - 2.0 * ayy * y0 - axy * x0;
  b.c[4] = ayy;
  b.c[5] = axy;
  return b;
}

// ---------------------------------------------------------------------------
// PlantConfig
// ---------------------------------------------------------------------------

PlantConfig PlantConfig::synthetic_default() {
  PlantConfig c;
  // Reference point for the chiller curves is (44 °F chilled water, 85 °F
  // condenser water). Capacity falls slowly with condenser temperature;
  // input power per ton rises ~1.8 %/°F.
  c.chiller.capacity_ft = Biquadratic::centered(44.0, 85.0, 0.015, 0.0, -0.0015, 0.0, 0.0);
  c.chiller.eir_ft = Biquadratic::centered(44.0, 85.0, -0.012, 0.0, 0.018, 0.0002, 0.0);
  c.chiller.eir_fplr.c = {0.20, 0.25, 0.55};
  c.fan_curve.c = {0.08, 0.0, 0.07, 0.85};
  return c;
}

double PlantConfig::design_rejection() const {
  return design_range * units::kWaterSideFactor * cw_flow / units::kBtuPerTonHour;
}

std::vector<int> PlantConfig::fan_stages() const {
  std::vector<int> stages;
  for (int n = 2; n <= n_tower_cells; n += 2) stages.push_back(n);
  return stages;
}

bool PlantConfig::is_fan_stage(int n_fans) const {
  return n_fans >= 2 && n_fans <= n_tower_cells && n_fans % 2 == 0;
}

void PlantConfig::validate() const {
  require(schema_version == 1, "unsupported schema_version " + std::to_string(schema_version));
  require(n_chillers >= 1, "n_chillers must be >= 1");
  require(chiller_rated_capacity > 0, "chiller_rated_capacity must be positive");
  require(chiller_rated_cop > 1 && chiller_rated_cop < 10, "chiller_rated_cop must lie in (1, 10)");
  require(n_tower_cells >= 2 && n_tower_cells % 2 == 0, "n_tower_cells must be even and >= 2");
  require(cell_rated_fan_power > 0, "cell_rated_fan_power must be positive");
  require(cell_rated_flow > 0, "cell_rated_flow must be positive");
  require(pump_power > 0, "pump_power must be positive");
  require(cw_flow > 0, "cw_flow must be positive");
  require(design_approach > units::kMinApproachF, "design_approach must exceed the 2 °F floor");
  require(design_range > 0, "design_range must be positive");
  require(standby_power >= 0, "standby_power must be non-negative");
  require(staging_threshold > 0 && staging_threshold <= 1, "staging_threshold must lie in (0, 1]");
  require(std::abs(fan_curve(1.0) - 1.0) < 1e-9, "fan_curve must equal 1 at full speed");
  require(tower.airflow_exponent > 0 && tower.range_exponent > 0,
          "tower exponents must be positive");
}

namespace {

using KeyValues = std::map<std::string, std::string>;

std::string trim(std::string s) {
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double as_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  auto v = csv::to_double(it->second);
  if (!v) fail(ErrorKind::Config, "plant config: '" + key + "' is not a number");
  return *v;
}

int as_int(const KeyValues& kv, const std::string& key, int fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  auto v = csv::to_int(it->second);
  if (!v) fail(ErrorKind::Config, "plant config: '" + key + "' is not an integer");
  return static_cast<int>(*v);
}

template <std::size_t N>
void as_array(const KeyValues& kv, const std::string& key, std::array<double, N>& out) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  auto fields = csv::split(it->second);
  if (fields.size() != N)
    fail(ErrorKind::Config, "plant config: '" + key + "' needs " + std::to_string(N) + " coefficients");
  for (std::size_t i = 0; i < N; ++i) {
    auto v = csv::to_double(fields[i]);
    if (!v) fail(ErrorKind::Config, "plant config: '" + key + "' has a non-numeric coefficient");
    out[i] = *v;
  }
}

template <std::size_t N>
std::string join(const std::array<double, N>& values) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) {
    if (i) out += ", ";
    out += csv::format_double(values[i]);
  }
  return out;
}

}  // namespace

PlantConfig parse_plant_config(const std::string& text, const std::string& source_name) {
  static const char* const kKeys[] = {
      "schema_version", "n_chillers", "chiller_rated_capacity", "chiller_rated_cop",
      "n_tower_cells", "cell_rated_fan_power", "cell_rated_flow", "pump_power", "cw_flow",
      "chw_supply_temp", "design_approach", "design_range", "design_wet_bulb", "standby_power",
      "staging_threshold", "capacity_ft", "eir_ft", "eir_fplr", "fan_curve",
      "tower_range_exponent", "tower_airflow_exponent", "tower_wetbulb_coefficient"};
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Config, source_name + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
      fail(ErrorKind::Config, source_name + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    kv[key] = trim(line.substr(eq + 1));
  }
  if (!kv.count("schema_version"))
    fail(ErrorKind::Config, source_name + ": missing schema_version");

  PlantConfig c = PlantConfig::synthetic_default();
  c.schema_version = as_int(kv, "schema_version", c.schema_version);
  c.n_chillers = as_int(kv, "n_chillers", c.n_chillers);
  c.chiller_rated_capacity = as_double(kv, "chiller_rated_capacity", c.chiller_rated_capacity);
  c.chiller_rated_cop = as_double(kv, "chiller_rated_cop", c.chiller_rated_cop);
  c.n_tower_cells = as_int(kv, "n_tower_cells", c.n_tower_cells);
  c.cell_rated_fan_power = as_double(kv, "cell_rated_fan_power", c.cell_rated_fan_power);
  c.cell_rated_flow = as_double(kv, "cell_rated_flow", c.cell_rated_flow);
  c.pump_power = as_double(kv, "pump_power", c.pump_power);
  c.cw_flow = as_double(kv, "cw_flow", c.cw_flow);
  c.chw_supply_temp = as_double(kv, "chw_supply_temp", c.chw_supply_temp);
  c.design_approach = as_double(kv, "design_approach", c.design_approach);
  c.design_range = as_double(kv, "design_range", c.design_range);
  c.design_wet_bulb = as_double(kv, "design_wet_bulb", c.design_wet_bulb);
  c.standby_power = as_double(kv, "standby_power", c.standby_power);
  c.staging_threshold = as_double(kv, "staging_threshold", c.staging_threshold);
  as_array(kv, "capacity_ft", c.chiller.capacity_ft.c);
  as_array(kv, "eir_ft", c.chiller.eir_ft.c);
  as_array(kv, "eir_fplr", c.chiller.eir_fplr.c);
  as_array(kv, "fan_curve", c.fan_curve.c);
  c.tower.range_exponent = as_double(kv, "tower_range_exponent", c.tower.range_exponent);
  c.tower.airflow_exponent = as_double(kv, "tower_airflow_exponent", c.tower.airflow_exponent);
  c.tower.wetbulb_coefficient = as_double(kv, "tower_wetbulb_coefficient", c.tower.wetbulb_coefficient);
  c.validate();
  return c;
}

PlantConfig load_plant_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open plant config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_plant_config(buf.str(), path.string());
}

std::string format_plant_config(const PlantConfig& c) {
  std::ostringstream out;
  auto num = [](double v) { return csv::format_double(v); };
  out << "schema_version = " << c.schema_version << '\n'
      << "n_chillers = " << c.n_chillers << '\n'
      << "chiller_rated_capacity = " << num(c.chiller_rated_capacity) << '\n'
      << "chiller_rated_cop = " << num(c.chiller_rated_cop) << '\n'
      << "n_tower_cells = " << c.n_tower_cells << '\n'
      << "cell_rated_fan_power = " << num(c.cell_rated_fan_power) << '\n'
      << "cell_rated_flow = " << num(c.cell_rated_flow) << '\n'
      << "pump_power = " << num(c.pump_power) << '\n'
      << "cw_flow = " << num(c.cw_flow) << '\n'
      << "chw_supply_temp = " << num(c.chw_supply_temp) << '\n'
      << "design_approach = " << num(c.design_approach) << '\n'
      << "design_range = " << num(c.design_range) << '\n'
      << "design_wet_bulb = " << num(c.design_wet_bulb) << '\n'
      << "standby_power = " << num(c.standby_power) << '\n'
      << "staging_threshold = " << num(c.staging_threshold) << '\n'
      << "capacity_ft = " << join(c.chiller.capacity_ft.c) << '\n'
      << "eir_ft = " << join(c.chiller.eir_ft.c) << '\n'
      << "eir_fplr = " << join(c.chiller.eir_fplr.c) << '\n'
      << "fan_curve = " << join(c.fan_curve.c) << '\n'
      << "tower_range_exponent = " << num(c.tower.range_exponent) << '\n'
      << "tower_airflow_exponent = " << num(c.tower.airflow_exponent) << '\n'
      << "tower_wetbulb_coefficient = " << num(c.tower.wetbulb_coefficient) << '\n';
  return out.str();
}

void save_plant_config(const PlantConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Config, "cannot write plant config '" + path.string() + "'");
  out << format_plant_config(config);
}

// ---------------------------------------------------------------------------
// Component models
// ---------------------------------------------------------------------------

int active_chillers(const PlantConfig& config, double q_load) {
  if (q_load <= 0.0) return 0;
  if (q_load <= config.staging_threshold * config.chiller_rated_capacity) return 1;
  return config.n_chillers;
}

double chiller_unit_power(const PlantConfig& config, double unit_load, double t_cws, double t_chws) {
  if (unit_load < 0.0) fail(ErrorKind::Domain, "chiller load must be non-negative");
  if (!(t_cws >= kMinCondenserTempF && t_cws <= kMaxCondenserTempF))
    fail(ErrorKind::Domain, "condenser water temperature " + std::to_string(t_cws) +
                                " °F outside [55, 95]");
  if (unit_load == 0.0) return 0.0;
  const auto& curves = config.chiller;
  double capacity = config.chiller_rated_capacity * curves.capacity_ft(t_chws, t_cws);
  double plr = unit_load / capacity;
  double full_load_kw = units::tons_to_kw(capacity) / config.chiller_rated_cop;
  return full_load_kw * curves.eir_ft(t_chws, t_cws) * curves.eir_fplr(plr);
}

double chiller_power(const PlantConfig& config, double q_load, double t_cws, double t_chws) {
  if (q_load < 0.0) fail(ErrorKind::Domain, "cooling load must be non-negative");
  if (q_load > config.total_capacity())
    fail(ErrorKind::CapacityExceeded, "load " + std::to_string(q_load) + " tons exceeds plant capacity " +
                                          std::to_string(config.total_capacity()));
  int n_on = active_chillers(config, q_load);
  if (n_on == 0) {
    // Still range-check the temperature so callers get the same contract.
    return chiller_unit_power(config, 0.0, t_cws, t_chws);
  }
  return n_on * chiller_unit_power(config, q_load / n_on, t_cws, t_chws);
}

double heat_rejection(double q_load, double p_chiller) {
  if (q_load < 0.0 || p_chiller < 0.0) fail(ErrorKind::Domain, "heat_rejection inputs must be non-negative");
  return q_load + p_chiller / units::kKwPerTon;
}

double cw_return_temp(double q_rej, double cw_flow, double t_cws) {
  if (!(cw_flow > 0.0)) fail(ErrorKind::Domain, "condenser water flow must be positive");
  return t_cws + q_rej * units::kBtuPerTonHour / (units::kWaterSideFactor * cw_flow);
}

namespace {

// Approach above the floor at full airflow (airflow_fraction = 1).
double approach_scale(const PlantConfig& config, double t_wb, double q_rej) {
  double range = std::max(q_rej, 0.0) * units::kBtuPerTonHour / (units::kWaterSideFactor * config.cw_flow);
  return (config.design_approach - units::kMinApproachF) *
         std::pow(range / config.design_range, config.tower.range_exponent) *
         std::exp(-config.tower.wetbulb_coefficient * (t_wb - config.design_wet_bulb));
}

}  // namespace

double tower_approach(const PlantConfig& config, double t_wb, double q_rej, double airflow_fraction) {
  if (!(airflow_fraction > 0.0)) fail(ErrorKind::Domain, "airflow fraction must be positive");
  return units::kMinApproachF +
         approach_scale(config, t_wb, q_rej) * std::pow(airflow_fraction, -config.tower.airflow_exponent);
}

double tower_leaving_temp(const PlantConfig& config, double t_wb, double q_rej, int n_fans) {
  if (!config.is_fan_stage(n_fans)) fail(ErrorKind::Domain, "invalid fan stage " + std::to_string(n_fans));
  if (q_rej < 0.0) fail(ErrorKind::Domain, "heat rejection must be non-negative");
  double airflow = static_cast<double>(n_fans) / config.n_tower_cells;
  return t_wb + tower_approach(config, t_wb, q_rej, airflow);
}

double fan_power(const PlantConfig& config, int n_fans, double speed_fraction) {
  if (!config.is_fan_stage(n_fans)) fail(ErrorKind::Domain, "invalid fan stage " + std::to_string(n_fans));
  if (!(speed_fraction > 0.0 && speed_fraction <= 1.0))
    fail(ErrorKind::Domain, "fan speed fraction must lie in (0, 1]");
  return n_fans * config.cell_rated_fan_power * config.fan_curve(speed_fraction);
}

double fan_speed_for_target(const PlantConfig& config, double t_wb, double q_rej, int n_fans,
                            double t_cws_target) {
  double full = tower_leaving_temp(config, t_wb, q_rej, n_fans);
  if (t_cws_target <= full) return 1.0;
  // The approach model inverts in closed form for the airflow fraction.
  double scale = approach_scale(config, t_wb, q_rej);
  double excess = t_cws_target - t_wb - units::kMinApproachF;
  double airflow = std::pow(scale / excess, 1.0 / config.tower.airflow_exponent);
  double speed = airflow * config.n_tower_cells / n_fans;
  return std::clamp(speed, 1e-9, 1.0);
}

PlantState simulate_point(const PlantConfig& config, double t_wb, double q_load, double t_cws_setpoint,
                          int n_fans) {
  if (!config.is_fan_stage(n_fans)) fail(ErrorKind::Domain, "invalid fan stage " + std::to_string(n_fans));
  if (!std::isfinite(t_wb) || !std::isfinite(q_load) || !std::isfinite(t_cws_setpoint))
    fail(ErrorKind::Domain, "non-finite operating inputs");
  if (q_load < 0.0) fail(ErrorKind::Domain, "cooling load must be non-negative");
  if (q_load > config.total_capacity())
    fail(ErrorKind::CapacityExceeded, "load " + std::to_string(q_load) + " tons exceeds plant capacity " +
                                          std::to_string(config.total_capacity()));

  PlantState s;
  s.t_wb = t_wb;
  s.q_load = q_load;
  s.n_fans = n_fans;

  if (q_load == 0.0) {
    s.t_cws = t_cws_setpoint;
    s.t_cwr = t_cws_setpoint;
    s.p_pump = config.standby_power;
    return s;
  }

  const double t_chws = config.chw_supply_temp;
  double t = std::max(t_cws_setpoint, t_wb + units::kMinApproachF);
  double residual = 0.0;
  bool converged = false;
  for (int it = 0; it < kMaxFixedPointIterations; ++it) {
    double p = chiller_power(config, q_load, t, t_chws);
    double q_rej = heat_rejection(q_load, p);
    double next = std::max(t_cws_setpoint, tower_leaving_temp(config, t_wb, q_rej, n_fans));
    residual = next - t;
    t = next;
    if (std::abs(residual) < kFixedPointTolerance) {
      converged = true;
      break;
    }
  }
  if (!converged)
    fail(ErrorKind::Solver, "condenser loop did not converge; last residual " + std::to_string(residual) + " °F");

  s.t_cws = t;
  s.n_chillers_on = active_chillers(config, q_load);
  s.p_chiller = chiller_power(config, q_load, t, t_chws);
  s.q_rej = heat_rejection(q_load, s.p_chiller);
  s.t_cwr = cw_return_temp(s.q_rej, config.cw_flow, t);
  s.fan_speed = fan_speed_for_target(config, t_wb, s.q_rej, n_fans, t);
  s.p_fan = fan_power(config, n_fans, s.fan_speed);
  s.p_pump = config.pump_power;
  return s;
}

// ---------------------------------------------------------------------------
// Annual simulation
// ---------------------------------------------------------------------------

SettingsPolicy constant_policy(Settings settings) {
  return [settings](const Timestamp&, double, double) { return settings; };
}

SettingsPolicy wetbulb_reset_policy(const PlantConfig& config, double offset, double lo, double hi) {
  auto stages = config.fan_stages();
  double capacity = config.total_capacity();
  return [=](const Timestamp&, double t_wb, double q_load) {
    Settings s;
    s.t_cws_setpoint = std::clamp(t_wb + offset, lo, hi);
    double fraction = std::clamp(q_load / capacity, 0.0, 1.0);
    auto idx = static_cast<std::size_t>(std::ceil(fraction * stages.size()));
    s.n_fans = stages[std::clamp<std::size_t>(idx, 1, stages.size()) - 1];
    return s;
  };
}

std::vector<PlantState> simulate_year(const PlantConfig& config, const WeatherSeries& weather,
                                      const LoadProfile& load, const SettingsPolicy& policy) {
  if (weather.timestamps.size() != weather.t_wb.size() || load.timestamps.size() != load.q_load.size())
    fail(ErrorKind::Schema, "series columns have different lengths");
  if (weather.timestamps.size() != load.timestamps.size())
    fail(ErrorKind::Schema, "weather has " + std::to_string(weather.timestamps.size()) +
                                " rows but load profile has " + std::to_string(load.timestamps.size()));
  std::vector<PlantState> out;
  out.reserve(weather.timestamps.size());
  for (std::size_t i = 0; i < weather.timestamps.size(); ++i) {
    if (weather.timestamps[i] != load.timestamps[i])
      fail(ErrorKind::Schema, "weather and load timestamps differ at row " + std::to_string(i));
    if (i > 0 && weather.timestamps[i] <= weather.timestamps[i - 1])
      fail(ErrorKind::Schema, "timestamps not increasing at row " + std::to_string(i));
    Settings s = policy(weather.timestamps[i], weather.t_wb[i], load.q_load[i]);
    out.push_back(simulate_point(config, weather.t_wb[i], load.q_load[i], s.t_cws_setpoint, s.n_fans));
  }
  return out;
}

std::pair<WeatherSeries, LoadProfile> read_conditions(const std::filesystem::path& path) {
  auto table = csv::read(path);
  if (table.header != std::vector<std::string>{"timestamp", "t_wb_f", "q_load_tons"})
    fail(ErrorKind::Schema, path.string() + ": header must be 'timestamp,t_wb_f,q_load_tons'");
  WeatherSeries weather;
  LoadProfile load;
  for (const auto& row : table.rows) {
    auto where = path.string() + ":" + std::to_string(row.line);
    if (row.fields.size() != 3) fail(ErrorKind::Schema, where + ": expected 3 fields");
    auto ts = Timestamp::parse(row.fields[0]);
    auto wb = csv::to_double(row.fields[1]);
    auto q = csv::to_double(row.fields[2]);
    if (!wb || !q) fail(ErrorKind::Schema, where + ": non-numeric value");
    weather.timestamps.push_back(ts);
    weather.t_wb.push_back(*wb);
    load.timestamps.push_back(ts);
    load.q_load.push_back(*q);
  }
  return {std::move(weather), std::move(load)};
}

void write_conditions(const WeatherSeries& weather, const LoadProfile& load,
                      const std::filesystem::path& path) {
  if (weather.timestamps.size() != load.timestamps.size())
    fail(ErrorKind::Schema, "weather and load series are misaligned");
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Schema, "cannot write '" + path.string() + "'");
  out << "timestamp,t_wb_f,q_load_tons\n";
  for (std::size_t i = 0; i < weather.timestamps.size(); ++i)
    out << weather.timestamps[i].iso() << ',' << csv::format_double(weather.t_wb[i]) << ','
        << csv::format_double(load.q_load[i]) << '\n';
}

std::pair<WeatherSeries, LoadProfile> synthetic_conditions_year(const PlantConfig& config, int year,
                                                                unsigned seed) {
  namespace chr = std::chrono;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> daily_noise(0.0, 3.0);
  std::normal_distribution<double> hourly_noise(0.0, 0.6);

  WeatherSeries weather;
  LoadProfile load;
  auto start = Timestamp::from_civil(year, 1, 1);
  auto end = Timestamp::from_civil(year + 1, 1, 1);
  double anomaly = 0.0;
  const double max_load = 0.97 * config.total_capacity();
  int day_index = -1;
  for (Timestamp t = start; t < end; t = t.plus_minutes(60)) {
    int hour = t.seconds_of_day() / 3600;
    if (hour == 0) {
      ++day_index;
      anomaly = 0.7 * anomaly + daily_noise(rng);
    }
    double seasonal = 45.0 + 23.0 * std::sin(2.0 * std::numbers::pi * (day_index - 105) / 365.0);
    double diurnal = 3.0 * std::cos(2.0 * std::numbers::pi * (hour - 15) / 24.0);
    double t_wb = std::min(seasonal + diurnal + anomaly + hourly_noise(rng), 80.0);

    unsigned wd = t.weekday().c_encoding();
    bool occupied = wd >= 1 && wd <= 5 && hour >= 7 && hour < 19;
    double envelope = 90.0 * std::max(0.0, t_wb - 50.0);
    double q = occupied ? envelope + (t_wb > 45.0 ? 300.0 : 0.0) : 0.35 * envelope;
    q = std::clamp(q, 0.0, max_load);

    weather.timestamps.push_back(t);
    weather.t_wb.push_back(t_wb);
    load.timestamps.push_back(t);
    load.q_load.push_back(q);
  }
  return {std::move(weather), std::move(load)};
}

}  // namespace cwopt
