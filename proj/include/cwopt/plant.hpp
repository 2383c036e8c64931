#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cwopt/timestamp.hpp"

namespace cwopt {

// ---------------------------------------------------------------------------
// Performance curves (DOE-2 style)
// ---------------------------------------------------------------------------

/// c0 + c1 x + c2 x^2 + c3 y + c4 y^2 + c5 x y
struct Biquadratic {
  std::array<double, 6> c{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  double operator()(double x, double y) const {
    return c[0] + c[1] * x + c[2] * x * x + c[3] * y + c[4] * y * y + c[5] * x * y;
  }

  /// Builds absolute coefficients from a form centered on (x0, y0):
  /// 1 + ax dx + axx dx^2 + ay dy + ayy dy^2 + axy dx dy, so f(x0, y0) = 1.
  static Biquadratic centered(double x0, double y0, double ax, double axx, double ay,
                              double ayy, double axy);
};

/// c0 + c1 x + c2 x^2
struct Quadratic {
  std::array<double, 3> c{1.0, 0.0, 0.0};
  double operator()(double x) const { return c[0] + c[1] * x + c[2] * x * x; }
};

/// c0 + c1 x + c2 x^2 + c3 x^3
struct Cubic {
  std::array<double, 4> c{0.0, 0.0, 0.0, 1.0};
  double operator()(double x) const { return c[0] + x * (c[1] + x * (c[2] + x * c[3])); }
};

struct ChillerCurves {
  Biquadratic capacity_ft;  // f(t_chws, t_cws), 1 at the reference point
  Biquadratic eir_ft;       // f(t_chws, t_cws), 1 at the reference point
  Quadratic eir_fplr;       // f(part-load ratio), 1 at full load
};

// Approach model: approach = floor + (design_approach - floor)
//   * (range / design_range)^range_exponent
//   * airflow_fraction^(-airflow_exponent)
//   * exp(-wetbulb_coefficient * (t_wb - design_wet_bulb))
struct TowerCurve {
  double range_exponent = 0.9;
  double airflow_exponent = 0.7;
  double wetbulb_coefficient = 0.015;
};

// ---------------------------------------------------------------------------
// Plant description and operating point
// ---------------------------------------------------------------------------

struct PlantConfig {
  int schema_version = 1;
  int n_chillers = 2;
  double chiller_rated_capacity = 1350.0;  // tons, per chiller
  double chiller_rated_cop = 6.0;
  int n_tower_cells = 8;
  double cell_rated_fan_power = 30.0;  // kW per cell at full speed
  double cell_rated_flow = 1012.5;     // gpm per cell
  double pump_power = 110.0;           // kW, constant while any chiller runs
  double cw_flow = 8100.0;             // gpm total condenser water flow
  double chw_supply_temp = 44.0;       // °F
  double design_approach = 7.0;        // °F
  double design_range = 10.0;          // °F
  double design_wet_bulb = 78.0;       // °F
  double standby_power = 0.0;          // kW drawn when the loop is off
  double staging_threshold = 0.55;     // single-chiller limit as a fraction of one chiller
  ChillerCurves chiller;
  Cubic fan_curve;
  TowerCurve tower;

  /// Throws ErrorKind::Config naming the first violated invariant.
  void validate() const;

  /// Allowed fan stages: 2, 4, ..., n_tower_cells.
  std::vector<int> fan_stages() const;
  bool is_fan_stage(int n_fans) const;

  double total_capacity() const { return n_chillers * chiller_rated_capacity; }
  /// Heat rejection that produces design_range across the tower at cw_flow.
  double design_rejection() const;

  /// Synthetic reference plant: two 1350-ton chillers, 8-cell tower.
  /// All curve coefficients are invented and documented as such.
  static PlantConfig synthetic_default();
};

PlantConfig load_plant_config(const std::filesystem::path& path);
PlantConfig parse_plant_config(const std::string& text, const std::string& source_name);
std::string format_plant_config(const PlantConfig& config);
void save_plant_config(const PlantConfig& config, const std::filesystem::path& path);

struct PlantState {
  double t_wb = 0.0;       // °F
  double q_load = 0.0;     // tons
  double t_cws = 0.0;      // °F achieved condenser water supply
  double t_cwr = 0.0;      // °F
  int n_fans = 0;
  double fan_speed = 0.0;  // fraction of full speed
  double p_chiller = 0.0;  // kW
  double p_fan = 0.0;      // kW
  double p_pump = 0.0;     // kW
  double q_rej = 0.0;      // tons
  int n_chillers_on = 0;

  double total_power() const { return p_chiller + p_fan + p_pump; }
};

// ---------------------------------------------------------------------------
// Component models
// ---------------------------------------------------------------------------

inline constexpr double kMinCondenserTempF = 55.0;
inline constexpr double kMaxCondenserTempF = 95.0;

/// Chillers running for a load under the staging rule.
int active_chillers(const PlantConfig& config, double q_load);

/// Electric power of one chiller carrying `unit_load` tons.
double chiller_unit_power(const PlantConfig& config, double unit_load, double t_cws, double t_chws);

/// Total compressor power with the load split evenly over the staged chillers.
double chiller_power(const PlantConfig& config, double q_load, double t_cws, double t_chws);

/// q_load + p_chiller / 3.517
double heat_rejection(double q_load, double p_chiller);

/// t_cws + q_rej * 12000 / (500 * cw_flow)
double cw_return_temp(double q_rej, double cw_flow, double t_cws);

double tower_approach(const PlantConfig& config, double t_wb, double q_rej, double airflow_fraction);

/// Coldest water the tower can make with `n_fans` cells at full speed.
double tower_leaving_temp(const PlantConfig& config, double t_wb, double q_rej, int n_fans);

double fan_power(const PlantConfig& config, int n_fans, double speed_fraction);

/// Speed at which `n_fans` cells deliver exactly `t_cws_target`; 1 when the
/// target is at or below what full speed achieves.
double fan_speed_for_target(const PlantConfig& config, double t_wb, double q_rej, int n_fans,
                            double t_cws_target);

PlantState simulate_point(const PlantConfig& config, double t_wb, double q_load,
                          double t_cws_setpoint, int n_fans);

// ---------------------------------------------------------------------------
// Annual simulation
// ---------------------------------------------------------------------------

struct WeatherSeries {
  std::vector<Timestamp> timestamps;
  std::vector<double> t_wb;
};

struct LoadProfile {
  std::vector<Timestamp> timestamps;
  std::vector<double> q_load;
};

struct Settings {
  double t_cws_setpoint = 75.0;
  int n_fans = 8;
};

using SettingsPolicy = std::function<Settings(const Timestamp&, double t_wb, double q_load)>;

SettingsPolicy constant_policy(Settings settings);
/// Wet-bulb reset: setpoint = t_wb + offset clamped to [lo, hi]; fan stage
/// grows with the load fraction of the plant.
SettingsPolicy wetbulb_reset_policy(const PlantConfig& config, double offset = 7.0,
                                    double lo = 65.0, double hi = 85.0);

std::vector<PlantState> simulate_year(const PlantConfig& config, const WeatherSeries& weather,
                                      const LoadProfile& load, const SettingsPolicy& policy);

/// Reads the `timestamp,t_wb_f,q_load_tons` conditions CSV.
std::pair<WeatherSeries, LoadProfile> read_conditions(const std::filesystem::path& path);
void write_conditions(const WeatherSeries& weather, const LoadProfile& load,
                      const std::filesystem::path& path);

/// Deterministic hourly wet-bulb and load year with a humid-continental
/// seasonal shape. Synthetic; not a typical-meteorological-year file.
std::pair<WeatherSeries, LoadProfile> synthetic_conditions_year(const PlantConfig& config, int year,
                                                                unsigned seed);

}  // namespace cwopt
