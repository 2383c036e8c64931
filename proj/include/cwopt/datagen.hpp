#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cwopt/dataset.hpp"
#include "cwopt/plant.hpp"

namespace cwopt {

struct SweepSpec {
  std::vector<double> t_cws_values;  // setpoints, °F, each in [60, 90]
  std::vector<int> n_fans_values;    // subset of the plant's fan stages
  std::vector<unsigned> months;      // calendar months kept (1..12)
  unsigned hour_stride = 1;          // keep every k-th surviving hour
  // Each record's setpoint is drawn uniformly within +-t_cws_jitter °F of its
  // grid value, clamped to the grid's extent. 0 keeps the exact grid.
  double t_cws_jitter = 0.0;
  std::uint64_t jitter_seed = 0;

  // Conditions source: a conditions CSV, or the synthetic year generator.
  std::optional<std::filesystem::path> conditions_path;
  int synthetic_year = 2023;
  unsigned synthetic_seed = 1;

  void validate() const;
};

/// JSON sweep spec; relative conditions paths resolve against the spec file.
SweepSpec load_sweep_spec(const std::filesystem::path& path);

/// Weather and load the spec refers to.
std::pair<WeatherSeries, LoadProfile> sweep_conditions(const PlantConfig& config, const SweepSpec& spec);

/// One record per surviving hour x setpoint x fan stage, time-major.
Dataset run_sweep(const PlantConfig& config, const SweepSpec& spec);
Dataset run_sweep(const PlantConfig& config, const SweepSpec& spec, const WeatherSeries& weather,
                  const LoadProfile& load);

SampleRecord to_record(const Timestamp& timestamp, const PlantState& state, Source source = Source::Synthetic);

/// Linear interpolation of hourly conditions onto a finer cadence. Output
/// starts at the first hour and ends at the last.
std::pair<WeatherSeries, LoadProfile> resample_conditions(const WeatherSeries& weather, const LoadProfile& load,
                                                          int interval_minutes);

/// Stand-in for metered data: simulate_year under `policy`, tagged measured.
Dataset simulate_measured(const PlantConfig& config, const WeatherSeries& weather, const LoadProfile& load,
                          const SettingsPolicy& policy);

struct CleaningRules {
  double min_load = 50.0;  // tons; at or below this the plant is treated as off
  bool drop_duplicate_keys = false;  // opt-in: unreachable setpoints legitimately repeat t_cws
};

inline constexpr const char* kRuleNonFinite = "non-finite";
inline constexpr const char* kRuleMinLoad = "min-load";
inline constexpr const char* kRuleReversedDeltaT = "reversed-dT";
inline constexpr const char* kRuleDuplicateKey = "duplicate-key";

struct CleaningReport {
  std::size_t input_rows = 0;
  std::size_t kept_rows = 0;
  std::map<std::string, std::size_t> drops;  // rule -> rows dropped

  std::size_t dropped() const;
};

std::pair<Dataset, CleaningReport> clean(const Dataset& data, const CleaningRules& rules = {});

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;

  double at(const std::string& a, const std::string& b) const;
};

/// Pearson coefficient of two equal-length samples.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pseudo-column name recognized by correlation_matrix: seeded uniform noise,
/// the nuisance baseline for dominant-variable checks.
inline constexpr const char* kNoiseColumn = "noise";

CorrelationMatrix correlation_matrix(const Dataset& data, const std::vector<std::string>& columns,
                                     unsigned noise_seed = 7);

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, unsigned seed);

}  // namespace cwopt
