#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cwopt/bundle.hpp"
#include "cwopt/dataset.hpp"
#include "cwopt/mipso.hpp"
#include "cwopt/plant.hpp"
#include "cwopt/tariff.hpp"

namespace cwopt {

// ---------------------------------------------------------------------------
// Look-up table
// ---------------------------------------------------------------------------

struct TableGrids {
  std::vector<double> q_load;  // tons, strictly increasing
  std::vector<double> t_wb;    // °F, strictly increasing

  /// 200..2700 tons step 100 by 60..80 °F step 1.
  static TableGrids standard();
  static TableGrids linspace(double q_lo, double q_hi, std::size_t nq, double wb_lo, double wb_hi,
                             std::size_t nwb);
  void validate() const;
};

struct TableCell {
  double t_cws_opt = 0.0;
  int n_fans_opt = 0;
  double predicted_power_kw = 0.0;
  bool feasible = true;
  int n_chillers_on = 0;
};

struct TableContext {
  int n_chillers = 0;
  double chw_supply_temp = 0.0;
  std::string bundle_fingerprint;
  double t_cws_lo = 0.0;
  double t_cws_hi = 0.0;
  std::vector<int> fan_strata;
};

struct LookupTable {
  TableGrids grids;
  std::vector<std::vector<TableCell>> cells;  // [q_load index][t_wb index]
  TableContext context;
  std::vector<std::string> warnings;

  const TableCell& at(std::size_t iq, std::size_t iwb) const { return cells.at(iq).at(iwb); }
};

/// One optimize() per cell with the same swarm configuration.
LookupTable build_table(const SurrogateBundle& bundle, const PlantConfig& plant, const TableGrids& grids,
                        const SwarmConfig& swarm);

void write_table_csv(const LookupTable& table, const std::filesystem::path& path);
std::string table_to_json(const LookupTable& table);
LookupTable table_from_json(const std::string& text);
void save_table_json(const LookupTable& table, const std::filesystem::path& path);
LookupTable load_table_json(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Real-time advice
// ---------------------------------------------------------------------------

struct Recommendation {
  double q_load = 0.0;
  double t_wb = 0.0;
  std::optional<Timestamp> timestamp;

  double t_cws_opt = 0.0;
  int n_fans_opt = 0;
  bool feasible = true;
  LoopPrediction prediction;  // components at the recommended settings
  double predicted_power_kw = 0.0;
  std::optional<double> predicted_cost_rate;  // $/h, with a tariff

  struct Delta {
    double power_kw = 0.0;  // recommended minus current; never positive
    std::optional<double> cost_rate;
  };
  std::optional<Baseline> current;
  std::optional<Delta> baseline_delta;

  std::string bundle_fingerprint;
  std::string computed_at;
  std::vector<std::string> warnings;
};

struct AdviseRequest {
  double q_load = 0.0;
  double t_wb = 0.0;
  std::optional<Baseline> current;
  std::optional<Timestamp> timestamp;  // needed for a cost rate
};

/// The current settings are kept unless the optimizer finds strictly lower
/// predicted power, so the recommendation never predicts more than current.
Recommendation advise(const SurrogateBundle& bundle, const PlantConfig& plant, const AdviseRequest& request,
                      const SwarmConfig& swarm, const TariffSchedule* tariff = nullptr,
                      std::optional<std::string> computed_at = std::nullopt);

struct WhatIf {
  LoopPrediction prediction;
  bool feasible = true;
  std::optional<double> cost_rate;
  std::vector<std::string> warnings;
};

WhatIf what_if(const SurrogateBundle& bundle, const PlantConfig& plant, double q_load, double t_wb, double t_cws,
               int n_fans, const TariffSchedule* tariff = nullptr, std::optional<Timestamp> at = std::nullopt);

std::string recommendation_to_json(const Recommendation& rec);
std::string what_if_to_json(const WhatIf& w, double t_cws, int n_fans);

// ---------------------------------------------------------------------------
// Savings
// ---------------------------------------------------------------------------

struct IntervalDetail {
  Timestamp timestamp;
  double q_load = 0.0;
  double t_wb = 0.0;
  double baseline_t_cws = 0.0;
  int baseline_n_fans = 0;
  double baseline_kw = 0.0;
  double optimized_t_cws = 0.0;
  int optimized_n_fans = 0;
  double optimized_kw = 0.0;
};

struct SavingsResult {
  std::vector<SavingsReport> reports;
  std::vector<IntervalDetail> intervals;
};

std::string savings_to_json(const SavingsResult& result);
void write_interval_details_csv(const SavingsResult& result, const std::filesystem::path& path);

/// Model-vs-model savings: each interval is predicted at the measured
/// settings and at the advised settings with the same bundle, and both series
/// are billed. `months` empty means every month present in the data.
SavingsResult savings_pipeline(const SurrogateBundle& bundle, const PlantConfig& plant, const Dataset& measured,
                               const TariffSchedule& tariff, const std::vector<std::chrono::year_month>& months,
                               const SwarmConfig& swarm, int interval_minutes = 15);

// ---------------------------------------------------------------------------
// Measured data ingestion
// ---------------------------------------------------------------------------

// Where one dataset column comes from: a source column with a unit, a
// constant, or (q_rej only) the energy balance of the mapped load and power.
struct ColumnSource {
  std::string column;
  std::string unit;
  std::optional<double> value;
  bool derive = false;
};

struct ColumnMapping {
  std::string timestamp_column = "timestamp";
  std::map<Column, ColumnSource> columns;

  /// Maps the native dataset header onto itself.
  static ColumnMapping identity();
  /// Throws ErrorKind::Config when a required column is unmapped or a unit is unknown.
  void validate() const;
};

ColumnMapping parse_mapping(const std::string& json_text, const std::string& source_name = "mapping");
ColumnMapping load_mapping(const std::filesystem::path& path);

struct IngestIssue {
  std::size_t line = 0;
  std::string message;
};

struct IngestResult {
  Dataset data;
  std::vector<IngestIssue> issues;
  std::size_t rows_read = 0;
};

inline constexpr double kMaxRejectedFraction = 0.05;

/// Rows that fail to parse or violate measured-record invariants are dropped
/// and reported; more than 5% of rows rejected is an ErrorKind::Ingestion.
IngestResult ingest_measured(const std::filesystem::path& csv_path, const ColumnMapping& mapping,
                             const std::vector<int>& fan_stages = kDefaultStrata);

/// Converts `value` in `unit` to the dataset unit of `column`.
double convert_unit(Column column, const std::string& unit, double value);

}  // namespace cwopt
