#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwopt/timestamp.hpp"

namespace cwopt {

enum class Source { Synthetic, Measured };

std::string_view to_string(Source source);

struct SampleRecord {
  Timestamp timestamp;
  double t_wb = 0.0;
  double q_load = 0.0;
  double t_cws = 0.0;
  double t_cwr = 0.0;
  int n_fans = 0;
  double p_chiller = 0.0;
  double p_fan = 0.0;
  double p_pump = 0.0;
  double q_rej = 0.0;
  Source source = Source::Synthetic;

  double total_power() const { return p_chiller + p_fan + p_pump; }
};

/// Numeric dataset columns, in CSV order.
enum class Column { TWb, QLoad, TCws, TCwr, NFans, PChiller, PFan, PPump, QRej };

inline constexpr std::string_view kDatasetHeader =
    "timestamp,t_wb_f,q_load_tons,t_cws_f,t_cwr_f,n_fans,p_chiller_kw,p_fan_kw,p_pump_kw,q_rej_tons,source";

std::string_view column_name(Column column);
std::optional<Column> column_from_name(std::string_view name);
double column_value(const SampleRecord& record, Column column);
const std::vector<Column>& numeric_columns();

struct Dataset {
  std::vector<SampleRecord> records;
  int schema_version = 1;
  std::string provenance;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::vector<double> column(Column column) const;
};

/// Relative tolerance of the heat-balance check on synthetic records.
inline constexpr double kEnergyBalanceTolerance = 1e-6;

/// First violated record invariant, or nullopt. Measured records skip the
/// energy-balance check.
std::optional<std::string> check_record(const SampleRecord& record,
                                        std::span<const int> fan_stages = {});

Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& data, const std::filesystem::path& path);
void write_dataset(const Dataset& data, std::ostream& out);

/// FNV-1a over the canonical CSV rendering; stable across platforms.
std::string fingerprint(const Dataset& data);

}  // namespace cwopt
