#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cwopt/dataset.hpp"
#include "cwopt/gbt.hpp"

namespace cwopt {

inline constexpr int kBundleSchemaVersion = 1;

/// Feature orders of the six models.
const std::vector<Column>& chiller_features();    // t_cws, q_load
const std::vector<Column>& rejection_features();  // q_load, t_cws
const std::vector<Column>& tower_features();      // t_wb, q_rej, t_cws

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Bounding box of the training data, used to flag extrapolation.
struct Envelope {
  Range t_wb;
  Range q_load;
  Range t_cws;

  /// Names of inputs outside the box widened by `margin` x width per side.
  std::vector<std::string> violations(double t_wb, double q_load, double margin = 0.05) const;
};

struct SurrogateBundle {
  GBTModel chiller_power;
  GBTModel heat_rejection;
  std::map<int, GBTModel> tower_power;  // keyed by running fans
  std::string created_at;
  std::string training_data_fingerprint;
  std::string training_data_path;  // where the synthetic rows came from, if known
  int schema_version = kBundleSchemaVersion;
  Hyperparams hyperparams;
  Envelope envelope;

  double predict_chiller(double t_cws, double q_load) const;
  double predict_rejection(double q_load, double t_cws) const;
  double predict_tower(int n_fans, double t_wb, double q_rej, double t_cws) const;

  /// Throws ErrorKind::Config for a fan count the bundle has no model for.
  const GBTModel& tower(int n_fans) const;
  std::vector<int> strata() const;

  /// Hash of the serialized models; identifies the bundle in services.
  std::string fingerprint() const;

  /// Throws ErrorKind::Bundle when the six-model invariants do not hold.
  void validate() const;
};

inline const std::vector<int> kDefaultStrata = {2, 4, 6, 8};

/// Chiller and rejection models on all rows; one tower model per fan count
/// on that stratum's rows.
SurrogateBundle train_bundle(const Dataset& data, const Hyperparams& hp,
                             const std::vector<int>& strata = kDefaultStrata,
                             std::optional<std::string> created_at = std::nullopt);

struct ModelRefinement {
  std::string model;          // "chiller_power", "heat_rejection", "tower_power_<n>"
  std::size_t measured_rows = 0;
  double mbe_before = 0.0;    // percent, on measured rows
  double mbe_after = 0.0;
  bool accepted = false;
};

struct RefineReport {
  std::vector<ModelRefinement> models;
  bool rejected = false;  // no model improved; original bundle returned
  std::vector<std::string> warnings;
};

struct RefineResult {
  SurrogateBundle bundle;
  RefineReport report;
};

/// Retrains every model on synthetic rows (weight 1) united with measured rows
/// (weight `weight`). A measured row identical to a synthetic row on the
/// model's columns is not duplicated; it lifts that row's weight instead.
/// A retrained model replaces the old one only if |MBE%| on the measured
/// rows does not grow.
RefineResult refine(const SurrogateBundle& bundle, const Dataset& synthetic, const Dataset& measured,
                    double weight);

std::string serialize_bundle(const SurrogateBundle& bundle);
SurrogateBundle parse_bundle(const std::string& text, const std::string& source_name = "bundle");
void save_bundle(const SurrogateBundle& bundle, const std::filesystem::path& path);
SurrogateBundle load_bundle(const std::filesystem::path& path);

std::string utc_now_iso();

}  // namespace cwopt
