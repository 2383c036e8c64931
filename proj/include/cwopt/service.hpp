#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "cwopt/advisory.hpp"

namespace cwopt {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path bundle_path;
  std::filesystem::path plant_path;  // empty: synthetic default plant
  std::filesystem::path tariff_path;  // optional
  std::filesystem::path table_path;   // optional precomputed table JSON
  std::filesystem::path data_root;    // savings jobs may only read datasets below this
  std::string admin_token;            // empty disables /v1/admin/reload
  SwarmConfig swarm;
};

// Everything a request reads, swapped as one unit on reload.
struct ServiceSnapshot {
  SurrogateBundle bundle;
  PlantConfig plant;
  std::optional<TariffSchedule> tariff;
  std::optional<LookupTable> table;
  std::string loaded_at;
};

std::shared_ptr<const ServiceSnapshot> load_snapshot(const ServiceConfig& config);

class AdvisoryService {
 public:
  explicit AdvisoryService(ServiceConfig config);
  ~AdvisoryService();
  AdvisoryService(const AdvisoryService&) = delete;
  AdvisoryService& operator=(const AdvisoryService&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

  std::shared_ptr<const ServiceSnapshot> snapshot() const;
  /// Loads a fresh snapshot from the configured paths (the bundle path may be
  /// overridden) and swaps it in; the old one stays valid for in-flight requests.
  void reload(const std::optional<std::filesystem::path>& bundle_path = std::nullopt);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cwopt
