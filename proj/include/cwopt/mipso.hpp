#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "cwopt/bundle.hpp"
#include "cwopt/plant.hpp"
#include "cwopt/tariff.hpp"

namespace cwopt {

struct SwarmConfig {
  int n_particles_per_stratum = 10;
  int n_iterations = 50;
  double w = 0.7;
  double c1 = 1.5;
  double c2 = 1.5;
  double t_lo = 65.0;  // °F
  double t_hi = 85.0;  // °F
  std::vector<int> fan_strata = {2, 4, 6, 8};
  std::uint64_t seed = 0;
  bool stochastic = true;  // false: r1 = r2 = 1, lattice initialization
  double convergence_tolerance = 1e-6;
  int stall_iterations = 15;          // stop after this many iterations in which no personal best improved; 0 disables
  double velocity_clamp_fraction = 0.25;

  /// Throws ErrorKind::Config.
  void validate() const;
};

struct ObjectiveValue {
  double value = 0.0;
  double penalty = 0.0;  // > 0 marks an infeasible point; already included in value
};

using Objective = std::function<ObjectiveValue(double t_cws, int n_fans)>;
using PlainObjective = std::function<double(double t_cws, int n_fans)>;

/// Wraps a penalty-free objective.
Objective as_objective(PlainObjective f);

struct Candidate {
  double t_cws = 0.0;
  int n_fans = 0;
  double objective_value = 0.0;
  bool feasible = true;
  double penalty = 0.0;
};

/// Lower value wins; ties go to the lower t_cws, then fewer fans.
bool better(const Candidate& a, const Candidate& b);

struct ConvergenceTrace {
  std::vector<double> global_best;  // after iteration 1, 2, ...
  int converged_at = 0;             // first iteration whose best equals the final best within tolerance
  std::size_t evaluations = 0;
  std::map<int, std::size_t> evaluations_per_stratum;
};

struct OptimizeResult {
  Candidate best;
  ConvergenceTrace trace;
};

struct Baseline {
  double t_cws = 0.0;
  int n_fans = 0;
};

/// Frozen-fan-count PSO. Iteration 1 evaluates the initial swarm; each later
/// iteration applies the velocity and position updates to every particle.
/// A baseline, when given, is evaluated exactly and seeds one particle, so
/// the returned value never exceeds the baseline's.
OptimizeResult optimize(const Objective& objective, const SwarmConfig& config,
                        std::optional<Baseline> baseline = std::nullopt);

/// Exhaustive search over lo, lo + step, ... <= hi for every stratum.
Candidate grid_oracle(const Objective& objective, double t_lo, double t_hi, double step,
                      const std::vector<int>& strata);

/// Number of grid points grid_oracle visits per stratum.
std::size_t grid_size(double t_lo, double t_hi, double step);

// ---------------------------------------------------------------------------
// Condenser-loop objective over the surrogate bundle
// ---------------------------------------------------------------------------

struct LoopPrediction {
  double p_chiller = 0.0;
  double q_rej = 0.0;
  double p_fan = 0.0;
  double p_pump = 0.0;
  double t_cws_floor = 0.0;  // coldest supply the stratum can reach

  double total() const { return p_chiller + p_fan + p_pump; }
  bool feasible(double t_cws) const { return t_cws >= t_cws_floor; }
};

/// Chained surrogate prediction: chiller -> heat rejection -> tower stratum.
/// Chiller power is held >= 0 and fan power to [0, n_fans x rated cell power].
/// The floor is max(t_wb + minimum approach, full-speed leaving temperature
/// of the stratum at the predicted rejection).
LoopPrediction predict_loop(const SurrogateBundle& bundle, const PlantConfig& plant, double q_load,
                            double t_wb, double t_cws, int n_fans);

/// Total loop kW times `rate` (1 for power mode, $/kWh for cost mode, giving
/// $/h). Below the floor the value is replaced by an upper bound on any
/// feasible value plus 10 x violation^2, all times `rate`.
Objective loop_objective(const SurrogateBundle& bundle, const PlantConfig& plant, double q_load, double t_wb,
                         double rate = 1.0);

/// Cost mode: the energy rate of the period containing `at`.
Objective loop_objective(const SurrogateBundle& bundle, const PlantConfig& plant, double q_load, double t_wb,
                         const TariffSchedule& tariff, const Timestamp& at);

}  // namespace cwopt
