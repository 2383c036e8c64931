#include "cwopt/mipso.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cwopt/error.hpp"
#include "cwopt/units.hpp"

namespace cwopt {

void SwarmConfig::validate() const {
  if (n_particles_per_stratum < 1) fail(ErrorKind::Config, "swarm needs at least 1 particle per stratum");
  if (n_iterations < 1) fail(ErrorKind::Config, "swarm needs at least 1 iteration");
  if (!(w >= 0.0 && w < 1.0)) fail(ErrorKind::Config, "inertia w must lie in [0, 1)");
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) fail(ErrorKind::Config, "c1 and c2 must be >= 0");
  if (!(t_lo < t_hi) || !std::isfinite(t_lo) || !std::isfinite(t_hi))
    fail(ErrorKind::Config, "t_cws bounds must be finite and ordered");
  if (fan_strata.empty()) fail(ErrorKind::Config, "swarm needs at least one fan stratum");
  auto sorted = fan_strata;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    fail(ErrorKind::Config, "fan strata must be distinct");
  if (!(convergence_tolerance >= 0.0)) fail(ErrorKind::Config, "convergence_tolerance must be >= 0");
  if (stall_iterations < 0) fail(ErrorKind::Config, "stall_iterations must be >= 0");
  if (!(velocity_clamp_fraction > 0.0)) fail(ErrorKind::Config, "velocity_clamp_fraction must be > 0");
}

Objective as_objective(PlainObjective f) {
  return [f = std::move(f)](double t, int n) { return ObjectiveValue{f(t, n), 0.0}; };
}

bool better(const Candidate& a, const Candidate& b) {
  if (a.objective_value != b.objective_value) return a.objective_value < b.objective_value;
  if (a.t_cws != b.t_cws) return a.t_cws < b.t_cws;
  return a.n_fans < b.n_fans;
}

namespace {

struct Particle {
  double t_cws = 0.0;
  int n_fans = 0;
  double velocity = 0.0;
  double best_position = 0.0;
  double best_value = 0.0;
};

Candidate evaluate(const Objective& f, double t, int n, ConvergenceTrace& trace) {
  ObjectiveValue v = f(t, n);
  if (!std::isfinite(v.value))
    fail(ErrorKind::Solver, "objective returned a non-finite value at t_cws " + std::to_string(t) + ", " +
                                std::to_string(n) + " fans");
  ++trace.evaluations;
  ++trace.evaluations_per_stratum[n];
  return Candidate{t, n, v.value, !(v.penalty > 0.0), v.penalty};
}

}  // namespace

OptimizeResult optimize(const Objective& objective, const SwarmConfig& cfg, std::optional<Baseline> baseline) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double width = cfg.t_hi - cfg.t_lo;
  const double vmax = cfg.velocity_clamp_fraction * width;
  const int per = cfg.n_particles_per_stratum;

  OptimizeResult out;
  ConvergenceTrace& trace = out.trace;
  for (int n : cfg.fan_strata) trace.evaluations_per_stratum[n] = 0;

  std::vector<Particle> swarm;
  swarm.reserve(cfg.fan_strata.size() * per);
  for (int n : cfg.fan_strata) {
    for (int j = 0; j < per; ++j) {
      double offset = cfg.stochastic ? unit(rng) : 0.5;
      swarm.push_back(Particle{cfg.t_lo + (j + offset) / per * width, n, 0.0, 0.0, 0.0});
    }
  }

  std::optional<Candidate> gbest;
  auto offer = [&gbest](const Candidate& c) {
    if (!gbest || better(c, *gbest)) gbest = c;
  };

  if (baseline) {
    auto it = std::find(cfg.fan_strata.begin(), cfg.fan_strata.end(), baseline->n_fans);
    if (it == cfg.fan_strata.end())
      fail(ErrorKind::Config, "baseline fan count " + std::to_string(baseline->n_fans) + " is not a swarm stratum");
    // Exact baseline, even outside the bounds, so the guarantee is against
    // the operator's real setting.
    Candidate b = evaluate(objective, baseline->t_cws, baseline->n_fans, trace);
    --trace.evaluations_per_stratum[baseline->n_fans];
    offer(b);
    swarm[static_cast<std::size_t>(it - cfg.fan_strata.begin()) * per].t_cws =
        std::clamp(baseline->t_cws, cfg.t_lo, cfg.t_hi);
  }

  for (auto& p : swarm) {
    Candidate c = evaluate(objective, p.t_cws, p.n_fans, trace);
    p.best_position = p.t_cws;
    p.best_value = c.objective_value;
    offer(c);
  }
  trace.global_best.push_back(gbest->objective_value);

  int stall = 0;
  for (int it = 2; it <= cfg.n_iterations; ++it) {
    const double social = gbest->t_cws;
    for (auto& p : swarm) {
      double r1 = cfg.stochastic ? unit(rng) : 1.0;
      double r2 = cfg.stochastic ? unit(rng) : 1.0;
      p.velocity = cfg.w * p.velocity + cfg.c1 * r1 * (p.best_position - p.t_cws) + cfg.c2 * r2 * (social - p.t_cws);
      p.velocity = std::clamp(p.velocity, -vmax, vmax);
      p.t_cws += p.velocity;
      if (p.t_cws < cfg.t_lo || p.t_cws > cfg.t_hi) {
        p.t_cws = std::clamp(p.t_cws, cfg.t_lo, cfg.t_hi);
        p.velocity = 0.0;
      }
    }
    bool moved = false;
    for (auto& p : swarm) {
      Candidate c = evaluate(objective, p.t_cws, p.n_fans, trace);
      if (c.objective_value < p.best_value - cfg.convergence_tolerance) moved = true;
      if (c.objective_value < p.best_value) {
        p.best_value = c.objective_value;
        p.best_position = p.t_cws;
      }
      offer(c);
    }
    trace.global_best.push_back(gbest->objective_value);

    // Stalled means no particle is still making progress, not just the leader.
    stall = moved ? 0 : stall + 1;
    if (cfg.stall_iterations > 0 && stall >= cfg.stall_iterations) break;
  }

  const double final_value = trace.global_best.back();
  for (std::size_t k = 0; k < trace.global_best.size(); ++k) {
    if (trace.global_best[k] - final_value <= cfg.convergence_tolerance) {
      trace.converged_at = static_cast<int>(k) + 1;
      break;
    }
  }
  out.best = *gbest;
  return out;
}

std::size_t grid_size(double t_lo, double t_hi, double step) {
  if (!(step > 0.0) || !(t_lo <= t_hi)) fail(ErrorKind::Domain, "grid needs step > 0 and lo <= hi");
  return static_cast<std::size_t>(std::floor((t_hi - t_lo) / step + 1e-9)) + 1;
}

Candidate grid_oracle(const Objective& objective, double t_lo, double t_hi, double step,
                      const std::vector<int>& strata) {
  const std::size_t n = grid_size(t_lo, t_hi, step);
  if (strata.empty()) fail(ErrorKind::Domain, "grid oracle needs at least one stratum");
  ConvergenceTrace scratch;
  std::optional<Candidate> best;
  for (int fans : strata) {
    for (std::size_t i = 0; i < n; ++i) {
      double t = std::round((t_lo + static_cast<double>(i) * step) * 1e9) / 1e9;
      Candidate c = evaluate(objective, t, fans, scratch);
      if (!best || better(c, *best)) best = c;
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------

LoopPrediction predict_loop(const SurrogateBundle& bundle, const PlantConfig& plant, double q_load, double t_wb,
                            double t_cws, int n_fans) {
  LoopPrediction p;
  // Boosted sums can overshoot where the target is steep (fans near full
  // speed at the floor); hold each term to what the equipment can draw.
  p.p_chiller = std::max(0.0, bundle.predict_chiller(t_cws, q_load));
  p.q_rej = bundle.predict_rejection(q_load, t_cws);
  p.p_fan = std::clamp(bundle.predict_tower(n_fans, t_wb, p.q_rej, t_cws), 0.0, n_fans * plant.cell_rated_fan_power);
  p.p_pump = q_load > 0.0 ? plant.pump_power : plant.standby_power;
  p.t_cws_floor = std::max(t_wb + units::kMinApproachF, tower_leaving_temp(plant, t_wb, std::max(p.q_rej, 0.0), n_fans));
  return p;
}

Objective loop_objective(const SurrogateBundle& bundle, const PlantConfig& plant, double q_load, double t_wb,
                         double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) fail(ErrorKind::Domain, "objective rate must be finite and >= 0");
  double tower_bound = 0.0;
  for (const auto& [n, m] : bundle.tower_power) tower_bound = std::max(tower_bound, m.upper_bound());
  const double bound = std::max(0.0, bundle.chiller_power.upper_bound()) + std::max(0.0, tower_bound) +
                       std::max(plant.pump_power, plant.standby_power);
  const double penalty_scale = rate > 0.0 ? rate : 1.0;
  return [&bundle, &plant, q_load, t_wb, rate, bound, penalty_scale](double t, int n) {
    LoopPrediction p = predict_loop(bundle, plant, q_load, t_wb, t, n);
    if (p.feasible(t)) return ObjectiveValue{p.total() * rate, 0.0};
    double violation = p.t_cws_floor - t;
    double penalty = 10.0 * violation * violation * penalty_scale;
    return ObjectiveValue{bound * penalty_scale + penalty, penalty};
  };
}

Objective loop_objective(const SurrogateBundle& bundle, const PlantConfig& plant, double q_load, double t_wb,
                         const TariffSchedule& tariff, const Timestamp& at) {
  return loop_objective(bundle, plant, q_load, t_wb, tariff.energy_rate(period_of(tariff, at)));
}

}  // namespace cwopt
