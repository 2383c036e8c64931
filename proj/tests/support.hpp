#pragma once

#include <chrono>

#include "cwopt/bundle.hpp"
#include "cwopt/datagen.hpp"
#include "cwopt/tariff.hpp"

namespace cwopt::support {

inline const PlantConfig& plant() {
  static const PlantConfig p = PlantConfig::synthetic_default();
  return p;
}

/// Small but complete bundle over a coarse summer sweep.
inline const SurrogateBundle& bundle() {
  static const SurrogateBundle b = [] {
    SweepSpec s;
    for (int t = 65; t <= 85; t += 2) s.t_cws_values.push_back(t);
    s.n_fans_values = {2, 4, 6, 8};
    s.months = {6, 7, 8};
    s.hour_stride = 12;
    Hyperparams hp;
    hp.n_trees = 60;
    hp.max_depth = 5;
    return train_bundle(clean(run_sweep(plant(), s)).first, hp, kDefaultStrata, "2026-01-01T00:00:00Z");
  }();
  return b;
}

/// Synthetic conditions covering exactly one month at `interval_minutes`.
inline std::pair<WeatherSeries, LoadProfile> month_conditions(std::chrono::year_month ym, int interval_minutes,
                                                              unsigned seed = 1) {
  auto [w, l] = synthetic_conditions_year(plant(), static_cast<int>(ym.year()), seed);
  const Timestamp start = month_start(ym), end = month_end(ym);
  WeatherSeries wm;
  LoadProfile lm;
  for (std::size_t i = 0; i < w.timestamps.size(); ++i) {
    if (w.timestamps[i] < start || w.timestamps[i] > end) continue;
    wm.timestamps.push_back(w.timestamps[i]);
    wm.t_wb.push_back(w.t_wb[i]);
    lm.timestamps.push_back(l.timestamps[i]);
    lm.q_load.push_back(l.q_load[i]);
  }
  // The next month's first hour anchors interpolation; drop it afterwards.
  if (wm.timestamps.back() < end) {
    wm.timestamps.push_back(end);
    wm.t_wb.push_back(wm.t_wb.back());
    lm.timestamps.push_back(end);
    lm.q_load.push_back(lm.q_load.back());
  }
  auto [wr, lr] = resample_conditions(wm, lm, interval_minutes);
  wr.timestamps.pop_back();
  wr.t_wb.pop_back();
  lr.timestamps.pop_back();
  lr.q_load.pop_back();
  return {wr, lr};
}

}  // namespace cwopt::support
