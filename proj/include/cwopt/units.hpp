#pragma once

// Unit conventions: °F, tons of refrigeration, kW, gpm.

namespace cwopt::units {

/// Thermal kW per ton of refrigeration.
inline constexpr double kKwPerTon = 3.517;
/// BTU/hr per ton of refrigeration.
inline constexpr double kBtuPerTonHour = 12000.0;
/// Water-side factor: Q[BTU/hr] = 500 * gpm * dT[°F].
inline constexpr double kWaterSideFactor = 500.0;
/// Tower leaving water can never get closer to wet-bulb than this (°F).
inline constexpr double kMinApproachF = 2.0;

inline constexpr double tons_to_kw(double tons) { return tons * kKwPerTon; }
inline constexpr double kw_to_tons(double kw) { return kw / kKwPerTon; }
inline constexpr double celsius_to_fahrenheit(double c) { return c * 9.0 / 5.0 + 32.0; }

}  // namespace cwopt::units
