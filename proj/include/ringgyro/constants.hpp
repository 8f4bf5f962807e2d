#pragma once

#include <numbers>

// Physical constants (SI, CODATA 2018 exact values where defined).
namespace ringgyro::constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kPlanck = 6.62607015e-34;              // J s
inline constexpr double kHbar = kPlanck / (2.0 * kPi);          // J s
inline constexpr double kBohrRadius = 5.29177210903e-11;        // m
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;    // kg
inline constexpr double kRubidium87Mass = 1.44316e-25;          // kg

// Ring used in the short-time sensitivity estimate: L = 2 pi x 20 um.
inline constexpr double kDefaultRingCircumference = 2.0 * kPi * 20e-6;  // m

// Demonstrated duration of a site energy offset pulse.
inline constexpr double kOffsetPulseTime = 500e-9;  // s

}  // namespace ringgyro::constants
