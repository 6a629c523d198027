#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace vaxledger {

/// Simulated clock: integer microseconds since scenario start.
struct SimClock {
  using rep = std::int64_t;
  using period = std::micro;
  using duration = std::chrono::duration<rep, period>;
  using time_point = std::chrono::time_point<SimClock, duration>;
  static constexpr bool is_steady = true;
};

using SimDuration = SimClock::duration;
using SimTime = SimClock::time_point;

inline constexpr SimTime kSimEpoch{};

inline SimDuration micros(std::int64_t us) { return SimDuration(us); }

inline SimDuration from_millis(double ms) { return SimDuration(std::llround(ms * 1000.0)); }

inline SimDuration from_seconds(double s) { return SimDuration(std::llround(s * 1e6)); }

inline double to_millis(SimDuration d) { return static_cast<double>(d.count()) / 1000.0; }

inline double to_seconds(SimDuration d) { return static_cast<double>(d.count()) / 1e6; }

inline SimTime at_seconds(double s) { return kSimEpoch + from_seconds(s); }

}  // namespace vaxledger
