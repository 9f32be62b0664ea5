#pragma once

#include <chrono>
#include <cstdint>
#include <limits>

namespace resilsim {

/// Simulated clock. Nothing in the library reads wall-clock time; every
/// timestamp is supplied by the caller (usually the simulator event loop).
struct VirtualClock {
  using rep = std::int64_t;
  using period = std::milli;
  using duration = std::chrono::duration<rep, period>;
  using time_point = std::chrono::time_point<VirtualClock>;
  static constexpr bool is_steady = true;
};

using Duration = VirtualClock::duration;
using TimePoint = VirtualClock::time_point;

constexpr TimePoint at_ms(std::int64_t ms) { return TimePoint{Duration{ms}}; }
constexpr std::int64_t to_ms(TimePoint t) { return t.time_since_epoch().count(); }
constexpr std::int64_t to_ms(Duration d) { return d.count(); }

constexpr TimePoint kEndOfTime = TimePoint{Duration{std::numeric_limits<std::int64_t>::max()}};

}  // namespace resilsim
