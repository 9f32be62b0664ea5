#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "resilsim/rng.hpp"
#include "resilsim/time.hpp"

namespace resilsim::sim {

/// Half-open interval [start, end) of virtual time.
struct Window {
  TimePoint start{};
  TimePoint end = kEndOfTime;

  bool contains(TimePoint t) const { return start <= t && t < end; }
  bool operator==(const Window&) const = default;
};

enum class LatencyDist : std::uint8_t { Fixed, Uniform, Exponential };
std::string_view to_string(LatencyDist dist);

struct LatencySpec {
  LatencyDist dist = LatencyDist::Fixed;
  double fixed_ms = 10.0;
  double lo_ms = 0.0;
  double hi_ms = 0.0;
  double mean_ms = 0.0;

  bool operator==(const LatencySpec&) const = default;
};

struct FaultModel {
  /// Calls fail inside these windows. Sorted, non-overlapping.
  std::vector<Window> outage_windows;
  /// Health endpoints fail inside these windows; defaults to the outage
  /// windows. An instance being drained fails its probes before calls fail.
  std::optional<std::vector<Window>> unhealthy_windows;
  double error_rate = 0.0;
  LatencySpec latency;
  Duration timeout_after{2000};

  const std::vector<Window>& health_windows() const {
    return unhealthy_windows ? *unhealthy_windows : outage_windows;
  }
  bool in_outage(TimePoint t) const;
  bool unhealthy_at(TimePoint t) const;

  bool operator==(const FaultModel&) const = default;
};

/// Throws std::invalid_argument describing the first violated constraint.
void validate(const FaultModel& model);
void validate_windows(const std::vector<Window>& windows);

enum class CallKind : std::uint8_t { Success, Error, Timeout };

struct CallOutcome {
  CallKind kind = CallKind::Success;
  Duration latency{0};

  bool operator==(const CallOutcome&) const = default;
};

/// Inside an outage: Error. Otherwise Error with probability error_rate,
/// else a latency draw that becomes Timeout (latency = timeout_after) when
/// it exceeds timeout_after. Errors return immediately.
CallOutcome fault_at(const FaultModel& model, TimePoint now, Rng& rng);

/// Latency draw in whole milliseconds, never negative.
Duration draw_latency(const LatencySpec& spec, Rng& rng);

}  // namespace resilsim::sim
