#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "resilsim/scenario.hpp"
#include "resilsim/time.hpp"

namespace resilsim::sim {

enum class HopOutcome : std::uint8_t {
  Success,
  /// Completed with a degraded answer: this hop or one of its descendants
  /// engaged a fallback.
  Degraded,
  Failure,
};

enum class Cause : std::uint8_t { None, DependencyFailure, LocalFault, NoInstance, BreakerDeny };

std::string_view to_string(HopOutcome outcome);
std::string_view to_string(Cause cause);

inline constexpr std::string_view kNoInstanceId = "-";

struct Hop {
  /// Index of the calling hop within the trace; -1 for the client call.
  std::int32_t parent = -1;
  std::string service;
  /// Served instance id, or "-" when no instance was touched.
  std::string instance{kNoInstanceId};
  TimePoint start{};
  TimePoint end{};
  HopOutcome outcome = HopOutcome::Success;
  bool fallback_used = false;
  Cause cause = Cause::None;
  /// Fallback body or error message, when there is one.
  std::string detail;

  bool operator==(const Hop&) const = default;
};

/// hops[0] is the client call into the entry service; children follow
/// their parents in call order.
struct RequestTrace {
  std::uint64_t request_id = 0;
  std::string session_key;
  std::vector<Hop> hops;

  const Hop& root() const { return hops.front(); }
  bool operator==(const RequestTrace&) const = default;
};

struct RunHeader {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  Toggles toggles;

  bool operator==(const RunHeader&) const = default;
};

struct TraceLog {
  RunHeader header;
  /// Ordered by request id.
  std::vector<RequestTrace> traces;

  bool operator==(const TraceLog&) const = default;
};

/// One line per hop:
///   time_ms<TAB>request_id<TAB>service<TAB>instance<TAB>outcome<TAB>cause<TAB>fallback
/// time_ms is the hop start, fallback is "true" or "false", every line ends
/// with '\n'. Requests appear in id order and hops in trace order.
void write_trace_log(std::ostream& out, const TraceLog& log);
std::string format_trace_log(const TraceLog& log);

}  // namespace resilsim::sim
