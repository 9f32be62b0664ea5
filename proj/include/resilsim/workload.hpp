#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "resilsim/time.hpp"

namespace resilsim::sim {

enum class ArrivalProcess : std::uint8_t { Fixed, Poisson, Explicit };
std::string_view to_string(ArrivalProcess process);

struct WorkloadSpec {
  /// Service receiving client requests; empty means the first service.
  std::string entry;
  ArrivalProcess process = ArrivalProcess::Fixed;
  double rate_per_s = 0.0;
  Duration duration{60000};
  std::vector<TimePoint> explicit_arrivals;
  /// Session keys "s0".."s{n-1}" drawn uniformly; 0 disables session keys.
  std::uint32_t session_keys = 0;

  bool operator==(const WorkloadSpec&) const = default;
};

struct Arrival {
  std::uint64_t request_id = 0;
  TimePoint at{};
  std::string session_key;

  bool operator==(const Arrival&) const = default;
};

/// Arrivals in (0, duration], ordered by time; request ids follow arrival
/// order starting at 1. Fixed spacing places the k-th arrival at k / rate.
std::vector<Arrival> workload_arrivals(const WorkloadSpec& spec, std::uint64_t seed);

}  // namespace resilsim::sim
