#include "resilsim/fault.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace resilsim::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool covered(const std::vector<Window>& windows, TimePoint t) {
  // Sorted and disjoint: the only candidate is the last window starting at or before t.
  auto it = std::upper_bound(windows.begin(), windows.end(), t,
                             [](TimePoint v, const Window& w) { return v < w.start; });
  return it != windows.begin() && std::prev(it)->contains(t);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::derive(std::uint64_t seed, std::string_view stream) {
  return Rng(splitmix64(seed ^ splitmix64(fnv1a64(stream))));
}

std::string_view to_string(LatencyDist dist) {
  switch (dist) {
    case LatencyDist::Fixed:
      return "fixed";
    case LatencyDist::Uniform:
      return "uniform";
    case LatencyDist::Exponential:
      return "exponential";
  }
  return "fixed";
}

bool FaultModel::in_outage(TimePoint t) const { return covered(outage_windows, t); }

bool FaultModel::unhealthy_at(TimePoint t) const { return covered(health_windows(), t); }

void validate_windows(const std::vector<Window>& windows) {
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].end <= windows[i].start) {
      throw std::invalid_argument("window " + std::to_string(i) + " is empty or reversed");
    }
    if (i > 0 && windows[i].start < windows[i - 1].end) {
      throw std::invalid_argument("window " + std::to_string(i) +
                                  " overlaps or precedes its predecessor");
    }
  }
}

void validate(const FaultModel& model) {
  validate_windows(model.outage_windows);
  if (model.unhealthy_windows) validate_windows(*model.unhealthy_windows);
  if (!(model.error_rate >= 0.0 && model.error_rate <= 1.0)) {
    throw std::invalid_argument("error_rate must be in [0, 1]");
  }
  if (model.timeout_after <= Duration::zero()) {
    throw std::invalid_argument("timeout_ms must be > 0");
  }
  const auto& l = model.latency;
  switch (l.dist) {
    case LatencyDist::Fixed:
      if (!(l.fixed_ms >= 0.0)) throw std::invalid_argument("latency.ms must be >= 0");
      break;
    case LatencyDist::Uniform:
      if (!(l.lo_ms >= 0.0 && l.hi_ms >= l.lo_ms))
        throw std::invalid_argument("latency requires 0 <= lo_ms <= hi_ms");
      break;
    case LatencyDist::Exponential:
      if (!(l.mean_ms > 0.0)) throw std::invalid_argument("latency.mean_ms must be > 0");
      break;
  }
}

Duration draw_latency(const LatencySpec& spec, Rng& rng) {
  double ms = 0.0;
  switch (spec.dist) {
    case LatencyDist::Fixed:
      ms = spec.fixed_ms;
      break;
    case LatencyDist::Uniform:
      ms = rng.uniform(spec.lo_ms, spec.hi_ms);
      break;
    case LatencyDist::Exponential:
      ms = rng.exponential(spec.mean_ms);
      break;
  }
  return Duration{std::max<std::int64_t>(0, std::llround(ms))};
}

CallOutcome fault_at(const FaultModel& model, TimePoint now, Rng& rng) {
  if (model.in_outage(now)) return {CallKind::Error, Duration::zero()};
  if (rng.uniform01() < model.error_rate) return {CallKind::Error, Duration::zero()};
  const Duration latency = draw_latency(model.latency, rng);
  if (latency > model.timeout_after) return {CallKind::Timeout, model.timeout_after};
  return {CallKind::Success, latency};
}

}  // namespace resilsim::sim
