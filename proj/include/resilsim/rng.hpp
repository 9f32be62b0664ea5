#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace resilsim::sim {

/// Seeded stream. The engine is std::mt19937_64 (fully specified by the
/// standard); the conversions to doubles are done here rather than with
/// <random> distributions, whose algorithms are implementation-defined,
/// so a run reproduces across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for one named consumer of the scenario seed.
  static Rng derive(std::uint64_t seed, std::string_view stream);

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double exponential(double mean) { return -mean * std::log1p(-uniform01()); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace resilsim::sim
