#pragma once

#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "resilsim/errors.hpp"
#include "resilsim/time.hpp"

namespace resilsim::breaker {

struct BreakerConfig {
  /// Minimum number of outcomes in the rolling window before the error
  /// rate is evaluated at all.
  std::uint32_t request_volume_threshold = 5;
  /// Trip when failures * 100 >= error_threshold_pct * volume.
  double error_threshold_pct = 50.0;
  Duration sleep_window{10000};
  std::uint32_t half_open_trials = 3;
  Duration window_length{10000};
  std::uint32_t window_buckets = 10;

  /// Booking -> payment configuration (volume 5, sleep 10 s, 50 %).
  static BreakerConfig payment_defaults();
  /// Flight search -> airline API configuration (volume 10, sleep 5 s, 40 %).
  static BreakerConfig flight_search_defaults();

  bool operator==(const BreakerConfig&) const = default;
};

/// Throws InvalidConfig naming the first violated constraint.
void validate(const BreakerConfig& config);

enum class Mode : std::uint8_t { Closed, Open, HalfOpen };
enum class Decision : std::uint8_t { Permit, PermitAsTrial, Deny };
enum class OutcomeKind : std::uint8_t { Success, Failure };

std::string_view to_string(Mode mode);
std::string_view to_string(Decision decision);

struct Outcome {
  OutcomeKind kind;
  TimePoint at;
};

struct WindowBucket {
  std::int64_t index = 0;  // absolute bucket number: at / bucket width
  std::uint64_t successes = 0;
  std::uint64_t failures = 0;

  bool operator==(const WindowBucket&) const = default;
};

/// Immutable snapshot of a breaker.
struct BreakerState {
  Mode mode = Mode::Closed;
  TimePoint opened_at{};
  std::uint32_t trials_issued = 0;
  std::uint32_t trials_succeeded = 0;
  /// Live buckets only, oldest first.
  std::vector<WindowBucket> window;
  /// Incremented on every mode change.
  std::uint64_t generation = 0;

  std::uint64_t successes() const;
  std::uint64_t failures() const;
  std::uint64_t volume() const { return successes() + failures(); }

  bool operator==(const BreakerState&) const = default;
};

/// A permit decision tagged with the breaker generation it was granted in.
/// Outcomes for admissions from an earlier generation are stale.
struct Admission {
  Decision decision = Decision::Deny;
  std::uint64_t generation = 0;
};

class Breaker {
 public:
  explicit Breaker(BreakerConfig config);

  Breaker(const Breaker&) = delete;
  Breaker& operator=(const Breaker&) = delete;

  Decision permit_request(TimePoint now) { return admit(now).decision; }
  Admission admit(TimePoint now);

  BreakerState record_outcome(Outcome outcome);

  /// Records the outcome only if the breaker has not changed mode since the
  /// admission was granted; returns nullopt for stale outcomes.
  std::optional<BreakerState> record_outcome_for(const Admission& admission, Outcome outcome);

  /// Read-only; an Open breaker whose sleep window has elapsed at `now` is
  /// reported as HalfOpen without mutating the breaker.
  BreakerState state_of(TimePoint now) const;

  const BreakerConfig& config() const noexcept { return config_; }

 private:
  std::int64_t bucket_of(TimePoint t) const;
  void observe_clock(TimePoint now);
  void push_to_window(const Outcome& outcome);
  std::vector<WindowBucket> live_buckets(TimePoint now) const;
  void transition(Mode to, TimePoint at);
  BreakerState record_locked(const Outcome& outcome);
  BreakerState snapshot_locked(TimePoint now) const;

  const BreakerConfig config_;
  const std::int64_t bucket_width_ms_;

  mutable std::mutex mu_;
  Mode mode_ = Mode::Closed;
  TimePoint opened_at_{};
  TimePoint last_seen_{Duration{std::numeric_limits<std::int64_t>::min()}};
  std::uint32_t trials_issued_ = 0;
  std::uint32_t trials_succeeded_ = 0;
  std::uint64_t generation_ = 0;
  std::vector<WindowBucket> ring_;
};

/// Runs `primary` behind the breaker. A denied request goes straight to
/// `fallback`; a primary that throws is recorded as a Failure and answered by
/// `fallback`. A throwing fallback surfaces as FallbackFailed with the
/// original exception nested.
template <typename Primary, typename Fallback>
auto execute_with_fallback(Breaker& breaker, TimePoint now, Primary&& primary, Fallback&& fallback)
    -> std::invoke_result_t<Primary&> {
  using Result = std::invoke_result_t<Primary&>;
  static_assert(std::is_convertible_v<std::invoke_result_t<Fallback&>, Result>,
                "fallback must produce the primary's response type");

  auto degraded = [&]() -> Result {
    try {
      return fallback();
    } catch (...) {
      std::throw_with_nested(FallbackFailed("fallback failed: no degraded path"));
    }
  };

  const Admission admission = breaker.admit(now);
  if (admission.decision == Decision::Deny) return degraded();

  std::optional<Result> response;
  try {
    response.emplace(primary());
  } catch (...) {
  }
  breaker.record_outcome_for(
      admission, Outcome{response ? OutcomeKind::Success : OutcomeKind::Failure, now});
  if (response) return std::move(*response);
  return degraded();
}

}  // namespace resilsim::breaker
