#include "resilsim/breaker.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "resilsim/fallback.hpp"

namespace resilsim::breaker {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

}  // namespace

BreakerConfig BreakerConfig::payment_defaults() {
  BreakerConfig c;
  c.request_volume_threshold = 5;
  c.sleep_window = Duration{10000};
  c.error_threshold_pct = 50.0;
  return c;
}

BreakerConfig BreakerConfig::flight_search_defaults() {
  BreakerConfig c;
  c.request_volume_threshold = 10;
  c.sleep_window = Duration{5000};
  c.error_threshold_pct = 40.0;
  return c;
}

void validate(const BreakerConfig& c) {
  if (c.request_volume_threshold < 1) throw InvalidConfig("request_volume_threshold must be >= 1");
  if (!(c.error_threshold_pct > 0.0 && c.error_threshold_pct <= 100.0))
    throw InvalidConfig("error_threshold_pct must be in (0, 100]");
  if (c.sleep_window <= Duration::zero()) throw InvalidConfig("sleep_window must be > 0");
  if (c.half_open_trials < 1) throw InvalidConfig("half_open_trials must be >= 1");
  if (c.window_length <= Duration::zero()) throw InvalidConfig("window_length must be > 0");
  if (c.window_buckets < 1) throw InvalidConfig("window_buckets must be >= 1");
  if (c.window_length.count() % c.window_buckets != 0)
    throw InvalidConfig("window_length must be a multiple of window_buckets");
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Closed:
      return "closed";
    case Mode::Open:
      return "open";
    case Mode::HalfOpen:
      return "half_open";
  }
  return "unknown";
}

std::string_view to_string(Decision decision) {
  switch (decision) {
    case Decision::Permit:
      return "permit";
    case Decision::PermitAsTrial:
      return "permit_as_trial";
    case Decision::Deny:
      return "deny";
  }
  return "unknown";
}

std::uint64_t BreakerState::successes() const {
  return std::accumulate(window.begin(), window.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const WindowBucket& b) { return acc + b.successes; });
}

std::uint64_t BreakerState::failures() const {
  return std::accumulate(window.begin(), window.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const WindowBucket& b) { return acc + b.failures; });
}

namespace {

const BreakerConfig& validated(const BreakerConfig& c) {
  validate(c);
  return c;
}

}  // namespace

Breaker::Breaker(BreakerConfig config)
    : config_(validated(config)),
      bucket_width_ms_(config_.window_length.count() / config_.window_buckets),
      ring_(config_.window_buckets) {}

std::int64_t Breaker::bucket_of(TimePoint t) const { return floor_div(to_ms(t), bucket_width_ms_); }

void Breaker::observe_clock(TimePoint now) {
  if (now < last_seen_) {
    throw ClockRegression("breaker clock moved backwards: " + std::to_string(to_ms(now)) + " < " +
                          std::to_string(to_ms(last_seen_)));
  }
  last_seen_ = now;
}

void Breaker::transition(Mode to, TimePoint at) {
  mode_ = to;
  ++generation_;
  trials_issued_ = 0;
  trials_succeeded_ = 0;
  if (to == Mode::Open) opened_at_ = at;
  if (to == Mode::Closed) std::fill(ring_.begin(), ring_.end(), WindowBucket{});
}

void Breaker::push_to_window(const Outcome& outcome) {
  const std::int64_t index = bucket_of(outcome.at);
  auto& slot = ring_[static_cast<std::size_t>(floor_mod(index, config_.window_buckets))];
  if (slot.index != index) slot = WindowBucket{index, 0, 0};
  if (outcome.kind == OutcomeKind::Success) {
    ++slot.successes;
  } else {
    ++slot.failures;
  }
}

std::vector<WindowBucket> Breaker::live_buckets(TimePoint now) const {
  const std::int64_t current = bucket_of(std::max(now, last_seen_));
  const std::int64_t oldest = current - static_cast<std::int64_t>(config_.window_buckets) + 1;
  std::vector<WindowBucket> live;
  for (const auto& b : ring_) {
    if (b.index >= oldest && b.index <= current && (b.successes + b.failures) > 0) live.push_back(b);
  }
  std::sort(live.begin(), live.end(),
            [](const WindowBucket& a, const WindowBucket& b) { return a.index < b.index; });
  return live;
}

Admission Breaker::admit(TimePoint now) {
  std::lock_guard lock(mu_);
  observe_clock(now);
  switch (mode_) {
    case Mode::Closed:
      return {Decision::Permit, generation_};
    case Mode::Open:
      if (now < opened_at_ + config_.sleep_window) return {Decision::Deny, generation_};
      transition(Mode::HalfOpen, now);
      ++trials_issued_;
      return {Decision::PermitAsTrial, generation_};
    case Mode::HalfOpen:
      if (trials_issued_ < config_.half_open_trials) {
        ++trials_issued_;
        return {Decision::PermitAsTrial, generation_};
      }
      return {Decision::Deny, generation_};
  }
  return {Decision::Deny, generation_};
}

BreakerState Breaker::record_locked(const Outcome& outcome) {
  observe_clock(outcome.at);
  switch (mode_) {
    case Mode::Open:
      throw OutcomeInOpenState("outcome recorded while the breaker is open");
    case Mode::Closed: {
      push_to_window(outcome);
      std::uint64_t successes = 0;
      std::uint64_t failures = 0;
      for (const auto& b : live_buckets(outcome.at)) {
        successes += b.successes;
        failures += b.failures;
      }
      const std::uint64_t volume = successes + failures;
      if (volume >= config_.request_volume_threshold &&
          static_cast<double>(failures) * 100.0 >=
              config_.error_threshold_pct * static_cast<double>(volume)) {
        transition(Mode::Open, outcome.at);
      }
      break;
    }
    case Mode::HalfOpen:
      if (trials_succeeded_ >= trials_issued_) {
        throw UnexpectedTrialOutcome("half-open outcome without an outstanding trial permit");
      }
      if (outcome.kind == OutcomeKind::Failure) {
        transition(Mode::Open, outcome.at);
      } else if (++trials_succeeded_ >= config_.half_open_trials) {
        transition(Mode::Closed, outcome.at);
      }
      break;
  }
  return snapshot_locked(outcome.at);
}

BreakerState Breaker::record_outcome(Outcome outcome) {
  std::lock_guard lock(mu_);
  return record_locked(outcome);
}

std::optional<BreakerState> Breaker::record_outcome_for(const Admission& admission,
                                                         Outcome outcome) {
  std::lock_guard lock(mu_);
  if (admission.decision == Decision::Deny || admission.generation != generation_) {
    observe_clock(outcome.at);
    return std::nullopt;
  }
  return record_locked(outcome);
}

BreakerState Breaker::snapshot_locked(TimePoint now) const {
  BreakerState s;
  s.mode = mode_;
  s.opened_at = opened_at_;
  s.trials_issued = trials_issued_;
  s.trials_succeeded = trials_succeeded_;
  s.generation = generation_;
  if (mode_ == Mode::Open && now >= opened_at_ + config_.sleep_window) {
    s.mode = Mode::HalfOpen;
    s.trials_issued = 0;
    s.trials_succeeded = 0;
    s.generation = generation_ + 1;
  }
  s.window = live_buckets(now);
  return s;
}

BreakerState Breaker::state_of(TimePoint now) const {
  std::lock_guard lock(mu_);
  return snapshot_locked(now);
}

std::string_view to_string(FallbackKind kind) {
  switch (kind) {
    case FallbackKind::None:
      return "none";
    case FallbackKind::Payment:
      return "payment";
    case FallbackKind::FlightSearch:
      return "flight_search";
  }
  return "none";
}

FallbackKind fallback_kind_from(std::string_view name) {
  if (name == "none") return FallbackKind::None;
  if (name == "payment") return FallbackKind::Payment;
  if (name == "flight_search") return FallbackKind::FlightSearch;
  throw std::invalid_argument("unknown fallback: " + std::string(name));
}

std::string fallback_body(FallbackKind kind) {
  switch (kind) {
    case FallbackKind::Payment:
      return payment_fallback();
    case FallbackKind::FlightSearch:
      return flight_search_fallback().status;
    case FallbackKind::None:
      break;
  }
  return {};
}

}  // namespace resilsim::breaker
