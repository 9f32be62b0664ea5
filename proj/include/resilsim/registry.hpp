#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resilsim/balance.hpp"
#include "resilsim/errors.hpp"
#include "resilsim/time.hpp"

namespace resilsim::registry {

enum class ProbeKind : std::uint8_t { Liveness = 0, Readiness = 1, Startup = 2 };
inline constexpr std::size_t kProbeKinds = 3;

std::string_view to_string(ProbeKind kind);
std::optional<ProbeKind> probe_kind_from(std::string_view name);
/// "/healthz", "/readiness" or "/startup".
std::string_view endpoint_of(ProbeKind kind);

struct ProbeSpec {
  ProbeKind kind = ProbeKind::Liveness;
  Duration interval{10000};
  Duration timeout{2000};
  /// Consecutive failures before acting.
  std::uint32_t failure_threshold = 1;
  /// Consecutive successes to restore Ready.
  std::uint32_t success_threshold = 1;

  bool operator==(const ProbeSpec&) const = default;
};

void validate(const ProbeSpec& spec);

enum class ProbeStatus : std::uint8_t { Ok, Timeout, ErrorStatus };
std::string_view to_string(ProbeStatus status);

/// What the simulated endpoint answers. A latency above the probe timeout
/// is observed as Timeout once the timeout elapses.
struct ProbeResponse {
  ProbeStatus status = ProbeStatus::Ok;
  Duration latency{0};
  std::string detail;
};

struct ProbeResult {
  std::string instance_id;
  ProbeKind kind = ProbeKind::Liveness;
  TimePoint at{};
  ProbeStatus status = ProbeStatus::Ok;
  std::string detail;
};

enum class Lifecycle : std::uint8_t { Starting, Ready, NotReady, Dead };
std::string_view to_string(Lifecycle lifecycle);

struct Transition {
  std::string instance_id;
  std::string service;
  Lifecycle from = Lifecycle::Starting;
  Lifecycle to = Lifecycle::Starting;
  TimePoint at{};
  std::string reason;
};

struct ProbeCounters {
  std::uint32_t consecutive_failures = 0;
  std::uint32_t consecutive_successes = 0;
};

struct RegistryEntry {
  balance::ServiceInstance instance;
  Lifecycle lifecycle = Lifecycle::Ready;
  std::vector<ProbeSpec> probes;
  std::array<ProbeCounters, kProbeKinds> counters{};
  TimePoint registered_at{};
  /// Set while Dead.
  std::optional<TimePoint> restart_at;
  std::uint32_t restarts = 0;

  const ProbeCounters& counters_for(ProbeKind kind) const {
    return counters[static_cast<std::size_t>(kind)];
  }
  bool has_probe(ProbeKind kind) const;
};

struct CycleReport {
  std::vector<ProbeResult> results;
  std::vector<Transition> transitions;
};

/// Simulated health endpoint of an instance.
using Responder =
    std::function<ProbeResponse(const balance::ServiceInstance&, ProbeKind, TimePoint)>;
using Callback =
    std::function<void(const std::string& service, const std::vector<balance::ServiceInstance>&)>;
using SubscriptionId = std::uint64_t;

struct RegistryOptions {
  Duration restart_delay{5000};
};

/// Service catalog driven by registry-side polling of per-instance probes.
///
/// Every probe is phase-aligned to its instance's registration time: the
/// k-th probe of a spec is due at registered_at + k * interval. Startup
/// probes run only while Starting; liveness and readiness probes run while
/// Ready or NotReady; a Dead entry is not probed until its restart.
///
/// The registry is the single writer of ServiceInstance::healthy in the
/// per-service pools it owns, and keeps healthy == (lifecycle == Ready).
class Registry {
 public:
  explicit Registry(Responder responder, RegistryOptions options = {});

  RegistryEntry register_instance(balance::ServiceInstance instance,
                                std::vector<ProbeSpec> probes, TimePoint now,
                                std::optional<Duration> restart_delay = std::nullopt);
  RegistryEntry deregister(std::string_view id);

  /// Fires every probe due at or before `now`, applies completed results
  /// and due restarts in time order.
  CycleReport run_probe_cycle(TimePoint now);

  /// Ready instances of `service` in registration order.
  std::vector<balance::ServiceInstance> resolve(std::string_view service) const;

  SubscriptionId subscribe(std::string service, Callback callback);
  void unsubscribe(SubscriptionId id);

  /// Pool for `service`, created empty on first use.
  balance::Pool& pool(std::string_view service);
  void set_policy(std::string_view service, balance::Policy policy);

  /// Earliest pending probe, probe completion, or restart.
  std::optional<TimePoint> next_due() const;
  std::optional<TimePoint> next_restart() const;

  const RegistryEntry* find(std::string_view id) const;
  std::vector<RegistryEntry> entries() const;

 private:
  struct Pending {
    ProbeResult result;
    std::uint32_t epoch = 0;
  };
  struct ProbeSlot {
    ProbeSpec spec;
    TimePoint next_due{};
    std::optional<Pending> pending;
  };
  struct Record {
    RegistryEntry entry;
    std::vector<ProbeSlot> slots;
    Duration restart_delay{};
  };

  Record* find_record(std::string_view id);
  void set_lifecycle(Record& r, Lifecycle to, TimePoint at, std::string reason, CycleReport& report);
  void apply_result(Record& r, const ProbeSlot& slot, const ProbeResult& result,
                    CycleReport& report);
  void restart(Record& r, TimePoint at, CycleReport& report);
  void notify(const std::string& service);

  Responder responder_;
  RegistryOptions options_;
  std::vector<Record> records_;
  std::map<std::string, balance::Pool, std::less<>> pools_;
  std::map<SubscriptionId, std::pair<std::string, Callback>> subscribers_;
  SubscriptionId next_subscription_ = 1;
  std::optional<TimePoint> last_cycle_;
};

}  // namespace resilsim::registry
