#include "resilsim/registry.hpp"

#include <algorithm>
#include <tuple>

namespace resilsim::registry {

std::string_view to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::Liveness:
      return "liveness";
    case ProbeKind::Readiness:
      return "readiness";
    case ProbeKind::Startup:
      return "startup";
  }
  return "liveness";
}

std::optional<ProbeKind> probe_kind_from(std::string_view name) {
  for (auto k : {ProbeKind::Liveness, ProbeKind::Readiness, ProbeKind::Startup}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view endpoint_of(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::Liveness:
      return "/healthz";
    case ProbeKind::Readiness:
      return "/readiness";
    case ProbeKind::Startup:
      return "/startup";
  }
  return "/healthz";
}

std::string_view to_string(ProbeStatus status) {
  switch (status) {
    case ProbeStatus::Ok:
      return "ok";
    case ProbeStatus::Timeout:
      return "timeout";
    case ProbeStatus::ErrorStatus:
      return "error_status";
  }
  return "ok";
}

std::string_view to_string(Lifecycle lifecycle) {
  switch (lifecycle) {
    case Lifecycle::Starting:
      return "starting";
    case Lifecycle::Ready:
      return "ready";
    case Lifecycle::NotReady:
      return "not_ready";
    case Lifecycle::Dead:
      return "dead";
  }
  return "starting";
}

void validate(const ProbeSpec& spec) {
  const std::string name(to_string(spec.kind));
  if (spec.interval <= Duration::zero()) throw InvalidConfig(name + " probe: interval must be > 0");
  if (spec.timeout <= Duration::zero() || spec.timeout > spec.interval)
    throw InvalidConfig(name + " probe: timeout must be in (0, interval]");
  if (spec.failure_threshold < 1) throw InvalidConfig(name + " probe: failure_threshold must be >= 1");
  if (spec.success_threshold < 1) throw InvalidConfig(name + " probe: success_threshold must be >= 1");
}

bool RegistryEntry::has_probe(ProbeKind kind) const {
  return std::any_of(probes.begin(), probes.end(),
                     [kind](const ProbeSpec& p) { return p.kind == kind; });
}

namespace {

bool applicable(Lifecycle lifecycle, ProbeKind kind) {
  if (kind == ProbeKind::Startup) return lifecycle == Lifecycle::Starting;
  return lifecycle == Lifecycle::Ready || lifecycle == Lifecycle::NotReady;
}

Lifecycle initial_lifecycle(const RegistryEntry& e) {
  if (e.has_probe(ProbeKind::Startup)) return Lifecycle::Starting;
  return Lifecycle::Ready;
}

}  // namespace

Registry::Registry(Responder responder, RegistryOptions options)
    : responder_(std::move(responder)), options_(options) {}

Registry::Record* Registry::find_record(std::string_view id) {
  for (auto& r : records_) {
    if (r.entry.instance.id == id) return &r;
  }
  return nullptr;
}

const RegistryEntry* Registry::find(std::string_view id) const {
  for (const auto& r : records_) {
    if (r.entry.instance.id == id) return &r.entry;
  }
  return nullptr;
}

RegistryEntry Registry::register_instance(balance::ServiceInstance instance,
                                          std::vector<ProbeSpec> probes, TimePoint now,
                                          std::optional<Duration> restart_delay) {
  if (find(instance.id) != nullptr) throw DuplicateId(instance.id);
  std::array<bool, kProbeKinds> seen{};
  for (const auto& p : probes) {
    validate(p);
    auto& s = seen[static_cast<std::size_t>(p.kind)];
    if (s) throw InvalidConfig("instance " + instance.id + ": duplicate " +
                               std::string(to_string(p.kind)) + " probe");
    s = true;
  }
  const Duration delay = restart_delay.value_or(options_.restart_delay);
  if (delay < Duration::zero()) throw InvalidConfig("restart_delay must be >= 0");

  Record r;
  r.entry.probes = std::move(probes);
  r.entry.registered_at = now;
  r.entry.lifecycle = initial_lifecycle(r.entry);
  instance.healthy = r.entry.lifecycle == Lifecycle::Ready;
  r.entry.instance = instance;
  r.restart_delay = delay;
  for (const auto& p : r.entry.probes) r.slots.push_back(ProbeSlot{p, now + p.interval, {}});

  pool(instance.service).update({instance}, {});
  records_.push_back(std::move(r));
  notify(instance.service);
  return records_.back().entry;
}

RegistryEntry Registry::deregister(std::string_view id) {
  auto it = std::find_if(records_.begin(), records_.end(),
                         [id](const Record& r) { return r.entry.instance.id == id; });
  if (it == records_.end()) throw UnknownInstance(std::string(id));
  RegistryEntry removed = std::move(it->entry);
  records_.erase(it);
  pool(removed.instance.service).update({}, {removed.instance.id});
  notify(removed.instance.service);
  return removed;
}

void Registry::set_lifecycle(Record& r, Lifecycle to, TimePoint at, std::string reason,
                             CycleReport& report) {
  const Lifecycle from = r.entry.lifecycle;
  if (from == to) return;
  r.entry.lifecycle = to;
  const bool healthy = to == Lifecycle::Ready;
  r.entry.instance.healthy = healthy;
  pool(r.entry.instance.service).set_healthy(r.entry.instance.id, healthy);
  report.transitions.push_back(
      Transition{r.entry.instance.id, r.entry.instance.service, from, to, at, std::move(reason)});
  notify(r.entry.instance.service);
}

void Registry::apply_result(Record& r, const ProbeSlot& slot, const ProbeResult& result,
                            CycleReport& report) {
  auto& entry = r.entry;
  auto& c = entry.counters[static_cast<std::size_t>(slot.spec.kind)];
  if (result.status == ProbeStatus::Ok) {
    ++c.consecutive_successes;
    c.consecutive_failures = 0;
  } else {
    ++c.consecutive_failures;
    c.consecutive_successes = 0;
  }
  const std::string probe = std::string(endpoint_of(slot.spec.kind)) + " " +
                            std::string(to_string(result.status));

  switch (slot.spec.kind) {
    case ProbeKind::Liveness:
    case ProbeKind::Startup:
      if (c.consecutive_failures >= slot.spec.failure_threshold) {
        entry.restart_at = result.at + r.restart_delay;
        set_lifecycle(r, Lifecycle::Dead, result.at, probe, report);
        return;
      }
      if (slot.spec.kind == ProbeKind::Startup &&
          c.consecutive_successes >= slot.spec.success_threshold) {
        set_lifecycle(r, Lifecycle::Ready, result.at, probe, report);
        return;
      }
      break;
    case ProbeKind::Readiness:
      if (c.consecutive_failures >= slot.spec.failure_threshold &&
          entry.lifecycle == Lifecycle::Ready) {
        set_lifecycle(r, Lifecycle::NotReady, result.at, probe, report);
        return;
      }
      break;
  }

  if (entry.lifecycle == Lifecycle::NotReady) {
    const bool restored = std::all_of(r.slots.begin(), r.slots.end(), [&](const ProbeSlot& s) {
      return s.spec.kind == ProbeKind::Startup ||
             entry.counters_for(s.spec.kind).consecutive_successes >= s.spec.success_threshold;
    });
    if (restored) set_lifecycle(r, Lifecycle::Ready, result.at, probe, report);
  }
}

void Registry::restart(Record& r, TimePoint at, CycleReport& report) {
  auto& entry = r.entry;
  ++entry.restarts;
  entry.restart_at.reset();
  entry.counters = {};
  for (auto& s : r.slots) s.pending.reset();
  Lifecycle to = Lifecycle::Ready;
  if (entry.has_probe(ProbeKind::Startup)) {
    to = Lifecycle::Starting;
  } else if (!r.slots.empty()) {
    to = Lifecycle::NotReady;
  }
  set_lifecycle(r, to, at, "restarted", report);
}

CycleReport Registry::run_probe_cycle(TimePoint now) {
  if (last_cycle_ && now < *last_cycle_) {
    throw ClockRegression("probe cycle at " + std::to_string(to_ms(now)) + " precedes " +
                          std::to_string(to_ms(*last_cycle_)));
  }
  last_cycle_ = now;

  // Within one timestamp: completions, then restarts, then new probes.
  enum Priority { kComplete = 0, kRestart = 1, kFire = 2 };
  using Action = std::tuple<TimePoint, int, std::size_t, std::size_t>;

  CycleReport report;
  for (;;) {
    std::optional<Action> best;
    auto consider = [&](Action a) {
      if (std::get<0>(a) <= now && (!best || a < *best)) best = a;
    };
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      for (std::size_t j = 0; j < r.slots.size(); ++j) {
        if (r.slots[j].pending) consider({r.slots[j].pending->result.at, kComplete, i, j});
        consider({r.slots[j].next_due, kFire, i, j});
      }
      if (r.entry.restart_at) consider({*r.entry.restart_at, kRestart, i, 0});
    }
    if (!best) break;

    const auto [at, priority, i, j] = *best;
    Record& r = records_[i];
    switch (priority) {
      case kComplete: {
        ProbeSlot& slot = r.slots[j];
        Pending pending = std::move(*slot.pending);
        slot.pending.reset();
        if (pending.epoch == r.entry.restarts && applicable(r.entry.lifecycle, slot.spec.kind)) {
          apply_result(r, slot, pending.result, report);
        }
        report.results.push_back(std::move(pending.result));
        break;
      }
      case kRestart:
        restart(r, at, report);
        break;
      case kFire: {
        ProbeSlot& slot = r.slots[j];
        slot.next_due += slot.spec.interval;
        if (!applicable(r.entry.lifecycle, slot.spec.kind) || slot.pending) break;
        ProbeResponse response = responder_(r.entry.instance, slot.spec.kind, at);
        ProbeResult result{r.entry.instance.id, slot.spec.kind, at, response.status,
                           std::move(response.detail)};
        if (response.status == ProbeStatus::Timeout || response.latency > slot.spec.timeout) {
          result.status = ProbeStatus::Timeout;
          result.at = at + slot.spec.timeout;
        } else {
          result.at = at + std::max(response.latency, Duration::zero());
        }
        slot.pending = Pending{std::move(result), r.entry.restarts};
        break;
      }
      default:
        break;
    }
  }
  return report;
}

std::vector<balance::ServiceInstance> Registry::resolve(std::string_view service) const {
  std::vector<balance::ServiceInstance> ready;
  for (const auto& r : records_) {
    if (r.entry.instance.service == service && r.entry.lifecycle == Lifecycle::Ready) {
      ready.push_back(r.entry.instance);
    }
  }
  return ready;
}

SubscriptionId Registry::subscribe(std::string service, Callback callback) {
  const SubscriptionId id = next_subscription_++;
  subscribers_.emplace(id, std::make_pair(std::move(service), std::move(callback)));
  return id;
}

void Registry::unsubscribe(SubscriptionId id) { subscribers_.erase(id); }

void Registry::notify(const std::string& service) {
  std::vector<Callback> targets;
  for (const auto& [id, sub] : subscribers_) {
    if (sub.first == service) targets.push_back(sub.second);
  }
  if (targets.empty()) return;
  const auto ready = resolve(service);
  for (const auto& cb : targets) cb(service, ready);
}

balance::Pool& Registry::pool(std::string_view service) {
  auto it = pools_.find(service);
  if (it == pools_.end()) it = pools_.emplace(std::string(service), balance::Pool{}).first;
  return it->second;
}

void Registry::set_policy(std::string_view service, balance::Policy policy) {
  pool(service).set_policy(policy);
}

std::optional<TimePoint> Registry::next_due() const {
  std::optional<TimePoint> due;
  auto consider = [&](TimePoint t) {
    if (!due || t < *due) due = t;
  };
  for (const auto& r : records_) {
    for (const auto& s : r.slots) {
      if (s.pending) consider(s.pending->result.at);
      // Slots that cannot fire in the current lifecycle are skipped lazily.
      if (applicable(r.entry.lifecycle, s.spec.kind)) consider(s.next_due);
    }
    if (r.entry.restart_at) consider(*r.entry.restart_at);
  }
  return due;
}

std::optional<TimePoint> Registry::next_restart() const {
  std::optional<TimePoint> due;
  for (const auto& r : records_) {
    if (r.entry.restart_at && (!due || *r.entry.restart_at < *due)) due = r.entry.restart_at;
  }
  return due;
}

std::vector<RegistryEntry> Registry::entries() const {
  std::vector<RegistryEntry> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.entry);
  return out;
}

}  // namespace resilsim::registry
