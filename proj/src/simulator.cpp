#include "resilsim/simulator.hpp"

#include <algorithm>
#include <functional>
#include <optional>

#include "resilsim/fallback.hpp"
#include "resilsim/workload.hpp"

namespace resilsim::sim {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Arrival:
      return "arrival";
    case EventKind::CallComplete:
      return "call_complete";
    case EventKind::ProbeDue:
      return "probe_due";
    case EventKind::RestartDue:
      return "restart_due";
    case EventKind::FaultEdge:
      return "fault_edge";
  }
  return "arrival";
}

const SimEvent& EventQueue::push(TimePoint at, EventKind kind, std::uint64_t request_id,
                                 std::size_t hop, std::size_t edge) {
  heap_.push(SimEvent{at, next_sequence_++, kind, request_id, hop, edge});
  return heap_.top();
}

SimEvent EventQueue::pop() {
  SimEvent e = heap_.top();
  heap_.pop();
  return e;
}

namespace {

/// Runtime state of one callable endpoint (service instance or external).
struct Endpoint {
  std::string id;
  const FaultModel* fault = nullptr;
  Rng rng{0};
  std::optional<std::uint32_t> cap;
  /// Completion times of the calls holding a slot, earliest first.
  std::priority_queue<TimePoint, std::vector<TimePoint>, std::greater<>> slots;
};

struct ActiveHop {
  const ServiceSpec* service = nullptr;  // nullptr for externals
  std::string endpoint;
  std::size_t next_dependency = 0;
  bool any_degraded = false;
  bool optional = false;
  bool lc_acquired = false;
  CallKind local = CallKind::Success;
  breaker::Breaker* breaker = nullptr;
  breaker::Admission admission;
  breaker::FallbackKind fallback = breaker::FallbackKind::None;
};

struct ActiveRequest {
  RequestTrace trace;
  std::vector<ActiveHop> hops;
};

}  // namespace

struct Simulator::Impl {
  explicit Impl(Scenario s);

  RunResult run();

  void sync_registry(TimePoint now);
  void schedule_registry_wakeup();
  void start_request(const Arrival& arrival);
  void dispatch_call(std::uint64_t request_id, std::int32_t parent, const ServiceSpec* caller,
                     const Dependency* dependency, const std::string& callee, TimePoint now);
  void on_call_complete(std::uint64_t request_id, std::size_t hop, TimePoint now);
  void continue_hop(std::uint64_t request_id, std::size_t hop, TimePoint now);
  void finish_hop(std::uint64_t request_id, std::size_t hop, HopOutcome outcome, Cause cause,
                  TimePoint now, std::string detail = {});
  breaker::Breaker& breaker_for(const ServiceSpec& caller, const std::string& callee);
  registry::ProbeResponse probe(const balance::ServiceInstance& instance, registry::ProbeKind kind,
                                TimePoint at) const;

  Scenario scenario;
  std::string hash;
  registry::Registry registry;
  EventQueue queue;
  std::map<std::string, Endpoint> endpoints;
  std::map<std::string, std::unique_ptr<breaker::Breaker>> breakers;
  std::vector<Arrival> arrivals;
  std::unordered_map<std::uint64_t, ActiveRequest> active;
  std::vector<RequestTrace> completed;
  std::optional<TimePoint> wakeup_at;
  RunResult result;
};

Simulator::Impl::Impl(Scenario s)
    : scenario(std::move(s)),
      hash(scenario_hash(scenario)),
      registry([this](const balance::ServiceInstance& inst, registry::ProbeKind kind, TimePoint at) {
        return probe(inst, kind, at);
      }) {
  for (const auto& svc : scenario.services) {
    registry.set_policy(svc.name, svc.policy);
    for (std::uint32_t i = 0; i < svc.instances; ++i) {
      const std::string id = svc.instance_id(i);
      Endpoint ep;
      ep.id = id;
      ep.fault = &svc.fault_for(id);
      ep.rng = Rng::derive(scenario.seed, "fault/" + id);
      ep.cap = svc.concurrency_cap;
      if (ep.cap) {
        for (std::uint32_t k = 0; k < *ep.cap; ++k) ep.slots.push(TimePoint{});
      }
      endpoints.emplace(id, std::move(ep));
    }
  }
  for (const auto& ext : scenario.externals) {
    Endpoint ep;
    ep.id = ext.name;
    ep.fault = &ext.fault;
    ep.rng = Rng::derive(scenario.seed, "fault/" + ext.name);
    endpoints.emplace(ext.name, std::move(ep));
  }
}

registry::ProbeResponse Simulator::Impl::probe(const balance::ServiceInstance& instance,
                                               registry::ProbeKind kind, TimePoint at) const {
  const Endpoint& ep = endpoints.at(instance.id);
  if (ep.fault->unhealthy_at(at)) {
    return {registry::ProbeStatus::Timeout, ep.fault->timeout_after,
            std::string(registry::endpoint_of(kind)) + " no response"};
  }
  return {registry::ProbeStatus::Ok, Duration::zero(), "200 OK"};
}

breaker::Breaker& Simulator::Impl::breaker_for(const ServiceSpec& caller, const std::string& callee) {
  const std::string key = caller.name + "->" + callee;
  auto it = breakers.find(key);
  if (it == breakers.end()) {
    it = breakers.emplace(key, std::make_unique<breaker::Breaker>(*caller.breaker)).first;
  }
  return *it->second;
}

void Simulator::Impl::sync_registry(TimePoint now) {
  auto due = registry.next_due();
  if (!due || *due > now) return;
  auto cycle = registry.run_probe_cycle(now);
  result.probe_results += cycle.results.size();
  for (auto& t : cycle.transitions) result.lifecycle.push_back(std::move(t));
}

void Simulator::Impl::schedule_registry_wakeup() {
  auto due = registry.next_due();
  if (!due) return;
  if (wakeup_at && *wakeup_at <= *due) return;
  const auto restart = registry.next_restart();
  const EventKind kind = (restart && *restart == *due) ? EventKind::RestartDue : EventKind::ProbeDue;
  queue.push(*due, kind);
  wakeup_at = *due;
}

void Simulator::Impl::start_request(const Arrival& arrival) {
  ActiveRequest req;
  req.trace.request_id = arrival.request_id;
  req.trace.session_key = arrival.session_key;
  active.emplace(arrival.request_id, std::move(req));
  dispatch_call(arrival.request_id, -1, nullptr, nullptr, scenario.workload.entry, arrival.at);
}

void Simulator::Impl::dispatch_call(std::uint64_t request_id, std::int32_t parent,
                                    const ServiceSpec* caller, const Dependency* dependency,
                                    const std::string& callee, TimePoint now) {
  ActiveRequest& req = active.at(request_id);
  const std::size_t index = req.trace.hops.size();
  Hop hop;
  hop.parent = parent;
  hop.service = callee;
  hop.start = now;
  req.trace.hops.push_back(std::move(hop));
  ActiveHop ah;
  ah.service = scenario.service(callee);
  if (dependency != nullptr) {
    ah.optional = dependency->optional;
    ah.fallback = dependency->fallback;
  }
  req.hops.push_back(ah);

  std::string endpoint = callee;
  if (ah.service != nullptr) {
    try {
      endpoint = registry.pool(callee).select(req.trace.session_key).id;
    } catch (const NoAvailableInstances& e) {
      finish_hop(request_id, index, HopOutcome::Failure, Cause::NoInstance, now, e.what());
      return;
    }
  }

  if (scenario.toggles.breaker_enabled && caller != nullptr && caller->breaker) {
    breaker::Breaker& br = breaker_for(*caller, callee);
    const breaker::Admission admission = br.admit(now);
    if (admission.decision == breaker::Decision::Deny) {
      finish_hop(request_id, index, HopOutcome::Failure, Cause::BreakerDeny, now, "circuit open");
      return;
    }
    req.hops[index].breaker = &br;
    req.hops[index].admission = admission;
  }

  ActiveHop& cur = req.hops[index];
  cur.endpoint = endpoint;
  req.trace.hops[index].instance = endpoint;
  if (cur.service != nullptr) {
    registry.pool(callee).lc_acquire(endpoint);
    cur.lc_acquired = true;
  }

  Endpoint& ep = endpoints.at(endpoint);
  CallOutcome outcome = fault_at(*ep.fault, now, ep.rng);
  if (outcome.kind != CallKind::Error && ep.cap) {
    // FIFO wait for a free slot. A call that cannot start before its
    // deadline is shed unserved; one that starts holds its slot for the full
    // work, and the caller gives up at the deadline.
    const Duration deadline = ep.fault->timeout_after;
    const TimePoint begin = std::max(now, ep.slots.top());
    const Duration wait = begin - now;
    if (wait >= deadline) {
      outcome = {CallKind::Timeout, deadline};
    } else {
      ep.slots.pop();
      ep.slots.push(begin + outcome.latency);
      if (outcome.kind == CallKind::Success && wait + outcome.latency <= deadline) {
        outcome.latency = wait + outcome.latency;
      } else {
        outcome = {CallKind::Timeout, deadline};
      }
    }
  }
  cur.local = outcome.kind;
  queue.push(now + outcome.latency, EventKind::CallComplete, request_id, index);
}

void Simulator::Impl::on_call_complete(std::uint64_t request_id, std::size_t hop, TimePoint now) {
  const ActiveHop& ah = active.at(request_id).hops[hop];
  switch (ah.local) {
    case CallKind::Error:
      finish_hop(request_id, hop, HopOutcome::Failure, Cause::LocalFault, now, "error");
      return;
    case CallKind::Timeout:
      finish_hop(request_id, hop, HopOutcome::Failure, Cause::LocalFault, now, "timeout");
      return;
    case CallKind::Success:
      continue_hop(request_id, hop, now);
      return;
  }
}

void Simulator::Impl::continue_hop(std::uint64_t request_id, std::size_t hop, TimePoint now) {
  ActiveRequest& req = active.at(request_id);
  ActiveHop& ah = req.hops[hop];
  if (ah.service != nullptr && ah.next_dependency < ah.service->dependencies.size()) {
    const Dependency& dep = ah.service->dependencies[ah.next_dependency++];
    dispatch_call(request_id, static_cast<std::int32_t>(hop), ah.service, &dep, dep.target, now);
    return;
  }
  finish_hop(request_id, hop, ah.any_degraded ? HopOutcome::Degraded : HopOutcome::Success,
             Cause::None, now);
}

void Simulator::Impl::finish_hop(std::uint64_t request_id, std::size_t index, HopOutcome outcome,
                                 Cause cause, TimePoint now, std::string detail) {
  ActiveRequest& req = active.at(request_id);
  ActiveHop& ah = req.hops[index];
  {
    Hop& h = req.trace.hops[index];
    h.end = now;
    h.outcome = outcome;
    h.cause = cause;
    h.detail = std::move(detail);
  }

  if (ah.lc_acquired) {
    registry.pool(ah.service->name).lc_release(ah.endpoint);
    ah.lc_acquired = false;
  }
  if (ah.breaker != nullptr) {
    const auto state = ah.breaker->record_outcome_for(
        ah.admission, breaker::Outcome{outcome == HopOutcome::Failure ? breaker::OutcomeKind::Failure
                                                                       : breaker::OutcomeKind::Success,
                                       now});
    if (state && state->mode == breaker::Mode::Open && state->generation != ah.admission.generation) {
      const Hop& parent = req.trace.hops[static_cast<std::size_t>(req.trace.hops[index].parent)];
      result.breaker_openings.push_back(
          {parent.service, req.trace.hops[index].service, now, ah.breaker->config().sleep_window});
    }
  }
  // A breaker-guarded edge answers failures and denials with its fallback.
  const bool guarded = ah.breaker != nullptr || cause == Cause::BreakerDeny;
  if (outcome == HopOutcome::Failure && guarded && ah.fallback != breaker::FallbackKind::None) {
    Hop& h = req.trace.hops[index];
    h.outcome = HopOutcome::Degraded;
    h.fallback_used = true;
    h.detail = breaker::fallback_body(ah.fallback);
  }

  const Hop& h = req.trace.hops[index];
  if (h.parent < 0) {
    const auto slot = static_cast<std::size_t>(request_id - 1);
    completed[slot] = std::move(req.trace);
    active.erase(request_id);
    return;
  }

  const auto parent = static_cast<std::size_t>(h.parent);
  if (!ah.optional) {
    if (h.outcome == HopOutcome::Failure) {
      finish_hop(request_id, parent, HopOutcome::Failure, Cause::DependencyFailure, now);
      return;
    }
    if (h.outcome == HopOutcome::Degraded) req.hops[parent].any_degraded = true;
  }
  continue_hop(request_id, parent, now);
}

RunResult Simulator::Impl::run() {
  arrivals = workload_arrivals(scenario.workload, scenario.seed);
  completed.resize(arrivals.size());

  const bool probing = scenario.toggles.health_checks_enabled;
  for (const auto& svc : scenario.services) {
    for (std::uint32_t i = 0; i < svc.instances; ++i) {
      balance::ServiceInstance inst;
      inst.id = svc.instance_id(i);
      inst.service = svc.name;
      inst.weight = svc.weights.at(i);
      registry.register_instance(inst, probing ? svc.probes : std::vector<registry::ProbeSpec>{},
                                 TimePoint{}, svc.restart_delay);
    }
  }
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    queue.push(arrivals[i].at, EventKind::Arrival, arrivals[i].request_id, 0, i);
  }
  for (const auto& [id, ep] : endpoints) {
    for (const auto& w : ep.fault->health_windows()) {
      queue.push(w.start, EventKind::FaultEdge, 0, 0, 0);
      result.fault_edges.push_back({w.start, id, false});
      if (w.end != kEndOfTime) {
        queue.push(w.end, EventKind::FaultEdge, 0, 0, 0);
        result.fault_edges.push_back({w.end, id, true});
      }
    }
  }
  std::stable_sort(result.fault_edges.begin(), result.fault_edges.end(),
                   [](const FaultEdgeRecord& a, const FaultEdgeRecord& b) { return a.at < b.at; });
  schedule_registry_wakeup();

  std::size_t pending_arrivals = arrivals.size();
  while (!queue.empty() && (pending_arrivals > 0 || !active.empty())) {
    const SimEvent ev = queue.pop();
    ++result.events_processed;
    if (wakeup_at && ev.at >= *wakeup_at &&
        (ev.kind == EventKind::ProbeDue || ev.kind == EventKind::RestartDue)) {
      wakeup_at.reset();
    }
    sync_registry(ev.at);
    switch (ev.kind) {
      case EventKind::Arrival:
        --pending_arrivals;
        start_request(arrivals[ev.edge]);
        break;
      case EventKind::CallComplete:
        on_call_complete(ev.request_id, ev.hop, ev.at);
        break;
      case EventKind::ProbeDue:
      case EventKind::RestartDue:
      case EventKind::FaultEdge:
        break;
    }
    schedule_registry_wakeup();
  }

  result.log.header = RunHeader{hash, scenario.seed, scenario.toggles};
  result.log.traces = std::move(completed);
  result.report = metrics::aggregate(result.log);
  return std::move(result);
}

Simulator::Simulator(Scenario scenario) : impl_(std::make_unique<Impl>(std::move(scenario))) {}
Simulator::~Simulator() = default;

RunResult Simulator::run() { return impl_->run(); }

RunResult run(const Scenario& scenario) { return Simulator(scenario).run(); }

}  // namespace resilsim::sim
