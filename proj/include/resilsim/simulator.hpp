#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "resilsim/breaker.hpp"
#include "resilsim/metrics.hpp"
#include "resilsim/registry.hpp"
#include "resilsim/scenario.hpp"
#include "resilsim/trace.hpp"

namespace resilsim::sim {

enum class EventKind : std::uint8_t { Arrival, CallComplete, ProbeDue, RestartDue, FaultEdge };
std::string_view to_string(EventKind kind);

struct SimEvent {
  TimePoint at{};
  /// Insertion counter; breaks ties between events at the same time.
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::Arrival;
  std::uint64_t request_id = 0;
  std::size_t hop = 0;
  std::size_t edge = 0;
};

/// Pops in (at, sequence) order.
class EventQueue {
 public:
  const SimEvent& push(TimePoint at, EventKind kind, std::uint64_t request_id = 0, std::size_t hop = 0,
                       std::size_t edge = 0);
  SimEvent pop();
  const SimEvent& top() const { return heap_.top(); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.at != b.at ? a.at > b.at : a.sequence > b.sequence;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  std::uint64_t next_sequence_ = 0;
};

/// Start or end of a window in which a target's health endpoint fails.
struct FaultEdgeRecord {
  TimePoint at{};
  std::string target;
  bool healthy_after = true;
};

struct BreakerOpening {
  std::string caller;
  std::string callee;
  TimePoint at{};
  Duration sleep_window{};
};

struct RunResult {
  TraceLog log;
  metrics::MetricsReport report;
  std::vector<registry::Transition> lifecycle;
  std::vector<FaultEdgeRecord> fault_edges;
  std::vector<BreakerOpening> breaker_openings;
  std::uint64_t probe_results = 0;
  std::uint64_t events_processed = 0;
};

/// Single-threaded discrete-event run of one scenario.
///
/// A request enters at the workload's entry service and each hop proceeds
/// as: resolve the callee's Ready pool, select an instance by policy, ask
/// the caller's breaker for a permit, evaluate the instance's fault model,
/// then call the callee's dependencies one after another. A failed required
/// dependency fails the hop with cause dependency_failure unless the
/// caller's breaker answers with the edge's fallback.
///
/// Every random draw comes from a stream derived from the scenario seed and
/// the consumer's name ("workload/arrivals", "fault/<instance>"), so toggles
/// never shift fault draws between consumers.
class Simulator {
 public:
  explicit Simulator(Scenario scenario);
  ~Simulator();

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  RunResult run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RunResult run(const Scenario& scenario);

}  // namespace resilsim::sim
