#include "resilsim/trace.hpp"

#include <ostream>
#include <sstream>

namespace resilsim::sim {

std::string_view to_string(HopOutcome outcome) {
  switch (outcome) {
    case HopOutcome::Success:
      return "success";
    case HopOutcome::Degraded:
      return "degraded";
    case HopOutcome::Failure:
      return "failure";
  }
  return "failure";
}

std::string_view to_string(Cause cause) {
  switch (cause) {
    case Cause::None:
      return "none";
    case Cause::DependencyFailure:
      return "dependency_failure";
    case Cause::LocalFault:
      return "local_fault";
    case Cause::NoInstance:
      return "no_instance";
    case Cause::BreakerDeny:
      return "breaker_deny";
  }
  return "none";
}

void write_trace_log(std::ostream& out, const TraceLog& log) {
  for (const auto& trace : log.traces) {
    for (const auto& hop : trace.hops) {
      out << to_ms(hop.start) << '\t' << trace.request_id << '\t' << hop.service << '\t'
          << hop.instance << '\t' << to_string(hop.outcome) << '\t' << to_string(hop.cause) << '\t'
          << (hop.fallback_used ? "true" : "false") << '\n';
    }
  }
}

std::string format_trace_log(const TraceLog& log) {
  std::ostringstream out;
  write_trace_log(out, log);
  return out.str();
}

}  // namespace resilsim::sim
