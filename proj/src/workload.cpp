#include "resilsim/workload.hpp"

#include <algorithm>
#include <cmath>

#include "resilsim/errors.hpp"
#include "resilsim/rng.hpp"

namespace resilsim::sim {

std::string_view to_string(ArrivalProcess process) {
  switch (process) {
    case ArrivalProcess::Fixed:
      return "fixed";
    case ArrivalProcess::Poisson:
      return "poisson";
    case ArrivalProcess::Explicit:
      return "explicit";
  }
  return "fixed";
}

std::vector<Arrival> workload_arrivals(const WorkloadSpec& spec, std::uint64_t seed) {
  if (!(spec.rate_per_s >= 0.0)) throw SchemaError("workload.rate_per_s", "must be >= 0");
  if (spec.duration < Duration::zero()) throw SchemaError("workload.duration_ms", "must be >= 0");

  std::vector<TimePoint> times;
  const double horizon = static_cast<double>(spec.duration.count());
  switch (spec.process) {
    case ArrivalProcess::Fixed:
      if (spec.rate_per_s > 0.0) {
        const double gap = 1000.0 / spec.rate_per_s;
        for (std::int64_t k = 1;; ++k) {
          const double t = static_cast<double>(k) * gap;
          if (t > horizon + 1e-9) break;
          times.push_back(at_ms(std::llround(t)));
        }
      }
      break;
    case ArrivalProcess::Poisson:
      if (spec.rate_per_s > 0.0) {
        Rng rng = Rng::derive(seed, "workload/arrivals");
        const double mean_gap = 1000.0 / spec.rate_per_s;
        for (double t = rng.exponential(mean_gap); t <= horizon; t += rng.exponential(mean_gap)) {
          times.push_back(at_ms(static_cast<std::int64_t>(std::floor(t))));
        }
      }
      break;
    case ArrivalProcess::Explicit:
      times = spec.explicit_arrivals;
      std::stable_sort(times.begin(), times.end());
      break;
  }

  Rng sessions = Rng::derive(seed, "workload/sessions");
  std::vector<Arrival> arrivals;
  arrivals.reserve(times.size());
  std::uint64_t id = 1;
  for (TimePoint t : times) {
    Arrival a{id++, t, {}};
    if (spec.session_keys > 0) a.session_key = "s" + std::to_string(sessions.below(spec.session_keys));
    arrivals.push_back(std::move(a));
  }
  return arrivals;
}

}  // namespace resilsim::sim
