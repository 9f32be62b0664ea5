#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "resilsim/trace.hpp"

namespace resilsim::metrics {

struct LatencyStats {
  std::size_t samples = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;

  bool operator==(const LatencyStats&) const = default;
};

struct MetricsReport {
  sim::RunHeader header;

  std::uint64_t arrivals = 0;
  std::uint64_t successes = 0;
  /// Non-failed requests in which some hop engaged a fallback.
  std::uint64_t degraded_successes = 0;
  std::uint64_t failures = 0;
  /// (successes + degraded_successes) / arrivals; 1.0 for an empty log.
  double uptime_fraction = 1.0;
  /// Requests whose client call failed with cause dependency_failure.
  std::uint64_t cascade_count = 0;
  /// Virtual time during which the request success fraction over the
  /// trailing 1000 ms is below 0.5.
  std::int64_t downtime_ms = 0;
  /// Hops served per instance id (externals are keyed by their name).
  std::map<std::string, std::uint64_t> per_instance_counts;
  /// Client-observed latency of non-failed requests.
  LatencyStats latency;
  /// Non-failed requests per second over the span of the run.
  double throughput_rps = 0.0;
  std::int64_t span_ms = 0;

  bool operator==(const MetricsReport&) const = default;
};

/// Throws MalformedTrace when a trace violates the hop structure.
MetricsReport aggregate(const sim::TraceLog& log);

struct TimedOutcome {
  TimePoint at;
  bool ok;
};

/// Sum of virtual time t for which the requests arriving in (t - window, t]
/// exist and have a success fraction below `threshold`.
std::int64_t downtime_ms(std::vector<TimedOutcome> outcomes, Duration window = Duration{1000},
                         double threshold = 0.5);

/// Nearest-rank percentile of an ascending sample; 0 for an empty sample.
double percentile(const std::vector<double>& sorted, double p);

struct Evenness {
  std::uint64_t spread = 0;
  /// (sum x)^2 / (n * sum x^2); 1.0 when every count is zero.
  double jain = 1.0;
};

Evenness evenness(const std::vector<std::uint64_t>& counts);

/// nullopt stands for NotApplicable (zero baseline).
using Ratio = std::optional<double>;

/// (baseline - treated) / baseline.
Ratio reduction(double baseline, double treated);
/// (treated - baseline) / baseline.
Ratio improvement(double baseline, double treated);

struct Comparison {
  MetricsReport baseline;
  MetricsReport treated;
  std::map<std::string, Ratio> reductions;
  std::map<std::string, Ratio> improvements;
};

/// Throws IncompatibleRuns when the runs differ in anything but toggles.
Comparison compare(const MetricsReport& baseline, const MetricsReport& treated);

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const Comparison& comparison);
std::string format_table(const MetricsReport& report);
std::string format_table(const Comparison& comparison);

}  // namespace resilsim::metrics
