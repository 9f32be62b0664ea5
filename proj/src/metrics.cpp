#include "resilsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace resilsim::metrics {

namespace {

void check_structure(const sim::RequestTrace& t, std::uint64_t previous_id) {
  const std::string where = "request " + std::to_string(t.request_id) + ": ";
  if (t.request_id <= previous_id) throw MalformedTrace(where + "request ids must increase");
  if (t.hops.empty()) throw MalformedTrace(where + "no hops");
  if (t.hops.front().parent != -1) throw MalformedTrace(where + "first hop is not the client call");
  for (std::size_t i = 0; i < t.hops.size(); ++i) {
    const auto& h = t.hops[i];
    if (h.end < h.start) throw MalformedTrace(where + "hop ends before it starts");
    if (i == 0) continue;
    if (h.parent < 0 || static_cast<std::size_t>(h.parent) >= i) {
      throw MalformedTrace(where + "hop " + std::to_string(i) + " has an invalid parent");
    }
    const auto& p = t.hops[static_cast<std::size_t>(h.parent)];
    if (h.start < p.start || h.end > p.end) {
      throw MalformedTrace(where + "hop " + std::to_string(i) + " is not nested in its parent");
    }
  }
}

bool degraded(const sim::RequestTrace& t) {
  return std::any_of(t.hops.begin(), t.hops.end(), [](const sim::Hop& h) { return h.fallback_used; }) ||
         t.root().outcome == sim::HopOutcome::Degraded;
}

nlohmann::json ratio_json(const Ratio& r) {
  if (!r) return "NotApplicable";
  return *r;
}

std::string fmt_ratio(const Ratio& r) {
  if (!r) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.4f", *r);
  return buf;
}

std::string fmt(double v, int precision = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::int64_t downtime_ms(std::vector<TimedOutcome> outcomes, Duration window, double threshold) {
  struct Delta {
    std::int64_t at;
    std::int64_t count;
    std::int64_t ok;
  };
  std::vector<Delta> deltas;
  deltas.reserve(outcomes.size() * 2);
  for (const auto& o : outcomes) {
    const std::int64_t ok = o.ok ? 1 : 0;
    deltas.push_back({to_ms(o.at), 1, ok});
    deltas.push_back({to_ms(o.at) + window.count(), -1, -ok});
  }
  std::sort(deltas.begin(), deltas.end(), [](const Delta& a, const Delta& b) { return a.at < b.at; });

  std::int64_t down = 0;
  std::int64_t count = 0;
  std::int64_t ok = 0;
  for (std::size_t i = 0; i < deltas.size();) {
    const std::int64_t t = deltas[i].at;
    for (; i < deltas.size() && deltas[i].at == t; ++i) {
      count += deltas[i].count;
      ok += deltas[i].ok;
    }
    if (i == deltas.size()) break;
    if (count > 0 && static_cast<double>(ok) < threshold * static_cast<double>(count)) {
      down += deltas[i].at - t;
    }
  }
  return down;
}

MetricsReport aggregate(const sim::TraceLog& log) {
  MetricsReport r;
  r.header = log.header;

  std::vector<double> latencies;
  std::vector<TimedOutcome> outcomes;
  outcomes.reserve(log.traces.size());
  std::optional<TimePoint> first;
  std::optional<TimePoint> last;
  std::uint64_t previous_id = 0;

  for (const auto& t : log.traces) {
    check_structure(t, previous_id);
    previous_id = t.request_id;
    const auto& root = t.root();
    ++r.arrivals;
    const bool failed = root.outcome == sim::HopOutcome::Failure;
    if (failed) {
      ++r.failures;
      if (root.cause == sim::Cause::DependencyFailure) ++r.cascade_count;
    } else {
      if (degraded(t)) {
        ++r.degraded_successes;
      } else {
        ++r.successes;
      }
      latencies.push_back(static_cast<double>((root.end - root.start).count()));
    }
    outcomes.push_back({root.start, !failed});
    for (const auto& h : t.hops) {
      if (h.instance != sim::kNoInstanceId) ++r.per_instance_counts[h.instance];
    }
    if (!first || root.start < *first) first = root.start;
    if (!last || root.end > *last) last = root.end;
  }

  if (r.arrivals > 0) {
    r.uptime_fraction =
        static_cast<double>(r.successes + r.degraded_successes) / static_cast<double>(r.arrivals);
  }
  r.downtime_ms = downtime_ms(std::move(outcomes));

  std::sort(latencies.begin(), latencies.end());
  r.latency.samples = latencies.size();
  if (!latencies.empty()) {
    r.latency.mean_ms = std::accumulate(latencies.begin(), latencies.end(), 0.0) /
                        static_cast<double>(latencies.size());
    r.latency.p50_ms = percentile(latencies, 0.50);
    r.latency.p95_ms = percentile(latencies, 0.95);
    r.latency.p99_ms = percentile(latencies, 0.99);
  }

  if (first) {
    r.span_ms = (*last - *first).count();
    if (r.span_ms > 0) {
      r.throughput_rps = static_cast<double>(r.successes + r.degraded_successes) * 1000.0 /
                         static_cast<double>(r.span_ms);
    }
  }
  return r;
}

Evenness evenness(const std::vector<std::uint64_t>& counts) {
  Evenness e;
  if (counts.empty()) return e;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  e.spread = *hi - *lo;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (auto c : counts) {
    sum += static_cast<double>(c);
    sum_sq += static_cast<double>(c) * static_cast<double>(c);
  }
  if (sum_sq > 0.0) e.jain = sum * sum / (static_cast<double>(counts.size()) * sum_sq);
  return e;
}

Ratio reduction(double baseline, double treated) {
  if (baseline == 0.0) return std::nullopt;
  return (baseline - treated) / baseline;
}

Ratio improvement(double baseline, double treated) {
  if (baseline == 0.0) return std::nullopt;
  return (treated - baseline) / baseline;
}

Comparison compare(const MetricsReport& baseline, const MetricsReport& treated) {
  if (baseline.header.scenario_hash != treated.header.scenario_hash) {
    throw IncompatibleRuns("scenario hashes differ: " + baseline.header.scenario_hash + " vs " +
                           treated.header.scenario_hash);
  }
  if (baseline.header.seed != treated.header.seed) {
    throw IncompatibleRuns("seeds differ: " + std::to_string(baseline.header.seed) + " vs " +
                           std::to_string(treated.header.seed));
  }
  Comparison c{baseline, treated, {}, {}};
  auto d = [](auto v) { return static_cast<double>(v); };
  c.reductions["cascade_count"] = reduction(d(baseline.cascade_count), d(treated.cascade_count));
  c.reductions["downtime_ms"] = reduction(d(baseline.downtime_ms), d(treated.downtime_ms));
  c.reductions["failures"] = reduction(d(baseline.failures), d(treated.failures));
  c.reductions["latency_p95_ms"] = reduction(baseline.latency.p95_ms, treated.latency.p95_ms);
  c.improvements["uptime_fraction"] = improvement(baseline.uptime_fraction, treated.uptime_fraction);
  c.improvements["throughput_rps"] = improvement(baseline.throughput_rps, treated.throughput_rps);
  return c;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["scenario_hash"] = r.header.scenario_hash;
  j["seed"] = r.header.seed;
  j["toggles"] = {{"breaker_enabled", r.header.toggles.breaker_enabled},
                  {"health_checks_enabled", r.header.toggles.health_checks_enabled}};
  j["arrivals"] = r.arrivals;
  j["successes"] = r.successes;
  j["degraded_successes"] = r.degraded_successes;
  j["failures"] = r.failures;
  j["uptime_fraction"] = r.uptime_fraction;
  j["cascade_count"] = r.cascade_count;
  j["downtime_ms"] = r.downtime_ms;
  j["per_instance_counts"] = r.per_instance_counts;
  j["latency"] = {{"samples", r.latency.samples},
                  {"mean_ms", r.latency.mean_ms},
                  {"p50_ms", r.latency.p50_ms},
                  {"p95_ms", r.latency.p95_ms},
                  {"p99_ms", r.latency.p99_ms}};
  j["throughput_rps"] = r.throughput_rps;
  j["span_ms"] = r.span_ms;
  return j;
}

nlohmann::json to_json(const Comparison& c) {
  nlohmann::json j;
  j["scenario_hash"] = c.baseline.header.scenario_hash;
  j["seed"] = c.baseline.header.seed;
  j["baseline"] = to_json(c.baseline);
  j["treated"] = to_json(c.treated);
  nlohmann::json red = nlohmann::json::object();
  for (const auto& [k, v] : c.reductions) red[k] = ratio_json(v);
  nlohmann::json imp = nlohmann::json::object();
  for (const auto& [k, v] : c.improvements) imp[k] = ratio_json(v);
  j["reductions"] = red;
  j["improvements"] = imp;
  return j;
}

std::string format_table(const MetricsReport& r) {
  std::ostringstream out;
  auto row = [&out](const std::string& key, const std::string& value) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %s\n", key.c_str(), value.c_str());
    out << buf;
  };
  row("scenario_hash", r.header.scenario_hash);
  row("seed", std::to_string(r.header.seed));
  row("breaker_enabled", r.header.toggles.breaker_enabled ? "true" : "false");
  row("health_checks_enabled", r.header.toggles.health_checks_enabled ? "true" : "false");
  row("arrivals", std::to_string(r.arrivals));
  row("successes", std::to_string(r.successes));
  row("degraded_successes", std::to_string(r.degraded_successes));
  row("failures", std::to_string(r.failures));
  row("uptime_fraction", fmt(r.uptime_fraction, 6));
  row("cascade_count", std::to_string(r.cascade_count));
  row("downtime_ms", std::to_string(r.downtime_ms));
  row("latency_mean_ms", fmt(r.latency.mean_ms));
  row("latency_p50_ms", fmt(r.latency.p50_ms));
  row("latency_p95_ms", fmt(r.latency.p95_ms));
  row("latency_p99_ms", fmt(r.latency.p99_ms));
  row("throughput_rps", fmt(r.throughput_rps));
  for (const auto& [id, n] : r.per_instance_counts) row("served[" + id + "]", std::to_string(n));
  return out.str();
}

std::string format_table(const Comparison& c) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "scenario_hash %s  seed %llu\n", c.baseline.header.scenario_hash.c_str(),
                static_cast<unsigned long long>(c.baseline.header.seed));
  out << buf;
  auto toggles = [](const sim::Toggles& t) {
    return std::string("breaker_enabled=") + (t.breaker_enabled ? "true" : "false") +
           " health_checks_enabled=" + (t.health_checks_enabled ? "true" : "false");
  };
  out << "baseline " << toggles(c.baseline.header.toggles) << "\n";
  out << "treated  " << toggles(c.treated.header.toggles) << "\n";
  std::snprintf(buf, sizeof buf, "%-22s %14s %14s %10s\n", "metric", "baseline", "treated", "change");
  out << buf;
  auto row = [&](const char* name, double b, double t, const Ratio& r) {
    std::snprintf(buf, sizeof buf, "%-22s %14.3f %14.3f %10s\n", name, b, t, fmt_ratio(r).c_str());
    out << buf;
  };
  auto d = [](auto v) { return static_cast<double>(v); };
  row("cascade_count", d(c.baseline.cascade_count), d(c.treated.cascade_count), c.reductions.at("cascade_count"));
  row("downtime_ms", d(c.baseline.downtime_ms), d(c.treated.downtime_ms), c.reductions.at("downtime_ms"));
  row("failures", d(c.baseline.failures), d(c.treated.failures), c.reductions.at("failures"));
  row("latency_p95_ms", c.baseline.latency.p95_ms, c.treated.latency.p95_ms, c.reductions.at("latency_p95_ms"));
  row("uptime_fraction", c.baseline.uptime_fraction, c.treated.uptime_fraction,
      c.improvements.at("uptime_fraction"));
  row("throughput_rps", c.baseline.throughput_rps, c.treated.throughput_rps,
      c.improvements.at("throughput_rps"));
  return out.str();
}

}  // namespace resilsim::metrics
