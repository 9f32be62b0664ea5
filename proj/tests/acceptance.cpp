// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "resilsim/balance.hpp"
#include "resilsim/breaker.hpp"
#include "resilsim/errors.hpp"
#include "resilsim/fallback.hpp"
#include "resilsim/metrics.hpp"
#include "resilsim/scenario.hpp"
#include "resilsim/simulator.hpp"
#include "support/breaker_reference.hpp"

namespace rs = resilsim::sim;
namespace mt = resilsim::metrics;
namespace bl = resilsim::balance;
namespace rb = resilsim::breaker;
using resilsim::at_ms;
using resilsim::Duration;
using resilsim::to_ms;

namespace {

const std::filesystem::path kScenarios = RESILSIM_SCENARIO_DIR;

struct Verdict {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

rs::Scenario canonical(const std::string& name) { return rs::load_scenario_file(kScenarios / (name + ".json")); }

mt::Comparison compare_toggle(rs::Scenario s, bool rs::Toggles::*toggle) {
  auto baseline = s;
  baseline.toggles.*toggle = false;
  s.toggles.*toggle = true;
  return mt::compare(rs::run(baseline).report, rs::run(s).report);
}

// 1
Verdict breaker_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240601);
  std::size_t sequences = 0;
  std::size_t calls = 0;
  std::size_t divergences = 0;
  std::map<rb::Mode, std::size_t> modes;
  for (const auto& config : {rb::BreakerConfig::payment_defaults(), rb::BreakerConfig::flight_search_defaults()}) {
    const resilsim::testing::BreakerReference ref(config);
    for (int n = 0; n < 5000; ++n) {
      const std::size_t length = n % 100 == 0 ? 10000 : 1 + rng() % 600;
      const auto history = resilsim::testing::random_history(rng, length);
      rb::Breaker breaker(config);
      const auto got = resilsim::testing::drive(breaker, history);
      const auto want = ref.replay(history);
      ++sequences;
      calls += history.size();
      if (got != want) ++divergences;
      for (const auto& a : want) ++modes[a.mode];
    }
  }
  const double secs = seconds_since(start);
  return {divergences == 0 && sequences == 10000 && secs < 10.0,
          fmt("%zu sequences, %zu calls, %zu divergences, %.2f s (limit 10 s); half-open answers %zu", sequences,
              calls, divergences, secs, modes[rb::Mode::HalfOpen])};
}

// 2
Verdict cascade_reduction() {
  const auto s = canonical("payment_outage");
  Verdict v;
  double worst = 1e9;
  double slowest = 0;
  std::ostringstream seeds;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto sc = s;
    sc.seed = seed;
    const auto start = Clock::now();
    const auto c = compare_toggle(sc, &rs::Toggles::breaker_enabled);
    slowest = std::max(slowest, seconds_since(start));
    const auto r = c.reductions.at("cascade_count");
    const double value = r.value_or(-1.0);
    worst = std::min(worst, value);
    if (!r || value < 0.50) v.pass = false;
    seeds << " " << c.baseline.cascade_count << "->" << c.treated.cascade_count;
  }
  if (slowest >= 5.0) v.pass = false;
  v.detail = fmt("min reduction %.4f (need >= 0.50), slowest pair %.3f s; cascades per seed:", worst, slowest) +
             seeds.str();
  return v;
}

// 3
Verdict churn_uptime() {
  const auto s = canonical("instance_churn");
  Verdict v;
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto sc = s;
    sc.seed = seed;
    sc.toggles.health_checks_enabled = true;
    const auto r = rs::run(sc).report;
    worst = std::min(worst, r.uptime_fraction);
    if (r.uptime_fraction < 0.9995) v.pass = false;
  }
  v.detail = fmt("min uptime_fraction %.6f over seeds 1..10 (need >= 0.9995)", worst);
  return v;
}

// 4
Verdict churn_downtime() {
  const auto s = canonical("instance_churn");
  Verdict v;
  double worst = 1e9;
  std::ostringstream seeds;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto sc = s;
    sc.seed = seed;
    const auto c = compare_toggle(sc, &rs::Toggles::health_checks_enabled);
    const auto r = c.reductions.at("downtime_ms");
    worst = std::min(worst, r.value_or(-1.0));
    if (!r || *r < 0.50) v.pass = false;
    seeds << " " << c.baseline.downtime_ms << "->" << c.treated.downtime_ms;
  }
  v.detail = fmt("min downtime reduction %.4f (need >= 0.50); downtime ms per seed:", worst) + seeds.str();
  return v;
}

rs::Scenario single_instance(rs::Scenario s) {
  for (auto& svc : s.services) {
    svc.instances = 1;
    svc.weights.assign(1, svc.weights.empty() ? 1 : svc.weights.front());
  }
  return s;
}

// 5
Verdict load_balancing_gain() {
  const auto pool = canonical("peak_load");
  const auto a = rs::run(single_instance(pool)).report;
  const auto b = rs::run(pool).report;
  const auto p95 = mt::reduction(a.latency.p95_ms, b.latency.p95_ms);
  const auto tput = mt::improvement(a.throughput_rps, b.throughput_rps);
  const bool pass = p95 && tput && *p95 >= 0.35 && *tput >= 0.35;
  return {pass, fmt("p95 %.0f -> %.0f ms (improvement %.4f), throughput %.2f -> %.2f rps (improvement %.4f); "
                    "need both >= 0.35",
                    a.latency.p95_ms, b.latency.p95_ms, p95.value_or(-1), a.throughput_rps, b.throughput_rps,
                    tput.value_or(-1))};
}

struct RateBracket {
  double sustained;  // highest rate seen meeting the target
  double failed;     // lowest rate seen missing it
};

RateBracket max_sustainable_rate(const rs::Scenario& base, double target) {
  auto ok = [&](double rate) {
    auto s = base;
    s.workload.rate_per_s = rate;
    return rs::run(s).report.uptime_fraction >= target;
  };
  double lo = 1.0;
  double hi = 2.0;
  if (!ok(lo)) return {0.0, lo};
  while (ok(hi)) {
    lo = hi;
    hi *= 2;
  }
  while (hi / lo > 1.05) {
    const double mid = std::sqrt(lo * hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return {lo, hi};
}

// 6
Verdict concurrent_headroom() {
  const auto pool = canonical("peak_load");
  const auto one = max_sustainable_rate(single_instance(pool), 0.999);
  const auto three = max_sustainable_rate(pool, 0.999);
  // Conservative: lowest possible pool maximum over highest possible single maximum.
  const double ratio = one.failed > 0 ? three.sustained / one.failed : 0.0;
  return {ratio >= 1.3, fmt("max rate at uptime >= 0.999: single [%.1f, %.1f) req/s, pool [%.1f, %.1f) req/s; "
                            "conservative ratio %.3f (need >= 1.3)",
                            one.sustained, one.failed, three.sustained, three.failed, ratio)};
}

// 7
Verdict rr_evenness() {
  std::size_t checked = 0;
  for (std::size_t k = 1; k <= 7; ++k) {
    std::vector<bl::ServiceInstance> v;
    for (std::size_t i = 0; i < k; ++i) {
      bl::ServiceInstance inst;
      inst.id = "i" + std::to_string(i);
      v.push_back(inst);
    }
    bl::Pool pool(v);
    std::vector<std::uint64_t> counts(k, 0);
    // Each prefix of one run is the n-selection run for that n.
    for (std::size_t n = 1; n <= 10000; ++n) {
      const auto got = pool.rr_select().id;
      if (got != v[(n - 1) % k].id) return {false, fmt("k=%zu n=%zu: got %s", k, n, got.c_str())};
      ++counts[(n - 1) % k];
      if (mt::evenness(counts).spread > 1) return {false, fmt("k=%zu n=%zu: spread > 1", k, n)};
      ++checked;
    }
  }
  return {true, fmt("%zu (n, k) prefixes match the modular oracle with spread <= 1", checked)};
}

// 8
Verdict wrr_proportionality() {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng() % 5;
    const std::uint64_t m = 1 + rng() % 6;
    std::vector<bl::ServiceInstance> v;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      bl::ServiceInstance inst;
      inst.id = "w" + std::to_string(i);
      inst.weight = static_cast<std::uint32_t>(1 + rng() % 9);
      total += inst.weight;
      v.push_back(inst);
    }
    bl::Pool pool(v, bl::Policy::WeightedRoundRobin);
    std::map<std::string, std::uint64_t> counts;
    for (std::uint64_t i = 0; i < m * total; ++i) ++counts[pool.wrr_select().id];
    for (const auto& inst : v) {
      if (counts[inst.id] != m * inst.weight) {
        return {false, fmt("trial %d: %s chosen %llu times, expected %llu", trial, inst.id.c_str(),
                           static_cast<unsigned long long>(counts[inst.id]),
                           static_cast<unsigned long long>(m * inst.weight))};
      }
    }
  }
  return {true, "200 weight vectors: counts equal m * w_i exactly"};
}

// 9
Verdict eviction_latency() {
  std::mt19937_64 rng(9);
  std::int64_t worst_slack = INT64_MAX;
  for (int trial = 0; trial < 100; ++trial) {
    resilsim::registry::ProbeSpec p;
    p.kind = rng() % 2 == 0 ? resilsim::registry::ProbeKind::Liveness : resilsim::registry::ProbeKind::Readiness;
    p.interval = Duration{static_cast<std::int64_t>(500 + rng() % 19501)};
    p.timeout = Duration{static_cast<std::int64_t>(1 + rng() % static_cast<std::uint64_t>(p.interval.count()))};
    p.failure_threshold = static_cast<std::uint32_t>(1 + rng() % 5);
    p.success_threshold = static_cast<std::uint32_t>(1 + rng() % 3);
    const std::int64_t fail_at = static_cast<std::int64_t>(rng() % 30000);
    const std::int64_t bound = p.interval.count() * p.failure_threshold + p.timeout.count();

    rs::Scenario s;
    s.name = "eviction";
    s.seed = static_cast<std::uint64_t>(trial);
    rs::ServiceSpec entry;
    entry.name = "booking";
    entry.weights = {1};
    entry.dependencies = {rs::Dependency{"flight-search", rb::FallbackKind::None, false}};
    rs::ServiceSpec fs;
    fs.name = "flight-search";
    fs.instances = 3;
    fs.weights = {1, 1, 1};
    fs.probes = {p};
    fs.fault.latency = {rs::LatencyDist::Uniform, 0, 5, 25, 0};
    rs::FaultModel dying = fs.fault;
    dying.outage_windows = {rs::Window{at_ms(fail_at), resilsim::kEndOfTime}};
    fs.instance_faults["flight-search-2"] = dying;
    s.services = {entry, fs};
    s.workload.entry = "booking";
    s.workload.process = rs::ArrivalProcess::Poisson;
    s.workload.rate_per_s = 50;
    s.workload.duration = Duration{fail_at + bound + 5000};

    const auto r = rs::run(s);
    std::optional<resilsim::TimePoint> detected;
    for (const auto& t : r.lifecycle) {
      if (t.instance_id == "flight-search-2" && t.from == resilsim::registry::Lifecycle::Ready) {
        detected = t.at;
        break;
      }
    }
    if (!detected) return {false, fmt("trial %d: never evicted", trial)};
    const std::int64_t latency = to_ms(*detected) - fail_at;
    if (latency < 0 || latency > bound) {
      return {false, fmt("trial %d: evicted %lld ms after failure, bound %lld", trial,
                         static_cast<long long>(latency), static_cast<long long>(bound))};
    }
    worst_slack = std::min(worst_slack, bound - latency);
    for (const auto& t : r.log.traces) {
      for (const auto& h : t.hops) {
        if (h.instance == "flight-search-2" && h.start >= *detected) {
          return {false, fmt("trial %d: dispatch at %lld after detection at %lld", trial,
                             static_cast<long long>(to_ms(h.start)), static_cast<long long>(to_ms(*detected)))};
        }
      }
    }
  }
  return {true, fmt("100 probe specs: evicted within interval * failure_threshold + timeout (min slack %lld ms), "
                    "no dispatch after detection",
                    static_cast<long long>(worst_slack))};
}

// 10
Verdict determinism() {
  for (auto name : {"payment_outage", "instance_churn", "peak_load", "travel_booking"}) {
    const auto s = canonical(name);
    const auto a = rs::run(s);
    const auto b = rs::run(s);
    if (rs::format_trace_log(a.log) != rs::format_trace_log(b.log)) return {false, fmt("%s: trace logs differ", name)};
    if (mt::to_json(a.report).dump() != mt::to_json(b.report).dump() ||
        mt::format_table(a.report) != mt::format_table(b.report)) {
      return {false, fmt("%s: reports differ", name)};
    }
  }
  return {true, "4 canonical scenarios: byte-identical trace logs and reports across two runs"};
}

// 11
Verdict exact_strings() {
  const std::string payment = "Payment service is unavailable at the moment. Please try again later.";
  const std::string unavailable = "Service Unavailable";
  const std::string none = "There are No available instances";
  bool ok = rb::payment_fallback() == payment && rb::fallback_body(rb::FallbackKind::Payment) == payment;
  const auto fs = rb::flight_search_fallback();
  ok = ok && fs.status == unavailable && fs.flights.empty();
  bl::Pool empty;
  try {
    empty.select();
    ok = false;
  } catch (const resilsim::NoAvailableInstances& e) {
    ok = ok && std::string(e.what()) == none;
  }
  return {ok, "payment fallback, flight-search fallback (empty list) and empty-pool message are exact"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"breaker state machine matches brute-force replay", breaker_oracle},
      {"cascade reduction, payment_outage", cascade_reduction},
      {"uptime with rerouting, instance_churn", churn_uptime},
      {"downtime reduction, instance_churn", churn_downtime},
      {"load-balancing p95 and throughput gain, peak_load", load_balancing_gain},
      {"concurrent-user headroom, peak_load", concurrent_headroom},
      {"round-robin evenness and modular order", rr_evenness},
      {"weighted round-robin proportionality", wrr_proportionality},
      {"eviction latency bound", eviction_latency},
      {"determinism of canonical runs", determinism},
      {"exact fallback and empty-pool strings", exact_strings},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s [%zu] %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
