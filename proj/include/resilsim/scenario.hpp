#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "resilsim/balance.hpp"
#include "resilsim/breaker.hpp"
#include "resilsim/fallback.hpp"
#include "resilsim/fault.hpp"
#include "resilsim/registry.hpp"
#include "resilsim/workload.hpp"

namespace resilsim::sim {

struct Dependency {
  std::string target;
  /// Degraded response returned when the caller's breaker denies or the call fails.
  breaker::FallbackKind fallback = breaker::FallbackKind::None;
  /// Best-effort call: awaited, but its outcome never fails the caller.
  bool optional = false;

  bool operator==(const Dependency&) const = default;
};

struct ServiceSpec {
  std::string name;
  std::uint32_t instances = 1;
  std::vector<std::uint32_t> weights;
  /// Guards every outbound dependency call of this service (one breaker per edge).
  std::optional<breaker::BreakerConfig> breaker;
  std::vector<registry::ProbeSpec> probes;
  std::vector<Dependency> dependencies;
  balance::Policy policy = balance::Policy::RoundRobin;
  /// Processing-time and failure model shared by the instances.
  FaultModel fault;
  /// Per-instance overrides, keyed by instance id.
  std::map<std::string, FaultModel> instance_faults;
  /// Concurrent calls an instance serves; further calls wait FIFO. A call
  /// that cannot start within the fault model's timeout is shed, and one
  /// that starts but cannot finish in time times out.
  std::optional<std::uint32_t> concurrency_cap;
  Duration restart_delay{5000};

  /// "<name>-<k>", k counting from 1 in registration order.
  std::string instance_id(std::size_t index) const;
  const FaultModel& fault_for(const std::string& instance_id) const;

  bool operator==(const ServiceSpec&) const = default;
};

struct ExternalSpec {
  std::string name;
  FaultModel fault;

  bool operator==(const ExternalSpec&) const = default;
};

struct Toggles {
  bool breaker_enabled = true;
  bool health_checks_enabled = true;

  bool operator==(const Toggles&) const = default;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  Toggles toggles;
  std::vector<ServiceSpec> services;
  std::vector<ExternalSpec> externals;
  WorkloadSpec workload;

  const ServiceSpec* service(std::string_view name) const;
  ServiceSpec* service(std::string_view name);
  const ExternalSpec* external(std::string_view name) const;

  bool operator==(const Scenario&) const = default;
};

/// Validates and fills defaults. Throws SchemaError (with a field path such
/// as "services[1].breaker.sleep_window_ms") or CycleError.
Scenario load_scenario(const nlohmann::json& document);
Scenario load_scenario_text(std::string_view text);
/// Throws std::system_error when the file cannot be read.
Scenario load_scenario_file(const std::filesystem::path& path);

/// Fully expanded document; load_scenario(to_json(s)) == s.
nlohmann::json to_json(const Scenario& scenario);

/// Hash of everything except seed and toggles, as 16 hex digits.
std::string scenario_hash(const Scenario& scenario);

}  // namespace resilsim::sim
