#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resilsim/errors.hpp"

namespace resilsim::balance {

inline constexpr std::string_view kNoAvailableInstances = "There are No available instances";

struct ServiceInstance {
  std::string id;
  std::string service;
  std::uint32_t weight = 1;
  std::int64_t active_connections = 0;
  bool healthy = true;

  bool operator==(const ServiceInstance&) const = default;
};

enum class Policy : std::uint8_t { RoundRobin, WeightedRoundRobin, LeastConnections, SessionAffinity };

std::string_view to_string(Policy policy);
std::optional<Policy> policy_from(std::string_view name);

/// Ordered, mutable instance set with per-policy selection state.
///
/// Every policy selects only among instances with healthy == true and
/// breaks ties by lowest registration index. Selection is linearizable:
/// each public call holds the pool lock for its whole duration.
class Pool {
 public:
  explicit Pool(Policy policy = Policy::RoundRobin) : policy_(policy) {}
  explicit Pool(std::vector<ServiceInstance> instances, Policy policy = Policy::RoundRobin);

  Pool(const Pool& other);
  Pool& operator=(const Pool& other);

  /// Cyclic pool order over healthy instances.
  ServiceInstance rr_select();
  /// Smooth weighted round-robin.
  ServiceInstance wrr_select();
  /// Minimal active_connections, lowest index on ties.
  ServiceInstance lc_select();
  /// Sticky mapping from session key, assigned by round-robin on first use
  /// or when the pinned instance is gone or unhealthy.
  ServiceInstance affinity_select(std::string_view session_key);

  /// Dispatches on the configured policy; `session_key` is only consulted
  /// by SessionAffinity.
  ServiceInstance select(std::string_view session_key = {});

  std::int64_t lc_acquire(std::string_view id);
  std::int64_t lc_release(std::string_view id);

  /// Removals are applied before additions. Validation happens up front, so
  /// a throwing update leaves the pool unchanged.
  void update(const std::vector<ServiceInstance>& add, const std::vector<std::string>& remove);

  /// Health is written by the registry, read by the selection policies.
  void set_healthy(std::string_view id, bool healthy);

  Policy policy() const;
  void set_policy(Policy policy);

  std::vector<ServiceInstance> instances() const;
  std::size_t size() const;
  std::size_t cursor() const;
  std::optional<std::string> affinity_of(std::string_view session_key) const;
  std::vector<std::int64_t> wrr_accumulators() const;

 private:
  std::size_t index_of(std::string_view id) const;  // npos when absent
  std::size_t rr_locked();
  std::size_t wrr_locked();
  std::size_t lc_locked();

  mutable std::mutex mu_;
  Policy policy_;
  std::vector<ServiceInstance> instances_;
  std::vector<std::int64_t> wrr_current_;
  std::size_t cursor_ = 0;
  std::map<std::string, std::string, std::less<>> affinity_;
};

/// Free-function spellings of the pool operations.
inline ServiceInstance rr_select(Pool& pool) { return pool.rr_select(); }
inline ServiceInstance wrr_select(Pool& pool) { return pool.wrr_select(); }
inline ServiceInstance lc_select(Pool& pool) { return pool.lc_select(); }
inline ServiceInstance affinity_select(Pool& pool, std::string_view key) {
  return pool.affinity_select(key);
}
inline std::int64_t lc_acquire(Pool& pool, std::string_view id) { return pool.lc_acquire(id); }
inline std::int64_t lc_release(Pool& pool, std::string_view id) { return pool.lc_release(id); }
inline Pool& pool_update(Pool& pool, const std::vector<ServiceInstance>& add,
                         const std::vector<std::string>& remove) {
  pool.update(add, remove);
  return pool;
}

}  // namespace resilsim::balance
