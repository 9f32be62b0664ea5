#include "resilsim/balance.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

namespace resilsim {

NoAvailableInstances::NoAvailableInstances() : Error(std::string(balance::kNoAvailableInstances)) {}

}  // namespace resilsim

namespace resilsim::balance {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

}  // namespace

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::RoundRobin:
      return "round_robin";
    case Policy::WeightedRoundRobin:
      return "weighted_round_robin";
    case Policy::LeastConnections:
      return "least_connections";
    case Policy::SessionAffinity:
      return "session_affinity";
  }
  return "round_robin";
}

std::optional<Policy> policy_from(std::string_view name) {
  for (auto p : {Policy::RoundRobin, Policy::WeightedRoundRobin, Policy::LeastConnections,
                 Policy::SessionAffinity}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

Pool::Pool(std::vector<ServiceInstance> instances, Policy policy) : policy_(policy) {
  update(instances, {});
}

Pool::Pool(const Pool& other) {
  std::lock_guard lock(other.mu_);
  policy_ = other.policy_;
  instances_ = other.instances_;
  wrr_current_ = other.wrr_current_;
  cursor_ = other.cursor_;
  affinity_ = other.affinity_;
}

Pool& Pool::operator=(const Pool& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  policy_ = other.policy_;
  instances_ = other.instances_;
  wrr_current_ = other.wrr_current_;
  cursor_ = other.cursor_;
  affinity_ = other.affinity_;
  return *this;
}

std::size_t Pool::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (instances_[i].id == id) return i;
  }
  return npos;
}

// The cursor indexes the full registration-ordered list; unhealthy entries
// are skipped in place so the healthy subsequence keeps its cyclic order.
std::size_t Pool::rr_locked() {
  const std::size_t n = instances_.size();
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = (cursor_ + step) % n;
    if (instances_[i].healthy) {
      cursor_ = (i + 1) % n;
      return i;
    }
  }
  throw NoAvailableInstances();
}

std::size_t Pool::wrr_locked() {
  std::int64_t total = 0;
  std::size_t best = npos;
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (!instances_[i].healthy) continue;
    wrr_current_[i] += instances_[i].weight;
    total += instances_[i].weight;
    if (best == npos || wrr_current_[i] > wrr_current_[best]) best = i;
  }
  if (best == npos) throw NoAvailableInstances();
  wrr_current_[best] -= total;
  return best;
}

std::size_t Pool::lc_locked() {
  std::size_t best = npos;
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (!instances_[i].healthy) continue;
    if (best == npos || instances_[i].active_connections < instances_[best].active_connections) {
      best = i;
    }
  }
  if (best == npos) throw NoAvailableInstances();
  return best;
}

ServiceInstance Pool::rr_select() {
  std::lock_guard lock(mu_);
  return instances_[rr_locked()];
}

ServiceInstance Pool::wrr_select() {
  std::lock_guard lock(mu_);
  return instances_[wrr_locked()];
}

ServiceInstance Pool::lc_select() {
  std::lock_guard lock(mu_);
  return instances_[lc_locked()];
}

ServiceInstance Pool::affinity_select(std::string_view session_key) {
  std::lock_guard lock(mu_);
  if (auto it = affinity_.find(session_key); it != affinity_.end()) {
    const std::size_t i = index_of(it->second);
    if (i != npos && instances_[i].healthy) return instances_[i];
  }
  const std::size_t chosen = rr_locked();
  affinity_.insert_or_assign(std::string(session_key), instances_[chosen].id);
  return instances_[chosen];
}

ServiceInstance Pool::select(std::string_view session_key) {
  switch (policy()) {
    case Policy::RoundRobin:
      return rr_select();
    case Policy::WeightedRoundRobin:
      return wrr_select();
    case Policy::LeastConnections:
      return lc_select();
    case Policy::SessionAffinity:
      return affinity_select(session_key);
  }
  return rr_select();
}

std::int64_t Pool::lc_acquire(std::string_view id) {
  std::lock_guard lock(mu_);
  const std::size_t i = index_of(id);
  if (i == npos) throw UnknownInstance(std::string(id));
  return ++instances_[i].active_connections;
}

std::int64_t Pool::lc_release(std::string_view id) {
  std::lock_guard lock(mu_);
  const std::size_t i = index_of(id);
  if (i == npos) throw UnknownInstance(std::string(id));
  if (instances_[i].active_connections == 0) throw NegativeCount(std::string(id));
  return --instances_[i].active_connections;
}

void Pool::update(const std::vector<ServiceInstance>& add, const std::vector<std::string>& remove) {
  std::lock_guard lock(mu_);

  std::set<std::string, std::less<>> removing;
  for (const auto& id : remove) {
    if (index_of(id) == npos || !removing.insert(id).second) throw UnknownInstance(id);
  }
  std::set<std::string, std::less<>> ids;
  for (const auto& inst : instances_) {
    if (!removing.contains(inst.id)) ids.insert(inst.id);
  }
  for (const auto& inst : add) {
    if (inst.weight < 1) throw InvalidConfig("instance " + inst.id + ": weight must be >= 1");
    if (!ids.insert(inst.id).second) throw DuplicateId(inst.id);
  }

  // Successor-preserving rebase: entries before the cursor shift it left; a
  // removed entry at the cursor leaves the cursor on its successor.
  std::size_t removed_before_cursor = 0;
  std::vector<ServiceInstance> kept;
  std::vector<std::int64_t> kept_wrr;
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (removing.contains(instances_[i].id)) {
      if (i < cursor_) ++removed_before_cursor;
      continue;
    }
    kept.push_back(std::move(instances_[i]));
    kept_wrr.push_back(wrr_current_[i]);
  }
  cursor_ -= removed_before_cursor;
  if (cursor_ >= kept.size()) cursor_ = 0;

  for (auto it = affinity_.begin(); it != affinity_.end();) {
    it = removing.contains(it->second) ? affinity_.erase(it) : std::next(it);
  }

  for (const auto& inst : add) {
    kept.push_back(inst);
    kept_wrr.push_back(0);
  }
  instances_ = std::move(kept);
  wrr_current_ = std::move(kept_wrr);
}

void Pool::set_healthy(std::string_view id, bool healthy) {
  std::lock_guard lock(mu_);
  const std::size_t i = index_of(id);
  if (i == npos) throw UnknownInstance(std::string(id));
  instances_[i].healthy = healthy;
}

Policy Pool::policy() const {
  std::lock_guard lock(mu_);
  return policy_;
}

void Pool::set_policy(Policy policy) {
  std::lock_guard lock(mu_);
  policy_ = policy;
}

std::vector<ServiceInstance> Pool::instances() const {
  std::lock_guard lock(mu_);
  return instances_;
}

std::size_t Pool::size() const {
  std::lock_guard lock(mu_);
  return instances_.size();
}

std::size_t Pool::cursor() const {
  std::lock_guard lock(mu_);
  return cursor_;
}

std::optional<std::string> Pool::affinity_of(std::string_view session_key) const {
  std::lock_guard lock(mu_);
  if (auto it = affinity_.find(session_key); it != affinity_.end()) return it->second;
  return std::nullopt;
}

std::vector<std::int64_t> Pool::wrr_accumulators() const {
  std::lock_guard lock(mu_);
  return wrr_current_;
}

}  // namespace resilsim::balance
