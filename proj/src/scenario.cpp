#include "resilsim/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <system_error>

#include "resilsim/rng.hpp"

namespace resilsim::sim {

using nlohmann::json;

std::string ServiceSpec::instance_id(std::size_t index) const {
  return name + "-" + std::to_string(index + 1);
}

const FaultModel& ServiceSpec::fault_for(const std::string& id) const {
  if (auto it = instance_faults.find(id); it != instance_faults.end()) return it->second;
  return fault;
}

const ServiceSpec* Scenario::service(std::string_view n) const {
  auto it = std::find_if(services.begin(), services.end(),
                         [n](const ServiceSpec& s) { return s.name == n; });
  return it == services.end() ? nullptr : &*it;
}

ServiceSpec* Scenario::service(std::string_view n) {
  return const_cast<ServiceSpec*>(std::as_const(*this).service(n));
}

const ExternalSpec* Scenario::external(std::string_view n) const {
  auto it = std::find_if(externals.begin(), externals.end(),
                         [n](const ExternalSpec& e) { return e.name == n; });
  return it == externals.end() ? nullptr : &*it;
}

namespace {

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "$" : path, "expected an object");
}

void check_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw SchemaError(join(path, key), "unknown field");
    }
  }
}

const json* field(const json& j, std::string_view key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

std::int64_t read_int(const json& j, std::string_view key, const std::string& path,
                      std::int64_t fallback, std::int64_t min_value) {
  const json* v = field(j, key);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer()) throw SchemaError(join(path, key), "expected an integer");
  const std::int64_t x = v->get<std::int64_t>();
  if (x < min_value) {
    throw SchemaError(join(path, key), "must be >= " + std::to_string(min_value));
  }
  return x;
}

std::uint64_t read_u64(const json& j, std::string_view key, const std::string& path,
                       std::uint64_t fallback) {
  const json* v = field(j, key);
  if (v == nullptr) return fallback;
  if (!v->is_number_unsigned()) throw SchemaError(join(path, key), "expected a non-negative integer");
  return v->get<std::uint64_t>();
}

double read_double(const json& j, std::string_view key, const std::string& path, double fallback) {
  const json* v = field(j, key);
  if (v == nullptr) return fallback;
  if (!v->is_number()) throw SchemaError(join(path, key), "expected a number");
  return v->get<double>();
}

bool read_bool(const json& j, std::string_view key, const std::string& path, bool fallback) {
  const json* v = field(j, key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) throw SchemaError(join(path, key), "expected a boolean");
  return v->get<bool>();
}

std::string read_string(const json& j, std::string_view key, const std::string& path,
                        std::optional<std::string> fallback) {
  const json* v = field(j, key);
  if (v == nullptr) {
    if (!fallback) throw SchemaError(join(path, key), "required field missing");
    return *fallback;
  }
  if (!v->is_string()) throw SchemaError(join(path, key), "expected a string");
  return v->get<std::string>();
}

std::vector<Window> read_windows(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of windows");
  std::vector<Window> windows;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = index(path, i);
    expect_object(j[i], p);
    check_keys(j[i], p, {"start_ms", "end_ms"});
    if (!j[i].contains("start_ms")) throw SchemaError(join(p, "start_ms"), "required field missing");
    Window w;
    w.start = at_ms(read_int(j[i], "start_ms", p, 0, 0));
    const json* end = field(j[i], "end_ms");
    if (end != nullptr && !end->is_null()) w.end = at_ms(read_int(j[i], "end_ms", p, 0, 0));
    windows.push_back(w);
  }
  try {
    validate_windows(windows);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path, e.what());
  }
  return windows;
}

LatencySpec read_latency(const json& j, const std::string& path) {
  expect_object(j, path);
  LatencySpec l;
  const std::string dist = read_string(j, "dist", path, std::string("fixed"));
  if (dist == "fixed") {
    check_keys(j, path, {"dist", "ms"});
    l.dist = LatencyDist::Fixed;
    l.fixed_ms = read_double(j, "ms", path, 10.0);
  } else if (dist == "uniform") {
    check_keys(j, path, {"dist", "lo_ms", "hi_ms"});
    l.dist = LatencyDist::Uniform;
    l.lo_ms = read_double(j, "lo_ms", path, 0.0);
    l.hi_ms = read_double(j, "hi_ms", path, 0.0);
  } else if (dist == "exponential") {
    check_keys(j, path, {"dist", "mean_ms"});
    l.dist = LatencyDist::Exponential;
    l.mean_ms = read_double(j, "mean_ms", path, 0.0);
  } else {
    throw SchemaError(join(path, "dist"), "unknown latency distribution '" + dist + "'");
  }
  return l;
}

FaultModel read_fault(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"outages", "unhealthy", "error_rate", "latency", "timeout_ms"});
  FaultModel m;
  if (const json* v = field(j, "outages")) m.outage_windows = read_windows(*v, join(path, "outages"));
  if (const json* v = field(j, "unhealthy")) m.unhealthy_windows = read_windows(*v, join(path, "unhealthy"));
  m.error_rate = read_double(j, "error_rate", path, 0.0);
  if (const json* v = field(j, "latency")) m.latency = read_latency(*v, join(path, "latency"));
  m.timeout_after = Duration{read_int(j, "timeout_ms", path, 2000, 1)};
  try {
    validate(m);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path, e.what());
  }
  return m;
}

breaker::BreakerConfig read_breaker(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"request_volume_threshold", "error_threshold_pct", "sleep_window_ms",
                       "half_open_trials", "window_length_ms", "window_buckets"});
  breaker::BreakerConfig c;
  c.request_volume_threshold = static_cast<std::uint32_t>(
      read_int(j, "request_volume_threshold", path, c.request_volume_threshold, 1));
  c.error_threshold_pct = read_double(j, "error_threshold_pct", path, c.error_threshold_pct);
  c.sleep_window = Duration{read_int(j, "sleep_window_ms", path, c.sleep_window.count(), 1)};
  c.half_open_trials =
      static_cast<std::uint32_t>(read_int(j, "half_open_trials", path, c.half_open_trials, 1));
  c.window_length = Duration{read_int(j, "window_length_ms", path, c.window_length.count(), 1)};
  c.window_buckets =
      static_cast<std::uint32_t>(read_int(j, "window_buckets", path, c.window_buckets, 1));
  try {
    breaker::validate(c);
  } catch (const InvalidConfig& e) {
    throw SchemaError(path, e.what());
  }
  return c;
}

registry::ProbeSpec read_probe(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"kind", "interval_ms", "timeout_ms", "failure_threshold", "success_threshold"});
  registry::ProbeSpec p;
  const std::string kind = read_string(j, "kind", path, std::nullopt);
  auto k = registry::probe_kind_from(kind);
  if (!k) throw SchemaError(join(path, "kind"), "unknown probe kind '" + kind + "'");
  p.kind = *k;
  p.interval = Duration{read_int(j, "interval_ms", path, p.interval.count(), 1)};
  p.timeout = Duration{read_int(j, "timeout_ms", path, p.timeout.count(), 1)};
  p.failure_threshold =
      static_cast<std::uint32_t>(read_int(j, "failure_threshold", path, p.failure_threshold, 1));
  p.success_threshold =
      static_cast<std::uint32_t>(read_int(j, "success_threshold", path, p.success_threshold, 1));
  try {
    registry::validate(p);
  } catch (const InvalidConfig& e) {
    throw SchemaError(path, e.what());
  }
  return p;
}

Dependency read_dependency(const json& j, const std::string& path) {
  if (j.is_string()) return Dependency{j.get<std::string>(), breaker::FallbackKind::None, false};
  expect_object(j, path);
  check_keys(j, path, {"target", "fallback", "optional"});
  Dependency d;
  d.target = read_string(j, "target", path, std::nullopt);
  const std::string fb = read_string(j, "fallback", path, std::string("none"));
  try {
    d.fallback = breaker::fallback_kind_from(fb);
  } catch (const std::invalid_argument&) {
    throw SchemaError(join(path, "fallback"), "unknown fallback '" + fb + "'");
  }
  d.optional = read_bool(j, "optional", path, false);
  return d;
}

ServiceSpec read_service(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"name", "instances", "weights", "breaker", "probes", "dependencies", "fault",
                       "instance_faults", "concurrency_cap", "restart_delay_ms"});
  ServiceSpec s;
  s.name = read_string(j, "name", path, std::nullopt);
  if (s.name.empty()) throw SchemaError(join(path, "name"), "must not be empty");
  s.instances = static_cast<std::uint32_t>(read_int(j, "instances", path, 1, 1));

  if (const json* w = field(j, "weights")) {
    const std::string p = join(path, "weights");
    if (!w->is_array()) throw SchemaError(p, "expected an array");
    if (w->size() != s.instances) throw SchemaError(p, "length must equal instances");
    for (std::size_t i = 0; i < w->size(); ++i) {
      if (!(*w)[i].is_number_integer() || (*w)[i].get<std::int64_t>() < 1) {
        throw SchemaError(index(p, i), "weight must be an integer >= 1");
      }
      s.weights.push_back((*w)[i].get<std::uint32_t>());
    }
  } else {
    s.weights.assign(s.instances, 1);
  }

  const json* b = field(j, "breaker");
  if (b == nullptr) {
    s.breaker = breaker::BreakerConfig::payment_defaults();
  } else if (!b->is_null()) {
    s.breaker = read_breaker(*b, join(path, "breaker"));
  }

  if (const json* p = field(j, "probes")) {
    const std::string pp = join(path, "probes");
    if (!p->is_array()) throw SchemaError(pp, "expected an array");
    std::set<registry::ProbeKind> kinds;
    for (std::size_t i = 0; i < p->size(); ++i) {
      auto probe = read_probe((*p)[i], index(pp, i));
      if (!kinds.insert(probe.kind).second) throw SchemaError(index(pp, i), "duplicate probe kind");
      s.probes.push_back(probe);
    }
  } else {
    s.probes.push_back(registry::ProbeSpec{});
  }

  if (const json* d = field(j, "dependencies")) {
    const std::string dp = join(path, "dependencies");
    if (!d->is_array()) throw SchemaError(dp, "expected an array");
    for (std::size_t i = 0; i < d->size(); ++i) s.dependencies.push_back(read_dependency((*d)[i], index(dp, i)));
  }

  json base_fault = json::object();
  if (const json* f = field(j, "fault")) {
    s.fault = read_fault(*f, join(path, "fault"));
    base_fault = *f;
  }
  if (const json* f = field(j, "instance_faults")) {
    const std::string fp = join(path, "instance_faults");
    expect_object(*f, fp);
    for (const auto& [id, model] : f->items()) {
      bool known = false;
      for (std::uint32_t i = 0; i < s.instances; ++i) known = known || s.instance_id(i) == id;
      if (!known) throw SchemaError(join(fp, id), "no such instance");
      expect_object(model, join(fp, id));
      json merged = base_fault;
      merged.update(model);
      s.instance_faults.emplace(id, read_fault(merged, join(fp, id)));
    }
  }

  if (const json* c = field(j, "concurrency_cap"); c != nullptr && !c->is_null()) {
    s.concurrency_cap = static_cast<std::uint32_t>(read_int(j, "concurrency_cap", path, 1, 1));
  }
  s.restart_delay = Duration{read_int(j, "restart_delay_ms", path, 5000, 0)};
  return s;
}

WorkloadSpec read_workload(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"entry", "arrival", "rate_per_s", "duration_ms", "arrivals_ms", "sessions"});
  WorkloadSpec w;
  w.entry = read_string(j, "entry", path, std::string());
  const std::string arrival = read_string(j, "arrival", path, std::string("fixed"));
  if (arrival == "fixed") {
    w.process = ArrivalProcess::Fixed;
  } else if (arrival == "poisson") {
    w.process = ArrivalProcess::Poisson;
  } else if (arrival == "explicit") {
    w.process = ArrivalProcess::Explicit;
  } else {
    throw SchemaError(join(path, "arrival"), "unknown arrival process '" + arrival + "'");
  }
  w.rate_per_s = read_double(j, "rate_per_s", path, 0.0);
  if (w.rate_per_s < 0.0) throw SchemaError(join(path, "rate_per_s"), "must be >= 0");
  w.duration = Duration{read_int(j, "duration_ms", path, 60000, 0)};
  if (const json* a = field(j, "arrivals_ms")) {
    const std::string ap = join(path, "arrivals_ms");
    if (!a->is_array()) throw SchemaError(ap, "expected an array");
    for (std::size_t i = 0; i < a->size(); ++i) {
      if (!(*a)[i].is_number_integer() || (*a)[i].get<std::int64_t>() < 0) {
        throw SchemaError(index(ap, i), "expected a non-negative integer");
      }
      w.explicit_arrivals.push_back(at_ms((*a)[i].get<std::int64_t>()));
    }
  }
  if (w.process == ArrivalProcess::Explicit && field(j, "arrivals_ms") == nullptr) {
    throw SchemaError(join(path, "arrivals_ms"), "required for explicit arrivals");
  }
  w.session_keys = static_cast<std::uint32_t>(read_int(j, "sessions", path, 0, 0));
  return w;
}

void check_acyclic(const Scenario& s) {
  enum class Mark { White, Grey, Black };
  std::map<std::string, Mark> mark;
  std::vector<std::string> stack;

  std::function<void(const ServiceSpec&)> visit = [&](const ServiceSpec& svc) {
    mark[svc.name] = Mark::Grey;
    stack.push_back(svc.name);
    for (const auto& dep : svc.dependencies) {
      const ServiceSpec* next = s.service(dep.target);
      if (next == nullptr) continue;  // externals are leaves
      const Mark m = mark[next->name];
      if (m == Mark::Grey) {
        auto from = std::find(stack.begin(), stack.end(), next->name);
        std::string cycle;
        for (auto it = from; it != stack.end(); ++it) cycle += *it + " -> ";
        throw CycleError("dependency cycle: " + cycle + next->name);
      }
      if (m == Mark::White) visit(*next);
    }
    stack.pop_back();
    mark[svc.name] = Mark::Black;
  };
  for (const auto& svc : s.services) {
    if (mark[svc.name] == Mark::White) visit(svc);
  }
}

json windows_json(const std::vector<Window>& windows) {
  json a = json::array();
  for (const auto& w : windows) {
    json o{{"start_ms", to_ms(w.start)}};
    o["end_ms"] = w.end == kEndOfTime ? json(nullptr) : json(to_ms(w.end));
    a.push_back(o);
  }
  return a;
}

json fault_json(const FaultModel& m) {
  json l{{"dist", std::string(to_string(m.latency.dist))}};
  switch (m.latency.dist) {
    case LatencyDist::Fixed:
      l["ms"] = m.latency.fixed_ms;
      break;
    case LatencyDist::Uniform:
      l["lo_ms"] = m.latency.lo_ms;
      l["hi_ms"] = m.latency.hi_ms;
      break;
    case LatencyDist::Exponential:
      l["mean_ms"] = m.latency.mean_ms;
      break;
  }
  json f{{"outages", windows_json(m.outage_windows)},
         {"error_rate", m.error_rate},
         {"latency", l},
         {"timeout_ms", m.timeout_after.count()}};
  if (m.unhealthy_windows) f["unhealthy"] = windows_json(*m.unhealthy_windows);
  return f;
}

}  // namespace

Scenario load_scenario(const json& doc) {
  expect_object(doc, "");
  check_keys(doc, "", {"name", "description", "seed", "toggles", "policy", "services", "externals", "workload"});

  Scenario s;
  s.name = read_string(doc, "name", "", std::string());
  s.seed = read_u64(doc, "seed", "", 0);

  if (const json* t = field(doc, "toggles")) {
    expect_object(*t, "toggles");
    check_keys(*t, "toggles", {"breaker_enabled", "health_checks_enabled"});
    s.toggles.breaker_enabled = read_bool(*t, "breaker_enabled", "toggles", true);
    s.toggles.health_checks_enabled = read_bool(*t, "health_checks_enabled", "toggles", true);
  }

  const json* services = field(doc, "services");
  if (services == nullptr) throw SchemaError("services", "required field missing");
  if (!services->is_array() || services->empty()) throw SchemaError("services", "expected a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < services->size(); ++i) {
    s.services.push_back(read_service((*services)[i], index("services", i)));
    if (!names.insert(s.services.back().name).second) {
      throw SchemaError(index("services", i) + ".name", "duplicate name '" + s.services.back().name + "'");
    }
  }

  if (const json* ext = field(doc, "externals")) {
    if (!ext->is_array()) throw SchemaError("externals", "expected an array");
    for (std::size_t i = 0; i < ext->size(); ++i) {
      const std::string p = index("externals", i);
      expect_object((*ext)[i], p);
      check_keys((*ext)[i], p, {"name", "fault"});
      ExternalSpec e;
      e.name = read_string((*ext)[i], "name", p, std::nullopt);
      if (const json* f = field((*ext)[i], "fault")) e.fault = read_fault(*f, p + ".fault");
      if (!names.insert(e.name).second) throw SchemaError(p + ".name", "duplicate name '" + e.name + "'");
      s.externals.push_back(std::move(e));
    }
  }

  for (std::size_t i = 0; i < s.services.size(); ++i) {
    const auto& svc = s.services[i];
    for (std::size_t k = 0; k < svc.dependencies.size(); ++k) {
      const auto& target = svc.dependencies[k].target;
      const std::string p = index(index("services", i) + ".dependencies", k) + ".target";
      if (!names.contains(target)) throw SchemaError(p, "unknown service or external '" + target + "'");
      if (target == svc.name) throw CycleError("dependency cycle: " + svc.name + " -> " + svc.name);
    }
  }

  if (const json* p = field(doc, "policy")) {
    expect_object(*p, "policy");
    for (const auto& [svc, value] : p->items()) {
      ServiceSpec* target = s.service(svc);
      if (target == nullptr) throw SchemaError("policy." + svc, "unknown service");
      if (!value.is_string()) throw SchemaError("policy." + svc, "expected a policy name");
      auto policy = balance::policy_from(value.get<std::string>());
      if (!policy) throw SchemaError("policy." + svc, "unknown policy '" + value.get<std::string>() + "'");
      target->policy = *policy;
    }
  }

  if (const json* w = field(doc, "workload")) {
    s.workload = read_workload(*w, "workload");
  }
  if (s.workload.entry.empty()) s.workload.entry = s.services.front().name;
  if (s.service(s.workload.entry) == nullptr) {
    throw SchemaError("workload.entry", "unknown service '" + s.workload.entry + "'");
  }

  check_acyclic(s);
  return s;
}

Scenario load_scenario_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("malformed document: ") + e.what());
  }
  return load_scenario(doc);
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                            path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario_text(buf.str());
}

json to_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["seed"] = s.seed;
  doc["toggles"] = {{"breaker_enabled", s.toggles.breaker_enabled},
                    {"health_checks_enabled", s.toggles.health_checks_enabled}};
  json policy = json::object();
  json services = json::array();
  for (const auto& svc : s.services) {
    policy[svc.name] = std::string(balance::to_string(svc.policy));
    json o{{"name", svc.name}, {"instances", svc.instances}, {"weights", svc.weights}};
    if (svc.breaker) {
      const auto& c = *svc.breaker;
      o["breaker"] = {{"request_volume_threshold", c.request_volume_threshold},
                      {"error_threshold_pct", c.error_threshold_pct},
                      {"sleep_window_ms", c.sleep_window.count()},
                      {"half_open_trials", c.half_open_trials},
                      {"window_length_ms", c.window_length.count()},
                      {"window_buckets", c.window_buckets}};
    } else {
      o["breaker"] = nullptr;
    }
    json probes = json::array();
    for (const auto& p : svc.probes) {
      probes.push_back({{"kind", std::string(registry::to_string(p.kind))},
                        {"interval_ms", p.interval.count()},
                        {"timeout_ms", p.timeout.count()},
                        {"failure_threshold", p.failure_threshold},
                        {"success_threshold", p.success_threshold}});
    }
    o["probes"] = probes;
    json deps = json::array();
    for (const auto& d : svc.dependencies) {
      deps.push_back({{"target", d.target},
                      {"fallback", std::string(breaker::to_string(d.fallback))},
                      {"optional", d.optional}});
    }
    o["dependencies"] = deps;
    o["fault"] = fault_json(svc.fault);
    json inst = json::object();
    for (const auto& [id, m] : svc.instance_faults) inst[id] = fault_json(m);
    o["instance_faults"] = inst;
    o["concurrency_cap"] = svc.concurrency_cap ? json(*svc.concurrency_cap) : json(nullptr);
    o["restart_delay_ms"] = svc.restart_delay.count();
    services.push_back(o);
  }
  doc["services"] = services;
  doc["policy"] = policy;
  json externals = json::array();
  for (const auto& e : s.externals) externals.push_back({{"name", e.name}, {"fault", fault_json(e.fault)}});
  doc["externals"] = externals;

  const auto& w = s.workload;
  json workload{{"entry", w.entry},
                {"arrival", std::string(to_string(w.process))},
                {"rate_per_s", w.rate_per_s},
                {"duration_ms", w.duration.count()},
                {"sessions", w.session_keys}};
  if (w.process == ArrivalProcess::Explicit) {
    json a = json::array();
    for (auto t : w.explicit_arrivals) a.push_back(to_ms(t));
    workload["arrivals_ms"] = a;
  }
  doc["workload"] = workload;
  return doc;
}

std::string scenario_hash(const Scenario& s) {
  json doc = to_json(s);
  doc.erase("toggles");
  doc.erase("seed");
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return hex;
}

}  // namespace resilsim::sim
