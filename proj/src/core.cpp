#include "coinfer/core.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace coinfer {

std::string to_string(Role r) {
  switch (r) {
    case Role::Client: return "client";
    case Role::Idle: return "idle";
    case Role::Server: return "server";
  }
  return "client";
}

Role role_from_string(const std::string& s) {
  if (s == "client") return Role::Client;
  if (s == "idle") return Role::Idle;
  if (s == "server") return Role::Server;
  throw ConfigError("unknown role: " + s);
}

std::string Scheme::key() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [id, strat] : assignment) {
    if (!first) os << ',';
    os << id << '=' << strat.tag();
    first = false;
  }
  for (const auto& id : idle_helpers) os << ",+" << id;
  return os.str();
}

double NetworkState::bandwidth_for(const std::string& device_id, double t_ms) const {
  if (!trace.empty() && t_ms >= trace.front().t_ms) {
    double bw = trace.front().bandwidth_mbps;
    for (const auto& p : trace) {
      if (p.t_ms <= t_ms) bw = p.bandwidth_mbps;
      else break;
    }
    return bw;
  }
  auto it = bandwidth_mbps.find(device_id);
  if (it != bandwidth_mbps.end()) return it->second;
  return default_bandwidth_mbps;
}

std::vector<const DeviceProfile*> SystemConfig::clients() const {
  std::vector<const DeviceProfile*> out;
  for (const auto& d : devices)
    if (d.role == Role::Client) out.push_back(&d);
  return out;
}

std::vector<const DeviceProfile*> SystemConfig::idles() const {
  std::vector<const DeviceProfile*> out;
  for (const auto& d : devices)
    if (d.role == Role::Idle) out.push_back(&d);
  return out;
}

const DeviceProfile* SystemConfig::server() const {
  for (const auto& d : devices)
    if (d.role == Role::Server) return &d;
  return nullptr;
}

const DeviceProfile* SystemConfig::find_device(const std::string& id) const {
  for (const auto& d : devices)
    if (d.device_id == id) return &d;
  return nullptr;
}

bool strategy_valid_for(const Strategy& s, const ModelProfile& model) {
  return s.is_dp() || (s.split >= 0 && s.split <= model.n_layers);
}

std::vector<std::string> validate_config(const SystemConfig& config) {
  std::vector<std::string> errors;
  std::set<std::string> seen;
  int servers = 0;
  for (const auto& d : config.devices) {
    if (!seen.insert(d.device_id).second)
      errors.push_back("duplicate device_id: " + d.device_id);
    if (d.role == Role::Server) ++servers;
  }
  if (servers == 0) errors.push_back("no server device");
  if (servers > 1) errors.push_back("more than one server device");

  for (const auto& d : config.devices) {
    if (d.role != Role::Client) continue;
    auto it = config.models.find(d.device_id);
    if (it == config.models.end()) {
      errors.push_back("missing model for client device: " + d.device_id);
      continue;
    }
    const auto& m = it->second;
    if (m.n_layers < 1)
      errors.push_back("model " + m.model_id + ": n_layers must be positive");
    if (m.boundary_volumes.size() != static_cast<std::size_t>(m.n_layers) + 1)
      errors.push_back("model " + m.model_id + ": boundary_volumes length must be n_layers + 1");
    for (auto v : m.boundary_volumes)
      if (v == 0) {
        errors.push_back("model " + m.model_id + ": all volumes must be > 0");
        break;
      }
    double bw = config.network.bandwidth_for(d.device_id);
    if (bw <= 0)
      errors.push_back("bandwidth must be positive for device: " + d.device_id);
  }
  if (config.network.per_message_overhead_ms < 0)
    errors.push_back("per_message_overhead_ms must be >= 0");
  if (config.batch_policy.max_batch < 1)
    errors.push_back("batch_policy.max_batch must be >= 1");
  if (config.batch_policy.window_ms < 0)
    errors.push_back("batch_policy.window_ms must be >= 0");
  if (config.worker_count < 1)
    errors.push_back("worker_count must be >= 1");
  return errors;
}

void throw_if_invalid(const SystemConfig& config) {
  auto errs = validate_config(config);
  if (errs.empty()) return;
  std::ostringstream os;
  os << "invalid config:";
  for (const auto& e : errs) os << "\n  - " << e;
  throw ConfigError(os.str());
}

json to_json(const DeviceProfile& d) {
  return json{{"device_id", d.device_id}, {"kind", d.kind}, {"role", to_string(d.role)}};
}

DeviceProfile device_from_json(const json& j) {
  return DeviceProfile{j.at("device_id").get<std::string>(), j.at("kind").get<std::string>(),
                       role_from_string(j.at("role").get<std::string>())};
}

json to_json(const ModelProfile& m) {
  return json{{"model_id", m.model_id},
              {"n_layers", m.n_layers},
              {"boundary_volumes", m.boundary_volumes},
              {"task", m.task}};
}

ModelProfile model_from_json(const json& j) {
  ModelProfile m;
  m.model_id = j.at("model_id").get<std::string>();
  m.n_layers = j.at("n_layers").get<int>();
  m.boundary_volumes = j.at("boundary_volumes").get<std::vector<std::uint64_t>>();
  m.task = j.value("task", "");
  return m;
}

json to_json(const Strategy& s) {
  if (s.is_dp()) return json{{"kind", "dp"}};
  return json{{"kind", "pp"}, {"split", s.split}};
}

Strategy strategy_from_json(const json& j) {
  if (j.is_string()) {  // compact "dp" / "pp:2" form, as emitted in logs
    std::string s = j.get<std::string>();
    if (s == "dp") return Strategy::dp();
    if (s.rfind("pp:", 0) == 0) return Strategy::pp(std::stoi(s.substr(3)));
    throw ConfigError("unknown strategy tag: " + s);
  }
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "dp") return Strategy::dp();
  if (kind == "pp") return Strategy::pp(j.at("split").get<int>());
  throw ConfigError("unknown strategy kind: " + kind);
}

json to_json(const Scheme& s) {
  json assignment = json::object();
  for (const auto& [id, strat] : s.assignment) assignment[id] = to_json(strat);
  return json{{"assignment", assignment}, {"idle_helpers", s.idle_helpers}};
}

Scheme scheme_from_json(const json& j) {
  Scheme s;
  for (const auto& [id, strat] : j.at("assignment").items())
    s.assignment[id] = strategy_from_json(strat);
  if (j.contains("idle_helpers"))
    s.idle_helpers = j.at("idle_helpers").get<std::vector<std::string>>();
  return s;
}

json to_json(const NetworkState& n) {
  json j = json::object();
  if (n.bandwidth_mbps.empty()) {
    j["bandwidth_mbps"] = n.default_bandwidth_mbps;
  } else {
    json m = json::object();
    for (const auto& [id, bw] : n.bandwidth_mbps) m[id] = bw;
    j["bandwidth_mbps"] = m;
  }
  j["per_message_overhead_ms"] = n.per_message_overhead_ms;
  if (!n.trace.empty()) {
    json t = json::array();
    for (const auto& p : n.trace)
      t.push_back(json{{"t_ms", p.t_ms}, {"bandwidth_mbps", p.bandwidth_mbps}});
    j["trace"] = t;
  }
  return j;
}

NetworkState network_from_json(const json& j) {
  NetworkState n;
  const auto& bw = j.at("bandwidth_mbps");
  if (bw.is_number()) {
    n.default_bandwidth_mbps = bw.get<double>();
  } else {
    for (const auto& [id, v] : bw.items()) n.bandwidth_mbps[id] = v.get<double>();
  }
  n.per_message_overhead_ms = j.value("per_message_overhead_ms", 0.0);
  if (j.contains("trace"))
    for (const auto& p : j.at("trace"))
      n.trace.push_back({p.at("t_ms").get<double>(), p.at("bandwidth_mbps").get<double>()});
  return n;
}

json to_json(const BatchPolicy& b) {
  return json{{"max_batch", b.max_batch}, {"window_ms", b.window_ms}};
}

BatchPolicy batch_policy_from_json(const json& j) {
  return BatchPolicy{j.at("max_batch").get<int>(), j.at("window_ms").get<double>()};
}

json to_json(const SystemConfig& c) {
  json devices = json::array();
  for (const auto& d : c.devices) devices.push_back(to_json(d));
  json models = json::object();
  for (const auto& [id, m] : c.models) models[id] = to_json(m);
  return json{{"devices", devices},
              {"models", models},
              {"network", to_json(c.network)},
              {"batch_policy", to_json(c.batch_policy)},
              {"worker_count", c.worker_count}};
}

SystemConfig config_from_json(const json& j) {
  SystemConfig c;
  for (const auto& d : j.at("devices")) c.devices.push_back(device_from_json(d));
  if (j.contains("models"))
    for (const auto& [id, m] : j.at("models").items()) c.models[id] = model_from_json(m);
  c.network = network_from_json(j.at("network"));
  if (j.contains("batch_policy")) c.batch_policy = batch_policy_from_json(j.at("batch_policy"));
  c.worker_count = j.value("worker_count", 2);
  return c;
}

}  // namespace coinfer
