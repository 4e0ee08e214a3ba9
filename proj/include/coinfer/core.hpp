#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace coinfer {

using json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Role { Client, Idle, Server };

std::string to_string(Role r);
Role role_from_string(const std::string& s);

struct DeviceProfile {
  std::string device_id;
  std::string kind;  // hardware-class label, e.g. "pi4b", "tx2-gpu"
  Role role = Role::Client;

  bool operator==(const DeviceProfile&) const = default;
};

struct ModelProfile {
  std::string model_id;
  int n_layers = 0;
  // n_layers + 1 entries: [0] raw input, [n] final result, interior =
  // intermediate feature volumes, all in bytes.
  std::vector<std::uint64_t> boundary_volumes;
  std::string task;

  bool operator==(const ModelProfile&) const = default;
};

// Per-device co-inference strategy. Device-only and edge-only are the
// degenerate splits PP(n) and PP(0).
struct Strategy {
  enum class Kind { Dp, Pp };
  Kind kind = Kind::Dp;
  int split = 0;  // meaningful for Pp only: device runs layers [0, split)

  static Strategy dp() { return {Kind::Dp, 0}; }
  static Strategy pp(int s) { return {Kind::Pp, s}; }
  bool is_dp() const { return kind == Kind::Dp; }
  bool is_pp() const { return kind == Kind::Pp; }

  std::string tag() const {
    return is_dp() ? "dp" : "pp:" + std::to_string(split);
  }

  bool operator==(const Strategy&) const = default;
  auto operator<=>(const Strategy&) const = default;
};

struct Scheme {
  std::map<std::string, Strategy> assignment;  // one entry per client device
  std::vector<std::string> idle_helpers;       // idle devices joined into DP dispatch

  // Stable key for memoization and logs, e.g. "d0=pp:1,d1=dp".
  std::string key() const;

  bool operator==(const Scheme&) const = default;
};

struct BandwidthTracePoint {
  double t_ms = 0;
  double bandwidth_mbps = 0;
  bool operator==(const BandwidthTracePoint&) const = default;
};

// Link model: decimal megabits (1 Mbps = 10^6 bits/s) plus a fixed
// per-transfer overhead.
struct NetworkState {
  std::map<std::string, double> bandwidth_mbps;  // per client link
  double default_bandwidth_mbps = 0;             // fallback for unlisted devices
  double per_message_overhead_ms = 0;
  // Optional piecewise-constant trace; when non-empty it overrides the
  // per-device values for all links from its first breakpoint on.
  std::vector<BandwidthTracePoint> trace;

  double bandwidth_for(const std::string& device_id, double t_ms = 0) const;

  bool operator==(const NetworkState&) const = default;
};

struct BatchPolicy {
  int max_batch = 5;
  double window_ms = 10.0;
  bool operator==(const BatchPolicy&) const = default;
};

struct SystemConfig {
  std::vector<DeviceProfile> devices;
  std::map<std::string, ModelProfile> models;  // device_id -> deployed model
  NetworkState network;
  BatchPolicy batch_policy;
  int worker_count = 2;

  std::vector<const DeviceProfile*> clients() const;
  std::vector<const DeviceProfile*> idles() const;
  const DeviceProfile* server() const;  // nullptr when absent
  const DeviceProfile* find_device(const std::string& id) const;

  bool operator==(const SystemConfig&) const = default;
};

// Returns one diagnostic per violated invariant; empty means valid.
std::vector<std::string> validate_config(const SystemConfig& config);
void throw_if_invalid(const SystemConfig& config);

// True iff the strategy's split lies in [0, n_layers] (DP is always valid).
bool strategy_valid_for(const Strategy& s, const ModelProfile& model);

// Canonical JSON text forms. encode(decode(x)) == x for canonical input.
json to_json(const DeviceProfile&);
json to_json(const ModelProfile&);
json to_json(const Strategy&);
json to_json(const Scheme&);
json to_json(const NetworkState&);
json to_json(const BatchPolicy&);
json to_json(const SystemConfig&);

DeviceProfile device_from_json(const json&);
ModelProfile model_from_json(const json&);
Strategy strategy_from_json(const json&);
Scheme scheme_from_json(const json&);
NetworkState network_from_json(const json&);
BatchPolicy batch_policy_from_json(const json&);
SystemConfig config_from_json(const json&);

}  // namespace coinfer
