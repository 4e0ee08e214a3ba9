#pragma once

#include <array>
#include <string>
#include <vector>

#include "coinfer/core.hpp"
#include "coinfer/profiles.hpp"

namespace coinfer {

enum class NodeCategory : int {
  EdgeDevice = 0,
  Middleware = 1,
  EdgeHandler = 2,
  EdgeServer = 3,
  Global = 4,
};

constexpr int kNodeCategories = 5;
constexpr int kFeatureDim = kNodeCategories + 1;  // one-hot ++ latency scalar

// System-level abstraction of the deployment. Node order is deterministic:
// client devices in config order, then their middlewares, then their
// handlers, then the server, then the global node. Edges: device -> its
// middleware -> its handler -> server, global <-> every other node, and a
// self-loop on every node.
struct SystemGraph {
  struct Node {
    std::string id;
    NodeCategory category;
  };
  std::vector<Node> nodes;
  std::vector<std::pair<int, int>> edges;  // directed (src, dst)
  int n_clients = 0;

  int device_node(int client_idx) const { return client_idx; }
  int middleware_node(int client_idx) const { return n_clients + client_idx; }
  int handler_node(int client_idx) const { return 2 * n_clients + client_idx; }
  int server_node() const { return 3 * n_clients; }
  int global_node() const { return 3 * n_clients + 1; }
  int size() const { return static_cast<int>(nodes.size()); }

  std::vector<std::vector<int>> in_neighbors() const;
};

SystemGraph build_system_graph(const SystemConfig& config);

// Log-MinMax: x' = (log(x + 1) - v_min) / (v_max - v_min), natural log,
// bounds taken from the log-transformed fitting values. Out-of-range inputs
// are not clamped.
struct Normalizer {
  double v_min = 0;
  double v_max = 1;

  static Normalizer fit(const std::vector<double>& values_ms);
  double apply(double x) const { return (std::log1p(x) - v_min) / (v_max - v_min); }

  bool operator==(const Normalizer&) const = default;
};

struct FeatureMatrix {
  std::vector<std::array<double, kFeatureDim>> rows;
  int size() const { return static_cast<int>(rows.size()); }
};

// Raw (un-normalized) per-node latency in ms, aligned with graph node order:
// device = its subtask latency, middleware = transfer estimate from volume
// and link speed, handler = server-side subtask latency, server = sum of the
// handler values (load proxy), global = 0.
std::vector<double> raw_node_latencies(const SystemGraph& graph, const Scheme& scheme,
                                       const SystemConfig& config,
                                       const SubtaskLatencyLut& lut);

FeatureMatrix assemble_features(const SystemGraph& graph,
                                const std::vector<double>& raw_latencies_ms,
                                const Normalizer& norm);

FeatureMatrix build_features(const SystemGraph& graph, const Scheme& scheme,
                             const SystemConfig& config, const SubtaskLatencyLut& lut,
                             const Normalizer& norm);

// Transfer estimate used for middleware features and the simulator:
// bytes over a decimal-megabit link plus fixed per-message overhead.
inline double transfer_ms(std::uint64_t bytes, double bandwidth_mbps, double overhead_ms) {
  return static_cast<double>(bytes) * 8.0 / (bandwidth_mbps * 1000.0) + overhead_ms;
}

}  // namespace coinfer
