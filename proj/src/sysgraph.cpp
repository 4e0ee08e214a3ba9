#include "coinfer/sysgraph.hpp"

#include <algorithm>
#include <cmath>

namespace coinfer {

std::vector<std::vector<int>> SystemGraph::in_neighbors() const {
  std::vector<std::vector<int>> in(nodes.size());
  for (const auto& [u, v] : edges) in[static_cast<std::size_t>(v)].push_back(u);
  return in;
}

SystemGraph build_system_graph(const SystemConfig& config) {
  auto clients = config.clients();
  if (clients.empty()) throw ConfigError("no client devices");
  const auto* server = config.server();
  if (!server) throw ConfigError("no server device");

  SystemGraph g;
  g.n_clients = static_cast<int>(clients.size());
  for (const auto* c : clients) g.nodes.push_back({c->device_id, NodeCategory::EdgeDevice});
  for (const auto* c : clients)
    g.nodes.push_back({c->device_id + "/mw", NodeCategory::Middleware});
  for (const auto* c : clients)
    g.nodes.push_back({c->device_id + "/handler", NodeCategory::EdgeHandler});
  g.nodes.push_back({server->device_id, NodeCategory::EdgeServer});
  g.nodes.push_back({"global", NodeCategory::Global});

  for (int i = 0; i < g.n_clients; ++i) {
    g.edges.emplace_back(g.device_node(i), g.middleware_node(i));
    g.edges.emplace_back(g.middleware_node(i), g.handler_node(i));
    g.edges.emplace_back(g.handler_node(i), g.server_node());
  }
  int global = g.global_node();
  for (int v = 0; v < g.size(); ++v) {
    if (v == global) continue;
    g.edges.emplace_back(global, v);
    g.edges.emplace_back(v, global);
  }
  for (int v = 0; v < g.size(); ++v) g.edges.emplace_back(v, v);
  return g;
}

Normalizer Normalizer::fit(const std::vector<double>& values_ms) {
  if (values_ms.empty()) throw ConfigError("normalizer fit on empty value set");
  double lo = std::log1p(values_ms.front());
  double hi = lo;
  for (double v : values_ms) {
    double t = std::log1p(v);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (!(hi > lo)) throw ConfigError("normalizer fit is degenerate (v_max == v_min)");
  return Normalizer{lo, hi};
}

std::vector<double> raw_node_latencies(const SystemGraph& graph, const Scheme& scheme,
                                       const SystemConfig& config,
                                       const SubtaskLatencyLut& lut) {
  auto clients = config.clients();
  const auto* server = config.server();
  std::vector<double> lat(static_cast<std::size_t>(graph.size()), 0.0);

  double handler_sum = 0;
  for (int i = 0; i < graph.n_clients; ++i) {
    const auto& dev = *clients[static_cast<std::size_t>(i)];
    const auto& model = config.models.at(dev.device_id);
    const auto& strat = scheme.assignment.at(dev.device_id);
    int n = model.n_layers;

    double device_ms, handler_ms;
    if (strat.is_dp()) {
      // Full replicas on both sides; each input goes to exactly one of them.
      device_ms = lut.lookup(dev.kind, model.model_id, 0, n, 1);
      handler_ms = lut.lookup(server->kind, model.model_id, 0, n, 1);
    } else {
      device_ms = lut.lookup(dev.kind, model.model_id, 0, strat.split, 1);
      handler_ms = lut.lookup(server->kind, model.model_id, strat.split, n, 1);
    }
    double bw = config.network.bandwidth_for(dev.device_id);
    double mw_ms = transfer_ms(comm_volume(model, strat), bw,
                               config.network.per_message_overhead_ms);

    lat[static_cast<std::size_t>(graph.device_node(i))] = device_ms;
    lat[static_cast<std::size_t>(graph.middleware_node(i))] = mw_ms;
    lat[static_cast<std::size_t>(graph.handler_node(i))] = handler_ms;
    handler_sum += handler_ms;
  }
  lat[static_cast<std::size_t>(graph.server_node())] = handler_sum;
  lat[static_cast<std::size_t>(graph.global_node())] = 0.0;
  return lat;
}

FeatureMatrix assemble_features(const SystemGraph& graph,
                                const std::vector<double>& raw_latencies_ms,
                                const Normalizer& norm) {
  FeatureMatrix f;
  f.rows.resize(static_cast<std::size_t>(graph.size()));
  for (std::size_t v = 0; v < f.rows.size(); ++v) {
    auto& row = f.rows[v];
    row.fill(0.0);
    row[static_cast<std::size_t>(graph.nodes[v].category)] = 1.0;
    row[kNodeCategories] = norm.apply(raw_latencies_ms[v]);
  }
  return f;
}

FeatureMatrix build_features(const SystemGraph& graph, const Scheme& scheme,
                             const SystemConfig& config, const SubtaskLatencyLut& lut,
                             const Normalizer& norm) {
  return assemble_features(graph, raw_node_latencies(graph, scheme, config, lut), norm);
}

}  // namespace coinfer
