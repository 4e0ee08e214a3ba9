#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "coinfer/sysgraph.hpp"

using namespace coinfer;

namespace {

SystemConfig make_config(int n_clients) {
  SystemConfig c;
  ModelProfile m{"m", 2, {1000, 2000, 100}, "t"};
  for (int d = 0; d < n_clients; ++d) {
    std::string id = "d" + std::to_string(d);
    c.devices.push_back({id, "pi4b", Role::Client});
    c.models[id] = m;
    c.network.bandwidth_mbps[id] = 10.0;
  }
  c.devices.push_back({"edge", "srv", Role::Server});
  return c;
}

SubtaskLatencyLut make_lut() {
  SubtaskLatencyLut lut;
  for (int i = 0; i < 2; ++i)
    for (int j = i + 1; j <= 2; ++j) {
      lut.add("pi4b", "m", i, j, 1, 5.0 * (j - i));
      lut.add("srv", "m", i, j, 1, 3.0 * (j - i));
    }
  return lut;
}

}  // namespace

TEST_CASE("graph for one client has 5 nodes in the documented pattern") {
  auto g = build_system_graph(make_config(1));
  REQUIRE(g.size() == 5);
  CHECK(g.nodes[0].category == NodeCategory::EdgeDevice);
  CHECK(g.nodes[1].category == NodeCategory::Middleware);
  CHECK(g.nodes[2].category == NodeCategory::EdgeHandler);
  CHECK(g.nodes[3].category == NodeCategory::EdgeServer);
  CHECK(g.nodes[4].category == NodeCategory::Global);

  auto has_edge = [&](int u, int v) {
    for (auto& [a, b] : g.edges)
      if (a == u && b == v) return true;
    return false;
  };
  // Chain to the server.
  CHECK(has_edge(0, 1));
  CHECK(has_edge(1, 2));
  CHECK(has_edge(2, 3));
  // Global hub both ways and self-loops everywhere.
  for (int v = 0; v < 4; ++v) {
    CHECK(has_edge(4, v));
    CHECK(has_edge(v, 4));
  }
  for (int v = 0; v < 5; ++v) CHECK(has_edge(v, v));
  // 3 chain + 8 global + 5 self-loops.
  CHECK(g.edges.size() == 16);
}

TEST_CASE("three clients produce 11 nodes") {
  auto g = build_system_graph(make_config(3));
  CHECK(g.size() == 11);
  CHECK(g.n_clients == 3);
  CHECK(g.server_node() == 9);
  CHECK(g.global_node() == 10);
}

TEST_CASE("a config without clients is rejected") {
  SystemConfig c;
  c.devices.push_back({"edge", "srv", Role::Server});
  CHECK_THROWS_WITH_AS(build_system_graph(c), doctest::Contains("no client"), ConfigError);
}

TEST_CASE("normalizer reproduces the worked endpoints exactly") {
  auto norm = Normalizer::fit({0.0, 9.0, 99.0});
  CHECK(norm.v_min == 0.0);
  CHECK(norm.v_max == doctest::Approx(std::log(100.0)).epsilon(1e-15));
  CHECK(norm.apply(0.0) == 0.0);
  CHECK(norm.apply(99.0) == 1.0);
  CHECK(norm.apply(9.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalizer does not clamp out-of-range inputs") {
  auto norm = Normalizer::fit({0.0, 9.0, 99.0});
  CHECK(norm.apply(999.0) > 1.0);
}

TEST_CASE("normalizer rejects degenerate fits") {
  CHECK_THROWS_AS(Normalizer::fit({5.0, 5.0, 5.0}), ConfigError);
  CHECK_THROWS_AS(Normalizer::fit({}), ConfigError);
}

TEST_CASE("normalizer is strictly increasing") {
  auto norm = Normalizer::fit({1.0, 50.0});
  double prev = norm.apply(0.0);
  for (double x = 0.5; x < 200.0; x += 0.5) {
    double cur = norm.apply(x);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("raw latencies follow the node roles") {
  auto cfg = make_config(1);
  auto lut = make_lut();
  auto g = build_system_graph(cfg);

  SUBCASE("interior split") {
    Scheme s;
    s.assignment["d0"] = Strategy::pp(1);
    auto raw = raw_node_latencies(g, s, cfg, lut);
    CHECK(raw[0] == 5.0);   // device stage [0,1)
    CHECK(raw[2] == 3.0);   // handler stage [1,2)
    // 2000 bytes at 10 Mbps = 1.6 ms
    CHECK(raw[1] == doctest::Approx(1.6));
    CHECK(raw[3] == 3.0);   // server = sum of handlers
    CHECK(raw[4] == 0.0);   // global
  }

  SUBCASE("device-only split has an idle handler and ships only the result") {
    Scheme s;
    s.assignment["d0"] = Strategy::pp(2);
    auto raw = raw_node_latencies(g, s, cfg, lut);
    CHECK(raw[0] == 10.0);
    CHECK(raw[2] == 0.0);
    CHECK(raw[1] == doctest::Approx(100.0 * 8.0 / (10.0 * 1000.0)));
    CHECK(raw[3] == 0.0);
  }

  SUBCASE("DP uses full-model latencies on both sides and ships raw input") {
    Scheme s;
    s.assignment["d0"] = Strategy::dp();
    auto raw = raw_node_latencies(g, s, cfg, lut);
    CHECK(raw[0] == 10.0);
    CHECK(raw[2] == 6.0);
    CHECK(raw[1] == doctest::Approx(1000.0 * 8.0 / (10.0 * 1000.0)));
  }
}

TEST_CASE("middleware transfer: 1 Mb over 1 Mbps is one second") {
  // 125000 bytes = 10^6 bits.
  CHECK(transfer_ms(125000, 1.0, 0.0) == doctest::Approx(1000.0));
}

TEST_CASE("identical devices with identical strategies share feature rows") {
  auto cfg = make_config(2);
  auto lut = make_lut();
  auto g = build_system_graph(cfg);
  Scheme s;
  s.assignment["d0"] = Strategy::pp(1);
  s.assignment["d1"] = Strategy::pp(1);
  auto norm = Normalizer::fit({0.0, 1.0, 20.0});
  auto f = build_features(g, s, cfg, lut, norm);
  CHECK(f.rows[g.device_node(0)] == f.rows[g.device_node(1)]);
  CHECK(f.rows[g.middleware_node(0)] == f.rows[g.middleware_node(1)]);
  CHECK(f.rows[g.handler_node(0)] == f.rows[g.handler_node(1)]);
}

TEST_CASE("one-hot block sums to one and in-range latency lands in [0, 1]") {
  auto cfg = make_config(3);
  auto lut = make_lut();
  auto g = build_system_graph(cfg);
  Scheme s;
  s.assignment["d0"] = Strategy::dp();
  s.assignment["d1"] = Strategy::pp(0);
  s.assignment["d2"] = Strategy::pp(2);
  auto norm = Normalizer::fit({0.0, 30.0});
  auto f = build_features(g, s, cfg, lut, norm);
  for (const auto& row : f.rows) {
    double onehot = 0;
    for (int k = 0; k < kNodeCategories; ++k) onehot += row[(std::size_t)k];
    CHECK(onehot == 1.0);
    CHECK(row[kNodeCategories] >= 0.0);
    CHECK(row[kNodeCategories] <= 1.0);
  }
}

TEST_CASE("permuting device order permutes feature rows identically") {
  SystemConfig a = make_config(2);
  a.models["d0"].boundary_volumes = {500, 700, 50};
  a.network.bandwidth_mbps["d0"] = 2.0;

  SystemConfig b = a;
  std::swap(b.devices[0], b.devices[1]);  // d1 first now

  auto lut = make_lut();
  Scheme s;
  s.assignment["d0"] = Strategy::pp(1);
  s.assignment["d1"] = Strategy::dp();
  auto norm = Normalizer::fit({0.0, 50.0});

  auto ga = build_system_graph(a);
  auto gb = build_system_graph(b);
  auto fa = build_features(ga, s, a, lut, norm);
  auto fb = build_features(gb, s, b, lut, norm);

  // Client i of config a is client (1 - i) of config b.
  for (int i = 0; i < 2; ++i) {
    CHECK(fa.rows[ga.device_node(i)] == fb.rows[gb.device_node(1 - i)]);
    CHECK(fa.rows[ga.middleware_node(i)] == fb.rows[gb.middleware_node(1 - i)]);
    CHECK(fa.rows[ga.handler_node(i)] == fb.rows[gb.handler_node(1 - i)]);
  }
  CHECK(fa.rows[ga.server_node()] == fb.rows[gb.server_node()]);
  CHECK(fa.rows[ga.global_node()] == fb.rows[gb.global_node()]);
}

TEST_CASE("two schemes on one config share the graph; only features differ") {
  auto cfg = make_config(2);
  auto lut = make_lut();
  auto g1 = build_system_graph(cfg);
  auto g2 = build_system_graph(cfg);
  CHECK(g1.edges == g2.edges);
  REQUIRE(g1.size() == g2.size());
  for (int v = 0; v < g1.size(); ++v) {
    CHECK(g1.nodes[(std::size_t)v].id == g2.nodes[(std::size_t)v].id);
    CHECK(g1.nodes[(std::size_t)v].category == g2.nodes[(std::size_t)v].category);
  }

  Scheme s1, s2;
  s1.assignment["d0"] = Strategy::pp(1);
  s1.assignment["d1"] = Strategy::pp(1);
  s2.assignment["d0"] = Strategy::dp();
  s2.assignment["d1"] = Strategy::pp(2);
  auto norm = Normalizer::fit({0.0, 30.0});
  auto f1 = build_features(g1, s1, cfg, lut, norm);
  auto f2 = build_features(g2, s2, cfg, lut, norm);
  CHECK(f1.rows != f2.rows);
}
