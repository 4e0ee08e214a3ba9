#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <thread>

#include "coinfer/rng.hpp"
#include "coinfer/runtime.hpp"

using namespace coinfer;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) {
  return {s.begin(), s.end()};
}

// Shared fixture: 3-layer model with the published forward volumes. At the
// nominal 100 Mbps the optimizer picks a PP split; at 1 Mbps DP wins.
SystemConfig runtime_system() {
  SystemConfig sys;
  sys.devices.push_back({"edge", "srv", Role::Server});
  sys.network.default_bandwidth_mbps = 100.0;
  sys.batch_policy = {5, 10.0};
  sys.worker_count = 2;
  return sys;
}

ModelProfile runtime_model() {
  return ModelProfile{"gcode-mn40", 3, {12200, 332000, 24200, 160}, "modelnet40"};
}

SubtaskLatencyLut runtime_lut() {
  SubtaskLatencyLut lut;
  const std::string m = "gcode-mn40";
  lut.add("pi4b", m, 0, 1, 1, 5.0);
  lut.add("pi4b", m, 0, 2, 1, 7.5);
  lut.add("pi4b", m, 0, 3, 1, 10.0);
  std::vector<double> srv_layers = {9.5, 2.0, 2.0};
  for (int i = 0; i < 3; ++i) {
    double acc = 0;
    for (int j = i + 1; j <= 3; ++j) {
      acc += srv_layers[(std::size_t)j - 1];
      for (int b = 1; b <= 5; ++b)
        lut.add("srv", m, i, j, b, acc * (0.4 + 0.6 * b));
    }
  }
  return lut;
}

DeviceProfile client_profile(const std::string& id) { return {id, "pi4b", Role::Client}; }

}  // namespace

TEST_CASE("the worked 5-byte Task frame matches the documented bytes") {
  auto payload = bytes_of("hello");
  auto frame = encode_message(MsgType::Task, 1, payload);
  std::vector<std::uint8_t> expected = {
      0x01,                                            // msg_type Task
      0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x01,  // task_id = 1
      0x00, 0x00, 0x00, 0x06,                          // size = flag + 5
      0x00,                                            // raw (uncompressed)
      0x68, 0x65, 0x6C, 0x6C, 0x6F};                   // "hello"
  CHECK(frame == expected);
  auto decoded = decode_message(frame);
  CHECK(decoded.header.msg_type == MsgType::Task);
  CHECK(decoded.header.task_id == 1);
  CHECK(decoded.payload == payload);
}

TEST_CASE("frames round-trip across both compression branches") {
  Rng rng(99);
  for (int k = 0; k < 2000; ++k) {
    std::size_t n = (std::size_t)rng.uniform_int(0, 2048);
    std::vector<std::uint8_t> payload(n);
    bool compressible = rng.unit() < 0.5;
    for (auto& b : payload)
      b = compressible ? (std::uint8_t)(k & 0x7) : (std::uint8_t)rng.uniform_int(0, 255);
    auto type = static_cast<MsgType>(rng.uniform_int(0, 2));
    std::uint64_t id = rng.next_u64();
    auto frame = encode_message(type, id, payload);
    auto decoded = decode_message(frame);
    CHECK(decoded.header.msg_type == type);
    CHECK(decoded.header.task_id == id);
    CHECK(decoded.payload == payload);
  }
}

TEST_CASE("payloads of 256 bytes or more travel compressed") {
  std::vector<std::uint8_t> zeros(4096, 0);
  auto frame = encode_message(MsgType::Task, 7, zeros);
  CHECK(frame.size() < zeros.size());          // deflate shrank it
  CHECK(frame[kHeaderBytes] == 0x01);          // compression flag
  CHECK(decode_message(frame).payload == zeros);

  std::vector<std::uint8_t> small(255, 0);
  auto raw = encode_message(MsgType::Task, 7, small);
  CHECK(raw[kHeaderBytes] == 0x00);
}

TEST_CASE("unknown message types are rejected") {
  std::vector<std::uint8_t> frame = {0x07, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0};
  CHECK_THROWS_WITH_AS(decode_message(frame), doctest::Contains("unknown message type"),
                       ProtocolError);
}

TEST_CASE("truncated and oversized frames are rejected") {
  auto frame = encode_message(MsgType::Result, 3, bytes_of("abc"));
  auto short_frame = frame;
  short_frame.pop_back();
  CHECK_THROWS_AS(decode_message(short_frame), ProtocolError);

  auto long_frame = frame;
  long_frame.push_back(0x00);
  CHECK_THROWS_AS(decode_message(long_frame), ProtocolError);

  std::vector<std::uint8_t> header_only(frame.begin(), frame.begin() + 5);
  CHECK_THROWS_AS(decode_message(header_only), ProtocolError);
}

TEST_CASE("corrupt compressed bodies fail loudly") {
  std::vector<std::uint8_t> payload(600, 0x41);
  auto frame = encode_message(MsgType::Task, 9, payload);
  frame[kHeaderBytes + 5] ^= 0xFF;  // corrupt the deflate stream
  CHECK_THROWS_AS(decode_message(frame), ProtocolError);
}

TEST_CASE("scheduling payloads carry a subtype and JSON body") {
  json body{{"strategy", {{"kind", "pp"}, {"split", 2}}}};
  auto payload = encode_scheduling(SchedSubtype::SchemeUpdate, body);
  auto [subtype, decoded] = decode_scheduling(payload);
  CHECK(subtype == SchedSubtype::SchemeUpdate);
  CHECK(decoded.at("strategy").at("split") == 2);

  std::vector<std::uint8_t> bad = {0x09, '{', '}'};
  CHECK_THROWS_AS(decode_scheduling(bad), ProtocolError);
}

TEST_CASE("task payloads carry strategy metadata plus a parseable graph blob") {
  auto blob = make_graph_blob(24200);
  CHECK(blob.size() >= 24200 - 48);
  CHECK(blob.size() <= 24200 + 48);
  auto [nodes, edges] = parse_graph_blob(blob);
  CHECK(nodes > 0);
  CHECK(edges == nodes);

  TaskMeta meta{Strategy::pp(2), "gcode-mn40"};
  auto payload = encode_task_payload(meta, blob);
  auto [meta2, blob2] = decode_task_payload(payload);
  CHECK(meta2.strategy == Strategy::pp(2));
  CHECK(meta2.model_id == "gcode-mn40");
  CHECK(blob2 == blob);

  TaskMeta dp_meta{Strategy::dp(), "m"};
  auto p2 = encode_task_payload(dp_meta, make_graph_blob(64));
  CHECK(decode_task_payload(p2).first.strategy.is_dp());

  std::vector<std::uint8_t> truncated = {0x00};
  CHECK_THROWS_AS(decode_task_payload(truncated), ProtocolError);
  CHECK_THROWS_AS(parse_graph_blob(std::vector<std::uint8_t>{1, 2, 3}), ProtocolError);
}

TEST_CASE("loopback session: tasks are conserved and ids are bijective") {
  ServerOptions so;
  so.system = runtime_system();
  so.lut = runtime_lut();
  so.exit_after_sessions = 2;
  std::atomic<int> port{0};
  so.bound_port_out = &port;

  auto server_future = std::async(std::launch::async, [&] { return run_server(so); });
  for (int k = 0; k < 200 && port.load() == 0; ++k)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(port.load() != 0);

  auto run_one = [&](const std::string& id, const std::string& csv) {
    DeviceOptions dvo;
    dvo.port = port.load();
    dvo.system = runtime_system();
    dvo.system.devices.push_back(client_profile(id));
    dvo.system.models[id] = runtime_model();
    dvo.lut = runtime_lut();
    dvo.device_id = id;
    dvo.tasks = 40;
    dvo.csv_path = csv;
    return run_device(dvo);
  };
  auto f0 = std::async(std::launch::async, run_one, "d0", "rt_d0.csv");
  auto f1 = std::async(std::launch::async, run_one, "d1", "rt_d1.csv");
  auto s0 = f0.get();
  auto s1 = f1.get();
  auto server_stats = server_future.get();

  for (const auto* s : {&s0, &s1}) {
    INFO(s->error);
    CHECK(s->error.empty());
    CHECK(s->conservation_ok);
    CHECK(s->issued == 40);
    CHECK(s->completed == 40);
    CHECK(s->scheme_updates >= 1);
  }
  CHECK(server_stats.ok);
  CHECK(server_stats.sessions == 2);
  CHECK(server_stats.tasks == server_stats.results);

  // CSV ids are bijective per device.
  for (const auto* csv : {"rt_d0.csv", "rt_d1.csv"}) {
    std::ifstream is(csv);
    REQUIRE(is.good());
    std::string line;
    std::getline(is, line);  // header
    std::set<std::uint64_t> ids;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string id_field;
      std::getline(ls, id_field, ',');
      CHECK(ids.insert(std::stoull(id_field)).second);
    }
    CHECK(ids.size() == 40);
    std::remove(csv);
  }
}

TEST_CASE("a mid-session bandwidth drop broadcasts a scheme update") {
  ServerOptions so;
  so.system = runtime_system();
  so.lut = runtime_lut();
  so.exit_after_sessions = 1;
  so.bandwidth_schedule = {{400.0, 1.0}};  // 100 -> 1 Mbps at t = 400 ms
  std::atomic<int> port{0};
  so.bound_port_out = &port;

  auto server_future = std::async(std::launch::async, [&] { return run_server(so); });
  for (int k = 0; k < 200 && port.load() == 0; ++k)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(port.load() != 0);

  DeviceOptions dvo;
  dvo.port = port.load();
  dvo.system = runtime_system();
  dvo.system.devices.push_back(client_profile("d0"));
  dvo.system.models["d0"] = runtime_model();
  dvo.lut = runtime_lut();
  dvo.device_id = "d0";
  dvo.tasks = 150;
  dvo.csv_path = "rt_update.csv";
  auto stats = run_device(dvo);
  auto server_stats = server_future.get();

  INFO(stats.error);
  CHECK(stats.error.empty());
  CHECK(stats.conservation_ok);
  CHECK(stats.scheme_updates >= 2);  // initial assignment + the drop
  CHECK(server_stats.ok);

  // Tasks before and after the switch carry different scheme tags, and
  // every task carries exactly one.
  std::ifstream is("rt_update.csv");
  REQUIRE(is.good());
  std::string line;
  std::getline(is, line);
  std::set<std::string> tags;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string field;
    for (int k = 0; k < 5; ++k) std::getline(ls, field, ',');
    tags.insert(field);
  }
  CHECK(tags.size() == 2);
  std::remove("rt_update.csv");
}

TEST_CASE("an unreachable server errors out within the retry budget") {
  DeviceOptions dvo;
  dvo.port = 1;  // nothing listens there
  dvo.system = runtime_system();
  dvo.system.devices.push_back(client_profile("d0"));
  dvo.system.models["d0"] = runtime_model();
  dvo.lut = runtime_lut();
  dvo.device_id = "d0";
  dvo.tasks = 1;
  dvo.connect_retries = 2;
  auto stats = run_device(dvo);
  CHECK(!stats.error.empty());
  CHECK(!stats.conservation_ok);
}

TEST_CASE("zero requested tasks is a clean no-op session") {
  ServerOptions so;
  so.system = runtime_system();
  so.lut = runtime_lut();
  so.exit_after_sessions = 1;
  std::atomic<int> port{0};
  so.bound_port_out = &port;
  auto server_future = std::async(std::launch::async, [&] { return run_server(so); });
  for (int k = 0; k < 200 && port.load() == 0; ++k)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(port.load() != 0);

  DeviceOptions dvo;
  dvo.port = port.load();
  dvo.system = runtime_system();
  dvo.system.devices.push_back(client_profile("d0"));
  dvo.system.models["d0"] = runtime_model();
  dvo.lut = runtime_lut();
  dvo.device_id = "d0";
  dvo.tasks = 0;
  auto stats = run_device(dvo);
  auto server_stats = server_future.get();
  CHECK(stats.error.empty());
  CHECK(stats.conservation_ok);
  CHECK(stats.issued == 0);
  CHECK(server_stats.ok);
}
