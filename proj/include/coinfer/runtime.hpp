#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coinfer/core.hpp"
#include "coinfer/profiles.hpp"
#include "coinfer/scheduler.hpp"
#include "coinfer/simulator.hpp"

namespace coinfer {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wire format (docs/protocol.md):
//   msg_type  1 byte   0x00 Scheduling, 0x01 Task, 0x02 Result
//   task_id   8 bytes  unsigned big-endian
//   size      4 bytes  unsigned big-endian, length of the body that follows
//   body      1 flag byte (0x00 raw, 0x01 deflate) + payload
// Payloads of 256 bytes or more travel as a zlib (DEFLATE) stream.
enum class MsgType : std::uint8_t { Scheduling = 0x00, Task = 0x01, Result = 0x02 };

enum class SchedSubtype : std::uint8_t {
  Start = 0x00,
  Pause = 0x01,
  SchemeUpdate = 0x02,
  Register = 0x03,
  RegisterAck = 0x04,
};

constexpr std::size_t kHeaderBytes = 13;
constexpr std::size_t kCompressionThreshold = 256;

struct MessageHeader {
  MsgType msg_type;
  std::uint64_t task_id;
  std::uint32_t size;  // body length (flag byte + possibly-compressed payload)
};

struct Frame {
  MessageHeader header;
  std::vector<std::uint8_t> payload;  // decompressed
};

std::vector<std::uint8_t> encode_message(MsgType type, std::uint64_t task_id,
                                         std::span<const std::uint8_t> payload);
Frame decode_message(std::span<const std::uint8_t> bytes);

MessageHeader decode_header(std::span<const std::uint8_t> bytes);
// Decodes the body given an already-parsed header.
std::vector<std::uint8_t> decode_body(const MessageHeader& header,
                                      std::span<const std::uint8_t> body);

// Scheduling payload: subtype byte + canonical JSON body.
std::vector<std::uint8_t> encode_scheduling(SchedSubtype subtype, const json& body);
std::pair<SchedSubtype, json> decode_scheduling(std::span<const std::uint8_t> payload);

// Task payload: strategy byte (0xFF = DP), split byte, u16 big-endian model
// id length, model id, then graph data (big-endian u32 node count, u32
// feature dim, row-major f32 features, u32 edge count, u32 index pairs).
struct TaskMeta {
  Strategy strategy;
  std::string model_id;
};

std::vector<std::uint8_t> encode_task_payload(const TaskMeta& meta,
                                              std::span<const std::uint8_t> graph_blob);
std::pair<TaskMeta, std::vector<std::uint8_t>> decode_task_payload(
    std::span<const std::uint8_t> payload);

// Synthetic graph blob in the documented layout, sized to approximately
// `target_bytes` (never smaller than the 16-byte scaffold).
std::vector<std::uint8_t> make_graph_blob(std::uint64_t target_bytes);
// Validates structure; returns (node_count, edge_count).
std::pair<std::uint32_t, std::uint32_t> parse_graph_blob(
    std::span<const std::uint8_t> blob);

// ---- runtime processes -----------------------------------------------------

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;
  SystemConfig system;      // server profile, defaults; devices may join late
  SubtaskLatencyLut lut;
  SchedulerConfig scheduler;
  std::string checkpoint;   // learned evaluator; empty = oracle sub-simulations
  double oracle_horizon_ms = 2000;
  // Test hook for the system monitor: (t_ms since start, bandwidth_mbps).
  std::vector<std::pair<double, double>> bandwidth_schedule;
  int exit_after_sessions = 0;  // 0 = serve forever
  std::string csv_path;
  std::atomic<int>* bound_port_out = nullptr;  // receives the listen port
};

struct ServerStats {
  std::uint64_t tasks = 0;
  std::uint64_t results = 0;
  std::uint64_t sessions = 0;
  int listen_port = 0;
  bool ok = false;
};

ServerStats run_server(const ServerOptions& options);

struct DeviceOptions {
  std::string host = "127.0.0.1";
  int port = 0;
  SystemConfig system;  // holds this device's profile and model
  SubtaskLatencyLut lut;
  std::string device_id;
  int tasks = 100;
  int window = 32;  // outstanding-task cap
  int connect_retries = 3;
  std::string csv_path;
};

struct DeviceStatsOut {
  std::uint64_t issued = 0;
  std::uint64_t completed = 0;
  std::uint64_t local = 0;
  std::uint64_t remote = 0;
  std::uint64_t scheme_updates = 0;
  bool conservation_ok = false;
  std::string error;
};

DeviceStatsOut run_device(const DeviceOptions& options);

}  // namespace coinfer
