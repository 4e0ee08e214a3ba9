#include <zlib.h>

#include <cstring>

#include "coinfer/runtime.hpp"

namespace coinfer {

namespace {

void put_be64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t get_be32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
  return v;
}

std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> in) {
  uLongf bound = compressBound(static_cast<uLong>(in.size()));
  std::vector<std::uint8_t> out(bound);
  if (compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()),
                Z_DEFAULT_COMPRESSION) != Z_OK)
    throw ProtocolError("compression failed");
  out.resize(bound);
  return out;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> in) {
  // Grow-and-retry; payload sizes here are modest.
  uLongf cap = std::max<uLongf>(64, static_cast<uLongf>(in.size()) * 4);
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<std::uint8_t> out(cap);
    uLongf len = cap;
    int rc = uncompress(out.data(), &len, in.data(), static_cast<uLong>(in.size()));
    if (rc == Z_OK) {
      out.resize(len);
      return out;
    }
    if (rc != Z_BUF_ERROR) throw ProtocolError("decompression failed");
    cap *= 4;
  }
  throw ProtocolError("decompression failed: payload too large");
}

}  // namespace

std::vector<std::uint8_t> encode_message(MsgType type, std::uint64_t task_id,
                                         std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> body;
  if (payload.size() >= kCompressionThreshold) {
    body.push_back(0x01);
    auto z = deflate_bytes(payload);
    body.insert(body.end(), z.begin(), z.end());
  } else {
    body.push_back(0x00);
    body.insert(body.end(), payload.begin(), payload.end());
  }
  if (body.size() > 0xffffffffull) throw ProtocolError("payload too large");

  std::vector<std::uint8_t> frame;
  frame.reserve(kHeaderBytes + body.size());
  frame.push_back(static_cast<std::uint8_t>(type));
  put_be64(frame, task_id);
  put_be32(frame, static_cast<std::uint32_t>(body.size()));
  frame.insert(frame.end(), body.begin(), body.end());
  return frame;
}

MessageHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw ProtocolError("truncated frame header");
  std::uint8_t t = bytes[0];
  if (t > 0x02)
    throw ProtocolError("unknown message type 0x" + [t] {
      char buf[3];
      std::snprintf(buf, sizeof buf, "%02x", t);
      return std::string(buf);
    }());
  MessageHeader h;
  h.msg_type = static_cast<MsgType>(t);
  h.task_id = get_be64(bytes.data() + 1);
  h.size = get_be32(bytes.data() + 9);
  return h;
}

std::vector<std::uint8_t> decode_body(const MessageHeader& header,
                                      std::span<const std::uint8_t> body) {
  if (body.size() != header.size) throw ProtocolError("frame size mismatch");
  if (body.empty()) throw ProtocolError("empty frame body");
  std::uint8_t flag = body[0];
  auto data = body.subspan(1);
  if (flag == 0x00) return {data.begin(), data.end()};
  if (flag == 0x01) return inflate_bytes(data);
  throw ProtocolError("unknown compression flag");
}

Frame decode_message(std::span<const std::uint8_t> bytes) {
  MessageHeader h = decode_header(bytes);
  if (bytes.size() < kHeaderBytes + h.size) throw ProtocolError("truncated frame body");
  if (bytes.size() > kHeaderBytes + h.size) throw ProtocolError("trailing bytes after frame");
  return Frame{h, decode_body(h, bytes.subspan(kHeaderBytes))};
}

std::vector<std::uint8_t> encode_scheduling(SchedSubtype subtype, const json& body) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(subtype));
  std::string text = body.dump();
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

std::pair<SchedSubtype, json> decode_scheduling(std::span<const std::uint8_t> payload) {
  if (payload.empty()) throw ProtocolError("empty scheduling payload");
  std::uint8_t sub = payload[0];
  if (sub > 0x04) throw ProtocolError("unknown scheduling subtype");
  json body = json::object();
  if (payload.size() > 1) {
    body = json::parse(payload.begin() + 1, payload.end(), nullptr, false);
    if (body.is_discarded()) throw ProtocolError("scheduling body is not valid JSON");
  }
  return {static_cast<SchedSubtype>(sub), body};
}

std::vector<std::uint8_t> encode_task_payload(const TaskMeta& meta,
                                              std::span<const std::uint8_t> graph_blob) {
  std::vector<std::uint8_t> out;
  out.push_back(meta.strategy.is_dp() ? 0xFF : 0x00);
  out.push_back(meta.strategy.is_dp() ? 0
                                      : static_cast<std::uint8_t>(meta.strategy.split));
  if (meta.model_id.size() > 0xffff) throw ProtocolError("model id too long");
  out.push_back(static_cast<std::uint8_t>(meta.model_id.size() >> 8));
  out.push_back(static_cast<std::uint8_t>(meta.model_id.size() & 0xff));
  out.insert(out.end(), meta.model_id.begin(), meta.model_id.end());
  out.insert(out.end(), graph_blob.begin(), graph_blob.end());
  return out;
}

std::pair<TaskMeta, std::vector<std::uint8_t>> decode_task_payload(
    std::span<const std::uint8_t> payload) {
  if (payload.size() < 4) throw ProtocolError("short task payload");
  TaskMeta meta;
  if (payload[0] == 0xFF) meta.strategy = Strategy::dp();
  else meta.strategy = Strategy::pp(payload[1]);
  std::size_t id_len = (std::size_t(payload[2]) << 8) | payload[3];
  if (payload.size() < 4 + id_len) throw ProtocolError("short task payload");
  meta.model_id.assign(payload.begin() + 4, payload.begin() + 4 + (long)id_len);
  auto blob = payload.subspan(4 + id_len);
  return {meta, std::vector<std::uint8_t>(blob.begin(), blob.end())};
}

std::vector<std::uint8_t> make_graph_blob(std::uint64_t target_bytes) {
  // 16 scaffold bytes + 4 * nodes * dim + 8 * edges.
  std::uint64_t budget = target_bytes > 16 ? target_bytes - 16 : 0;
  std::uint32_t dim = 4;
  std::uint32_t nodes = static_cast<std::uint32_t>(budget / (4 * dim + 8));
  std::uint32_t edges = nodes;  // ring
  std::vector<std::uint8_t> out;
  put_be32(out, nodes);
  put_be32(out, dim);
  out.resize(out.size() + std::size_t(4) * nodes * dim, 0);  // zeroed f32 features
  put_be32(out, edges);
  for (std::uint32_t e = 0; e < edges; ++e) {
    put_be32(out, e);
    put_be32(out, (e + 1) % std::max<std::uint32_t>(1, nodes));
  }
  return out;
}

std::pair<std::uint32_t, std::uint32_t> parse_graph_blob(
    std::span<const std::uint8_t> blob) {
  if (blob.size() < 8) throw ProtocolError("short graph blob");
  std::uint32_t nodes = get_be32(blob.data());
  std::uint32_t dim = get_be32(blob.data() + 4);
  std::size_t feat = std::size_t(4) * nodes * dim;
  if (blob.size() < 8 + feat + 4) throw ProtocolError("graph blob feature section truncated");
  std::uint32_t edges = get_be32(blob.data() + 8 + feat);
  if (blob.size() != 8 + feat + 4 + std::size_t(8) * edges)
    throw ProtocolError("graph blob edge section truncated");
  return {nodes, edges};
}

}  // namespace coinfer
