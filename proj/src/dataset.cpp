#include "coinfer/dataset.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "coinfer/rng.hpp"

namespace coinfer {

namespace {

constexpr char kMagic[8] = {'C', 'I', 'D', 'S', '0', '0', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_f64(std::string& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

struct Reader {
  const unsigned char* p;
  const unsigned char* end;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n)
      throw ConfigError("truncated dataset record");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    p += 8;
    return v;
  }
  double f64() {
    std::uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
};

std::string encode_record(const Sample& s) {
  std::string r;
  put_u32(r, static_cast<std::uint32_t>(s.config_id));
  put_u32(r, static_cast<std::uint32_t>(s.graph.n_clients));
  put_u32(r, static_cast<std::uint32_t>(s.graph.nodes.size()));
  for (const auto& n : s.graph.nodes) {
    put_u32(r, static_cast<std::uint32_t>(n.category));
    put_u32(r, static_cast<std::uint32_t>(n.id.size()));
    r.append(n.id);
  }
  put_u32(r, static_cast<std::uint32_t>(s.graph.edges.size()));
  for (const auto& [u, v] : s.graph.edges) {
    put_u32(r, static_cast<std::uint32_t>(u));
    put_u32(r, static_cast<std::uint32_t>(v));
  }
  for (double x : s.raw_latencies_ms) put_f64(r, x);
  put_f64(r, s.throughput_per_s);
  return r;
}

Sample decode_record(const std::string& r) {
  Reader rd{reinterpret_cast<const unsigned char*>(r.data()),
            reinterpret_cast<const unsigned char*>(r.data()) + r.size()};
  Sample s;
  s.config_id = static_cast<int>(rd.u32());
  s.graph.n_clients = static_cast<int>(rd.u32());
  std::uint32_t n_nodes = rd.u32();
  for (std::uint32_t i = 0; i < n_nodes; ++i) {
    auto cat = static_cast<NodeCategory>(rd.u32());
    std::uint32_t len = rd.u32();
    rd.need(len);
    std::string id(reinterpret_cast<const char*>(rd.p), len);
    rd.p += len;
    s.graph.nodes.push_back({std::move(id), cat});
  }
  std::uint32_t n_edges = rd.u32();
  for (std::uint32_t i = 0; i < n_edges; ++i) {
    int u = static_cast<int>(rd.u32());
    int v = static_cast<int>(rd.u32());
    s.graph.edges.emplace_back(u, v);
  }
  for (std::uint32_t i = 0; i < n_nodes; ++i) s.raw_latencies_ms.push_back(rd.f64());
  s.throughput_per_s = rd.f64();
  return s;
}

}  // namespace

std::uint64_t dataset_fingerprint(const std::vector<Sample>& samples) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& s : samples) {
    std::string r = encode_record(s);
    h = fnv1a64(r.data(), r.size(), h);
  }
  return h;
}

void save_dataset(const std::string& path, const std::vector<Sample>& samples,
                  std::uint64_t seed) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write dataset: " + path);
  os.write(kMagic, sizeof(kMagic));
  std::string header;
  put_u64(header, samples.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& s : samples) {
    std::string r = encode_record(s);
    std::string len;
    put_u32(len, static_cast<std::uint32_t>(r.size()));
    os.write(len.data(), static_cast<std::streamsize>(len.size()));
    os.write(r.data(), static_cast<std::streamsize>(r.size()));
  }
  if (!os) throw ConfigError("short write on dataset: " + path);
  os.close();

  std::ostringstream hash;
  hash << std::hex << dataset_fingerprint(samples);
  json manifest{{"samples", samples.size()}, {"seed", seed}, {"fnv1a64", hash.str()}};
  std::ofstream ms(path + ".manifest.json");
  ms << manifest.dump(2) << '\n';
}

std::vector<Sample> load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read dataset: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigError("bad dataset magic in " + path);
  unsigned char cnt[8];
  is.read(reinterpret_cast<char*>(cnt), 8);
  std::uint64_t n = 0;
  for (int i = 0; i < 8; ++i) n |= std::uint64_t(cnt[i]) << (8 * i);
  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    unsigned char lb[4];
    is.read(reinterpret_cast<char*>(lb), 4);
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t(lb[i]) << (8 * i);
    std::string r(len, '\0');
    is.read(r.data(), len);
    if (!is) throw ConfigError("truncated dataset: " + path);
    samples.push_back(decode_record(r));
  }
  return samples;
}

}  // namespace coinfer
