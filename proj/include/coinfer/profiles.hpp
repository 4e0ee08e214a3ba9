#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "coinfer/core.hpp"
#include "coinfer/rng.hpp"

namespace coinfer {

struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pre-collected subtask latencies keyed by (device kind, model, layer range
// [i, j), batch size). Immutable after load; shared read-only.
class SubtaskLatencyLut {
 public:
  void add(const std::string& kind, const std::string& model, int i, int j, int batch,
           double ms);

  // Exact hit when stored; otherwise linear interpolation between the two
  // bracketing batch sizes, clamped to the nearest entry outside the stored
  // range. An empty range [s, s) is no work and costs 0.
  double lookup(const std::string& kind, const std::string& model, int i, int j,
                int batch) const;

  bool has(const std::string& kind, const std::string& model, int i, int j) const;

  std::size_t size() const;

  json to_json() const;
  static SubtaskLatencyLut from_json(const json& j);

 private:
  using Key = std::tuple<std::string, std::string, int, int>;
  // batch -> ms, kept sorted by batch
  std::map<Key, std::vector<std::pair<int, double>>> entries_;
};

inline double lookup_latency(const SubtaskLatencyLut& lut, const std::string& kind,
                             const std::string& model, int i, int j, int batch) {
  return lut.lookup(kind, model, i, j, batch);
}

// Forward volume shipped by a strategy: PP(s) transmits boundary s, DP ships
// the raw input. The result-return volume (boundary n) is reported separately.
std::uint64_t comm_volume(const ModelProfile& model, const Strategy& strategy);
std::uint64_t result_volume(const ModelProfile& model);

// Split minimizing the transmitted intermediate volume over interior
// boundaries {1, .., n-1}; ties go to the smaller split.
int preset_pp_comm(const ModelProfile& model);

// Split minimizing device [0,s) + server [s,n) latency at batch 1 over
// interior boundaries; ties broken by smaller volume at s, then smaller s.
int preset_pp_comp(const ModelProfile& model, const std::string& device_kind,
                   const std::string& server_kind, const SubtaskLatencyLut& lut);

// Seeded synthetic LUT generator: draws per-layer unit costs per kind and
// emits internally consistent range entries (range cost = sum of layer costs,
// batch cost sublinear in b). Used for training-data generation.
struct SyntheticLutSpec {
  std::vector<std::string> device_kinds;
  std::string server_kind;
  const ModelProfile* model = nullptr;
  double device_layer_ms_lo = 2.0, device_layer_ms_hi = 60.0;
  double server_layer_ms_lo = 0.5, server_layer_ms_hi = 15.0;
  std::vector<int> batch_sizes = {1, 2, 4, 5, 8};
};

void add_synthetic_entries(SubtaskLatencyLut& lut, const SyntheticLutSpec& spec, Rng& rng);

}  // namespace coinfer
