#include "coinfer/profiles.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace coinfer {

void SubtaskLatencyLut::add(const std::string& kind, const std::string& model, int i,
                            int j, int batch, double ms) {
  if (i < 0 || j <= i) throw LookupError("invalid layer range");
  if (batch < 1) throw LookupError("batch must be >= 1");
  if (ms <= 0) throw LookupError("latency must be > 0");
  auto& v = entries_[{kind, model, i, j}];
  auto it = std::lower_bound(v.begin(), v.end(), batch,
                             [](const auto& e, int b) { return e.first < b; });
  if (it != v.end() && it->first == batch) it->second = ms;
  else v.insert(it, {batch, ms});
}

bool SubtaskLatencyLut::has(const std::string& kind, const std::string& model, int i,
                            int j) const {
  if (i == j) return true;
  return entries_.count({kind, model, i, j}) > 0;
}

std::size_t SubtaskLatencyLut::size() const {
  std::size_t n = 0;
  for (const auto& [k, v] : entries_) n += v.size();
  return n;
}

double SubtaskLatencyLut::lookup(const std::string& kind, const std::string& model,
                                 int i, int j, int batch) const {
  if (i == j) return 0.0;
  auto it = entries_.find({kind, model, i, j});
  if (it == entries_.end()) {
    std::ostringstream os;
    os << "no LUT entry for (" << kind << ", " << model << ", [" << i << "," << j << "))";
    throw LookupError(os.str());
  }
  const auto& v = it->second;
  auto hi = std::lower_bound(v.begin(), v.end(), batch,
                             [](const auto& e, int b) { return e.first < b; });
  if (hi != v.end() && hi->first == batch) return hi->second;
  if (hi == v.begin()) return v.front().second;  // clamp below
  if (hi == v.end()) return v.back().second;     // clamp above
  auto lo = std::prev(hi);
  double t = double(batch - lo->first) / double(hi->first - lo->first);
  return lo->second + t * (hi->second - lo->second);
}

json SubtaskLatencyLut::to_json() const {
  json arr = json::array();
  for (const auto& [key, v] : entries_) {
    const auto& [kind, model, i, j] = key;
    for (const auto& [b, ms] : v)
      arr.push_back(json{{"kind", kind}, {"model", model}, {"i", i}, {"j", j},
                         {"batch", b}, {"ms", ms}});
  }
  return arr;
}

SubtaskLatencyLut SubtaskLatencyLut::from_json(const json& j) {
  SubtaskLatencyLut lut;
  for (const auto& e : j)
    lut.add(e.at("kind").get<std::string>(), e.at("model").get<std::string>(),
            e.at("i").get<int>(), e.at("j").get<int>(), e.at("batch").get<int>(),
            e.at("ms").get<double>());
  return lut;
}

std::uint64_t comm_volume(const ModelProfile& model, const Strategy& strategy) {
  if (strategy.is_dp()) return model.boundary_volumes.at(0);
  if (strategy.split < 0 || strategy.split > model.n_layers)
    throw LookupError("PP split out of range for model " + model.model_id);
  return model.boundary_volumes.at(static_cast<std::size_t>(strategy.split));
}

std::uint64_t result_volume(const ModelProfile& model) {
  return model.boundary_volumes.at(static_cast<std::size_t>(model.n_layers));
}

int preset_pp_comm(const ModelProfile& model) {
  if (model.n_layers < 2)
    throw LookupError("model " + model.model_id + " has no interior split");
  int best = 1;
  for (int s = 2; s < model.n_layers; ++s)
    if (model.boundary_volumes[s] < model.boundary_volumes[best]) best = s;
  return best;
}

int preset_pp_comp(const ModelProfile& model, const std::string& device_kind,
                   const std::string& server_kind, const SubtaskLatencyLut& lut) {
  if (model.n_layers < 2)
    throw LookupError("model " + model.model_id + " has no interior split");
  int best = -1;
  double best_total = std::numeric_limits<double>::infinity();
  std::uint64_t best_vol = 0;
  for (int s = 1; s < model.n_layers; ++s) {
    double total = lut.lookup(device_kind, model.model_id, 0, s, 1) +
                   lut.lookup(server_kind, model.model_id, s, model.n_layers, 1);
    std::uint64_t vol = model.boundary_volumes[s];
    if (total < best_total || (total == best_total && vol < best_vol)) {
      best = s;
      best_total = total;
      best_vol = vol;
    }
  }
  return best;
}

void add_synthetic_entries(SubtaskLatencyLut& lut, const SyntheticLutSpec& spec,
                           Rng& rng) {
  const auto& model = *spec.model;
  int n = model.n_layers;
  auto emit = [&](const std::string& kind, double lo, double hi) {
    // Per-layer unit costs; ranges sum them so split costs stay consistent.
    double scale = rng.log_uniform(lo, hi);
    std::vector<double> layer_ms(n);
    for (int l = 0; l < n; ++l) layer_ms[l] = scale * rng.uniform(0.3, 1.7);
    // Sublinear batch scaling: c(b) = c(1) * (alpha + (1 - alpha) * b).
    double alpha = rng.uniform(0.2, 0.7);
    for (int i = 0; i < n; ++i) {
      double acc = 0;
      for (int j = i + 1; j <= n; ++j) {
        acc += layer_ms[j - 1];
        for (int b : spec.batch_sizes)
          lut.add(kind, model.model_id, i, j, b, acc * (alpha + (1 - alpha) * b));
      }
    }
  };
  for (const auto& kind : spec.device_kinds)
    emit(kind, spec.device_layer_ms_lo, spec.device_layer_ms_hi);
  emit(spec.server_kind, spec.server_layer_ms_lo, spec.server_layer_ms_hi);
}

}  // namespace coinfer
