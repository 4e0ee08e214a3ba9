#include "coinfer/scheduler.hpp"

#include <algorithm>

namespace coinfer {

double OracleEvaluator::throughput_of(const Scheme& scheme) {
  auto key = scheme.key();
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  double tp = simulate(config_, scheme).throughput_per_s;
  memo_.emplace(key, tp);
  return tp;
}

LearnedEvaluator::LearnedEvaluator(const PredictorModel& model, const SystemConfig& system,
                                   const SubtaskLatencyLut& lut)
    : model_(model), system_(system), lut_(lut), graph_(build_system_graph(system)) {}

const FeatureMatrix& LearnedEvaluator::features_of(const Scheme& scheme) {
  auto key = scheme.key();
  auto it = memo_.find(key);
  if (it == memo_.end())
    it = memo_.emplace(key, build_features(graph_, scheme, system_, lut_,
                                           model_.normalizer())).first;
  return it->second;
}

double LearnedEvaluator::p_faster(const Scheme& a, const Scheme& b) {
  const auto& fa = features_of(a);
  const auto& fb = features_of(b);
  return model_.predict_relative(graph_, fa, fb);
}

std::vector<Scheme> enumerate_design_space(
    const std::vector<std::string>& device_ids,
    const std::map<std::string, std::vector<Strategy>>& candidates) {
  if (device_ids.empty()) throw ConfigError("no devices to enumerate");
  std::vector<const std::vector<Strategy>*> opts;
  for (const auto& id : device_ids) {
    const auto& c = candidates.at(id);
    if (c.empty()) throw ConfigError("empty candidate list for device " + id);
    opts.push_back(&c);
  }
  std::vector<Scheme> space;
  std::vector<std::size_t> idx(device_ids.size(), 0);
  for (;;) {
    Scheme s;
    for (std::size_t d = 0; d < device_ids.size(); ++d)
      s.assignment[device_ids[d]] = (*opts[d])[idx[d]];
    space.push_back(std::move(s));
    std::size_t d = device_ids.size();
    for (;;) {
      if (d == 0) return space;
      --d;
      if (++idx[d] < opts[d]->size()) break;
      idx[d] = 0;
      if (d == 0) return space;
    }
  }
}

Scheme rank_best(const std::vector<Scheme>& schemes, SchemeEvaluator& evaluator) {
  if (schemes.empty()) throw ConfigError("rank_best on empty scheme list");
  Scheme best = schemes.front();
  for (std::size_t k = 1; k < schemes.size(); ++k)
    if (evaluator.candidate_beats(best, schemes[k])) best = schemes[k];
  return best;
}

namespace {

// Candidate options per device: DP plus the two preset splits, de-duplicated.
// Models too shallow for an interior split fall back to the degenerate ends.
std::vector<Strategy> coarse_options(const ModelProfile& model,
                                     const std::string& device_kind,
                                     const std::string& server_kind,
                                     const SubtaskLatencyLut& lut) {
  std::vector<Strategy> c{Strategy::dp()};
  auto push_unique = [&](Strategy s) {
    if (std::find(c.begin(), c.end(), s) == c.end()) c.push_back(s);
  };
  if (model.n_layers >= 2) {
    push_unique(Strategy::pp(preset_pp_comp(model, device_kind, server_kind, lut)));
    push_unique(Strategy::pp(preset_pp_comm(model)));
  } else {
    push_unique(Strategy::pp(0));
    push_unique(Strategy::pp(model.n_layers));
  }
  return c;
}

}  // namespace

OptimizeResult optimize(const SystemConfig& system, const SubtaskLatencyLut& lut,
                        const SchedulerConfig& cfg, SchemeEvaluator& evaluator) {
  auto clients = system.clients();
  if (clients.empty()) throw ConfigError("no client devices");
  const auto* server = system.server();

  std::vector<std::string> ids;
  std::map<std::string, std::vector<Strategy>> candidates;
  for (const auto* c : clients) {
    ids.push_back(c->device_id);
    candidates[c->device_id] =
        coarse_options(system.models.at(c->device_id), c->kind, server->kind, lut);
  }

  OptimizeResult out;

  // Stage 1: coarse-grained ranking over the full candidate product.
  auto space = enumerate_design_space(ids, candidates);
  int before = evaluator.calls();
  Scheme opt = rank_best(space, evaluator);
  out.stage1_calls = evaluator.calls() - before;

  // Stage 2: fine-grained split tuning, one visit per device, capped at T.
  before = evaluator.calls();
  int t = 0;
  std::set<std::pair<std::string, std::string>> tuned_groups;
  for (const auto* c : clients) {
    if (t >= cfg.tuning_iterations) break;
    ++t;
    Strategy cur = opt.assignment.at(c->device_id);
    if (cur.is_dp()) continue;

    const auto& model = system.models.at(c->device_id);
    std::pair<std::string, std::string> group{c->kind, model.model_id};
    if (cfg.share_similar_devices && tuned_groups.count(group)) continue;
    tuned_groups.insert(group);

    // Devices the shift applies to (just this one unless sharing is on).
    std::vector<std::string> members{c->device_id};
    if (cfg.share_similar_devices)
      for (const auto* o : clients)
        if (o != c && o->kind == c->kind &&
            system.models.at(o->device_id).model_id == model.model_id &&
            opt.assignment.at(o->device_id) == cur)
          members.push_back(o->device_id);

    std::vector<Scheme> variants{opt};
    for (int delta : {-1, +1}) {
      int shifted = std::clamp(cur.split + delta, 0, model.n_layers);
      if (shifted == cur.split) continue;
      Scheme v = opt;
      for (const auto& id : members) v.assignment[id] = Strategy::pp(shifted);
      variants.push_back(std::move(v));
    }
    opt = rank_best(variants, evaluator);
  }
  out.stage2_calls = evaluator.calls() - before;
  out.scheme = std::move(opt);
  return out;
}

PlanResult plan(const SystemConfig& system, const SubtaskLatencyLut& lut,
                double required_throughput_per_s, int iteration_limit,
                const std::function<double(const Scheme&)>& predict_throughput) {
  (void)lut;
  auto space = full_scheme_space(system);
  PlanResult res;
  bool have_best = false;
  for (const auto& scheme : space) {
    if (res.examined >= iteration_limit) break;
    ++res.examined;
    double tp = predict_throughput(scheme);
    if (!have_best || tp > res.predicted_throughput) {
      res.scheme = scheme;
      res.predicted_throughput = tp;
      have_best = true;
    }
    if (tp >= required_throughput_per_s) {
      res.scheme = scheme;
      res.predicted_throughput = tp;
      res.requirement_met = true;
      return res;
    }
  }
  return res;
}

PlanResult plan(const SystemConfig& system, const SubtaskLatencyLut& lut,
                double required_throughput_per_s, int iteration_limit,
                const PredictorModel& model) {
  SystemGraph graph = build_system_graph(system);
  return plan(system, lut, required_throughput_per_s, iteration_limit,
              [&](const Scheme& scheme) {
                auto f = build_features(graph, scheme, system, lut, model.normalizer());
                return model.predict_throughput(graph, f);
              });
}

MonitorState MonitorState::from_config(const SystemConfig& system, double t_ms) {
  MonitorState s;
  for (const auto& d : system.devices) {
    if (d.role == Role::Client) {
      s.clients.insert(d.device_id);
      s.bandwidth_mbps[d.device_id] = system.network.bandwidth_for(d.device_id, t_ms);
    } else if (d.role == Role::Idle) {
      s.idle.insert(d.device_id);
    }
  }
  return s;
}

bool should_reschedule(const MonitorState& before, const MonitorState& after,
                       const SchedulerConfig& cfg) {
  if (before.clients != after.clients) return true;
  if (before.idle != after.idle) return true;
  for (const auto& [id, old_bw] : before.bandwidth_mbps) {
    auto it = after.bandwidth_mbps.find(id);
    if (it == after.bandwidth_mbps.end()) return true;
    if (old_bw > 0 &&
        std::fabs(it->second - old_bw) / old_bw >= cfg.bandwidth_change_threshold)
      return true;
  }
  return false;
}

Scheme assign_idle(const Scheme& scheme, const SystemConfig& system,
                   const SubtaskLatencyLut& lut, const std::vector<std::string>& idle_ids,
                   SchemeEvaluator& evaluator, std::vector<std::string>* warnings) {
  Scheme current = scheme;
  for (const auto& id : idle_ids) {
    const auto* dev = system.find_device(id);
    if (!dev) {
      if (warnings) warnings->push_back("unknown idle device " + id + "; skipped");
      continue;
    }
    bool covered = true;
    for (const auto* c : system.clients()) {
      const auto& m = system.models.at(c->device_id);
      if (!lut.has(dev->kind, m.model_id, 0, m.n_layers)) covered = false;
    }
    if (!covered) {
      if (warnings)
        warnings->push_back("idle device " + id + " lacks LUT coverage; skipped");
      continue;
    }
    Scheme extended = current;
    extended.idle_helpers.push_back(id);
    // "At least as good": the extension wins ties, so adopt unless the
    // incumbent strictly beats it.
    if (!evaluator.candidate_beats(extended, current)) current = std::move(extended);
  }
  return current;
}

}  // namespace coinfer
