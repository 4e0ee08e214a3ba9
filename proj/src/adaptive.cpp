#include "coinfer/adaptive.hpp"

#include <memory>

namespace coinfer {

namespace {

// System view with the trace collapsed to the constant bandwidth at t.
SystemConfig system_at(const SystemConfig& base, double t_ms) {
  SystemConfig sys = base;
  for (const auto* c : base.clients())
    sys.network.bandwidth_mbps[c->device_id] = base.network.bandwidth_for(c->device_id, t_ms);
  sys.network.default_bandwidth_mbps = 0;
  sys.network.trace.clear();
  return sys;
}

Scheme optimize_at(const SimConfig& config, const AdaptiveOptions& opt, double t_ms) {
  SystemConfig sys = system_at(config.system, t_ms);
  if (opt.relative_model) {
    LearnedEvaluator eval(*opt.relative_model, sys, config.lut);
    return optimize(sys, config.lut, opt.scheduler, eval).scheme;
  }
  SimConfig steady = config;
  steady.system = sys;
  steady.horizon_ms = opt.evaluation_horizon_ms;
  steady.record_events = false;
  OracleEvaluator eval(steady);
  return optimize(sys, config.lut, opt.scheduler, eval).scheme;
}

}  // namespace

AdaptiveResult run_adaptive(const SimConfig& config, const AdaptiveOptions& options) {
  AdaptiveResult out;
  out.schedule.emplace_back(0.0, optimize_at(config, options, 0.0));

  MonitorState state = MonitorState::from_config(system_at(config.system, 0.0));
  for (const auto& p : config.system.network.trace) {
    if (p.t_ms <= 0 || p.t_ms >= config.horizon_ms) continue;
    MonitorState next = MonitorState::from_config(system_at(config.system, p.t_ms));
    if (!should_reschedule(state, next, options.scheduler)) continue;
    state = next;
    Scheme scheme = optimize_at(config, options, p.t_ms);
    if (!(scheme == out.schedule.back().second)) out.schedule.emplace_back(p.t_ms, scheme);
  }

  out.result = simulate_scheduled(config, out.schedule);
  return out;
}

SimResult run_static(const SimConfig& config, const Scheme& scheme) {
  return simulate(config, scheme);
}

}  // namespace coinfer
