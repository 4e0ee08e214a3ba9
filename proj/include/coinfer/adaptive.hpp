#pragma once

#include "coinfer/scheduler.hpp"
#include "coinfer/simulator.hpp"

namespace coinfer {

struct AdaptiveOptions {
  SchedulerConfig scheduler;
  // Horizon for the oracle evaluator's steady-state sub-simulations.
  double evaluation_horizon_ms = 3000;
  // When set, scheme comparisons use the learned relative predictor instead
  // of oracle sub-simulations.
  const PredictorModel* relative_model = nullptr;
};

struct AdaptiveResult {
  SimResult result;
  std::vector<std::pair<double, Scheme>> schedule;
};

// Re-optimizes at every bandwidth-trace breakpoint that passes the
// reschedule thresholds, then runs one simulation with the resulting scheme
// switch schedule. Tasks in flight complete under the scheme they were
// issued with.
AdaptiveResult run_adaptive(const SimConfig& config, const AdaptiveOptions& options);

// Static counterpart for comparisons: one scheme for the whole run.
SimResult run_static(const SimConfig& config, const Scheme& scheme);

}  // namespace coinfer
