#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "coinfer/core.hpp"
#include "coinfer/predictor.hpp"
#include "coinfer/profiles.hpp"

namespace coinfer {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WorkloadSpec {
  enum class Mode { Closed, Open };
  Mode mode = Mode::Closed;
  // Closed loop: a device admits its next task as soon as fewer than
  // `window` of its tasks are in flight, so consecutive tasks overlap across
  // pipeline stages. Open loop: fixed-rate arrivals regardless of completions.
  int window = 8;
  double open_rate_per_s = 0;

  bool operator==(const WorkloadSpec&) const = default;
};

struct SimConfig {
  SystemConfig system;
  SubtaskLatencyLut lut;
  WorkloadSpec workload;
  double horizon_ms = 10000;
  std::uint64_t seed = 1;
  int max_tasks_per_device = 0;  // 0 = unlimited
  bool record_events = false;
};

struct TaskRecord {
  std::uint64_t id;
  std::string device_id;
  double issue_ms;
  double complete_ms;
  std::string scheme_tag;  // strategy active when the task was issued
  std::string target;      // compute node that ran the server-side/full stage
};

struct LatencyStats {
  std::uint64_t completed = 0;
  double mean_ms = 0, p50_ms = 0, p95_ms = 0, p99_ms = 0, max_ms = 0;
};

struct SimResult {
  double throughput_per_s = 0;  // completed tasks / horizon
  std::uint64_t issued = 0;
  std::uint64_t completed = 0;
  double horizon_ms = 0;
  std::map<std::string, LatencyStats> per_device;
  std::map<std::string, double> utilization;  // busy fraction per component
  std::vector<TaskRecord> tasks;
  std::vector<std::pair<double, std::string>> scheme_log;  // (t_ms, scheme key)
  std::vector<std::string> events;  // populated when record_events

  json summary_json() const;
  std::string tasks_csv() const;
  std::uint64_t fingerprint() const;

  LatencyStats overall_latency() const;
  // Stats over tasks completing inside [from_ms, to_ms).
  LatencyStats window_latency(double from_ms, double to_ms) const;
};

SimResult simulate(const SimConfig& config, const Scheme& scheme);

// Scheme changes applied at given times; tasks run entirely under the scheme
// active at their issue instant.
SimResult simulate_scheduled(const SimConfig& config,
                             const std::vector<std::pair<double, Scheme>>& schedule);

// Every client strategy combination from {DP} + PP(0..n).
std::vector<Scheme> full_scheme_space(const SystemConfig& system);

std::pair<Scheme, SimResult> brute_force_best(const SimConfig& config,
                                              const std::vector<Scheme>& space);

struct TrainingSet {
  std::vector<Sample> samples;
  std::vector<SimConfig> configs;  // indexed by Sample::config_id
  std::vector<Scheme> schemes;     // parallel to samples
};

// Seeded random configs (1-5 devices, 2-8 layers, 1-100 Mbps, synthetic
// LUTs), several schemes simulated per config.
TrainingSet generate_training_set(int n_samples, std::uint64_t seed);

struct SampleGenOptions {
  int min_devices = 1, max_devices = 5;
  int min_layers = 2, max_layers = 8;
  double min_bandwidth_mbps = 1, max_bandwidth_mbps = 100;
  int schemes_per_config = 5;
  double horizon_ms = 2000;
  double slow_horizon_ms = 8000;  // re-run horizon when too few completions
};

TrainingSet generate_training_set(int n_samples, std::uint64_t seed,
                                  const SampleGenOptions& opt);

}  // namespace coinfer
