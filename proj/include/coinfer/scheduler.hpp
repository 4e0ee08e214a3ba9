#pragma once

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "coinfer/core.hpp"
#include "coinfer/predictor.hpp"
#include "coinfer/profiles.hpp"
#include "coinfer/simulator.hpp"

namespace coinfer {

struct SchedulerConfig {
  int tuning_iterations = 10;                // T in the two-stage optimizer
  double bandwidth_change_threshold = 0.2;   // relative change triggering a reschedule
  bool share_similar_devices = false;        // tune (kind, model) groups together
};

// Pairwise scheme comparator; ties keep the incumbent to avoid churn.
class SchemeEvaluator {
 public:
  virtual ~SchemeEvaluator() = default;

  bool candidate_beats(const Scheme& incumbent, const Scheme& candidate) {
    ++calls_;
    return beats(incumbent, candidate);
  }
  int calls() const { return calls_; }
  void reset_calls() { calls_ = 0; }

 private:
  virtual bool beats(const Scheme& incumbent, const Scheme& candidate) = 0;
  int calls_ = 0;
};

// Ground-truth evaluator: simulates each scheme once (memoized) and compares
// measured throughput.
class OracleEvaluator : public SchemeEvaluator {
 public:
  explicit OracleEvaluator(SimConfig config) : config_(std::move(config)) {}
  double throughput_of(const Scheme& scheme);

 private:
  bool beats(const Scheme& incumbent, const Scheme& candidate) override {
    return throughput_of(candidate) > throughput_of(incumbent);
  }
  SimConfig config_;
  std::map<std::string, double> memo_;
};

// Learned evaluator backed by the relative predictor.
class LearnedEvaluator : public SchemeEvaluator {
 public:
  LearnedEvaluator(const PredictorModel& model, const SystemConfig& system,
                   const SubtaskLatencyLut& lut);
  double p_faster(const Scheme& a, const Scheme& b);

 private:
  bool beats(const Scheme& incumbent, const Scheme& candidate) override {
    return p_faster(candidate, incumbent) > 0.5;
  }
  const FeatureMatrix& features_of(const Scheme& scheme);

  const PredictorModel& model_;
  const SystemConfig& system_;
  const SubtaskLatencyLut& lut_;
  SystemGraph graph_;
  std::map<std::string, FeatureMatrix> memo_;
};

// Cartesian product of per-device candidate lists, last device varying
// fastest, candidates in the given order.
std::vector<Scheme> enumerate_design_space(
    const std::vector<std::string>& device_ids,
    const std::map<std::string, std::vector<Strategy>>& candidates);

// Sequential pairwise left-fold; ties keep the incumbent.
Scheme rank_best(const std::vector<Scheme>& schemes, SchemeEvaluator& evaluator);

struct OptimizeResult {
  Scheme scheme;
  int stage1_calls = 0;
  int stage2_calls = 0;
};

// Two-stage scheme optimization: coarse ranking over {DP, PP_comp, PP_comm}
// per device, then one fine-tuning visit per device (capped at T) comparing
// split shifts of +-1 for non-DP strategies.
OptimizeResult optimize(const SystemConfig& system, const SubtaskLatencyLut& lut,
                        const SchedulerConfig& cfg, SchemeEvaluator& evaluator);

struct PlanResult {
  Scheme scheme;
  double predicted_throughput = 0;
  bool requirement_met = false;
  int examined = 0;
};

// Planning-phase search: walk the design space in order and stop at the
// first scheme predicted to meet the requirement, else return the best seen
// within the iteration limit.
PlanResult plan(const SystemConfig& system, const SubtaskLatencyLut& lut,
                double required_throughput_per_s, int iteration_limit,
                const std::function<double(const Scheme&)>& predict_throughput);

PlanResult plan(const SystemConfig& system, const SubtaskLatencyLut& lut,
                double required_throughput_per_s, int iteration_limit,
                const PredictorModel& model);

struct MonitorState {
  std::map<std::string, double> bandwidth_mbps;
  std::set<std::string> clients;
  std::set<std::string> idle;

  static MonitorState from_config(const SystemConfig& system, double t_ms = 0);
};

bool should_reschedule(const MonitorState& before, const MonitorState& after,
                       const SchedulerConfig& cfg);

// Greedily adds idle devices to the DP dispatch set when the evaluator ranks
// the extended scheme at least as good; devices without LUT coverage are
// skipped with a warning.
Scheme assign_idle(const Scheme& scheme, const SystemConfig& system,
                   const SubtaskLatencyLut& lut, const std::vector<std::string>& idle_ids,
                   SchemeEvaluator& evaluator, std::vector<std::string>* warnings = nullptr);

}  // namespace coinfer
