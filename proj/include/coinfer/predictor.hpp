#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coinfer/core.hpp"
#include "coinfer/sysgraph.hpp"

namespace coinfer {

// One oracle measurement: a scheme's feature matrix on a system graph plus
// the throughput the simulator measured for it. Latencies are kept raw so a
// normalizer can be fitted on the training split.
struct Sample {
  int config_id = 0;  // samples sharing a config share graph and LUTs
  SystemGraph graph;
  std::vector<double> raw_latencies_ms;
  double throughput_per_s = 0;
};

// Index pair into a sample list; label = 1 iff sample a out-performed b.
struct PairSample {
  int a = 0;
  int b = 0;
  int label = 1;
};

// All unordered pairs within each config group, emitted once in dataset
// order and oriented so `a < b`; equal-throughput ties are dropped.
std::vector<PairSample> make_pairs(const std::vector<Sample>& samples);

enum class HeadKind : std::uint8_t { Throughput = 0, Relative = 1 };

// Two GIN layers (sum aggregation with (1 + eps) self term, eps = 0, each
// followed by a Linear-ReLU-Linear perceptron), global mean pooling, and a
// linear head. The relative head scores each scheme embedding with the same
// linear functional and softmaxes the two scores, which makes
// p(A,B) + p(B,A) = 1 structural.
class PredictorModel {
 public:
  PredictorModel() = default;
  PredictorModel(int hidden, HeadKind head, std::uint64_t seed);

  int hidden() const { return hidden_; }
  HeadKind head() const { return head_; }
  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }
  const Normalizer& normalizer() const { return norm_; }
  void set_normalizer(const Normalizer& n) { norm_ = n; }

  std::vector<double> encode(const SystemGraph& graph, const FeatureMatrix& feats) const;
  double predict_throughput(const SystemGraph& graph, const FeatureMatrix& feats) const;
  // Probability that scheme A is faster than scheme B.
  double predict_relative(const SystemGraph& graph, const FeatureMatrix& a,
                          const FeatureMatrix& b) const;

  double score(const SystemGraph& graph, const FeatureMatrix& feats) const;

  // Flat parameter vector (see docs/formats.md for the block layout).
  std::vector<double>& params() { return theta_; }
  const std::vector<double>& params() const { return theta_; }

  void save(const std::string& path) const;
  static PredictorModel load(const std::string& path);

  // Internal layout, exposed for training/grad-check code.
  struct Layout {
    int hidden = 0;
    std::size_t lin1_w, lin1_b, lin2_w, lin2_b;
    std::size_t lin3_w, lin3_b, lin4_w, lin4_b;
    std::size_t head_w, head_b;
    std::size_t total = 0;
  };
  const Layout& layout() const { return layout_; }

 private:
  int hidden_ = 0;
  HeadKind head_ = HeadKind::Throughput;
  bool trained_ = false;
  Normalizer norm_{0.0, 1.0};
  Layout layout_;
  std::vector<double> theta_;

  friend struct PredictorOps;
};

struct TrainOptions {
  int epochs = 200;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int hidden = 64;
  int batch_size = 32;
  double validation_fraction = 0.3;  // held-out share, split at config level
};

struct TrainResult {
  PredictorModel model;
  double validation_metric = 0;  // MAPE for throughput head, accuracy for relative
  std::vector<double> epoch_losses;
  std::vector<std::string> warnings;
};

TrainResult train_throughput(const std::vector<Sample>& samples, const TrainOptions& opt);
TrainResult train_relative(const std::vector<Sample>& samples,
                           const std::vector<PairSample>& pairs, const TrainOptions& opt);

double mape_loss(double predicted, double actual);

// Max relative error between analytic gradients and central finite
// differences (step 1e-5) over a random subset of weights, for the loss
// matching the model's head.
double grad_check_throughput(const PredictorModel& model, const Sample& sample,
                             int probes, std::uint64_t seed);
double grad_check_relative(const PredictorModel& model, const std::vector<Sample>& samples,
                           const PairSample& pair, int probes, std::uint64_t seed);

}  // namespace coinfer
