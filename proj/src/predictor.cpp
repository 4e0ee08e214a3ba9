#include "coinfer/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "coinfer/rng.hpp"

namespace coinfer {

namespace {

double softplus(double x) {
  if (x > 30) return x;
  if (x < -30) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

PredictorModel::Layout make_layout(int hidden) {
  PredictorModel::Layout l;
  l.hidden = hidden;
  std::size_t h = static_cast<std::size_t>(hidden);
  std::size_t off = 0;
  auto block = [&](std::size_t n) {
    std::size_t at = off;
    off += n;
    return at;
  };
  l.lin1_w = block(h * kFeatureDim);
  l.lin1_b = block(h);
  l.lin2_w = block(h * h);
  l.lin2_b = block(h);
  l.lin3_w = block(h * h);
  l.lin3_b = block(h);
  l.lin4_w = block(h * h);
  l.lin4_b = block(h);
  l.head_w = block(h);
  l.head_b = block(1);
  l.total = off;
  return l;
}

}  // namespace

// Forward/backward engine. Kept out of the public header; everything is
// plain dense math over the flat parameter vector.
struct PredictorOps {
  const PredictorModel& m;
  const double* th;
  int H;

  explicit PredictorOps(const PredictorModel& model)
      : m(model), th(model.theta_.data()), H(model.hidden_) {}

  struct Cache {
    int n = 0;
    std::vector<std::vector<int>> in_nbrs;
    std::vector<double> x;     // n x d input
    std::vector<double> agg1;  // n x d
    std::vector<double> a1;    // n x H pre-relu
    std::vector<double> h1;    // n x H
    std::vector<double> agg2;  // n x H
    std::vector<double> a2;    // n x H pre-relu
    std::vector<double> h2;    // n x H
    std::vector<double> g;     // H pooled
  };

  static std::vector<double> flatten(const FeatureMatrix& f) {
    std::vector<double> x(f.rows.size() * kFeatureDim);
    for (std::size_t v = 0; v < f.rows.size(); ++v)
      for (int k = 0; k < kFeatureDim; ++k) x[v * kFeatureDim + (std::size_t)k] = f.rows[v][(std::size_t)k];
    return x;
  }

  // agg[v] = (1 + eps) * x[v] + sum_{u in in(v)} x[u], eps = 0. Self-loops
  // present in the edge list contribute on top of the explicit self term.
  static void aggregate(const std::vector<std::vector<int>>& in_nbrs,
                        const std::vector<double>& x, int dim, std::vector<double>& out) {
    int n = static_cast<int>(in_nbrs.size());
    out.assign(static_cast<std::size_t>(n) * (std::size_t)dim, 0.0);
    for (int v = 0; v < n; ++v) {
      double* o = &out[(std::size_t)v * (std::size_t)dim];
      const double* xv = &x[(std::size_t)v * (std::size_t)dim];
      for (int k = 0; k < dim; ++k) o[k] = xv[k];
      for (int u : in_nbrs[(std::size_t)v]) {
        const double* xu = &x[(std::size_t)u * (std::size_t)dim];
        for (int k = 0; k < dim; ++k) o[k] += xu[k];
      }
    }
  }

  // Reverse-mode counterpart of aggregate.
  static void aggregate_back(const std::vector<std::vector<int>>& in_nbrs,
                             const std::vector<double>& dout, int dim,
                             std::vector<double>& dx) {
    int n = static_cast<int>(in_nbrs.size());
    dx.assign(static_cast<std::size_t>(n) * (std::size_t)dim, 0.0);
    for (int v = 0; v < n; ++v) {
      const double* d = &dout[(std::size_t)v * (std::size_t)dim];
      double* dv = &dx[(std::size_t)v * (std::size_t)dim];
      for (int k = 0; k < dim; ++k) dv[k] += d[k];
      for (int u : in_nbrs[(std::size_t)v]) {
        double* du = &dx[(std::size_t)u * (std::size_t)dim];
        for (int k = 0; k < dim; ++k) du[k] += d[k];
      }
    }
  }

  // y = x * W^T + b, x: n x in, W: out x in, y: n x out
  static void linear(const std::vector<double>& x, int n, int in, const double* w,
                     const double* b, int out, std::vector<double>& y) {
    y.assign(static_cast<std::size_t>(n) * (std::size_t)out, 0.0);
    for (int v = 0; v < n; ++v) {
      const double* xv = &x[(std::size_t)v * (std::size_t)in];
      double* yv = &y[(std::size_t)v * (std::size_t)out];
      for (int o = 0; o < out; ++o) {
        const double* wo = w + (std::size_t)o * (std::size_t)in;
        double acc = b[o];
        for (int k = 0; k < in; ++k) acc += wo[k] * xv[k];
        yv[o] = acc;
      }
    }
  }

  static void linear_back(const std::vector<double>& x, int n, int in, const double* w,
                          int out, const std::vector<double>& dy, double* dw, double* db,
                          std::vector<double>* dx) {
    if (dx) dx->assign(static_cast<std::size_t>(n) * (std::size_t)in, 0.0);
    for (int v = 0; v < n; ++v) {
      const double* xv = &x[(std::size_t)v * (std::size_t)in];
      const double* dyv = &dy[(std::size_t)v * (std::size_t)out];
      double* dxv = dx ? &(*dx)[(std::size_t)v * (std::size_t)in] : nullptr;
      for (int o = 0; o < out; ++o) {
        double d = dyv[o];
        if (d == 0.0) continue;
        const double* wo = w + (std::size_t)o * (std::size_t)in;
        double* dwo = dw + (std::size_t)o * (std::size_t)in;
        db[o] += d;
        for (int k = 0; k < in; ++k) {
          dwo[k] += d * xv[k];
          if (dxv) dxv[k] += d * wo[k];
        }
      }
    }
  }

  static void relu_inplace(std::vector<double>& a) {
    for (double& x : a) x = x > 0 ? x : 0.0;
  }

  Cache forward(const SystemGraph& graph, const FeatureMatrix& feats) const {
    if (feats.size() != graph.size())
      throw ConfigError("feature matrix rows do not match graph nodes");
    const auto& L = m.layout_;
    Cache c;
    c.n = graph.size();
    c.in_nbrs = graph.in_neighbors();
    c.x = flatten(feats);

    aggregate(c.in_nbrs, c.x, kFeatureDim, c.agg1);
    linear(c.agg1, c.n, kFeatureDim, th + L.lin1_w, th + L.lin1_b, H, c.a1);
    std::vector<double> r1 = c.a1;
    relu_inplace(r1);
    linear(r1, c.n, H, th + L.lin2_w, th + L.lin2_b, H, c.h1);

    aggregate(c.in_nbrs, c.h1, H, c.agg2);
    linear(c.agg2, c.n, H, th + L.lin3_w, th + L.lin3_b, H, c.a2);
    std::vector<double> r2 = c.a2;
    relu_inplace(r2);
    linear(r2, c.n, H, th + L.lin4_w, th + L.lin4_b, H, c.h2);

    c.g.assign((std::size_t)H, 0.0);
    for (int v = 0; v < c.n; ++v)
      for (int k = 0; k < H; ++k) c.g[(std::size_t)k] += c.h2[(std::size_t)v * (std::size_t)H + (std::size_t)k];
    for (int k = 0; k < H; ++k) c.g[(std::size_t)k] /= c.n;
    return c;
  }

  double head_score(const Cache& c) const {
    const auto& L = m.layout_;
    double s = th[L.head_b];
    for (int k = 0; k < H; ++k) s += th[L.head_w + (std::size_t)k] * c.g[(std::size_t)k];
    return s;
  }

  // Accumulates d(loss)/d(theta) into grad given d(loss)/d(score).
  void backward(const Cache& c, double dscore, std::vector<double>& grad) const {
    const auto& L = m.layout_;
    double* gr = grad.data();
    for (int k = 0; k < H; ++k) gr[L.head_w + (std::size_t)k] += dscore * c.g[(std::size_t)k];
    gr[L.head_b] += dscore;

    std::vector<double> dh2((std::size_t)c.n * (std::size_t)H);
    for (int v = 0; v < c.n; ++v)
      for (int k = 0; k < H; ++k)
        dh2[(std::size_t)v * (std::size_t)H + (std::size_t)k] =
            dscore * th[L.head_w + (std::size_t)k] / c.n;

    std::vector<double> r2 = c.a2;
    relu_inplace(r2);
    std::vector<double> dr2;
    linear_back(r2, c.n, H, th + L.lin4_w, H, dh2, gr + L.lin4_w, gr + L.lin4_b, &dr2);
    for (std::size_t i = 0; i < dr2.size(); ++i)
      if (c.a2[i] <= 0) dr2[i] = 0;
    std::vector<double> dagg2;
    linear_back(c.agg2, c.n, H, th + L.lin3_w, H, dr2, gr + L.lin3_w, gr + L.lin3_b, &dagg2);
    std::vector<double> dh1;
    aggregate_back(c.in_nbrs, dagg2, H, dh1);

    std::vector<double> r1 = c.a1;
    relu_inplace(r1);
    std::vector<double> dr1;
    linear_back(r1, c.n, H, th + L.lin2_w, H, dh1, gr + L.lin2_w, gr + L.lin2_b, &dr1);
    for (std::size_t i = 0; i < dr1.size(); ++i)
      if (c.a1[i] <= 0) dr1[i] = 0;
    linear_back(c.agg1, c.n, kFeatureDim, th + L.lin1_w, H, dr1, gr + L.lin1_w,
                gr + L.lin1_b, nullptr);
  }
};

PredictorModel::PredictorModel(int hidden, HeadKind head, std::uint64_t seed)
    : hidden_(hidden), head_(head), layout_(make_layout(hidden)) {
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
  theta_.assign(layout_.total, 0.0);
  Rng rng(seed);
  auto init_block = [&](std::size_t off, int out, int in) {
    double a = std::sqrt(6.0 / (in + out));
    for (std::size_t i = 0; i < (std::size_t)out * (std::size_t)in; ++i)
      theta_[off + i] = rng.uniform(-a, a);
  };
  init_block(layout_.lin1_w, hidden, kFeatureDim);
  init_block(layout_.lin2_w, hidden, hidden);
  init_block(layout_.lin3_w, hidden, hidden);
  init_block(layout_.lin4_w, hidden, hidden);
  init_block(layout_.head_w, 1, hidden);
}

std::vector<double> PredictorModel::encode(const SystemGraph& graph,
                                           const FeatureMatrix& feats) const {
  PredictorOps ops(*this);
  return ops.forward(graph, feats).g;
}

double PredictorModel::score(const SystemGraph& graph, const FeatureMatrix& feats) const {
  PredictorOps ops(*this);
  auto c = ops.forward(graph, feats);
  return ops.head_score(c);
}

double PredictorModel::predict_throughput(const SystemGraph& graph,
                                          const FeatureMatrix& feats) const {
  return softplus(score(graph, feats));
}

double PredictorModel::predict_relative(const SystemGraph& graph, const FeatureMatrix& a,
                                        const FeatureMatrix& b) const {
  if (a.size() != b.size() || a.size() != graph.size())
    throw ConfigError("relative prediction requires matrices on the same graph");
  double d = score(graph, a) - score(graph, b);
  if (d == 0.0) return 0.5;
  // sigma(|d|) lies in [0.5, 1], so 1 - p is exact and the two orientations
  // sum to exactly 1.
  double p = sigmoid(std::fabs(d));
  return d > 0 ? p : 1.0 - p;
}

std::vector<PairSample> make_pairs(const std::vector<Sample>& samples) {
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i)
    groups[samples[(std::size_t)i].config_id].push_back(i);
  std::vector<PairSample> pairs;
  for (const auto& [cfg, idxs] : groups) {
    for (std::size_t p = 0; p < idxs.size(); ++p) {
      for (std::size_t q = p + 1; q < idxs.size(); ++q) {
        double ta = samples[(std::size_t)idxs[p]].throughput_per_s;
        double tb = samples[(std::size_t)idxs[q]].throughput_per_s;
        if (ta == tb) continue;
        pairs.push_back({idxs[p], idxs[q], ta > tb ? 1 : 0});
      }
    }
  }
  return pairs;
}

double mape_loss(double predicted, double actual) {
  return std::fabs(predicted - actual) / actual;
}

namespace {

struct Adam {
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> mom, vel;
  long step = 0;

  Adam(std::size_t n, double lr_) : lr(lr_), mom(n, 0.0), vel(n, 0.0) {}

  void update(std::vector<double>& theta, const std::vector<double>& grad) {
    ++step;
    double bc1 = 1.0 - std::pow(beta1, step);
    double bc2 = 1.0 - std::pow(beta2, step);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      mom[i] = beta1 * mom[i] + (1 - beta1) * grad[i];
      vel[i] = beta2 * vel[i] + (1 - beta2) * grad[i] * grad[i];
      theta[i] -= lr * (mom[i] / bc1) / (std::sqrt(vel[i] / bc2) + eps);
    }
  }
};

// Deterministic 70/30 split at config-group level so validation configs are
// never seen in training.
void split_configs(const std::vector<Sample>& samples, double val_frac, std::uint64_t seed,
                   std::vector<int>& train_idx, std::vector<int>& val_idx) {
  std::vector<int> cfg_ids;
  std::map<int, std::vector<int>> by_cfg;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
    int c = samples[(std::size_t)i].config_id;
    if (!by_cfg.count(c)) cfg_ids.push_back(c);
    by_cfg[c].push_back(i);
  }
  Rng rng(seed ^ 0x5b7f0ull);
  rng.shuffle(cfg_ids);
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_frac * cfg_ids.size()));
  if (cfg_ids.size() > 1 && n_val == 0) n_val = 1;
  if (n_val >= cfg_ids.size()) n_val = cfg_ids.size() - 1;
  for (std::size_t k = 0; k < cfg_ids.size(); ++k) {
    auto& dst = (k < n_val) ? val_idx : train_idx;
    for (int i : by_cfg[cfg_ids[k]]) dst.push_back(i);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
}

Normalizer fit_normalizer(const std::vector<Sample>& samples, const std::vector<int>& idx,
                          std::vector<std::string>& warnings) {
  std::vector<double> values;
  for (int i : idx)
    for (double v : samples[(std::size_t)i].raw_latencies_ms) values.push_back(v);
  try {
    return Normalizer::fit(values);
  } catch (const ConfigError&) {
    warnings.push_back("degenerate latency distribution; using unit normalizer");
    return Normalizer{0.0, 1.0};
  }
}

}  // namespace

TrainResult train_throughput(const std::vector<Sample>& samples, const TrainOptions& opt) {
  if (samples.size() < 2) throw ConfigError("need at least 2 samples to train");
  TrainResult res;

  std::vector<int> train_idx, val_idx;
  split_configs(samples, opt.validation_fraction, opt.seed, train_idx, val_idx);

  bool all_equal = true;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].throughput_per_s != samples[0].throughput_per_s) all_equal = false;
  if (all_equal) res.warnings.push_back("all training targets are equal");

  PredictorModel model(opt.hidden, HeadKind::Throughput, opt.seed);
  model.set_normalizer(fit_normalizer(samples, train_idx, res.warnings));

  std::vector<FeatureMatrix> feats(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    feats[i] = assemble_features(samples[i].graph, samples[i].raw_latencies_ms,
                                 model.normalizer());

  Adam adam(model.params().size(), opt.lr);
  std::vector<double> grad(model.params().size(), 0.0);
  Rng shuffle_rng(opt.seed ^ 0x9e3779b97f4a7c15ull);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::vector<int> order = train_idx;
    shuffle_rng.shuffle(order);
    double epoch_loss = 0;
    for (std::size_t at = 0; at < order.size(); at += (std::size_t)opt.batch_size) {
      std::size_t end = std::min(order.size(), at + (std::size_t)opt.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      PredictorOps ops(model);
      for (std::size_t k = at; k < end; ++k) {
        const auto& s = samples[(std::size_t)order[k]];
        auto cache = ops.forward(s.graph, feats[(std::size_t)order[k]]);
        double sc = ops.head_score(cache);
        double pred = softplus(sc);
        double t = s.throughput_per_s;
        epoch_loss += mape_loss(pred, t);
        double dpred = (pred > t ? 1.0 : (pred < t ? -1.0 : 0.0)) / t;
        double dscore = dpred * sigmoid(sc) / double(end - at);
        ops.backward(cache, dscore, grad);
      }
      adam.update(model.params(), grad);
    }
    res.epoch_losses.push_back(epoch_loss / std::max<std::size_t>(1, order.size()));
  }

  model.set_trained(true);
  double val = 0;
  for (int i : val_idx) {
    const auto& s = samples[(std::size_t)i];
    val += mape_loss(model.predict_throughput(s.graph, feats[(std::size_t)i]),
                     s.throughput_per_s);
  }
  res.validation_metric = val_idx.empty() ? 0.0 : val / val_idx.size();
  res.model = std::move(model);
  return res;
}

TrainResult train_relative(const std::vector<Sample>& samples,
                           const std::vector<PairSample>& pairs, const TrainOptions& opt) {
  if (pairs.empty()) throw ConfigError("need at least 1 pair to train");
  TrainResult res;

  // Split pairs by the config group of their samples; a pair never straddles
  // the split because both sides share a config.
  std::vector<int> train_idx_s, val_idx_s;
  split_configs(samples, opt.validation_fraction, opt.seed, train_idx_s, val_idx_s);
  std::vector<char> in_train(samples.size(), 0);
  for (int i : train_idx_s) in_train[(std::size_t)i] = 1;

  std::vector<int> train_pairs, val_pairs;
  for (int p = 0; p < static_cast<int>(pairs.size()); ++p) {
    if (in_train[(std::size_t)pairs[(std::size_t)p].a]) train_pairs.push_back(p);
    else val_pairs.push_back(p);
  }
  if (train_pairs.empty()) throw ConfigError("no training pairs after split");

  PredictorModel model(opt.hidden, HeadKind::Relative, opt.seed);
  model.set_normalizer(fit_normalizer(samples, train_idx_s, res.warnings));

  std::vector<FeatureMatrix> feats(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    feats[i] = assemble_features(samples[i].graph, samples[i].raw_latencies_ms,
                                 model.normalizer());

  Adam adam(model.params().size(), opt.lr);
  std::vector<double> grad(model.params().size(), 0.0);
  Rng shuffle_rng(opt.seed ^ 0x9e3779b97f4a7c15ull);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::vector<int> order = train_pairs;
    shuffle_rng.shuffle(order);
    double epoch_loss = 0;
    for (std::size_t at = 0; at < order.size(); at += (std::size_t)opt.batch_size) {
      std::size_t end = std::min(order.size(), at + (std::size_t)opt.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      PredictorOps ops(model);
      for (std::size_t k = at; k < end; ++k) {
        const auto& pr = pairs[(std::size_t)order[k]];
        const auto& sa = samples[(std::size_t)pr.a];
        const auto& sb = samples[(std::size_t)pr.b];
        auto ca = ops.forward(sa.graph, feats[(std::size_t)pr.a]);
        auto cb = ops.forward(sb.graph, feats[(std::size_t)pr.b]);
        double d = ops.head_score(ca) - ops.head_score(cb);
        double y = pr.label;
        epoch_loss += softplus(d) - y * d;  // BCE on sigma(d)
        double dd = (sigmoid(d) - y) / double(end - at);
        ops.backward(ca, dd, grad);
        ops.backward(cb, -dd, grad);
      }
      adam.update(model.params(), grad);
    }
    res.epoch_losses.push_back(epoch_loss / std::max<std::size_t>(1, order.size()));
  }

  model.set_trained(true);
  int correct = 0;
  for (int p : val_pairs) {
    const auto& pr = pairs[(std::size_t)p];
    double prob = model.predict_relative(samples[(std::size_t)pr.a].graph,
                                         feats[(std::size_t)pr.a], feats[(std::size_t)pr.b]);
    if ((prob > 0.5 ? 1 : 0) == pr.label) ++correct;
  }
  res.validation_metric = val_pairs.empty() ? 1.0 : double(correct) / val_pairs.size();
  res.model = std::move(model);
  return res;
}

namespace {

double loss_throughput(const PredictorModel& model, const SystemGraph& g,
                       const FeatureMatrix& f, double target) {
  return mape_loss(model.predict_throughput(g, f), target);
}

double loss_relative(const PredictorModel& model, const SystemGraph& g,
                     const FeatureMatrix& fa, const FeatureMatrix& fb, int label) {
  PredictorOps ops(model);
  auto ca = ops.forward(g, fa);
  auto cb = ops.forward(g, fb);
  double d = ops.head_score(ca) - ops.head_score(cb);
  return softplus(d) - label * d;
}

double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double worst = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), 1e-6});
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace

double grad_check_throughput(const PredictorModel& model, const Sample& sample,
                             int probes, std::uint64_t seed) {
  PredictorModel m = model;
  FeatureMatrix f =
      assemble_features(sample.graph, sample.raw_latencies_ms, m.normalizer());

  std::vector<double> grad(m.params().size(), 0.0);
  {
    PredictorOps ops(m);
    auto cache = ops.forward(sample.graph, f);
    double sc = ops.head_score(cache);
    double pred = softplus(sc);
    double t = sample.throughput_per_s;
    double dpred = (pred > t ? 1.0 : -1.0) / t;
    ops.backward(cache, dpred * sigmoid(sc), grad);
  }

  Rng rng(seed);
  const double h = 1e-5;
  std::vector<double> ana, num;
  for (int p = 0; p < probes; ++p) {
    std::size_t i = (std::size_t)rng.uniform_int(0, (std::int64_t)m.params().size() - 1);
    double keep = m.params()[i];
    m.params()[i] = keep + h;
    double up = loss_throughput(m, sample.graph, f, sample.throughput_per_s);
    m.params()[i] = keep - h;
    double dn = loss_throughput(m, sample.graph, f, sample.throughput_per_s);
    m.params()[i] = keep;
    ana.push_back(grad[i]);
    num.push_back((up - dn) / (2 * h));
  }
  return max_rel_err(ana, num);
}

double grad_check_relative(const PredictorModel& model, const std::vector<Sample>& samples,
                           const PairSample& pair, int probes, std::uint64_t seed) {
  PredictorModel m = model;
  const auto& sa = samples[(std::size_t)pair.a];
  const auto& sb = samples[(std::size_t)pair.b];
  FeatureMatrix fa = assemble_features(sa.graph, sa.raw_latencies_ms, m.normalizer());
  FeatureMatrix fb = assemble_features(sb.graph, sb.raw_latencies_ms, m.normalizer());

  std::vector<double> grad(m.params().size(), 0.0);
  {
    PredictorOps ops(m);
    auto ca = ops.forward(sa.graph, fa);
    auto cb = ops.forward(sb.graph, fb);
    double d = ops.head_score(ca) - ops.head_score(cb);
    double dd = sigmoid(d) - pair.label;
    ops.backward(ca, dd, grad);
    ops.backward(cb, -dd, grad);
  }

  Rng rng(seed);
  const double h = 1e-5;
  std::vector<double> ana, num;
  for (int p = 0; p < probes; ++p) {
    std::size_t i = (std::size_t)rng.uniform_int(0, (std::int64_t)m.params().size() - 1);
    double keep = m.params()[i];
    m.params()[i] = keep + h;
    double up = loss_relative(m, sa.graph, fa, fb, pair.label);
    m.params()[i] = keep - h;
    double dn = loss_relative(m, sa.graph, fa, fb, pair.label);
    m.params()[i] = keep;
    ana.push_back(grad[i]);
    num.push_back((up - dn) / (2 * h));
  }
  return max_rel_err(ana, num);
}

// ---- checkpoint io ---------------------------------------------------------
// Layout documented in docs/formats.md: magic "CIPM", u32 version, u8 head,
// u8 trained, u32 hidden, f64 v_min, f64 v_max, u64 param count, params as
// little-endian f64.

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  std::uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void PredictorModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write checkpoint: " + path);
  os.write("CIPM", 4);
  put_u32(os, 1);
  os.put(static_cast<char>(head_));
  os.put(trained_ ? 1 : 0);
  put_u32(os, static_cast<std::uint32_t>(hidden_));
  put_f64(os, norm_.v_min);
  put_f64(os, norm_.v_max);
  put_u64(os, theta_.size());
  for (double t : theta_) put_f64(os, t);
  if (!os) throw ConfigError("short write on checkpoint: " + path);
}

PredictorModel PredictorModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "CIPM")
    throw ConfigError("bad checkpoint magic in " + path);
  std::uint32_t version = get_u32(is);
  if (version != 1) throw ConfigError("unsupported checkpoint version");
  PredictorModel m;
  m.head_ = static_cast<HeadKind>(is.get());
  m.trained_ = is.get() != 0;
  m.hidden_ = static_cast<int>(get_u32(is));
  m.layout_ = make_layout(m.hidden_);
  m.norm_.v_min = get_f64(is);
  m.norm_.v_max = get_f64(is);
  std::uint64_t count = get_u64(is);
  if (count != m.layout_.total) throw ConfigError("checkpoint parameter count mismatch");
  m.theta_.resize(count);
  for (auto& t : m.theta_) t = get_f64(is);
  if (!is) throw ConfigError("truncated checkpoint: " + path);
  return m;
}

}  // namespace coinfer
