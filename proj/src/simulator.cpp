#include "coinfer/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <sstream>

#include "coinfer/rng.hpp"
#include "coinfer/sysgraph.hpp"

namespace coinfer {

namespace {

// Finish time of `bytes` starting at `start_ms`, integrating the
// piecewise-constant link rate so in-flight transfers honor trace changes.
double transfer_finish_ms(const NetworkState& net, const std::string& device_id,
                          double start_ms, std::uint64_t bytes) {
  double remaining_bits = static_cast<double>(bytes) * 8.0;
  double t = start_ms;
  for (;;) {
    double rate_bits_per_ms = net.bandwidth_for(device_id, t) * 1000.0;
    double next_change = std::numeric_limits<double>::infinity();
    for (const auto& p : net.trace)
      if (p.t_ms > t) {
        next_change = p.t_ms;
        break;
      }
    double span = next_change - t;
    if (remaining_bits <= rate_bits_per_ms * span)
      return t + remaining_bits / rate_bits_per_ms;
    remaining_bits -= rate_bits_per_ms * span;
    t = next_change;
  }
}

struct Event {
  double t;
  std::uint64_t seq;
  std::function<void()> fn;
};

struct EventCmp {
  bool operator()(const Event& a, const Event& b) const {
    return a.t > b.t || (a.t == b.t && a.seq > b.seq);
  }
};

struct Resource {
  double free_at = 0;
  double busy_ms = 0;
};

struct LiveTask {
  std::uint64_t id;
  int device;  // client index
  double issue_ms;
  Strategy strategy;
  std::string target;
};

struct BatchKey {
  std::string model;
  int i, j;
  auto operator<=>(const BatchKey&) const = default;
};

struct BatchGroup {
  std::vector<LiveTask> pending;
  std::uint64_t gen = 0;
};

class Engine {
 public:
  Engine(const SimConfig& cfg, const std::vector<std::pair<double, Scheme>>& schedule)
      : cfg_(cfg), schedule_(schedule) {
    throw_if_invalid(cfg.system);
    if (cfg.horizon_ms <= 0) throw SimError("horizon must be > 0");
    if (schedule_.empty()) throw SimError("no scheme scheduled");
    clients_ = cfg_.system.clients();
    idles_ = cfg_.system.idles();
    server_kind_ = cfg_.system.server()->kind;
    for (const auto& s : schedule_)
      for (const auto* c : clients_)
        if (!s.second.assignment.count(c->device_id))
          throw SimError("scheme missing strategy for device " + c->device_id);

    dev_compute_.resize(clients_.size());
    fw_link_.resize(clients_.size());
    ret_link_.resize(clients_.size());
    outstanding_.assign(clients_.size(), 0);
    issued_per_dev_.assign(clients_.size(), 0);
    v_local_.assign(clients_.size(), 0.0);
    idle_compute_.resize(idles_.size());
    idle_fw_.resize(idles_.size());
    idle_ret_.resize(idles_.size());
    v_idle_.assign(idles_.size(), 0.0);
    workers_.resize(static_cast<std::size_t>(cfg_.system.worker_count));
  }

  SimResult run() {
    apply_scheme(schedule_.front().second, 0.0);
    for (std::size_t k = 1; k < schedule_.size(); ++k) {
      const auto& [t, scheme] = schedule_[k];
      push(t, [this, scheme, t] { apply_scheme(scheme, t); });
    }

    if (cfg_.workload.mode == WorkloadSpec::Mode::Closed) {
      for (int i = 0; i < n_clients(); ++i) try_admit(i, 0.0);
    } else {
      if (cfg_.workload.open_rate_per_s <= 0)
        throw SimError("open-loop workload needs a positive rate");
      double gap = 1000.0 / cfg_.workload.open_rate_per_s;
      for (int i = 0; i < n_clients(); ++i) schedule_arrival(i, 0.0, gap);
    }

    while (!pq_.empty()) {
      Event ev = pq_.top();
      if (ev.t > cfg_.horizon_ms) break;
      pq_.pop();
      now_ = ev.t;
      ev.fn();
    }
    return finish();
  }

 private:
  int n_clients() const { return static_cast<int>(clients_.size()); }

  void push(double t, std::function<void()> fn) {
    pq_.push(Event{t, seq_++, std::move(fn)});
  }

  void log(double t, const std::string& line) {
    if (cfg_.record_events) {
      std::ostringstream os;
      os << "t=" << t << ' ' << line;
      result_.events.push_back(os.str());
    }
  }

  void apply_scheme(const Scheme& scheme, double t) {
    active_ = scheme;
    helper_idx_.clear();
    for (const auto& id : scheme.idle_helpers) {
      for (std::size_t k = 0; k < idles_.size(); ++k)
        if (idles_[k]->device_id == id) helper_idx_.push_back(static_cast<int>(k));
    }
    result_.scheme_log.emplace_back(t, scheme.key());
    log(t, "scheme " + scheme.key());
  }

  void schedule_arrival(int dev, double t, double gap) {
    if (t > cfg_.horizon_ms) return;
    if (cfg_.max_tasks_per_device && issued_per_dev_[(std::size_t)dev] >= cfg_.max_tasks_per_device)
      return;
    push(t, [this, dev, t, gap] {
      issue(dev, t);
      schedule_arrival(dev, t + gap, gap);
    });
  }

  void try_admit(int dev, double t) {
    while (outstanding_[(std::size_t)dev] < cfg_.workload.window) {
      if (cfg_.max_tasks_per_device &&
          issued_per_dev_[(std::size_t)dev] >= cfg_.max_tasks_per_device)
        return;
      issue(dev, t);
    }
  }

  const ModelProfile& model_of(int dev) const {
    return cfg_.system.models.at(clients_[(std::size_t)dev]->device_id);
  }

  double lut_ms(const std::string& kind, const ModelProfile& m, int i, int j, int b) const {
    return cfg_.lut.lookup(kind, m.model_id, i, j, b);
  }

  void run_compute(Resource& res, double ready, double dur, std::function<void(double)> done) {
    double start = std::max(ready, res.free_at);
    double end = start + dur;
    res.free_at = end;
    res.busy_ms += dur;
    push(end, [done = std::move(done), end] { done(end); });
  }

  // FIFO channel: holds the link for overhead + rate-integrated payload time.
  void run_transfer(Resource& ch, const std::string& link_device, double ready,
                    std::uint64_t bytes, std::function<void(double)> done) {
    double start = std::max(ready, ch.free_at);
    double data_start = start + cfg_.system.network.per_message_overhead_ms;
    double end = transfer_finish_ms(cfg_.system.network, link_device, data_start, bytes);
    ch.free_at = end;
    ch.busy_ms += end - start;
    push(end, [done = std::move(done), end] { done(end); });
  }

  void issue(int dev, double t) {
    const auto& strat = active_.assignment.at(clients_[(std::size_t)dev]->device_id);
    LiveTask task{next_id_++, dev, t, strat, "server"};
    ++outstanding_[(std::size_t)dev];
    ++issued_per_dev_[(std::size_t)dev];
    ++result_.issued;
    log(t, "issue " + clients_[(std::size_t)dev]->device_id + "#" + std::to_string(task.id) +
               " " + strat.tag());

    const auto& m = model_of(dev);
    const auto& dev_kind = clients_[(std::size_t)dev]->kind;
    if (strat.is_pp()) {
      int s = strat.split;
      int n = m.n_layers;
      if (s == n) {
        // Device-only: full model local, result stays on the device.
        task.target = "local";
        run_compute(dev_compute_[(std::size_t)dev], t, lut_ms(dev_kind, m, 0, n, 1),
                    [this, task](double end) { complete(task, end); });
      } else if (s == 0) {
        send_to_server(task, t, m.boundary_volumes[0], 0, n);
      } else {
        double stage = lut_ms(dev_kind, m, 0, s, 1);
        std::uint64_t vol = m.boundary_volumes[(std::size_t)s];
        run_compute(dev_compute_[(std::size_t)dev], t, stage,
                    [this, task, vol, s, n = m.n_layers](double end) {
                      send_to_server(task, end, vol, s, n);
                    });
      }
    } else {
      dispatch_dp(task, t);
    }
  }

  void send_to_server(const LiveTask& task, double ready, std::uint64_t bytes, int i, int j) {
    run_transfer(fw_link_[(std::size_t)task.device], clients_[(std::size_t)task.device]->device_id,
                 ready, bytes,
                 [this, task, i, j](double end) { enqueue_batch(task, end, i, j); });
  }

  // Earliest-projected-completion dispatch over full-model replicas. Virtual
  // clocks approximate each node's backlog; actual execution still flows
  // through the real queues.
  void dispatch_dp(LiveTask task, double t) {
    const auto& m = model_of(task.device);
    const auto& dev = *clients_[(std::size_t)task.device];
    int n = m.n_layers;

    double local_ms = lut_ms(dev.kind, m, 0, n, 1);
    double best = std::max(t, v_local_[(std::size_t)task.device]) + local_ms;
    int choice = -1;  // -1 local, -2 server, >=0 idle index

    double bw = cfg_.system.network.bandwidth_for(dev.device_id, t);
    double lead = transfer_ms(m.boundary_volumes[0], bw,
                              cfg_.system.network.per_message_overhead_ms);
    double srv_ms = lut_ms(server_kind_, m, 0, n, 1) / cfg_.system.worker_count;
    double srv_est = std::max(t + lead, v_server_) + srv_ms;
    if (srv_est < best) {
      best = srv_est;
      choice = -2;
    }
    for (int k : helper_idx_) {
      const auto& idle = *idles_[(std::size_t)k];
      if (!cfg_.lut.has(idle.kind, m.model_id, 0, n)) continue;
      double idle_bw = cfg_.system.network.bandwidth_for(idle.device_id, t);
      double idle_lead = lead + transfer_ms(m.boundary_volumes[0], idle_bw,
                                            cfg_.system.network.per_message_overhead_ms);
      double est = std::max(t + idle_lead, v_idle_[(std::size_t)k]) +
                   lut_ms(idle.kind, m, 0, n, 1);
      if (est < best) {
        best = est;
        choice = k;
      }
    }

    if (choice == -1) {
      v_local_[(std::size_t)task.device] = best;
      task.target = "local";
      run_compute(dev_compute_[(std::size_t)task.device], t, local_ms,
                  [this, task](double end) { complete(task, end); });
    } else if (choice == -2) {
      v_server_ = best;
      task.target = "server";
      send_to_server(task, t, m.boundary_volumes[0], 0, n);
    } else {
      v_idle_[(std::size_t)choice] = best;
      task.target = idles_[(std::size_t)choice]->device_id;
      forward_to_idle(task, t, choice);
    }
  }

  // Idle-device route: raw input to the server, server forwards it over the
  // idle device's downlink, full model runs there, result hops back.
  void forward_to_idle(const LiveTask& task, double t, int idle_idx) {
    const auto& m = model_of(task.device);
    std::uint64_t raw = m.boundary_volumes[0];
    std::uint64_t res = result_volume(m);
    const std::string src_id = clients_[(std::size_t)task.device]->device_id;
    const std::string idle_id = idles_[(std::size_t)idle_idx]->device_id;
    const std::string idle_kind = idles_[(std::size_t)idle_idx]->kind;
    double full_ms = lut_ms(idle_kind, m, 0, m.n_layers, 1);

    run_transfer(fw_link_[(std::size_t)task.device], src_id, t, raw,
                 [this, task, idle_idx, idle_id, raw, res, full_ms](double t1) {
      run_transfer(idle_ret_[(std::size_t)idle_idx], idle_id, t1, raw,
                   [this, task, idle_idx, idle_id, res, full_ms](double t2) {
        run_compute(idle_compute_[(std::size_t)idle_idx], t2, full_ms,
                    [this, task, idle_idx, idle_id, res](double t3) {
          run_transfer(idle_fw_[(std::size_t)idle_idx], idle_id, t3, res,
                       [this, task, res](double t4) {
            run_transfer(ret_link_[(std::size_t)task.device],
                         clients_[(std::size_t)task.device]->device_id, t4, res,
                         [this, task](double t5) { complete(task, t5); });
          });
        });
      });
    });
  }

  void enqueue_batch(const LiveTask& task, double t, int i, int j) {
    const auto& m = model_of(task.device);
    BatchKey key{m.model_id, i, j};
    auto& g = groups_[key];
    g.pending.push_back(task);
    if (static_cast<int>(g.pending.size()) >= cfg_.system.batch_policy.max_batch) {
      flush(key, t);
    } else if (g.pending.size() == 1) {
      std::uint64_t gen = g.gen;
      push(t + cfg_.system.batch_policy.window_ms, [this, key, gen] {
        auto& grp = groups_[key];
        if (grp.gen == gen && !grp.pending.empty()) flush(key, now_);
      });
    }
  }

  void flush(const BatchKey& key, double t) {
    auto& g = groups_[key];
    std::vector<LiveTask> batch = std::move(g.pending);
    g.pending.clear();
    ++g.gen;

    int b = static_cast<int>(batch.size());
    double dur = cfg_.lut.lookup(server_kind_, key.model, key.i, key.j, b);
    // Earliest-free worker; flushed batches queue there FIFO.
    std::size_t w = 0;
    for (std::size_t k = 1; k < workers_.size(); ++k)
      if (workers_[k].free_at < workers_[w].free_at) w = k;
    log(t, "flush " + key.model + "[" + std::to_string(key.i) + "," + std::to_string(key.j) +
               ") b=" + std::to_string(b));
    run_compute(workers_[w], t, dur, [this, batch = std::move(batch)](double end) {
      for (const auto& task : batch) {
        std::uint64_t res = result_volume(model_of(task.device));
        run_transfer(ret_link_[(std::size_t)task.device],
                     clients_[(std::size_t)task.device]->device_id, end, res,
                     [this, task](double t2) { complete(task, t2); });
      }
    });
  }

  void complete(const LiveTask& task, double t) {
    --outstanding_[(std::size_t)task.device];
    ++result_.completed;
    const std::string& dev_id = clients_[(std::size_t)task.device]->device_id;
    result_.tasks.push_back(
        {task.id, dev_id, task.issue_ms, t, task.strategy.tag(), task.target});
    log(t, "complete " + dev_id + "#" + std::to_string(task.id));
    if (cfg_.workload.mode == WorkloadSpec::Mode::Closed) try_admit(task.device, t);
  }

  SimResult finish() {
    result_.horizon_ms = cfg_.horizon_ms;
    result_.throughput_per_s =
        static_cast<double>(result_.completed) / (cfg_.horizon_ms / 1000.0);

    std::map<std::string, std::vector<double>> lat;
    for (const auto& r : result_.tasks) lat[r.device_id].push_back(r.complete_ms - r.issue_ms);
    for (auto& [id, v] : lat) {
      std::sort(v.begin(), v.end());
      LatencyStats s;
      s.completed = v.size();
      for (double x : v) s.mean_ms += x;
      s.mean_ms /= static_cast<double>(v.size());
      auto pct = [&](double p) {
        return v[std::min(v.size() - 1, static_cast<std::size_t>(p * (double)v.size()))];
      };
      s.p50_ms = pct(0.50);
      s.p95_ms = pct(0.95);
      s.p99_ms = pct(0.99);
      s.max_ms = v.back();
      result_.per_device[id] = s;
    }

    double horizon = cfg_.horizon_ms;
    for (int i = 0; i < n_clients(); ++i) {
      const std::string& id = clients_[(std::size_t)i]->device_id;
      result_.utilization["device:" + id] = std::min(1.0, dev_compute_[(std::size_t)i].busy_ms / horizon);
      result_.utilization["link_fw:" + id] = std::min(1.0, fw_link_[(std::size_t)i].busy_ms / horizon);
      result_.utilization["link_ret:" + id] = std::min(1.0, ret_link_[(std::size_t)i].busy_ms / horizon);
    }
    double worker_busy = 0;
    for (const auto& w : workers_) worker_busy += w.busy_ms;
    result_.utilization["server_workers"] =
        std::min(1.0, worker_busy / (horizon * (double)workers_.size()));
    for (std::size_t k = 0; k < idles_.size(); ++k)
      result_.utilization["idle:" + idles_[k]->device_id] =
          std::min(1.0, idle_compute_[k].busy_ms / horizon);
    return std::move(result_);
  }

  const SimConfig& cfg_;
  std::vector<std::pair<double, Scheme>> schedule_;
  std::vector<const DeviceProfile*> clients_;
  std::vector<const DeviceProfile*> idles_;
  std::string server_kind_;

  std::priority_queue<Event, std::vector<Event>, EventCmp> pq_;
  std::uint64_t seq_ = 0;
  double now_ = 0;
  std::uint64_t next_id_ = 1;

  Scheme active_;
  std::vector<int> helper_idx_;

  std::vector<Resource> dev_compute_, fw_link_, ret_link_;
  std::vector<Resource> idle_compute_, idle_fw_, idle_ret_;
  std::vector<Resource> workers_;
  std::vector<int> outstanding_, issued_per_dev_;
  std::vector<double> v_local_, v_idle_;
  double v_server_ = 0;
  std::map<BatchKey, BatchGroup> groups_;

  SimResult result_;
};

}  // namespace

SimResult simulate(const SimConfig& config, const Scheme& scheme) {
  return simulate_scheduled(config, {{0.0, scheme}});
}

SimResult simulate_scheduled(const SimConfig& config,
                             const std::vector<std::pair<double, Scheme>>& schedule) {
  Engine engine(config, schedule);
  return engine.run();
}

std::vector<Scheme> full_scheme_space(const SystemConfig& system) {
  auto clients = system.clients();
  std::vector<std::vector<Strategy>> options;
  for (const auto* c : clients) {
    const auto& m = system.models.at(c->device_id);
    std::vector<Strategy> opts{Strategy::dp()};
    for (int s = 0; s <= m.n_layers; ++s) opts.push_back(Strategy::pp(s));
    options.push_back(std::move(opts));
  }
  std::vector<Scheme> space;
  std::vector<std::size_t> idx(options.size(), 0);
  for (;;) {
    Scheme s;
    for (std::size_t d = 0; d < options.size(); ++d)
      s.assignment[clients[d]->device_id] = options[d][idx[d]];
    space.push_back(std::move(s));
    std::size_t d = options.size();
    while (d > 0) {
      --d;
      if (++idx[d] < options[d].size()) break;
      idx[d] = 0;
      if (d == 0) return space;
    }
  }
}

std::pair<Scheme, SimResult> brute_force_best(const SimConfig& config,
                                              const std::vector<Scheme>& space) {
  if (space.empty()) throw SimError("empty scheme space");
  Scheme best_scheme = space.front();
  SimResult best = simulate(config, space.front());
  for (std::size_t k = 1; k < space.size(); ++k) {
    SimResult r = simulate(config, space[k]);
    if (r.throughput_per_s > best.throughput_per_s) {
      best = std::move(r);
      best_scheme = space[k];
    }
  }
  return {best_scheme, std::move(best)};
}

json SimResult::summary_json() const {
  json per_dev = json::object();
  for (const auto& [id, s] : per_device)
    per_dev[id] = json{{"completed", s.completed}, {"mean_ms", s.mean_ms},
                       {"p50_ms", s.p50_ms},       {"p95_ms", s.p95_ms},
                       {"p99_ms", s.p99_ms},       {"max_ms", s.max_ms}};
  json util = json::object();
  for (const auto& [k, v] : utilization) util[k] = v;
  json log = json::array();
  for (const auto& [t, key] : scheme_log) log.push_back(json{{"t_ms", t}, {"scheme", key}});
  return json{{"throughput_per_s", throughput_per_s},
              {"issued", issued},
              {"completed", completed},
              {"horizon_ms", horizon_ms},
              {"per_device", per_dev},
              {"utilization", util},
              {"scheme_log", log}};
}

std::string SimResult::tasks_csv() const {
  std::ostringstream os;
  os << "task_id,device_id,issue_ms,complete_ms,scheme,target\n";
  for (const auto& r : tasks)
    os << r.id << ',' << r.device_id << ',' << r.issue_ms << ',' << r.complete_ms << ','
       << r.scheme_tag << ',' << r.target << '\n';
  return os.str();
}

std::uint64_t SimResult::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  h = fnv1a64_f64(throughput_per_s, h);
  for (const auto& r : tasks) {
    h = fnv1a64(&r.id, sizeof(r.id), h);
    h = fnv1a64(r.device_id.data(), r.device_id.size(), h);
    h = fnv1a64_f64(r.issue_ms, h);
    h = fnv1a64_f64(r.complete_ms, h);
    h = fnv1a64(r.scheme_tag.data(), r.scheme_tag.size(), h);
  }
  return h;
}

LatencyStats SimResult::overall_latency() const {
  return window_latency(0, std::numeric_limits<double>::infinity());
}

LatencyStats SimResult::window_latency(double from_ms, double to_ms) const {
  std::vector<double> v;
  for (const auto& r : tasks)
    if (r.complete_ms >= from_ms && r.complete_ms < to_ms)
      v.push_back(r.complete_ms - r.issue_ms);
  LatencyStats s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.completed = v.size();
  for (double x : v) s.mean_ms += x;
  s.mean_ms /= static_cast<double>(v.size());
  auto pct = [&](double p) {
    return v[std::min(v.size() - 1, static_cast<std::size_t>(p * (double)v.size()))];
  };
  s.p50_ms = pct(0.50);
  s.p95_ms = pct(0.95);
  s.p99_ms = pct(0.99);
  s.max_ms = v.back();
  return s;
}

TrainingSet generate_training_set(int n_samples, std::uint64_t seed) {
  return generate_training_set(n_samples, seed, SampleGenOptions{});
}

TrainingSet generate_training_set(int n_samples, std::uint64_t seed,
                                  const SampleGenOptions& opt) {
  if (n_samples < 1) throw SimError("n_samples must be >= 1");
  TrainingSet out;
  Rng rng(seed);
  int config_id = 0;
  const std::vector<std::string> kind_pool = {"dev-a", "dev-b", "dev-c"};
  const std::vector<int> batch_choices = {1, 2, 4, 5, 8};
  const std::vector<double> window_choices = {0, 5, 10, 20};
  const std::vector<int> worker_choices = {1, 2, 4};

  while (static_cast<int>(out.samples.size()) < n_samples) {
    SimConfig sc;
    int n_dev = (int)rng.uniform_int(opt.min_devices, opt.max_devices);
    int n_layers = (int)rng.uniform_int(opt.min_layers, opt.max_layers);

    ModelProfile model;
    model.model_id = "m" + std::to_string(config_id);
    model.n_layers = n_layers;
    model.task = "synthetic";
    double raw = rng.log_uniform(2e3, 2e5);
    model.boundary_volumes.push_back(static_cast<std::uint64_t>(raw));
    for (int b = 1; b < n_layers; ++b)
      model.boundary_volumes.push_back(
          std::max<std::uint64_t>(1, (std::uint64_t)(raw * rng.log_uniform(0.2, 8.0))));
    model.boundary_volumes.push_back(
        std::max<std::uint64_t>(1, (std::uint64_t)(raw * rng.uniform(0.005, 0.05))));

    std::vector<std::string> kinds;
    for (int d = 0; d < n_dev; ++d) kinds.push_back(rng.pick(kind_pool));
    std::vector<std::string> uniq = kinds;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    for (int d = 0; d < n_dev; ++d) {
      std::string id = "d" + std::to_string(d);
      sc.system.devices.push_back({id, kinds[(std::size_t)d], Role::Client});
      sc.system.models[id] = model;
      sc.system.network.bandwidth_mbps[id] =
          rng.log_uniform(opt.min_bandwidth_mbps, opt.max_bandwidth_mbps);
    }
    sc.system.devices.push_back({"edge", "srv", Role::Server});
    sc.system.network.per_message_overhead_ms = rng.uniform(0.0, 2.0);
    sc.system.batch_policy.max_batch = rng.pick(batch_choices);
    sc.system.batch_policy.window_ms = rng.pick(window_choices);
    sc.system.worker_count = rng.pick(worker_choices);

    SyntheticLutSpec lut_spec;
    lut_spec.device_kinds = uniq;
    lut_spec.server_kind = "srv";
    lut_spec.model = &model;
    add_synthetic_entries(sc.lut, lut_spec, rng);

    sc.horizon_ms = opt.horizon_ms;
    sc.seed = seed;

    SystemGraph graph = build_system_graph(sc.system);

    int k_schemes = std::min(opt.schemes_per_config,
                             n_samples - static_cast<int>(out.samples.size()));
    out.configs.push_back(sc);
    for (int k = 0; k < k_schemes; ++k) {
      Scheme scheme;
      for (int d = 0; d < n_dev; ++d) {
        std::string id = "d" + std::to_string(d);
        if (rng.unit() < 1.0 / 3.0) scheme.assignment[id] = Strategy::dp();
        else scheme.assignment[id] = Strategy::pp((int)rng.uniform_int(0, n_layers));
      }
      SimResult r = simulate(out.configs.back(), scheme);
      if (r.completed < 30) {
        SimConfig longer = out.configs.back();
        longer.horizon_ms = opt.slow_horizon_ms;
        r = simulate(longer, scheme);
      }
      if (r.completed == 0) continue;  // pathological draw; skip

      Sample s;
      s.config_id = config_id;
      s.graph = graph;
      s.raw_latencies_ms = raw_node_latencies(graph, scheme, sc.system, sc.lut);
      s.throughput_per_s = r.throughput_per_s;
      out.samples.push_back(std::move(s));
      out.schemes.push_back(std::move(scheme));
    }
    ++config_id;
  }
  return out;
}

}  // namespace coinfer
