#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "coinfer/runtime.hpp"
#include "runtime_socket.hpp"

namespace coinfer {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Connection {
  net::Socket sock;
  std::mutex write_mu;
  std::string device_id;

  void send(MsgType type, std::uint64_t id, std::span<const std::uint8_t> payload) {
    auto frame = encode_message(type, id, payload);
    std::lock_guard lock(write_mu);
    sock.write_all(frame.data(), frame.size());
  }
};

struct PendingRequest {
  std::uint64_t task_id;
  std::shared_ptr<Connection> conn;
  std::string device_id;
  std::string scheme_tag;
  double arrival_ms;
  std::uint64_t result_bytes;
};

struct GroupKey {
  std::string model;
  int i, j;
  auto operator<=>(const GroupKey&) const = default;
};

struct Batch {
  GroupKey key;
  std::vector<PendingRequest> requests;
  double flush_ms;
};

struct CsvRow {
  std::uint64_t task_id;
  std::string device_id;
  double arrival_ms, flush_ms, done_ms;
  int i, j, batch;
  std::string scheme_tag;
};

class Server {
 public:
  explicit Server(const ServerOptions& opt) : opt_(opt), t0_(Clock::now()) {
    live_ = opt.system;
    if (!opt_.checkpoint.empty()) {
      model_ = PredictorModel::load(opt_.checkpoint);
      if (model_->head() != HeadKind::Relative)
        throw ConfigError("server evaluator checkpoint must be a relative head");
    }
  }

  ServerStats run() {
    int port = 0;
    listener_ = net::listen_on(opt_.host, opt_.port, &port);
    stats_.listen_port = port;
    if (opt_.bound_port_out) *opt_.bound_port_out = port;
    std::cout << "LISTENING " << port << std::endl;

    batcher_ = std::thread([this] { batcher_loop(); });
    for (int w = 0; w < live_.worker_count; ++w)
      workers_.emplace_back([this] { worker_loop(); });
    monitor_ = std::thread([this] { monitor_loop(); });

    accept_loop();

    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    queue_cv_.notify_all();
    batch_cv_.notify_all();
    monitor_cv_.notify_all();
    batcher_.join();
    for (auto& w : workers_) w.join();
    monitor_.join();
    for (auto& h : handlers_) h.join();

    if (!opt_.csv_path.empty()) write_csv();
    stats_.ok = stats_.tasks == stats_.results;
    return stats_;
  }

 private:
  void accept_loop() {
    for (;;) {
      sockaddr_in peer{};
      socklen_t len = sizeof(peer);
      int fd = ::accept(listener_.fd(), reinterpret_cast<sockaddr*>(&peer), &len);
      if (fd < 0) {
        if (errno == EINTR) continue;
        break;  // listener closed during shutdown
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      auto conn = std::make_shared<Connection>();
      conn->sock = net::Socket(fd);
      std::lock_guard lock(mu_);
      handlers_.emplace_back([this, conn] { handle(conn); });
    }
  }

  // One handler per connection: registration, then a stream of tasks.
  void handle(std::shared_ptr<Connection> conn) {
    bool counted = false;
    try {
      Frame frame;
      while (net::read_frame(conn->sock, frame)) {
        switch (frame.header.msg_type) {
          case MsgType::Scheduling: on_scheduling(conn, frame); break;
          case MsgType::Task: on_task(conn, frame); break;
          case MsgType::Result:
            throw ProtocolError("unexpected Result frame from device");
        }
      }
    } catch (const std::exception& e) {
      // Malformed frames close the offending connection only.
      std::cerr << "handler error (" << conn->device_id << "): " << e.what() << "\n";
    }
    conn->sock.close_fd();
    {
      std::lock_guard lock(mu_);
      if (!conn->device_id.empty()) {
        connections_.erase(conn->device_id);
        counted = true;
      }
      if (counted) {
        ++closed_sessions_;
        ++stats_.sessions;
      }
      if (opt_.exit_after_sessions > 0 &&
          closed_sessions_ >= static_cast<std::uint64_t>(opt_.exit_after_sessions))
        listener_.close_fd();  // unblocks the accept loop
    }
    sessions_cv_.notify_all();
  }

  void on_scheduling(std::shared_ptr<Connection>& conn, const Frame& frame) {
    auto [subtype, body] = decode_scheduling(frame.payload);
    if (subtype != SchedSubtype::Register)
      throw ProtocolError("device sent non-register scheduling frame");

    DeviceProfile profile = device_from_json(body.at("device"));
    ModelProfile model = model_from_json(body.at("model"));
    {
      std::lock_guard lock(mu_);
      if (!live_.find_device(profile.device_id)) live_.devices.push_back(profile);
      live_.models[profile.device_id] = model;
      conn->device_id = profile.device_id;
      connections_[profile.device_id] = conn;
      ++accepted_;
    }
    conn->send(MsgType::Scheduling, 0,
               encode_scheduling(SchedSubtype::RegisterAck, json::object()));
    request_reschedule();  // new device access activates the runtime scheduler
  }

  void on_task(std::shared_ptr<Connection>& conn, const Frame& frame) {
    auto [meta, blob] = decode_task_payload(frame.payload);
    parse_graph_blob(blob);  // validate task data layout
    std::string device_id = conn->device_id;
    if (device_id.empty()) throw ProtocolError("task before registration");

    PendingRequest req;
    req.task_id = frame.header.task_id;
    req.conn = conn;
    req.device_id = device_id;
    req.scheme_tag = meta.strategy.tag();
    req.arrival_ms = ms_since(t0_);

    int i, j;
    ModelProfile model;
    {
      std::lock_guard lock(mu_);
      model = live_.models.at(device_id);
      ++stats_.tasks;
    }
    if (meta.strategy.is_dp()) {
      i = 0;
      j = model.n_layers;
    } else {
      i = meta.strategy.split;
      j = model.n_layers;
    }
    req.result_bytes = result_volume(model);

    if (i == j) {
      // Empty server stage (device-only split); acknowledge immediately.
      send_result(req, req.arrival_ms, req.arrival_ms, i, j, 1);
      return;
    }

    std::lock_guard lock(mu_);
    GroupKey key{model.model_id, i, j};
    auto& group = groups_[key];
    group.push_back(std::move(req));
    if (static_cast<int>(group.size()) >= live_.batch_policy.max_batch) {
      flush_locked(key);
    } else if (group.size() == 1) {
      deadlines_[key] = ms_since(t0_) + live_.batch_policy.window_ms;
      batch_cv_.notify_all();
    }
  }

  // Callers hold mu_.
  void flush_locked(const GroupKey& key) {
    auto it = groups_.find(key);
    if (it == groups_.end() || it->second.empty()) return;
    Batch b;
    b.key = key;
    b.requests = std::move(it->second);
    b.flush_ms = ms_since(t0_);
    groups_.erase(it);
    deadlines_.erase(key);
    flushed_.push_back(std::move(b));
    queue_cv_.notify_one();
  }

  void batcher_loop() {
    std::unique_lock lock(mu_);
    while (!stopping_) {
      if (deadlines_.empty()) {
        batch_cv_.wait(lock, [this] { return stopping_ || !deadlines_.empty(); });
        continue;
      }
      auto next = std::min_element(deadlines_.begin(), deadlines_.end(),
                                   [](const auto& a, const auto& b) {
                                     return a.second < b.second;
                                   });
      GroupKey key = next->first;
      double deadline = next->second;
      double now = ms_since(t0_);
      if (now + 0.05 >= deadline) {
        flush_locked(key);
        continue;
      }
      batch_cv_.wait_for(lock, std::chrono::duration<double, std::milli>(deadline - now));
    }
  }

  void worker_loop() {
    std::unique_lock lock(mu_);
    for (;;) {
      queue_cv_.wait(lock, [this] { return stopping_ || !flushed_.empty(); });
      if (stopping_ && flushed_.empty()) return;
      Batch b = std::move(flushed_.front());
      flushed_.pop_front();
      double ms = lut_ms_locked(b.key, static_cast<int>(b.requests.size()));
      ++busy_workers_;
      lock.unlock();

      // Batch inference realized as a timed synthetic workload.
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
      double done = ms_since(t0_);
      for (const auto& req : b.requests)
        send_result(req, b.flush_ms, done, b.key.i, b.key.j,
                    static_cast<int>(b.requests.size()));

      lock.lock();
      --busy_workers_;
      monitor_cv_.notify_all();  // a worker became free
    }
  }

  double lut_ms_locked(const GroupKey& key, int batch) {
    const auto* srv = live_.server();
    return opt_.lut.lookup(srv->kind, key.model, key.i, key.j, batch);
  }

  void send_result(const PendingRequest& req, double flush_ms, double done_ms, int i,
                   int j, int batch) {
    std::vector<std::uint8_t> payload(1 + req.result_bytes, 0);
    payload[0] = 0x00;  // status ok
    try {
      req.conn->send(MsgType::Result, req.task_id, payload);
    } catch (const std::exception& e) {
      std::cerr << "result send failed for " << req.device_id << "#" << req.task_id
                << ": " << e.what() << "\n";
      return;
    }
    std::lock_guard lock(mu_);
    ++stats_.results;
    csv_.push_back({req.task_id, req.device_id, req.arrival_ms, flush_ms, done_ms, i, j,
                    batch, req.scheme_tag});
  }

  void request_reschedule() {
    {
      std::lock_guard lock(mu_);
      reschedule_requested_ = true;
    }
    monitor_cv_.notify_all();
  }

  void monitor_loop() {
    std::size_t next_bw = 0;
    std::unique_lock lock(mu_);
    MonitorState last{};
    bool have_last = false;
    while (!stopping_) {
      double now = ms_since(t0_);
      while (next_bw < opt_.bandwidth_schedule.size() &&
             opt_.bandwidth_schedule[next_bw].first <= now) {
        double bw = opt_.bandwidth_schedule[next_bw].second;
        live_.network.default_bandwidth_mbps = bw;
        for (auto& [id, v] : live_.network.bandwidth_mbps) v = bw;
        ++next_bw;
        reschedule_requested_ = true;
      }

      if (reschedule_requested_) {
        MonitorState cur = MonitorState::from_config(live_);
        if (!have_last || should_reschedule(last, cur, opt_.scheduler)) {
          // Optimization runs only when a worker is free so it never blocks
          // task processing; the queue lock is dropped while computing.
          monitor_cv_.wait(lock, [this] {
            return stopping_ || busy_workers_ < live_.worker_count;
          });
          if (stopping_) return;
          if (!live_.clients().empty()) {
            SystemConfig snapshot = live_;
            lock.unlock();
            Scheme scheme = optimize_snapshot(snapshot);
            lock.lock();
            broadcast_locked(scheme);
            last = MonitorState::from_config(live_);
            have_last = true;
          }
        }
        reschedule_requested_ = false;
        continue;
      }

      double wake_in = 50.0;
      if (next_bw < opt_.bandwidth_schedule.size())
        wake_in = std::min(wake_in, opt_.bandwidth_schedule[next_bw].first - now);
      monitor_cv_.wait_for(lock, std::chrono::duration<double, std::milli>(
                                     std::max(1.0, wake_in)));
    }
  }

  Scheme optimize_snapshot(const SystemConfig& snapshot) {
    if (model_) {
      LearnedEvaluator eval(*model_, snapshot, opt_.lut);
      return optimize(snapshot, opt_.lut, opt_.scheduler, eval).scheme;
    }
    SimConfig sim;
    sim.system = snapshot;
    sim.lut = opt_.lut;
    sim.horizon_ms = opt_.oracle_horizon_ms;
    OracleEvaluator eval(sim);
    return optimize(snapshot, opt_.lut, opt_.scheduler, eval).scheme;
  }

  // Callers hold mu_. Notifies devices whose strategy changed.
  void broadcast_locked(const Scheme& scheme) {
    for (const auto& [id, strat] : scheme.assignment) {
      auto prev = current_scheme_.assignment.find(id);
      bool changed = prev == current_scheme_.assignment.end() || !(prev->second == strat);
      if (!changed) continue;
      auto conn = connections_.find(id);
      if (conn == connections_.end()) continue;
      json body{{"strategy", to_json(strat)}};
      try {
        conn->second->send(MsgType::Scheduling, 0,
                           encode_scheduling(SchedSubtype::SchemeUpdate, body));
      } catch (const std::exception& e) {
        std::cerr << "scheme update send failed for " << id << ": " << e.what() << "\n";
      }
    }
    current_scheme_ = scheme;
  }

  void write_csv() {
    std::ofstream os(opt_.csv_path);
    os << "task_id,device_id,arrival_ms,flush_ms,done_ms,i,j,batch,scheme\n";
    std::lock_guard lock(mu_);
    for (const auto& r : csv_)
      os << r.task_id << ',' << r.device_id << ',' << r.arrival_ms << ',' << r.flush_ms
         << ',' << r.done_ms << ',' << r.i << ',' << r.j << ',' << r.batch << ','
         << r.scheme_tag << '\n';
  }

  ServerOptions opt_;
  Clock::time_point t0_;
  net::Socket listener_;

  std::mutex mu_;
  std::condition_variable queue_cv_, batch_cv_, monitor_cv_, sessions_cv_;
  bool stopping_ = false;
  bool reschedule_requested_ = false;

  SystemConfig live_;
  std::optional<PredictorModel> model_;
  Scheme current_scheme_;
  std::map<std::string, std::shared_ptr<Connection>> connections_;
  std::map<GroupKey, std::vector<PendingRequest>> groups_;
  std::map<GroupKey, double> deadlines_;
  std::deque<Batch> flushed_;
  int busy_workers_ = 0;
  std::uint64_t accepted_ = 0;
  std::uint64_t closed_sessions_ = 0;
  std::vector<CsvRow> csv_;

  std::vector<std::thread> handlers_;
  std::vector<std::thread> workers_;
  std::thread batcher_, monitor_;
  ServerStats stats_;
};

}  // namespace

ServerStats run_server(const ServerOptions& options) {
  Server server(options);
  return server.run();
}

}  // namespace coinfer
