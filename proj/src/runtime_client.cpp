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

struct TaskLog {
  std::uint64_t id;
  double issue_ms;
  double complete_ms = -1;
  std::string scheme_tag;
  std::string target;  // "local" or "server"
};

class DeviceClient {
 public:
  explicit DeviceClient(const DeviceOptions& opt) : opt_(opt), t0_(Clock::now()) {
    const auto* profile = opt_.system.find_device(opt_.device_id);
    if (!profile) throw ConfigError("device " + opt_.device_id + " not in config");
    profile_ = *profile;
    model_ = opt_.system.models.at(opt_.device_id);
  }

  DeviceStatsOut run() {
    DeviceStatsOut out;
    try {
      session(out);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    std::uint64_t done = 0;
    {
      std::lock_guard lock(mu_);
      for (const auto& t : log_)
        if (t.complete_ms >= 0) ++done;
      out.issued = log_.size();
      out.completed = done;
    }
    out.conservation_ok = out.error.empty() && out.issued == out.completed &&
                          out.issued == static_cast<std::uint64_t>(opt_.tasks);
    if (!opt_.csv_path.empty()) write_csv();
    return out;
  }

 private:
  void session(DeviceStatsOut& out) {
    sock_ = net::connect_to(opt_.host, opt_.port, opt_.connect_retries);

    json body{{"device", to_json(profile_)}, {"model", to_json(model_)}};
    auto reg = encode_message(MsgType::Scheduling, 0,
                              encode_scheduling(SchedSubtype::Register, body));
    sock_.write_all(reg.data(), reg.size());

    reader_ = std::thread([this] { reader_loop(); });
    local_worker_ = std::thread([this] { local_loop(); });

    {
      // Block until the scheduler hands us a strategy (registration ack alone
      // is not enough to start streaming).
      std::unique_lock lock(mu_);
      if (!cv_.wait_for(lock, std::chrono::seconds(30),
                        [this] { return strategy_.has_value() || failed_; }))
        throw ProtocolError("no scheme received within 30s");
      if (failed_) throw ProtocolError(fail_reason_);
    }

    for (int k = 1; k <= opt_.tasks; ++k) issue(static_cast<std::uint64_t>(k), out);

    // Drain.
    {
      std::unique_lock lock(mu_);
      if (!cv_.wait_for(lock, std::chrono::seconds(60),
                        [this] { return outstanding_ == 0 || failed_; }))
        throw ProtocolError("timed out draining outstanding tasks");
      if (failed_) throw ProtocolError(fail_reason_);
      local_stop_ = true;
    }
    local_cv_.notify_all();
    local_worker_.join();
    sock_.close_fd();
    reader_.join();

    std::lock_guard lock(mu_);
    out.scheme_updates = scheme_updates_;
    out.local = local_done_;
    out.remote = remote_done_;
  }

  void issue(std::uint64_t id, DeviceStatsOut&) {
    Strategy strat;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] {
        return failed_ || (!paused_ && outstanding_ < opt_.window);
      });
      if (failed_) throw ProtocolError(fail_reason_);
      strat = *strategy_;
      ++outstanding_;
      log_.push_back({id, ms_since(t0_), -1, strat.tag(), "server"});
    }

    if (strat.is_pp()) {
      int s = strat.split;
      // Device stage [0, s) as a timed synthetic workload, serialized with
      // the issue loop like a real single-accelerator device.
      if (s > 0) sleep_ms(opt_.lut.lookup(profile_.kind, model_.model_id, 0, s, 1));
      send_task(id, Strategy::pp(s),
                model_.boundary_volumes[static_cast<std::size_t>(s)]);
    } else {
      // DP dispatch directive: keep the local replica busy, overflow to the
      // edge server.
      bool local = false;
      {
        std::lock_guard lock(mu_);
        if (!local_busy_ && local_queue_.empty()) {
          local_queue_.push_back(id);
          local = true;
        }
      }
      if (local) {
        set_target(id, "local");
        local_cv_.notify_one();
      } else {
        send_task(id, Strategy::dp(), model_.boundary_volumes[0]);
      }
    }
  }

  void send_task(std::uint64_t id, Strategy strat, std::uint64_t bytes) {
    TaskMeta meta{strat, model_.model_id};
    auto payload = encode_task_payload(meta, make_graph_blob(bytes));
    auto frame = encode_message(MsgType::Task, id, payload);
    std::lock_guard lock(write_mu_);
    sock_.write_all(frame.data(), frame.size());
  }

  void set_target(std::uint64_t id, const std::string& target) {
    std::lock_guard lock(mu_);
    log_[static_cast<std::size_t>(id - 1)].target = target;
  }

  void local_loop() {
    std::unique_lock lock(mu_);
    for (;;) {
      local_cv_.wait(lock, [this] { return local_stop_ || !local_queue_.empty(); });
      if (local_queue_.empty()) return;
      std::uint64_t id = local_queue_.front();
      local_queue_.pop_front();
      local_busy_ = true;
      lock.unlock();

      sleep_ms(opt_.lut.lookup(profile_.kind, model_.model_id, 0, model_.n_layers, 1));

      lock.lock();
      local_busy_ = false;
      complete_locked(id, "local");
      ++local_done_;
      cv_.notify_all();
    }
  }

  void reader_loop() {
    try {
      Frame frame;
      while (net::read_frame(sock_, frame)) {
        if (frame.header.msg_type == MsgType::Result) {
          std::lock_guard lock(mu_);
          std::size_t idx = static_cast<std::size_t>(frame.header.task_id - 1);
          if (frame.header.task_id == 0 || idx >= log_.size() ||
              log_[idx].complete_ms >= 0)
            throw ProtocolError("result id mismatch: " +
                                std::to_string(frame.header.task_id));
          complete_locked(frame.header.task_id, "server");
          ++remote_done_;
          cv_.notify_all();
        } else if (frame.header.msg_type == MsgType::Scheduling) {
          auto [subtype, body] = decode_scheduling(frame.payload);
          std::lock_guard lock(mu_);
          switch (subtype) {
            case SchedSubtype::RegisterAck: break;
            case SchedSubtype::SchemeUpdate:
              strategy_ = strategy_from_json(body.at("strategy"));
              ++scheme_updates_;
              break;
            case SchedSubtype::Start: paused_ = false; break;
            case SchedSubtype::Pause: paused_ = true; break;
            default: throw ProtocolError("unexpected scheduling subtype");
          }
          cv_.notify_all();
        } else {
          throw ProtocolError("unexpected Task frame from server");
        }
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(mu_);
      if (!failed_) {
        failed_ = true;
        fail_reason_ = e.what();
      }
    }
    cv_.notify_all();
  }

  // Callers hold mu_.
  void complete_locked(std::uint64_t id, const std::string& target) {
    auto& entry = log_[static_cast<std::size_t>(id - 1)];
    entry.complete_ms = ms_since(t0_);
    entry.target = target;
    --outstanding_;
  }

  static void sleep_ms(double ms) {
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
  }

  void write_csv() {
    std::ofstream os(opt_.csv_path);
    os << "task_id,device_id,issue_ms,complete_ms,scheme,target\n";
    std::lock_guard lock(mu_);
    for (const auto& t : log_)
      os << t.id << ',' << opt_.device_id << ',' << t.issue_ms << ',' << t.complete_ms
         << ',' << t.scheme_tag << ',' << t.target << '\n';
  }

  DeviceOptions opt_;
  Clock::time_point t0_;
  DeviceProfile profile_;
  ModelProfile model_;
  net::Socket sock_;
  std::thread reader_, local_worker_;

  std::mutex mu_, write_mu_;
  std::condition_variable cv_, local_cv_;
  std::optional<Strategy> strategy_;
  bool paused_ = false;
  bool failed_ = false;
  bool local_stop_ = false;
  bool local_busy_ = false;
  std::string fail_reason_;
  int outstanding_ = 0;
  std::uint64_t scheme_updates_ = 0;
  std::uint64_t local_done_ = 0, remote_done_ = 0;
  std::deque<std::uint64_t> local_queue_;
  std::vector<TaskLog> log_;
};

}  // namespace

DeviceStatsOut run_device(const DeviceOptions& options) {
  DeviceClient client(options);
  return client.run();
}

}  // namespace coinfer
