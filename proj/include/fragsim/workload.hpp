#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fragsim/dbmodels.hpp"
#include "fragsim/opexec.hpp"

namespace fragsim {

struct WorkloadSpec {
  std::string name = "A";
  double read = 0.5;
  double update = 0.5;
  double insert = 0;
  double scan = 0;
  double rmw = 0;
  std::int64_t record_count = 10'000;
  std::int64_t operation_count = 100'000;
  std::string key_distribution = "zipfian";  // zipfian | latest | uniform
  double zipf_theta = 0.99;
  int max_scan_len = 100;
  int threads = 4;
  int batches = 10;
  std::uint64_t rng_seed = 0;  // mixed with the run seed

  void validate() const;
  static WorkloadSpec preset(const std::string& name);
  static const std::vector<std::string>& preset_names();
};

// Zipfian rank generator over [0, n), theta-parameterized, with incremental
// zeta so the item count can grow mid-run.
class ZipfianGen {
 public:
  ZipfianGen(std::uint64_t n, double theta);
  std::uint64_t next(Rng& rng);
  void set_n(std::uint64_t n);
  std::uint64_t n() const { return n_; }

 private:
  void refresh();
  std::uint64_t n_;
  double theta_;
  double alpha_ = 0;
  double zetan_ = 0;
  double zeta2_ = 0;
  double eta_ = 0;
  std::uint64_t zeta_n_ = 0;  // items folded into zetan_
};

// Key selection per the configured distribution. Hot zipfian ranks are
// scattered over the keyspace by hashing.
class KeyChooser {
 public:
  KeyChooser(const WorkloadSpec& spec, std::uint64_t initial_n);
  std::uint64_t next(Rng& rng, std::uint64_t current_n);

 private:
  std::string dist_;
  ZipfianGen zipf_;
};

// Closed-loop sessions multiplexed on the event loop: each logical thread has
// at most one operation outstanding and issues the next one only after the
// previous turns terminal.
class WorkloadRunner {
 public:
  WorkloadRunner(SimWorld& world, DbModel& db, WorkloadSpec spec);

  void start(std::function<void()> on_done);                    // count-bounded, batched
  void start_timed(SimTime stop_at, std::function<void()> on_done);
  void request_stop();

  bool active() const { return active_; }
  std::int64_t issued() const { return issued_total_; }
  const std::vector<BatchStat>& batches() const { return batch_stats_; }

 private:
  struct Session {
    std::unique_ptr<Rng> rng;
    bool idle = true;
  };

  void issue(int thread);
  OpRequest draw(int thread);
  void attempt(int thread, OpRequest op, SimTime issued_at, int retries_left);
  void retry_later(int thread, OpRequest op, SimTime issued_at, int retries_left);
  void arm_timeout(int thread, OpRequest op, SimTime issued_at, int retries_left,
                   ExecHandle h, SimTime deadline, SimTime budget);
  void finalize(int thread, const OpRequest& op, SimTime issued_at, OpOutcome outcome,
                std::int64_t bytes);
  void on_thread_idle();
  bool may_issue() const;

  SimWorld& world_;
  DbModel& db_;
  WorkloadSpec spec_;
  KeyChooser chooser_;
  std::vector<Session> sessions_;
  std::function<void()> on_done_;
  bool timed_mode_ = false;
  SimTime stop_at_ = 0;
  bool stop_requested_ = false;
  bool active_ = false;
  std::int64_t issued_total_ = 0;
  std::int64_t issued_in_batch_ = 0;
  std::int64_t batch_target_ = 0;
  int batch_index_ = 0;
  int outstanding_ = 0;
  std::uint64_t next_op_id_ = 0;
  std::vector<BatchStat> batch_stats_;
};

// Background cluster chatter: every ordered pair of current members exchanges
// a heartbeat each interval while the workload is active.
void start_gossip(SimWorld& world, DbModel& db, const EngineConfig& cfg,
                  std::function<bool()> active);

}  // namespace fragsim
