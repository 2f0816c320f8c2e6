#include "fragsim/workload.hpp"

#include <algorithm>
#include <cmath>

namespace fragsim {

void WorkloadSpec::validate() const {
  double sum = read + update + insert + scan + rmw;
  if (std::abs(sum - 1.0) > 1e-9) throw SimError("workload proportions must sum to 1");
  if (record_count <= 0 || operation_count <= 0) throw SimError("workload counts must be > 0");
  if (threads <= 0) throw SimError("thread count must be > 0");
  if (batches <= 0) throw SimError("batch count must be > 0");
  if (key_distribution != "zipfian" && key_distribution != "latest" &&
      key_distribution != "uniform")
    throw SimError("unknown key distribution: " + key_distribution);
  if (scan > 0 && max_scan_len <= 0) throw SimError("max_scan_len must be > 0");
}

WorkloadSpec WorkloadSpec::preset(const std::string& name) {
  WorkloadSpec s;
  s.name = name;
  s.read = s.update = s.insert = s.scan = s.rmw = 0;
  if (name == "A") {
    s.read = 0.5;
    s.update = 0.5;
  } else if (name == "B") {
    s.read = 0.95;
    s.update = 0.05;
  } else if (name == "C") {
    s.read = 1.0;
  } else if (name == "D") {
    s.read = 0.95;
    s.insert = 0.05;
    s.key_distribution = "latest";
  } else if (name == "E") {
    s.scan = 0.95;
    s.insert = 0.05;
    s.operation_count = 10'000;
  } else if (name == "F") {
    s.read = 0.5;
    s.rmw = 0.5;
  } else {
    throw SimError("unknown workload preset: " + name);
  }
  return s;
}

const std::vector<std::string>& WorkloadSpec::preset_names() {
  static const std::vector<std::string> names{"A", "B", "C", "D", "E", "F"};
  return names;
}

ZipfianGen::ZipfianGen(std::uint64_t n, double theta) : n_(n), theta_(theta) { refresh(); }

void ZipfianGen::refresh() {
  alpha_ = 1.0 / (1.0 - theta_);
  for (std::uint64_t i = zeta_n_ + 1; i <= n_; ++i)
    zetan_ += 1.0 / std::pow(static_cast<double>(i), theta_);
  zeta_n_ = n_;
  zeta2_ = 1.0 + 1.0 / std::pow(2.0, theta_);
  eta_ = (1.0 - std::pow(2.0 / static_cast<double>(n_), 1.0 - theta_)) /
         (1.0 - zeta2_ / zetan_);
}

void ZipfianGen::set_n(std::uint64_t n) {
  if (n <= n_) return;
  n_ = n;
  refresh();
}

std::uint64_t ZipfianGen::next(Rng& rng) {
  const double u = rng.uniform01();
  const double uz = u * zetan_;
  if (uz < 1.0) return 0;
  if (uz < zeta2_) return 1;
  auto rank = static_cast<std::uint64_t>(static_cast<double>(n_) *
                                         std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return std::min(rank, n_ - 1);
}

KeyChooser::KeyChooser(const WorkloadSpec& spec, std::uint64_t initial_n)
    : dist_(spec.key_distribution), zipf_(initial_n, spec.zipf_theta) {}

std::uint64_t KeyChooser::next(Rng& rng, std::uint64_t current_n) {
  if (current_n == 0) return 0;
  if (dist_ == "uniform") return rng.uniform_u64(current_n);
  if (dist_ == "latest") {
    zipf_.set_n(current_n);
    std::uint64_t rank = zipf_.next(rng);
    return current_n - 1 - std::min(rank, current_n - 1);
  }
  // zipfian: scatter hot ranks across the keyspace
  std::uint64_t rank = zipf_.next(rng);
  return splitmix64(rank) % current_n;
}

WorkloadRunner::WorkloadRunner(SimWorld& world, DbModel& db, WorkloadSpec spec)
    : world_(world), db_(db), spec_(std::move(spec)),
      chooser_(spec_, static_cast<std::uint64_t>(spec_.record_count)) {
  spec_.validate();
  sessions_.resize(static_cast<std::size_t>(spec_.threads));
  for (int i = 0; i < spec_.threads; ++i)
    sessions_[static_cast<std::size_t>(i)].rng = std::make_unique<Rng>(
        splitmix64(spec_.rng_seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(i) + 1));
}

bool WorkloadRunner::may_issue() const {
  if (stop_requested_) return false;
  if (timed_mode_) return world_.now() < stop_at_;
  return issued_in_batch_ < batch_target_;
}

void WorkloadRunner::start(std::function<void()> on_done) {
  on_done_ = std::move(on_done);
  timed_mode_ = false;
  active_ = true;
  batch_index_ = 0;
  const std::int64_t per_batch = spec_.operation_count / spec_.batches;
  batch_target_ = per_batch > 0 ? per_batch : spec_.operation_count;
  issued_in_batch_ = 0;
  batch_stats_.push_back(BatchStat{0, 0, world_.now(), 0});
  for (int t = 0; t < spec_.threads; ++t) {
    world_.kernel.schedule(world_.now(), EvKind::WorkloadOp, [this, t] { issue(t); });
  }
}

void WorkloadRunner::start_timed(SimTime stop_at, std::function<void()> on_done) {
  on_done_ = std::move(on_done);
  timed_mode_ = true;
  stop_at_ = stop_at;
  active_ = true;
  batch_stats_.push_back(BatchStat{0, 0, world_.now(), 0});
  for (int t = 0; t < spec_.threads; ++t) {
    world_.kernel.schedule(world_.now(), EvKind::WorkloadOp, [this, t] { issue(t); });
  }
}

void WorkloadRunner::request_stop() { stop_requested_ = true; }

OpRequest WorkloadRunner::draw(int thread) {
  Rng& rng = *sessions_[static_cast<std::size_t>(thread)].rng;
  OpRequest op;
  const double r = rng.uniform01();
  double acc = spec_.read;
  if (r < acc) {
    op.kind = OpKind::Read;
  } else if (r < (acc += spec_.update)) {
    op.kind = OpKind::Update;
  } else if (r < (acc += spec_.insert)) {
    op.kind = OpKind::Insert;
  } else if (r < (acc += spec_.scan)) {
    op.kind = OpKind::Scan;
  } else {
    op.kind = OpKind::Rmw;
  }
  const auto n = static_cast<std::uint64_t>(db_.record_count());
  switch (op.kind) {
    case OpKind::Insert:
      op.key = n;
      db_.note_insert(op.key);
      break;
    case OpKind::Scan:
      op.key = chooser_.next(rng, n);
      op.scan_len = 1 + static_cast<int>(rng.uniform_u64(
                            static_cast<std::uint64_t>(spec_.max_scan_len)));
      break;
    default:
      op.key = chooser_.next(rng, n);
      break;
  }
  return op;
}

void WorkloadRunner::issue(int thread) {
  auto& session = sessions_[static_cast<std::size_t>(thread)];
  if (!may_issue()) {
    session.idle = true;
    on_thread_idle();
    return;
  }
  session.idle = false;
  ++issued_total_;
  ++issued_in_batch_;
  ++outstanding_;
  OpRequest op = draw(thread);
  attempt(thread, op, world_.now(), 1);
}

void WorkloadRunner::attempt(int thread, OpRequest op, SimTime issued_at, int retries_left) {
  OpPlan plan = db_.plan_operation(op, world_.now());
  const SimTime budget =
      std::max<SimTime>(ms_to_us(5.0 * plan.planned_ms), 1'000'000);
  ExecHandle h = execute_plan(
      world_, std::move(plan), op.kind,
      [this, thread, op, issued_at, retries_left](bool ok, std::int64_t bytes) {
        if (ok) {
          finalize(thread, op, issued_at, OpOutcome::Ok, bytes);
        } else if (retries_left > 0) {
          retry_later(thread, op, issued_at, retries_left);
        } else {
          finalize(thread, op, issued_at, OpOutcome::Failed, bytes);
        }
      });
  arm_timeout(thread, op, issued_at, retries_left, h, world_.now() + budget, budget);
}

void WorkloadRunner::retry_later(int thread, OpRequest op, SimTime issued_at,
                                 int retries_left) {
  // Re-plan from scratch; sends inside the fresh attempt park on their own if
  // routes are still settling.
  world_.kernel.schedule(world_.now() + 1000, EvKind::WorkloadOp,
                         [this, thread, op, issued_at, retries_left] {
                           attempt(thread, op, issued_at, retries_left - 1);
                         });
}

void WorkloadRunner::arm_timeout(int thread, OpRequest op, SimTime issued_at, int retries_left,
                                 ExecHandle h, SimTime deadline, SimTime budget) {
  world_.kernel.schedule(deadline, EvKind::Timer,
                         [this, thread, op, issued_at, retries_left, h, deadline, budget] {
    if (h->done) return;
    if (h->parked_until + budget > deadline) {
      // A leg is waiting on a reroute; push the deadline past it.
      arm_timeout(thread, op, issued_at, retries_left, h, h->parked_until + budget, budget);
      return;
    }
    cancel_exec(h);
    if (retries_left > 0) {
      retry_later(thread, op, issued_at, retries_left);
    } else {
      finalize(thread, op, issued_at, OpOutcome::TimedOut, h->bytes);
    }
  });
}

void WorkloadRunner::finalize(int thread, const OpRequest& op, SimTime issued_at,
                              OpOutcome outcome, std::int64_t bytes) {
  OpRecord rec;
  rec.id = next_op_id_++;
  rec.kind = op.kind;
  rec.key = op.key;
  rec.issued_us = issued_at;
  rec.completed_us = world_.now();
  rec.outcome = outcome;
  rec.bytes_moved = bytes;
  world_.metrics.record_op(rec);
  auto& batch = batch_stats_.back();
  ++batch.ops;
  if (outcome == OpOutcome::Ok) ++batch.ok;
  batch.end_us = world_.now();
  --outstanding_;
  issue(thread);
}

void WorkloadRunner::on_thread_idle() {
  if (outstanding_ > 0) return;
  bool all_idle = true;
  for (const auto& s : sessions_) all_idle &= s.idle;
  if (!all_idle) return;

  if (!timed_mode_ && !stop_requested_) {
    // Batch boundary: every session drained; start the next batch.
    const std::int64_t per_batch = spec_.operation_count / spec_.batches;
    const std::int64_t remaining = spec_.operation_count - issued_total_;
    if (remaining > 0) {
      ++batch_index_;
      batch_target_ = std::min(remaining, per_batch > 0 ? per_batch : remaining);
      if (batch_index_ == spec_.batches - 1) batch_target_ = remaining;
      issued_in_batch_ = 0;
      batch_stats_.push_back(BatchStat{0, 0, world_.now(), 0});
      for (int t = 0; t < spec_.threads; ++t) {
        world_.kernel.schedule(world_.now(), EvKind::WorkloadOp, [this, t] { issue(t); });
      }
      return;
    }
  }
  if (active_) {
    active_ = false;
    if (on_done_) on_done_();
  }
}

namespace {

void gossip_tick(SimWorld& world, DbModel& db, int bytes, SimTime interval,
                 const std::function<bool()>& active) {
  if (!active()) return;
  auto members = db.members();
  for (int a : members) {
    for (int b : members) {
      if (a == b) continue;
      world.send(a, b, bytes, MsgTag{OpKind::None, MsgLeg::Gossip}, [](bool, SimTime) {}, {},
                 0);
    }
  }
  world.kernel.schedule(world.now() + interval, EvKind::Timer,
                        [&world, &db, bytes, interval, active] {
                          gossip_tick(world, db, bytes, interval, active);
                        });
}

}  // namespace

void start_gossip(SimWorld& world, DbModel& db, const EngineConfig& cfg,
                  std::function<bool()> active) {
  if (!cfg.gossip) return;
  const SimTime interval = ms_to_us(static_cast<double>(cfg.gossip_interval_ms));
  world.kernel.schedule(world.now() + interval, EvKind::Timer,
                        [&world, &db, bytes = cfg.gossip_bytes, interval,
                         active = std::move(active)] {
                          gossip_tick(world, db, bytes, interval, active);
                        });
}

}  // namespace fragsim
