#pragma once

#include <map>
#include <string>
#include <vector>

#include "fragsim/core.hpp"

namespace fragsim {

class ClusterTopology;

enum class OpKind : std::uint8_t { Read, Update, Insert, Scan, Rmw, None };
enum class MsgLeg : std::uint8_t { Request, Response, Replicate, Ack, Stream, Gossip, Membership };

struct MsgTag {
  OpKind op = OpKind::None;
  MsgLeg leg = MsgLeg::Request;
};

inline bool is_write_op(OpKind k) {
  return k == OpKind::Update || k == OpKind::Insert || k == OpKind::Rmw;
}

// Synchronous legs of a write flow; replication fan-out is tagged separately.
inline bool is_write_sync(const MsgTag& t) {
  return is_write_op(t.op) &&
         (t.leg == MsgLeg::Request || t.leg == MsgLeg::Response || t.leg == MsgLeg::Ack);
}

enum class OpOutcome : std::uint8_t { Ok, Failed, TimedOut };

struct OpRecord {
  std::uint64_t id = 0;
  OpKind kind = OpKind::Read;
  std::uint64_t key = 0;
  SimTime issued_us = 0;
  SimTime completed_us = 0;
  OpOutcome outcome = OpOutcome::Ok;
  std::int64_t bytes_moved = 0;
};

struct SettleEvent {
  std::string node;
  std::string kind;  // "remove" | "add"
  SimTime duration_us = 0;
};

struct UnresponsiveWindow {
  SimTime start_us = 0;
  SimTime length_us = 0;
};

struct BatchStat {
  std::int64_t ops = 0;
  std::int64_t ok = 0;
  SimTime start_us = 0;
  SimTime end_us = 0;
};

struct LinkCounters {
  std::int64_t bytes_sent = 0;
  std::int64_t bytes_delivered = 0;
  std::int64_t bytes_lost = 0;
  std::int64_t msgs = 0;
};

class MetricStore {
 public:
  void init(int node_count, int link_count, SimTime bucket_us = 1'000'000);

  // Link-level accounting, one call per link traversal.
  void on_sent(int link, std::int64_t bytes);
  void on_delivered(int link, int from, int to, std::int64_t bytes, const MsgTag& tag);
  void on_lost(int link, std::int64_t bytes);

  void record_op(const OpRecord& op);
  void add_settle(const std::string& node, const std::string& kind, SimTime duration_us);

  const LinkCounters& link(int i) const { return links_[static_cast<std::size_t>(i)]; }
  const std::map<std::pair<int, int>, std::int64_t>& traffic_matrix() const { return traffic_; }
  std::int64_t received_bytes(int node) const { return received_[static_cast<std::size_t>(node)]; }
  std::int64_t received_write_sync_bytes(int node) const {
    return received_write_sync_[static_cast<std::size_t>(node)];
  }
  std::int64_t total_delivered_bytes() const;
  std::int64_t total_sent_bytes() const;
  std::int64_t total_lost_bytes() const;

  const std::vector<std::int64_t>& timeline() const { return timeline_; }
  SimTime bucket_us() const { return bucket_us_; }
  const std::vector<OpRecord>& op_log() const { return ops_; }
  const std::vector<SettleEvent>& settle_events() const { return settles_; }

  std::int64_t ops_total() const { return static_cast<std::int64_t>(ops_.size()); }
  std::int64_t ops_ok() const { return ok_ops_; }
  std::int64_t ops_failed() const { return failed_ops_; }
  std::int64_t ops_timed_out() const { return timed_out_ops_; }
  SimTime first_issue_us() const { return first_issue_; }
  SimTime last_completion_us() const { return last_completion_; }

  // Maximal runs of zero-completion buckets of at least min_len inside the
  // span where operations were pending.
  std::vector<UnresponsiveWindow> unresponsive_windows(SimTime min_len_us = 5'000'000) const;

  double received_cov(const std::vector<int>& nodes) const;

  void write_timeline_csv(const std::string& path) const;
  void write_oplog_csv(const std::string& path) const;
  void write_traffic_dot(const std::string& path, const ClusterTopology& topo) const;

 private:
  std::vector<LinkCounters> links_;
  std::map<std::pair<int, int>, std::int64_t> traffic_;
  std::vector<std::int64_t> received_;
  std::vector<std::int64_t> received_write_sync_;
  std::vector<std::int64_t> timeline_;
  std::vector<OpRecord> ops_;
  std::vector<SettleEvent> settles_;
  SimTime bucket_us_ = 1'000'000;
  std::int64_t ok_ops_ = 0;
  std::int64_t failed_ops_ = 0;
  std::int64_t timed_out_ops_ = 0;
  SimTime first_issue_ = -1;
  SimTime last_completion_ = 0;
};

// Per-LSF ratios keyed to the 1.0 (5X) run.
std::map<double, double> normalize_to_full_scale(const std::map<double, double>& by_lsf);

}  // namespace fragsim
