#include "fragsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fragsim/topology.hpp"

namespace fragsim {

void MetricStore::init(int node_count, int link_count, SimTime bucket_us) {
  links_.assign(static_cast<std::size_t>(link_count), LinkCounters{});
  received_.assign(static_cast<std::size_t>(node_count), 0);
  received_write_sync_.assign(static_cast<std::size_t>(node_count), 0);
  traffic_.clear();
  timeline_.clear();
  ops_.clear();
  settles_.clear();
  bucket_us_ = bucket_us;
  ok_ops_ = failed_ops_ = timed_out_ops_ = 0;
  first_issue_ = -1;
  last_completion_ = 0;
}

void MetricStore::on_sent(int link, std::int64_t bytes) {
  auto& c = links_[static_cast<std::size_t>(link)];
  c.bytes_sent += bytes;
  c.msgs += 1;
}

void MetricStore::on_delivered(int link, int from, int to, std::int64_t bytes,
                               const MsgTag& tag) {
  links_[static_cast<std::size_t>(link)].bytes_delivered += bytes;
  traffic_[{from, to}] += bytes;
  received_[static_cast<std::size_t>(to)] += bytes;
  if (is_write_sync(tag)) received_write_sync_[static_cast<std::size_t>(to)] += bytes;
}

void MetricStore::on_lost(int link, std::int64_t bytes) {
  links_[static_cast<std::size_t>(link)].bytes_lost += bytes;
}

void MetricStore::record_op(const OpRecord& op) {
  ops_.push_back(op);
  if (first_issue_ < 0 || op.issued_us < first_issue_) first_issue_ = op.issued_us;
  last_completion_ = std::max(last_completion_, op.completed_us);
  switch (op.outcome) {
    case OpOutcome::Ok: {
      ++ok_ops_;
      auto bucket = static_cast<std::size_t>(op.completed_us / bucket_us_);
      if (timeline_.size() <= bucket) timeline_.resize(bucket + 1, 0);
      ++timeline_[bucket];
      break;
    }
    case OpOutcome::Failed:
      ++failed_ops_;
      break;
    case OpOutcome::TimedOut:
      ++timed_out_ops_;
      break;
  }
}

void MetricStore::add_settle(const std::string& node, const std::string& kind,
                             SimTime duration_us) {
  settles_.push_back(SettleEvent{node, kind, duration_us});
}

std::int64_t MetricStore::total_delivered_bytes() const {
  std::int64_t total = 0;
  for (const auto& c : links_) total += c.bytes_delivered;
  return total;
}

std::int64_t MetricStore::total_sent_bytes() const {
  std::int64_t total = 0;
  for (const auto& c : links_) total += c.bytes_sent;
  return total;
}

std::int64_t MetricStore::total_lost_bytes() const {
  std::int64_t total = 0;
  for (const auto& c : links_) total += c.bytes_lost;
  return total;
}

std::vector<UnresponsiveWindow> MetricStore::unresponsive_windows(SimTime min_len_us) const {
  std::vector<UnresponsiveWindow> out;
  if (first_issue_ < 0 || timeline_.empty()) return out;
  const auto first_bucket = static_cast<std::size_t>(first_issue_ / bucket_us_);
  const auto last_bucket = static_cast<std::size_t>(last_completion_ / bucket_us_);
  std::size_t run_start = 0;
  SimTime run_len = 0;
  bool in_run = false;
  auto flush = [&](std::size_t end_bucket) {
    if (in_run && run_len >= min_len_us)
      out.push_back(UnresponsiveWindow{static_cast<SimTime>(run_start) * bucket_us_, run_len});
    (void)end_bucket;
    in_run = false;
    run_len = 0;
  };
  for (std::size_t b = first_bucket; b <= last_bucket && b < timeline_.size(); ++b) {
    if (timeline_[b] == 0) {
      if (!in_run) {
        in_run = true;
        run_start = b;
      }
      run_len += bucket_us_;
    } else {
      flush(b);
    }
  }
  flush(last_bucket + 1);
  return out;
}

double MetricStore::received_cov(const std::vector<int>& nodes) const {
  if (nodes.empty()) return 0.0;
  double mean = 0;
  for (int n : nodes) mean += static_cast<double>(received_[static_cast<std::size_t>(n)]);
  mean /= static_cast<double>(nodes.size());
  if (mean <= 0) return 0.0;
  double var = 0;
  for (int n : nodes) {
    double d = static_cast<double>(received_[static_cast<std::size_t>(n)]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(nodes.size());
  return std::sqrt(var) / mean;
}

void MetricStore::write_timeline_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw SimError("cannot write " + path);
  f << "bucket_start_ms,ops\n";
  for (std::size_t b = 0; b < timeline_.size(); ++b)
    f << (static_cast<SimTime>(b) * bucket_us_ / 1000) << "," << timeline_[b] << "\n";
}

void MetricStore::write_oplog_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw SimError("cannot write " + path);
  f << "op_id,kind,key,issued_ms,completed_ms,outcome,bytes_moved\n";
  auto kind_name = [](OpKind k) {
    switch (k) {
      case OpKind::Read: return "read";
      case OpKind::Update: return "update";
      case OpKind::Insert: return "insert";
      case OpKind::Scan: return "scan";
      case OpKind::Rmw: return "rmw";
      default: return "none";
    }
  };
  auto outcome_name = [](OpOutcome o) {
    switch (o) {
      case OpOutcome::Ok: return "ok";
      case OpOutcome::Failed: return "failed";
      default: return "timed_out";
    }
  };
  for (const auto& op : ops_)
    f << op.id << "," << kind_name(op.kind) << "," << op.key << "," << (op.issued_us / 1000)
      << "," << (op.completed_us / 1000) << "," << outcome_name(op.outcome) << ","
      << op.bytes_moved << "\n";
}

void MetricStore::write_traffic_dot(const std::string& path, const ClusterTopology& topo) const {
  std::ofstream f(path);
  if (!f) throw SimError("cannot write " + path);
  // Node-pair totals, both directions folded together; edge weight in KB.
  std::map<std::pair<int, int>, std::int64_t> undirected;
  std::int64_t max_bytes = 1;
  for (const auto& [key, bytes] : traffic_) {
    auto pair = std::minmax(key.first, key.second);
    undirected[{pair.first, pair.second}] += bytes;
  }
  for (const auto& [key, bytes] : undirected) max_bytes = std::max(max_bytes, bytes);
  f << "graph traffic {\n";
  for (int i = 0; i < topo.node_count(); ++i)
    f << "  \"" << topo.node(i).id << "\";\n";
  char buf[64];
  for (const auto& [key, bytes] : undirected) {
    double width = 1.0 + 5.0 * static_cast<double>(bytes) / static_cast<double>(max_bytes);
    std::snprintf(buf, sizeof buf, "%.2f", width);
    f << "  \"" << topo.node(key.first).id << "\" -- \"" << topo.node(key.second).id
      << "\" [label=\"" << (bytes / 1000) << "KB\", penwidth=" << buf << "];\n";
  }
  f << "}\n";
}

std::map<double, double> normalize_to_full_scale(const std::map<double, double>& by_lsf) {
  auto it = by_lsf.find(1.0);
  if (it == by_lsf.end()) throw SimError("normalization baseline (lsf=1.0) missing");
  if (it->second == 0.0) throw SimError("normalization baseline is zero");
  std::map<double, double> out;
  for (const auto& [lsf, v] : by_lsf) out[lsf] = v / it->second;
  out[1.0] = 1.0;
  return out;
}

}  // namespace fragsim
