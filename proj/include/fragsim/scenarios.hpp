#pragma once

#include <map>
#include <string>
#include <vector>

#include "fragsim/workload.hpp"

namespace fragsim {

struct TopologyConfig {
  std::string preset = "reference";  // reference | custom
  std::string custom_json;           // nodes/links/schedules document
  double intra_region_latency_ms = 1.0;
  double intra_region_bw_mbps = 1000.0;
};

struct ScenarioConfig {
  std::string kind = "lsf_sweep";  // lsf_sweep | resize | link_churn | all_nodes_baseline
  std::vector<double> lsf_set{0.2, 0.4, 0.6, 0.8, 1.0};
  double lsf = 1.0;  // single-run scaling factor
  int step_interval_ms = 120'000;
  std::vector<std::string> removal_order;  // empty = engine default
  int links_total = 64;
  int links_to_remove = 50;
  int dwell_ms = 60'000;
  bool connectivity_guard = true;
  int reroute_delay_ms = 30'000;
  bool reroute_jitter = false;
  int jitter_lo_ms = 30'000;
  int jitter_hi_ms = 40'000;
  bool redis_online_resize = false;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "out";
  int parallelism = 1;
  bool trace = false;
  TopologyConfig topology;
  EngineConfig engine;
  WorkloadSpec workload;
  ScenarioConfig scenario;
};

struct RunSummary {
  std::string scenario;
  std::string engine;
  std::string workload;
  std::string phase = "run";
  std::uint64_t seed = 0;
  double lsf = 1.0;
  std::int64_t total_ops = 0;
  std::int64_t ok_ops = 0;
  std::int64_t failed_ops = 0;
  std::int64_t timed_out_ops = 0;
  std::int64_t wall_virtual_ms = 0;
  double total_mb_transferred = 0;
  double throughput_ops_s = 0;
  std::vector<SettleEvent> settles;
  std::vector<UnresponsiveWindow> windows;
  std::vector<BatchStat> batches;
  std::uint64_t trace_hash = 0;

  std::string to_json_string(int indent = 2) const;
};

struct RunResult {
  RunSummary summary;
  std::vector<std::int64_t> timeline;
  std::vector<std::int64_t> received_by_node;
  std::vector<std::int64_t> received_write_sync;
  std::map<std::pair<int, int>, std::int64_t> traffic;
  std::vector<std::string> node_ids;
  std::vector<OpRecord> oplog;
};

struct SweepResult {
  std::vector<RunResult> runs;  // ordered by ascending lsf
  std::map<double, double> throughput;
  std::map<double, double> transferred_mb;
  std::map<double, double> normalized_throughput;
  std::map<double, double> normalized_transferred;
};

struct ResizeResult {
  RunResult down;
  RunResult up;
  RunResult baseline;
  bool symmetric = false;
};

struct LinkChurnResult {
  struct Removal {
    SimTime t_us = 0;
    std::string link;
    double mean_latency_before_ms = 0;
    double mean_latency_after_ms = 0;
    bool alternate = false;
    SimTime first_ok_after_us = -1;
  };
  RunResult run;
  std::vector<Removal> removals;
};

ClusterTopology build_topology(const RunConfig& cfg, double lsf);
std::vector<std::string> default_removal_order(const std::string& engine);

RunResult run_single(const RunConfig& cfg, double lsf, const std::string& phase = "run");
SweepResult run_lsf_sweep(const RunConfig& cfg);
ResizeResult run_resize(const RunConfig& cfg);
LinkChurnResult run_link_churn(const RunConfig& cfg);

}  // namespace fragsim
