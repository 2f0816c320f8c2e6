#include "fragsim/scenarios.hpp"

#include <algorithm>
#include <limits>

#include "json.hpp"

namespace fragsim {

namespace {

constexpr SimTime kFarFuture = std::numeric_limits<SimTime>::max() / 4;

RouterConfig router_config(const ScenarioConfig& sc, std::uint64_t seed) {
  RouterConfig rc;
  rc.reroute_delay_us = ms_to_us(static_cast<double>(sc.reroute_delay_ms));
  rc.jitter = sc.reroute_jitter;
  rc.jitter_lo_us = ms_to_us(static_cast<double>(sc.jitter_lo_ms));
  rc.jitter_hi_us = ms_to_us(static_cast<double>(sc.jitter_hi_ms));
  rc.jitter_seed = seed;
  return rc;
}

EngineConfig resolved_engine(const RunConfig& cfg) {
  EngineConfig e = cfg.engine;
  if (e.read_preference.empty())
    e.read_preference = (cfg.scenario.kind == "resize") ? "nearest_secondary" : "primary";
  if (cfg.scenario.kind == "resize") e.cassandra_allow_rf_underflow = true;
  return e;
}

struct World {
  std::unique_ptr<SimWorld> sim;
  std::unique_ptr<DbModel> db;
  std::unique_ptr<WorkloadRunner> runner;
  EngineConfig engine;
};

World make_world(const RunConfig& cfg, ClusterTopology topo) {
  World w;
  w.engine = resolved_engine(cfg);
  w.sim = std::make_unique<SimWorld>(std::move(topo), cfg.seed,
                                     router_config(cfg.scenario, cfg.seed));
  w.db = make_db_model(*w.sim, w.engine);
  w.db->load(cfg.workload.record_count);
  WorkloadSpec spec = cfg.workload;
  spec.rng_seed += cfg.seed;
  w.runner = std::make_unique<WorkloadRunner>(*w.sim, *w.db, spec);
  start_gossip(*w.sim, *w.db, w.engine, [r = w.runner.get()] { return r->active(); });
  return w;
}

World make_world(const RunConfig& cfg, double lsf) {
  return make_world(cfg, build_topology(cfg, lsf));
}

RunResult summarize(const RunConfig& cfg, double lsf, const std::string& phase, World& w) {
  RunResult r;
  const MetricStore& m = w.sim->metrics;
  r.summary.scenario = cfg.scenario.kind;
  r.summary.engine = cfg.engine.kind;
  r.summary.workload = cfg.workload.name;
  r.summary.phase = phase;
  r.summary.seed = cfg.seed;
  r.summary.lsf = lsf;
  r.summary.total_ops = m.ops_total();
  r.summary.ok_ops = m.ops_ok();
  r.summary.failed_ops = m.ops_failed();
  r.summary.timed_out_ops = m.ops_timed_out();
  r.summary.wall_virtual_ms = m.last_completion_us() / 1000;
  r.summary.total_mb_transferred =
      static_cast<double>(m.total_delivered_bytes()) / 1e6;
  if (m.last_completion_us() > 0)
    r.summary.throughput_ops_s =
        static_cast<double>(m.ops_ok()) / (static_cast<double>(m.last_completion_us()) / 1e6);
  r.summary.settles = m.settle_events();
  r.summary.windows = m.unresponsive_windows();
  r.summary.batches = w.runner->batches();
  r.summary.trace_hash = w.sim->kernel.trace_hash();
  r.timeline = m.timeline();
  for (int i = 0; i < w.sim->topo.node_count(); ++i) {
    r.received_by_node.push_back(m.received_bytes(i));
    r.received_write_sync.push_back(m.received_write_sync_bytes(i));
    r.node_ids.push_back(w.sim->topo.node(i).id);
  }
  r.traffic = m.traffic_matrix();
  r.oplog = m.op_log();
  return r;
}

}  // namespace

ClusterTopology build_topology(const RunConfig& cfg, double lsf) {
  MeshQosRange range;
  range.intra_region_latency_ms = cfg.topology.intra_region_latency_ms;
  range.intra_region_bw_mbps = cfg.topology.intra_region_bw_mbps;
  ClusterTopology topo = (cfg.topology.preset == "custom")
                             ? ClusterTopology::from_json_string(cfg.topology.custom_json)
                             : make_reference_topology(range);
  if (lsf != 1.0) topo.scale_all_schedules(lsf);
  return topo;
}

std::vector<std::string> default_removal_order(const std::string& engine) {
  if (engine == "cassandra")
    return {"singapore", "sydney", "canberra", "pune", "dubai", "virginia"};
  // mongodb keeps its primary (melbourne) and non-voting member (virginia)
  return {"singapore", "sydney", "canberra", "pune", "seoul", "dubai"};
}

std::string RunSummary::to_json_string(int indent) const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["engine"] = engine;
  j["workload"] = workload;
  j["phase"] = phase;
  j["seed"] = seed;
  j["lsf"] = lsf;
  j["total_ops"] = total_ops;
  j["ok_ops"] = ok_ops;
  j["failed_ops"] = failed_ops;
  j["timed_out_ops"] = timed_out_ops;
  j["wall_virtual_ms"] = wall_virtual_ms;
  j["total_mb_transferred"] = total_mb_transferred;
  j["throughput_ops_s"] = throughput_ops_s;
  j["settle_events"] = nlohmann::json::array();
  for (const auto& s : settles)
    j["settle_events"].push_back(
        {{"node", s.node}, {"kind", s.kind}, {"duration_ms", s.duration_us / 1000}});
  j["unresponsive_windows"] = nlohmann::json::array();
  for (const auto& w : windows)
    j["unresponsive_windows"].push_back(
        {{"start_ms", w.start_us / 1000}, {"len_ms", w.length_us / 1000}});
  j["batches"] = nlohmann::json::array();
  for (const auto& b : batches)
    j["batches"].push_back({{"ops", b.ops},
                            {"ok", b.ok},
                            {"start_ms", b.start_us / 1000},
                            {"end_ms", b.end_us / 1000}});
  j["trace_hash"] = trace_hash;
  return j.dump(indent);
}

RunResult run_single(const RunConfig& cfg, double lsf, const std::string& phase) {
  World w = make_world(cfg, lsf);
  w.runner->start([] {});
  w.sim->kernel.run_all();
  return summarize(cfg, lsf, phase, w);
}

SweepResult run_lsf_sweep(const RunConfig& cfg) {
  SweepResult out;
  std::vector<double> points = cfg.scenario.lsf_set;
  std::sort(points.begin(), points.end());
  for (double lsf : points) {
    out.runs.push_back(run_single(cfg, lsf, "lsf"));
    const RunSummary& s = out.runs.back().summary;
    out.throughput[lsf] = s.throughput_ops_s;
    out.transferred_mb[lsf] = s.total_mb_transferred;
  }
  out.normalized_throughput = normalize_to_full_scale(out.throughput);
  out.normalized_transferred = normalize_to_full_scale(out.transferred_mb);
  return out;
}

namespace {

std::vector<std::string> all_data_node_ids(const ClusterTopology& topo) {
  std::vector<std::string> ids;
  for (int n : topo.data_nodes()) ids.push_back(topo.node(n).id);
  return ids;
}

// On-the-fly churn: nodes leave or join every step interval while the
// workload runs; the next step waits for the previous settle to land.
RunResult run_resize_phase(const RunConfig& cfg, double lsf,
                           const std::vector<std::string>& order, bool adding,
                           const std::vector<std::string>& initial_members,
                           const std::string& phase) {
  RunConfig c = cfg;
  c.engine.initial_members = initial_members;
  World w = make_world(c, lsf);
  const SimTime step = ms_to_us(static_cast<double>(cfg.scenario.step_interval_ms));

  struct Chain {
    World* w = nullptr;
    std::vector<std::string> order;
    bool adding = false;
    SimTime step = 0;
    std::size_t idx = 0;
  };
  auto chain = std::make_shared<Chain>();
  chain->w = &w;
  chain->order = order;
  chain->adding = adding;
  chain->step = step;

  auto step_fn = std::make_shared<std::function<void()>>();
  *step_fn = [chain, step_fn] {
    World& w = *chain->w;
    const std::string& id = chain->order[chain->idx];
    const int node = w.sim->topo.find_node(id);
    if (node < 0) throw SimError("removal order references unknown node: " + id);
    ChurnPlan plan = chain->adding ? w.db->plan_add(node) : w.db->plan_remove(node);
    const std::string kind = plan.kind;
    execute_churn(*w.sim, *w.db, std::move(plan),
                  [chain, step_fn, id, kind](SimTime settle, std::int64_t) {
                    World& w = *chain->w;
                    w.sim->metrics.add_settle(id, kind, settle);
                    ++chain->idx;
                    if (chain->idx < chain->order.size()) {
                      const SimTime at = std::max(
                          w.sim->now(),
                          static_cast<SimTime>(chain->idx + 1) * chain->step);
                      w.sim->kernel.schedule(at, EvKind::Membership, *step_fn);
                    } else {
                      w.sim->kernel.schedule(w.sim->now() + chain->step, EvKind::Timer,
                                             [chain] { chain->w->runner->request_stop(); });
                    }
                  });
  };
  w.sim->kernel.schedule(step, EvKind::Membership, *step_fn);
  w.runner->start_timed(kFarFuture, [] {});
  w.sim->kernel.run_all();
  return summarize(cfg, lsf, phase, w);
}

// Offline variant: the cluster is rebuilt at every size and each size serves
// the workload for one step interval; timelines are stitched back to back.
RunResult run_offline_phase(const RunConfig& cfg, double lsf,
                            const std::vector<std::vector<std::string>>& memberships,
                            const std::string& phase) {
  RunResult agg;
  SimTime offset = 0;
  const SimTime step = ms_to_us(static_cast<double>(cfg.scenario.step_interval_ms));
  std::uint64_t hash = 1469598103934665603ull;
  for (const auto& membership : memberships) {
    RunConfig c = cfg;
    c.engine.initial_members = membership;
    World w = make_world(c, lsf);
    w.runner->start_timed(step, [] {});
    w.sim->kernel.run_all();
    RunResult r = summarize(cfg, lsf, phase, w);

    if (agg.node_ids.empty()) {
      agg = r;
      agg.timeline.clear();
      agg.oplog.clear();
      agg.summary.total_ops = 0;
      agg.summary.ok_ops = 0;
      agg.summary.failed_ops = 0;
      agg.summary.timed_out_ops = 0;
      agg.summary.total_mb_transferred = 0;
      agg.summary.batches.clear();
    }
    const auto bucket_offset = static_cast<std::size_t>(offset / 1'000'000);
    if (agg.timeline.size() < bucket_offset + r.timeline.size())
      agg.timeline.resize(bucket_offset + r.timeline.size(), 0);
    for (std::size_t b = 0; b < r.timeline.size(); ++b)
      agg.timeline[bucket_offset + b] += r.timeline[b];
    for (auto op : r.oplog) {
      op.issued_us += offset;
      op.completed_us += offset;
      agg.oplog.push_back(op);
    }
    agg.summary.total_ops += r.summary.total_ops;
    agg.summary.ok_ops += r.summary.ok_ops;
    agg.summary.failed_ops += r.summary.failed_ops;
    agg.summary.timed_out_ops += r.summary.timed_out_ops;
    agg.summary.total_mb_transferred += r.summary.total_mb_transferred;
    for (std::size_t i = 0; i < r.received_by_node.size(); ++i) {
      agg.received_by_node[i] += r.received_by_node[i];
      agg.received_write_sync[i] += r.received_write_sync[i];
    }
    hash = fnv1a64(&r.summary.trace_hash, sizeof r.summary.trace_hash, hash);
    offset += step;
  }
  agg.summary.wall_virtual_ms = offset / 1000;
  agg.summary.trace_hash = hash;
  if (offset > 0)
    agg.summary.throughput_ops_s =
        static_cast<double>(agg.summary.ok_ops) / (static_cast<double>(offset) / 1e6);
  return agg;
}

}  // namespace

ResizeResult run_resize(const RunConfig& cfg) {
  if (cfg.engine.kind == "mysql")
    throw SimError("mysql node-group resizing is unsupported");
  const double lsf = cfg.scenario.lsf;
  std::vector<std::string> order = cfg.scenario.removal_order.empty()
                                       ? default_removal_order(cfg.engine.kind)
                                       : cfg.scenario.removal_order;

  ClusterTopology probe = build_topology(cfg, 1.0);
  std::vector<std::string> all = all_data_node_ids(probe);
  std::vector<std::string> after_down;
  for (const auto& id : all)
    if (std::find(order.begin(), order.end(), id) == order.end()) after_down.push_back(id);

  std::vector<std::string> reversed(order.rbegin(), order.rend());

  ResizeResult out;
  const bool offline = cfg.engine.kind == "redis" && !cfg.scenario.redis_online_resize;
  if (offline) {
    std::vector<std::vector<std::string>> down_sizes{all};
    std::vector<std::string> current = all;
    for (const auto& id : order) {
      current.erase(std::remove(current.begin(), current.end(), id), current.end());
      down_sizes.push_back(current);
    }
    std::vector<std::vector<std::string>> up_sizes(down_sizes.rbegin(), down_sizes.rend());
    out.down = run_offline_phase(cfg, lsf, down_sizes, "downsizing");
    out.up = run_offline_phase(cfg, lsf, up_sizes, "upsizing");
    out.symmetric = up_sizes.back() == all;
  } else {
    out.down = run_resize_phase(cfg, lsf, order, false, all, "downsizing");
    out.up = run_resize_phase(cfg, lsf, reversed, true, after_down, "upsizing");
    std::vector<std::string> final_members = after_down;
    final_members.insert(final_members.end(), reversed.begin(), reversed.end());
    std::sort(final_members.begin(), final_members.end());
    std::vector<std::string> expect = all;
    std::sort(expect.begin(), expect.end());
    out.symmetric = final_members == expect;
  }

  RunConfig base = cfg;
  base.workload.operation_count = std::max<std::int64_t>(out.down.summary.total_ops, 1);
  base.workload.batches = 1;
  out.baseline = run_single(base, lsf, "all_nodes");
  return out;
}

LinkChurnResult run_link_churn(const RunConfig& cfg) {
  MeshQosRange range;
  range.intra_region_latency_ms = cfg.topology.intra_region_latency_ms;
  range.intra_region_bw_mbps = cfg.topology.intra_region_bw_mbps;
  ClusterTopology topo =
      build_mesh(reference_node_specs(true), cfg.scenario.links_total, cfg.seed, range);
  if (cfg.scenario.lsf != 1.0) topo.scale_all_schedules(cfg.scenario.lsf);

  // The removal sequence is pure graph math; plan it up front.
  Rng pick(splitmix64(cfg.seed ^ 0x6c696e6bull));
  ClusterTopology ghost = topo;
  LinkChurnResult out;
  std::vector<int> removals;
  auto endpoints_connected = [](const ClusterTopology& g, int a, int b) {
    std::vector<char> seen(static_cast<std::size_t>(g.node_count()), 0);
    std::vector<int> stack{a};
    seen[static_cast<std::size_t>(a)] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (u == b) return true;
      for (int li : g.links_of(u)) {
        if (!g.link(li).up) continue;
        int v = (g.link(li).a == u) ? g.link(li).b : g.link(li).a;
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
      }
    }
    return false;
  };
  for (int k = 0; k < cfg.scenario.links_to_remove; ++k) {
    std::vector<int> candidates;
    for (int li = 0; li < ghost.link_count(); ++li) {
      if (!ghost.link(li).up) continue;
      if (cfg.scenario.connectivity_guard && !ghost.connected_without(li)) continue;
      candidates.push_back(li);
    }
    if (candidates.empty()) break;
    int li = candidates[pick.uniform_u64(candidates.size())];
    ghost.set_link_state(li, false);
    removals.push_back(li);
    LinkChurnResult::Removal rec;
    rec.link = ghost.link(li).id;
    rec.alternate = endpoints_connected(ghost, ghost.link(li).a, ghost.link(li).b);
    out.removals.push_back(rec);
  }

  World w = make_world(cfg, std::move(topo));
  const SimTime dwell = ms_to_us(static_cast<double>(cfg.scenario.dwell_ms));
  const SimTime interval = ms_to_us(static_cast<double>(cfg.scenario.step_interval_ms));
  const SimTime reroute = ms_to_us(static_cast<double>(cfg.scenario.reroute_delay_ms));

  for (std::size_t k = 0; k < removals.size(); ++k) {
    const SimTime t_k = dwell + static_cast<SimTime>(k) * interval;
    out.removals[k].t_us = t_k;
    const int li = removals[k];
    auto* rec = &out.removals[k];
    w.sim->kernel.schedule(t_k - 1000, EvKind::Timer, [&w, rec] {
      rec->mean_latency_before_ms = w.sim->router.mean_pairwise_latency_ms(w.sim->now());
    });
    w.sim->kernel.schedule(t_k, EvKind::Timer, [&w, li] { w.sim->set_link_state(li, false); });
    w.sim->kernel.schedule(t_k + reroute + 1000, EvKind::Timer, [&w, rec] {
      rec->mean_latency_after_ms = w.sim->router.mean_pairwise_latency_ms(w.sim->now());
    });
  }
  const SimTime end =
      dwell + static_cast<SimTime>(removals.empty() ? 0 : removals.size() - 1) * interval +
      dwell;
  w.runner->start_timed(end, [] {});
  w.sim->kernel.run_all();
  out.run = summarize(cfg, cfg.scenario.lsf, "link_churn", w);

  // First successful completion after each removal, for recovery checks.
  std::size_t cursor = 0;
  for (auto& rec : out.removals) {
    rec.first_ok_after_us = -1;
    for (std::size_t i = cursor; i < out.run.oplog.size(); ++i) {
      const OpRecord& op = out.run.oplog[i];
      if (op.outcome == OpOutcome::Ok && op.completed_us > rec.t_us) {
        rec.first_ok_after_us = op.completed_us;
        break;
      }
    }
  }
  return out;
}

}  // namespace fragsim
