#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "fragsim/simkernel.hpp"
#include "fragsim/topology.hpp"

namespace fragsim {

struct RoutePlan {
  std::vector<int> links;
  int hops = 0;
  SimTime latency_us = 0;  // sampled at computation time
};

enum class RouteStatus : std::uint8_t { Ok, Rerouting, Unreachable };

struct RouteResult {
  RouteStatus status = RouteStatus::Unreachable;
  RoutePlan plan;
  SimTime ready_at = 0;  // when a pending recompute lands (Rerouting only)
};

struct RouterConfig {
  SimTime reroute_delay_us = 30'000'000;
  bool jitter = false;  // uniform extra delay drawn per link event
  SimTime jitter_lo_us = 0;
  SimTime jitter_hi_us = 10'000'000;
  std::uint64_t jitter_seed = 1;
};

// Overlay route table: minimum hop count, then total latency, then the
// lexicographically smallest link-id sequence. Link-state changes mark routes
// stale; recomputation lands only after the reroute delay. A stale pair keeps
// using its old plan while that plan's links are all up.
class Router {
 public:
  Router(ClusterTopology& topo, SimKernel& kernel, RouterConfig cfg = {});

  RouteResult resolve(int src, int dst, SimTime t);
  void on_link_state_change(int link, bool up, SimTime t);

  // Pure computation over up links at time t; no table state is touched.
  std::optional<RoutePlan> shortest_path(int src, int dst, SimTime t) const;

  // Mean of fresh shortest-path latencies over all ordered reachable pairs.
  double mean_pairwise_latency_ms(SimTime t) const;

  // Last known latency for planning estimates; computes fresh when unknown.
  SimTime latency_hint_us(int src, int dst, SimTime t);

  SimTime reroute_delay_us() const { return cfg_.reroute_delay_us; }
  const std::vector<SimTime>& recompute_times() const { return recompute_times_; }

 private:
  struct PairState {
    std::optional<RoutePlan> plan;
    bool stale = false;
    SimTime ready_at = -1;
  };

  PairState& state(int src, int dst) { return pairs_[{src, dst}]; }
  void refresh(PairState& ps, int src, int dst, SimTime t);
  bool plan_viable(const RoutePlan& plan) const;

  ClusterTopology& topo_;
  SimKernel& kernel_;
  RouterConfig cfg_;
  Rng jitter_rng_;
  std::map<std::pair<int, int>, PairState> pairs_;
  std::vector<SimTime> recompute_times_;
};

}  // namespace fragsim
