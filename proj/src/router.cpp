#include "fragsim/router.hpp"

#include <algorithm>
#include <queue>

namespace fragsim {

Router::Router(ClusterTopology& topo, SimKernel& kernel, RouterConfig cfg)
    : topo_(topo), kernel_(kernel), cfg_(cfg), jitter_rng_(cfg.jitter_seed) {}

namespace {

struct Cand {
  int hops;
  SimTime lat;
  std::vector<int> ranks;  // link ranks along the path, the lexicographic key
  std::vector<int> links;
  int node;
};

bool cand_less(const Cand& a, const Cand& b) {
  if (a.hops != b.hops) return a.hops < b.hops;
  if (a.lat != b.lat) return a.lat < b.lat;
  return a.ranks < b.ranks;
}

struct CandGreater {
  bool operator()(const Cand& a, const Cand& b) const { return cand_less(b, a); }
};

}  // namespace

std::optional<RoutePlan> Router::shortest_path(int src, int dst, SimTime t) const {
  if (src == dst) throw SimError("shortest_path requires distinct endpoints");
  const auto& rank = topo_.link_rank();
  std::priority_queue<Cand, std::vector<Cand>, CandGreater> pq;
  pq.push(Cand{0, 0, {}, {}, src});
  std::vector<char> settled(static_cast<std::size_t>(topo_.node_count()), 0);
  while (!pq.empty()) {
    Cand cur = pq.top();
    pq.pop();
    if (settled[static_cast<std::size_t>(cur.node)]) continue;
    settled[static_cast<std::size_t>(cur.node)] = 1;
    if (cur.node == dst) {
      RoutePlan plan;
      plan.links = std::move(cur.links);
      plan.hops = cur.hops;
      plan.latency_us = cur.lat;
      return plan;
    }
    for (int li : topo_.links_of(cur.node)) {
      const LinkSpec& l = topo_.link(li);
      if (!l.up) continue;
      int next = (l.a == cur.node) ? l.b : l.a;
      if (settled[static_cast<std::size_t>(next)]) continue;
      Cand nc = cur;
      nc.node = next;
      nc.hops += 1;
      nc.lat += topo_.effective_qos(li, t).latency_us;
      nc.ranks.push_back(rank[static_cast<std::size_t>(li)]);
      nc.links.push_back(li);
      pq.push(std::move(nc));
    }
  }
  return std::nullopt;
}

bool Router::plan_viable(const RoutePlan& plan) const {
  for (int li : plan.links)
    if (!topo_.link(li).up) return false;
  return true;
}

void Router::refresh(PairState& ps, int src, int dst, SimTime t) {
  ps.plan = shortest_path(src, dst, t);
  ps.stale = false;
  ps.ready_at = -1;
}

RouteResult Router::resolve(int src, int dst, SimTime t) {
  PairState& ps = state(src, dst);
  if (!ps.stale && !ps.plan && ps.ready_at < 0) {
    // first use of this pair
    refresh(ps, src, dst, t);
  } else if (ps.stale) {
    if (ps.ready_at >= 0 && t >= ps.ready_at) {
      refresh(ps, src, dst, t);
    } else if (ps.plan && plan_viable(*ps.plan)) {
      // grace: the old path still works during the recompute window
      return RouteResult{RouteStatus::Ok, *ps.plan, 0};
    } else {
      return RouteResult{RouteStatus::Rerouting, {}, ps.ready_at};
    }
  } else if (ps.plan && !plan_viable(*ps.plan)) {
    // A link on the plan dropped without this pair being marked; treat as
    // stale until the next recompute lands.
    RouteResult r{RouteStatus::Rerouting, {}, ps.ready_at};
    if (ps.ready_at < 0) {
      refresh(ps, src, dst, t);
      if (ps.plan) return RouteResult{RouteStatus::Ok, *ps.plan, 0};
      return RouteResult{RouteStatus::Unreachable, {}, 0};
    }
    return r;
  }
  if (!ps.plan) return RouteResult{RouteStatus::Unreachable, {}, 0};
  return RouteResult{RouteStatus::Ok, *ps.plan, 0};
}

void Router::on_link_state_change(int link, bool up, SimTime t) {
  SimTime delay = cfg_.reroute_delay_us;
  if (cfg_.jitter)
    delay = cfg_.jitter_lo_us +
            static_cast<SimTime>(jitter_rng_.uniform_u64(
                static_cast<std::uint64_t>(cfg_.jitter_hi_us - cfg_.jitter_lo_us + 1)));
  const SimTime ready = t + delay;

  bool any = false;
  for (auto& [key, ps] : pairs_) {
    bool affected;
    if (up) {
      // A restored link can improve any pair; recompute them all.
      affected = true;
    } else {
      affected = ps.plan &&
                 std::find(ps.plan->links.begin(), ps.plan->links.end(), link) !=
                     ps.plan->links.end();
    }
    if (affected) {
      ps.stale = true;
      ps.ready_at = std::max(ps.ready_at, ready);
      any = true;
    }
  }
  if (any) {
    kernel_.schedule(ready, EvKind::Timer, [this, ready] {
      recompute_times_.push_back(ready);
      for (auto& [key, ps] : pairs_) {
        if (ps.stale && ps.ready_at >= 0 && ps.ready_at <= ready)
          refresh(ps, key.first, key.second, ready);
      }
    });
  }
}

double Router::mean_pairwise_latency_ms(SimTime t) const {
  double total = 0;
  int count = 0;
  for (int i = 0; i < topo_.node_count(); ++i) {
    for (int j = 0; j < topo_.node_count(); ++j) {
      if (i == j) continue;
      auto plan = shortest_path(i, j, t);
      if (!plan) continue;
      total += us_to_ms(plan->latency_us);
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / count;
}

SimTime Router::latency_hint_us(int src, int dst, SimTime t) {
  if (src == dst) return 0;
  PairState& ps = state(src, dst);
  if (ps.plan) return ps.plan->latency_us;
  auto plan = shortest_path(src, dst, t);
  return plan ? plan->latency_us : 1'000'000;
}

}  // namespace fragsim
