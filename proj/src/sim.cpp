#include "fragsim/sim.hpp"

namespace fragsim {

SimWorld::SimWorld(ClusterTopology t, std::uint64_t seed, RouterConfig router_cfg)
    : topo(std::move(t)),
      kernel(),
      metrics(),
      net(topo, kernel, metrics),
      router(topo, kernel, router_cfg),
      rng(seed) {
  metrics.init(topo.node_count(), topo.link_count());
}

void SimWorld::send(int src, int dst, std::int64_t bytes, MsgTag tag, SendDone done,
                    ParkFn on_park, int tries) {
  send_attempt(src, dst, bytes, tag, std::make_shared<SendDone>(std::move(done)),
               on_park ? std::make_shared<ParkFn>(std::move(on_park)) : nullptr, tries);
}

void SimWorld::send_attempt(int src, int dst, std::int64_t bytes, MsgTag tag,
                            std::shared_ptr<SendDone> done, std::shared_ptr<ParkFn> park,
                            int tries) {
  if (src == dst) {
    kernel.schedule(kernel.now(), EvKind::MessageDelivery,
                    [done, at = kernel.now()] { (*done)(true, at); });
    return;
  }
  RouteResult r = router.resolve(src, dst, kernel.now());
  switch (r.status) {
    case RouteStatus::Unreachable:
      (*done)(false, kernel.now());
      return;
    case RouteStatus::Rerouting: {
      if (tries <= 0) {
        (*done)(false, kernel.now());
        return;
      }
      SimTime ready = std::max(r.ready_at, kernel.now()) + 1000;
      if (park) (*park)(ready);
      kernel.schedule(ready, EvKind::Timer, [this, src, dst, bytes, tag, done, park, tries] {
        send_attempt(src, dst, bytes, tag, done, park, tries - 1);
      });
      return;
    }
    case RouteStatus::Ok:
      break;
  }
  Message msg;
  msg.id = net.next_msg_id();
  msg.src = src;
  msg.dst = dst;
  msg.size_bytes = bytes;
  msg.tag = tag;
  msg.path = r.plan.links;
  msg.injected_us = kernel.now();
  net.transmit(std::move(msg), kernel.now(),
               [this, src, dst, bytes, tag, done, park, tries](bool ok, SimTime at) {
                 if (ok) {
                   (*done)(true, at);
                   return;
                 }
                 // Dropped mid-flight; retry once routes have settled.
                 if (tries <= 0) {
                   (*done)(false, at);
                   return;
                 }
                 SimTime ready = at + router.reroute_delay_us() + 1000;
                 if (park) (*park)(ready);
                 kernel.schedule(ready, EvKind::Timer,
                                 [this, src, dst, bytes, tag, done, park, tries] {
                                   send_attempt(src, dst, bytes, tag, done, park, tries - 1);
                                 });
               });
}

void SimWorld::set_link_state(int link, bool up) {
  if (topo.link(link).up == up) return;  // idempotent, no event
  SimTime t = kernel.now();
  kernel.schedule(t, EvKind::LinkState, [this, link, up, t] {
    if (!topo.set_link_state(link, up)) return;
    if (up) {
      net.on_link_up(link);
    } else {
      net.on_link_down(link, t);
    }
    router.on_link_state_change(link, up, t);
  });
}

double SimWorld::route_latency_ms(int src, int dst) {
  return us_to_ms(router.latency_hint_us(src, dst, kernel.now()));
}

}  // namespace fragsim
