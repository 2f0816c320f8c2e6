#pragma once

#include <functional>
#include <memory>
#include <string>

#include "fragsim/metrics.hpp"
#include "fragsim/router.hpp"
#include "fragsim/simkernel.hpp"
#include "fragsim/topology.hpp"

namespace fragsim {

// One simulation instance. Owns the clock, the topology snapshot, the route
// table and all counters; everything runs on its single event loop.
class SimWorld {
 public:
  SimWorld(ClusterTopology topo, std::uint64_t seed, RouterConfig router_cfg = {});

  SimTime now() const { return kernel.now(); }

  using SendDone = std::function<void(bool ok, SimTime at)>;
  using ParkFn = std::function<void(SimTime ready_at)>;

  // Routes and transmits. On "rerouting in progress" the send parks and is
  // retried when the recompute lands; on unreachable or exhausted retries the
  // callback reports failure.
  void send(int src, int dst, std::int64_t bytes, MsgTag tag, SendDone done,
            ParkFn on_park = {}, int tries = 3);

  // Flips the link, drops in-flight traffic and notifies the router.
  void set_link_state(int link, bool up);

  double route_latency_ms(int src, int dst);

  ClusterTopology topo;
  SimKernel kernel;
  MetricStore metrics;
  Network net;
  Router router;
  Rng rng;

 private:
  void send_attempt(int src, int dst, std::int64_t bytes, MsgTag tag,
                    std::shared_ptr<SendDone> done, std::shared_ptr<ParkFn> park, int tries);
};

}  // namespace fragsim
