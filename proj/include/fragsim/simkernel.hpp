#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "fragsim/core.hpp"
#include "fragsim/metrics.hpp"
#include "fragsim/topology.hpp"

namespace fragsim {

enum class EvKind : std::uint8_t { MessageDelivery, LinkState, Membership, WorkloadOp, Timer };

const char* ev_kind_name(EvKind k);

// Deterministic single-threaded event loop. Events run in (t, seq) order; seq
// is the insertion tiebreaker.
class SimKernel {
 public:
  SimTime now() const { return now_; }

  void schedule(SimTime t, EvKind kind, std::function<void()> fn, std::string detail = {});

  void run_until(SimTime t_end);
  void run_all();

  std::uint64_t trace_hash() const { return trace_hash_; }
  std::uint64_t processed() const { return processed_; }

  using TraceSink =
      std::function<void(SimTime t, std::uint64_t seq, EvKind kind, const std::string& detail)>;
  void set_trace_sink(TraceSink sink) { sink_ = std::move(sink); }
  bool tracing() const { return static_cast<bool>(sink_); }

 private:
  struct Ev {
    SimTime t;
    std::uint64_t seq;
    EvKind kind;
    std::function<void()> fn;
    std::string detail;
  };
  struct Later {
    bool operator()(const Ev& a, const Ev& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };

  void step(Ev ev);

  std::priority_queue<Ev, std::vector<Ev>, Later> queue_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::uint64_t trace_hash_ = 1469598103934665603ull;
  TraceSink sink_;
};

struct Message {
  std::uint64_t id = 0;
  int src = -1;
  int dst = -1;
  std::int64_t size_bytes = 0;
  MsgTag tag;
  std::vector<int> path;  // contiguous link walk src -> dst
  SimTime injected_us = 0;
};

// Moves messages across multi-hop paths: per-hop effective latency plus
// serialization delay with per-link-direction FIFO queueing. A link that goes
// down drops everything currently traversing it.
class Network {
 public:
  Network(ClusterTopology& topo, SimKernel& kernel, MetricStore& metrics);

  using DeliveryFn = std::function<void(bool delivered, SimTime at)>;
  void transmit(Message msg, SimTime t, DeliveryFn done);

  void on_link_down(int link, SimTime t);
  void on_link_up(int link);

  std::uint64_t next_msg_id() { return ++next_msg_id_; }

 private:
  struct InFlight {
    Message msg;
    std::size_t hop;
    DeliveryFn done;
    bool alive = true;
  };

  void hop(std::shared_ptr<InFlight> fl, SimTime t);

  ClusterTopology& topo_;
  SimKernel& kernel_;
  MetricStore& metrics_;
  std::vector<std::array<SimTime, 2>> busy_until_;
  // Tokens of transmissions currently on each link, ordered for determinism.
  std::vector<std::map<std::uint64_t, std::shared_ptr<InFlight>>> occupancy_;
  std::uint64_t next_msg_id_ = 0;
  std::uint64_t next_token_ = 0;
};

}  // namespace fragsim
