#include "fragsim/simkernel.hpp"

#include <memory>

namespace fragsim {

const char* ev_kind_name(EvKind k) {
  switch (k) {
    case EvKind::MessageDelivery: return "message_delivery";
    case EvKind::LinkState: return "link_state";
    case EvKind::Membership: return "membership";
    case EvKind::WorkloadOp: return "workload_op";
    default: return "timer";
  }
}

void SimKernel::schedule(SimTime t, EvKind kind, std::function<void()> fn, std::string detail) {
  if (t < now_) throw SimError("cannot schedule event in the past");
  Ev ev;
  ev.t = t;
  ev.seq = next_seq_++;
  ev.kind = kind;
  ev.fn = std::move(fn);
  if (sink_) ev.detail = std::move(detail);
  queue_.push(std::move(ev));
}

void SimKernel::step(Ev ev) {
  now_ = ev.t;
  ++processed_;
  std::uint64_t rec[3] = {static_cast<std::uint64_t>(ev.t), ev.seq,
                          static_cast<std::uint64_t>(ev.kind)};
  trace_hash_ = fnv1a64(rec, sizeof rec, trace_hash_);
  if (sink_) sink_(ev.t, ev.seq, ev.kind, ev.detail);
  ev.fn();
}

void SimKernel::run_until(SimTime t_end) {
  while (!queue_.empty() && queue_.top().t <= t_end) {
    Ev ev = queue_.top();
    queue_.pop();
    step(std::move(ev));
  }
  now_ = std::max(now_, t_end);
}

void SimKernel::run_all() {
  while (!queue_.empty()) {
    Ev ev = queue_.top();
    queue_.pop();
    step(std::move(ev));
  }
}

Network::Network(ClusterTopology& topo, SimKernel& kernel, MetricStore& metrics)
    : topo_(topo), kernel_(kernel), metrics_(metrics) {
  busy_until_.assign(static_cast<std::size_t>(topo.link_count()), {0, 0});
  occupancy_.resize(static_cast<std::size_t>(topo.link_count()));
}

void Network::transmit(Message msg, SimTime t, DeliveryFn done) {
  if (msg.path.empty()) {  // src == dst, local delivery
    kernel_.schedule(t, EvKind::MessageDelivery, [done = std::move(done), t] { done(true, t); });
    return;
  }
  auto fl = std::make_shared<InFlight>();
  fl->msg = std::move(msg);
  fl->hop = 0;
  fl->done = std::move(done);
  hop(std::move(fl), t);
}

void Network::hop(std::shared_ptr<InFlight> fl, SimTime t) {
  const int li = fl->msg.path[fl->hop];
  const LinkSpec& l = topo_.link(li);
  const int from = (fl->hop == 0) ? fl->msg.src : [&] {
    const LinkSpec& prev = topo_.link(fl->msg.path[fl->hop - 1]);
    // The shared endpoint of the previous link and this one.
    return (prev.a == l.a || prev.a == l.b) ? prev.a : prev.b;
  }();
  const int to = (l.a == from) ? l.b : l.a;

  if (!l.up) {
    metrics_.on_lost(li, fl->msg.size_bytes);
    fl->done(false, t);
    return;
  }

  const int dir = (from == l.a) ? 0 : 1;
  auto& busy = busy_until_[static_cast<std::size_t>(li)][static_cast<std::size_t>(dir)];
  const SimTime start = std::max(t, busy);
  const QosValue qos = topo_.effective_qos(li, start);
  // effective_qos scales the download direction; b->a uses the upload figure.
  const double bw = (dir == 0) ? qos.bw_mbps : qos.bw_mbps * (l.up_bw_mbps / l.down_bw_mbps);
  const SimTime ser = static_cast<SimTime>(
      std::llround(static_cast<double>(fl->msg.size_bytes) * 8.0 / bw));
  const SimTime exit = start + ser + qos.latency_us;
  busy = start + ser;

  metrics_.on_sent(li, fl->msg.size_bytes);
  const std::uint64_t token = ++next_token_;
  occupancy_[static_cast<std::size_t>(li)][token] = fl;

  kernel_.schedule(exit, EvKind::MessageDelivery,
                   [this, fl, li, token, from, to, exit] {
                     if (!fl->alive) return;  // dropped when the link failed
                     occupancy_[static_cast<std::size_t>(li)].erase(token);
                     metrics_.on_delivered(li, from, to, fl->msg.size_bytes, fl->msg.tag);
                     ++fl->hop;
                     if (fl->hop == fl->msg.path.size()) {
                       fl->done(true, exit);
                     } else {
                       hop(fl, exit);
                     }
                   });
}

void Network::on_link_down(int link, SimTime t) {
  auto occ = std::move(occupancy_[static_cast<std::size_t>(link)]);
  occupancy_[static_cast<std::size_t>(link)].clear();
  busy_until_[static_cast<std::size_t>(link)] = {0, 0};
  for (auto& [token, fl] : occ) {
    if (!fl->alive) continue;
    fl->alive = false;
    metrics_.on_lost(link, fl->msg.size_bytes);
    fl->done(false, t);
  }
}

void Network::on_link_up(int link) {
  busy_until_[static_cast<std::size_t>(link)] = {0, 0};
}

}  // namespace fragsim
