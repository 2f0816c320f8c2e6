#include "fragsim/dbmodels.hpp"

#include <algorithm>
#include <map>

namespace fragsim {

namespace {

double estimate_plan_ms(SimWorld& w, const OpPlan& plan) {
  double total = 0;
  for (const auto& st : plan.stages) {
    if (st.async) continue;
    double worst = 0;
    for (const auto& t : st.targets) {
      double rt = (t.node == st.origin) ? 0.0 : w.route_latency_ms(st.origin, t.node);
      double leg = rt + t.proc_ms + (t.resp_bytes > 0 ? rt : 0.0);
      worst = std::max(worst, leg);
    }
    total += st.origin_proc_ms + worst;
  }
  return total;
}

OpPlan not_viable(std::string why) {
  OpPlan p;
  p.viable = false;
  p.error = std::move(why);
  return p;
}

}  // namespace

DbModel::DbModel(SimWorld& world, EngineConfig cfg) : world_(world), cfg_(std::move(cfg)) {
  client_ = world_.topo.client_node();
  if (client_ < 0) throw SimError("topology has no client node");
  if (cfg_.initial_members.empty()) {
    initial_members_ = world_.topo.data_nodes();
  } else {
    for (const auto& id : cfg_.initial_members) {
      int idx = world_.topo.find_node(id);
      if (idx < 0) throw SimError("initial member not in topology: " + id);
      initial_members_.push_back(idx);
    }
  }
  if (initial_members_.empty()) throw SimError("insufficient nodes: no data members");
}

void DbModel::load(std::int64_t record_count) {
  if (record_count <= 0) throw SimError("record count must be positive");
  record_count_ = record_count;
}

std::string DbModel::key_name(std::uint64_t key) { return "user" + std::to_string(key); }

void DbModel::note_insert(std::uint64_t) { ++record_count_; }

int DbModel::resolve_member(const std::string& id) const {
  int idx = world_.topo.find_node(id);
  if (idx < 0) throw SimError("unknown node: " + id);
  return idx;
}

bool DbModel::is_protected(int node) const {
  const std::string& id = world_.topo.node(node).id;
  return std::find(cfg_.protected_nodes.begin(), cfg_.protected_nodes.end(), id) !=
         cfg_.protected_nodes.end();
}

double DbModel::route_ms(int a, int b) const {
  return a == b ? 0.0 : world_.route_latency_ms(a, b);
}

std::unique_ptr<DbModel> make_db_model(SimWorld& world, const EngineConfig& cfg) {
  if (cfg.kind == "cassandra") return std::make_unique<CassandraModel>(world, cfg);
  if (cfg.kind == "mongodb") return std::make_unique<MongoModel>(world, cfg);
  if (cfg.kind == "redis") return std::make_unique<RedisModel>(world, cfg);
  if (cfg.kind == "mysql") return std::make_unique<MySqlModel>(world, cfg);
  throw SimError("unknown engine: " + cfg.kind);
}

// ---------------------------------------------------------------- cassandra

CassandraModel::CassandraModel(SimWorld& world, EngineConfig cfg)
    : DbModel(world, std::move(cfg)) {
  // Ring positions are fixed by the topology's data-node order so that a
  // node re-added after removal lands on its old token.
  auto all_data = world_.topo.data_nodes();
  ring_pos_.assign(static_cast<std::size_t>(world_.topo.node_count()), -1);
  for (std::size_t i = 0; i < all_data.size(); ++i)
    ring_pos_[static_cast<std::size_t>(all_data[i])] = static_cast<int>(i);
  members_ = initial_members_;
  std::sort(members_.begin(), members_.end(), [&](int a, int b) {
    return ring_pos_[static_cast<std::size_t>(a)] < ring_pos_[static_cast<std::size_t>(b)];
  });
  for (int n : all_data)
    if (world_.topo.node(n).has_role(kRoleSeed)) seed_ = n;
}

void CassandraModel::load(std::int64_t record_count) {
  if (static_cast<int>(members_.size()) < cfg_.replication_factor &&
      !cfg_.cassandra_allow_rf_underflow)
    throw SimError("insufficient nodes: cluster smaller than replication factor");
  DbModel::load(record_count);
}

int CassandraModel::rf_effective(std::size_t member_count) const {
  return std::min(cfg_.replication_factor, static_cast<int>(member_count));
}

std::vector<int> CassandraModel::owners_among(const std::vector<int>& members,
                                              std::uint64_t key, int rf) const {
  // Tokens are evenly spaced over the full ring; walk to the successor of the
  // key's position, then take the next rf distinct members.
  const int ring_size = static_cast<int>(
      std::count_if(ring_pos_.begin(), ring_pos_.end(), [](int p) { return p >= 0; }));
  const int pos = static_cast<int>(splitmix64(key) % static_cast<std::uint64_t>(ring_size));
  std::size_t start = 0;
  bool found = false;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (ring_pos_[static_cast<std::size_t>(members[i])] >= pos) {
      start = i;
      found = true;
      break;
    }
  }
  if (!found) start = 0;  // wrap
  std::vector<int> owners;
  for (std::size_t i = 0; i < members.size() && static_cast<int>(owners.size()) < rf; ++i)
    owners.push_back(members[(start + i) % members.size()]);
  return owners;
}

std::vector<int> CassandraModel::owners_of_key(std::uint64_t key) const {
  return owners_among(members_, key, rf_effective(members_.size()));
}

int CassandraModel::next_coordinator() {
  int co = members_[rr_ % members_.size()];
  ++rr_;
  return co;
}

OpPlan CassandraModel::plan_operation(const OpRequest& op, SimTime t) {
  (void)t;
  if (members_.empty()) return not_viable("no cluster members");
  OpPlan plan;
  const int co = next_coordinator();
  const int cl = std::min(cfg_.consistency_level, rf_effective(members_.size()));

  auto transport = [&](int from, int to, std::int64_t bytes) {
    PlanStage s;
    s.origin = from;
    s.targets.push_back(PlanTarget{to, bytes, 0, 0, MsgLeg::Request, MsgLeg::Response, {}, false});
    return s;
  };
  auto fan_stage = [&](std::int64_t req, std::int64_t resp, MsgLeg resp_leg) {
    PlanStage s;
    s.origin = co;
    s.origin_proc_ms = cfg_.cassandra_coord_proc_ms;
    s.wait = cl;
    for (int owner : owners_of_key(op.key)) {
      PlanTarget tg{owner, req, resp, cfg_.cassandra_replica_proc_ms, MsgLeg::Request, resp_leg,
                    {}, true};
      s.targets.push_back(std::move(tg));
    }
    return s;
  };

  switch (op.kind) {
    case OpKind::Read: {
      plan.stages.push_back(transport(client_, co, kEnvelopeBytes));
      plan.stages.push_back(fan_stage(kEnvelopeBytes, kEnvelopeBytes + kRecordBytes,
                                      MsgLeg::Response));
      plan.stages.push_back(transport(co, client_, kEnvelopeBytes + kRecordBytes));
      break;
    }
    case OpKind::Update:
    case OpKind::Insert: {
      plan.stages.push_back(transport(client_, co, kEnvelopeBytes + kRecordBytes));
      PlanStage s = fan_stage(kEnvelopeBytes + kRecordBytes, kAckBytes, MsgLeg::Ack);
      plan.stages.push_back(std::move(s));
      plan.stages.push_back(transport(co, client_, kAckBytes));
      break;
    }
    case OpKind::Scan: {
      plan.stages.push_back(transport(client_, co, kEnvelopeBytes));
      // Range scans touch the primary owner of every key in range; the
      // coordinator waits for every shard share.
      std::map<int, std::int64_t> shares;
      const std::uint64_t end =
          std::min<std::uint64_t>(op.key + static_cast<std::uint64_t>(op.scan_len),
                                  static_cast<std::uint64_t>(record_count_));
      for (std::uint64_t k = op.key; k < end; ++k)
        shares[owners_among(members_, k, 1)[0]] += kRecordBytes;
      PlanStage s;
      s.origin = co;
      s.origin_proc_ms = cfg_.cassandra_coord_proc_ms;
      s.wait = -1;
      for (const auto& [owner, bytes] : shares)
        s.targets.push_back(PlanTarget{owner, kEnvelopeBytes, kEnvelopeBytes + bytes,
                                       cfg_.cassandra_replica_proc_ms, MsgLeg::Request,
                                       MsgLeg::Response, {}, false});
      plan.stages.push_back(std::move(s));
      plan.stages.push_back(
          transport(co, client_, kEnvelopeBytes + op.scan_len * kRecordBytes));
      break;
    }
    case OpKind::Rmw: {
      plan.stages.push_back(transport(client_, co, kEnvelopeBytes));
      plan.stages.push_back(fan_stage(kEnvelopeBytes, kEnvelopeBytes + kRecordBytes,
                                      MsgLeg::Response));
      plan.stages.push_back(transport(co, client_, kEnvelopeBytes + kRecordBytes));
      plan.stages.push_back(transport(client_, co, kEnvelopeBytes + kRecordBytes));
      plan.stages.push_back(fan_stage(kEnvelopeBytes + kRecordBytes, kAckBytes, MsgLeg::Ack));
      plan.stages.push_back(transport(co, client_, kAckBytes));
      break;
    }
    default:
      return not_viable("unsupported op kind");
  }
  plan.planned_ms = estimate_plan_ms(world_, plan);
  return plan;
}

ChurnPlan CassandraModel::plan_remove(int node) {
  if (std::find(members_.begin(), members_.end(), node) == members_.end())
    throw SimError("not a cluster member: " + world_.topo.node(node).id);
  if (node == seed_) throw SimError("seed node is not removable");
  if (is_protected(node)) throw SimError("node is protected: " + world_.topo.node(node).id);
  const auto remaining = static_cast<int>(members_.size()) - 1;
  if (remaining < 1) throw SimError("cannot remove the last member");
  if (remaining < cfg_.replication_factor && !cfg_.cassandra_allow_rf_underflow)
    throw SimError("remaining members would drop below the replication factor");

  std::vector<int> after;
  for (int m : members_)
    if (m != node) after.push_back(m);

  ChurnPlan plan;
  plan.kind = "remove";
  plan.node = node;
  plan.admin_origin = client_;
  plan.batch_bytes = static_cast<std::int64_t>(cfg_.stream_batch_kb) * 1000;
  plan.membership.emplace_back(node, kEnvelopeBytes);

  // The drained node streams every record it holds to whichever member takes
  // over that replica.
  std::map<int, std::int64_t> flows;
  const int rf_old = rf_effective(members_.size());
  const int rf_new = rf_effective(after.size());
  for (std::int64_t k = 0; k < record_count_; ++k) {
    auto key = static_cast<std::uint64_t>(k);
    auto old_owners = owners_among(members_, key, rf_old);
    if (std::find(old_owners.begin(), old_owners.end(), node) == old_owners.end()) continue;
    for (int gained : owners_among(after, key, rf_new))
      if (std::find(old_owners.begin(), old_owners.end(), gained) == old_owners.end())
        flows[gained] += kRecordBytes;
  }
  for (const auto& [dst, bytes] : flows)
    plan.parallel_flows.push_back(ChurnFlow{node, dst, bytes});
  return plan;
}

ChurnPlan CassandraModel::plan_add(int node) {
  if (std::find(members_.begin(), members_.end(), node) != members_.end())
    throw SimError("already a cluster member: " + world_.topo.node(node).id);
  if (ring_pos_[static_cast<std::size_t>(node)] < 0)
    throw SimError("not a data node: " + world_.topo.node(node).id);

  std::vector<int> after = members_;
  after.push_back(node);
  std::sort(after.begin(), after.end(), [&](int a, int b) {
    return ring_pos_[static_cast<std::size_t>(a)] < ring_pos_[static_cast<std::size_t>(b)];
  });

  ChurnPlan plan;
  plan.kind = "add";
  plan.node = node;
  plan.admin_origin = client_;
  plan.batch_bytes = static_cast<std::int64_t>(cfg_.stream_batch_kb) * 1000;
  plan.membership.emplace_back(node, kEnvelopeBytes);

  std::map<int, std::int64_t> flows;  // source -> bytes toward the newcomer
  const int rf_old = rf_effective(members_.size());
  const int rf_new = rf_effective(after.size());
  for (std::int64_t k = 0; k < record_count_; ++k) {
    auto key = static_cast<std::uint64_t>(k);
    auto new_owners = owners_among(after, key, rf_new);
    if (std::find(new_owners.begin(), new_owners.end(), node) == new_owners.end()) continue;
    flows[owners_among(members_, key, rf_old)[0]] += kRecordBytes;
  }
  for (const auto& [src, bytes] : flows)
    plan.parallel_flows.push_back(ChurnFlow{src, node, bytes});
  return plan;
}

void CassandraModel::churn_started(const ChurnPlan& plan) {
  if (plan.kind == "remove")
    members_.erase(std::remove(members_.begin(), members_.end(), plan.node), members_.end());
}

void CassandraModel::churn_completed(const ChurnPlan& plan) {
  if (plan.kind == "add") {
    members_.push_back(plan.node);
    std::sort(members_.begin(), members_.end(), [&](int a, int b) {
      return ring_pos_[static_cast<std::size_t>(a)] < ring_pos_[static_cast<std::size_t>(b)];
    });
  }
}

// ------------------------------------------------------------------ mongodb

MongoModel::MongoModel(SimWorld& world, EngineConfig cfg) : DbModel(world, std::move(cfg)) {
  members_ = initial_members_;
  for (int m : members_) {
    if (world_.topo.node(m).has_role(kRolePrimary)) primary_ = m;
    if (world_.topo.node(m).has_role(kRoleNonVoting)) non_voting_.insert(m);
  }
  if (primary_ < 0) primary_ = members_.front();
}

std::vector<int> MongoModel::secondaries() const {
  std::vector<int> out;
  for (int m : members_)
    if (m != primary_) out.push_back(m);
  return out;
}

int MongoModel::read_target(SimTime t) const {
  (void)t;
  if (cfg_.read_preference == "primary") return primary_;
  int best = -1;
  double best_ms = 0;
  for (int m : members_) {
    if (m == primary_) continue;
    double ms = route_ms(client_, m);
    if (best < 0 || ms < best_ms || (ms == best_ms && m < best)) {
      best = m;
      best_ms = ms;
    }
  }
  return best < 0 ? primary_ : best;
}

OpPlan MongoModel::plan_operation(const OpRequest& op, SimTime t) {
  if (members_.empty()) return not_viable("no cluster members");
  OpPlan plan;

  auto read_stage = [&](std::int64_t req, std::int64_t resp) {
    PlanStage s;
    s.origin = client_;
    s.wait = 1;
    s.targets.push_back(PlanTarget{read_target(t), req, resp, cfg_.mongo_proc_ms,
                                   MsgLeg::Request, MsgLeg::Response, {}, false});
    return s;
  };
  auto write_stage = [&] {
    PlanStage s;
    s.origin = client_;
    s.wait = 1;
    s.targets.push_back(PlanTarget{primary_, kEnvelopeBytes + kRecordBytes, kAckBytes,
                                   cfg_.mongo_proc_ms, MsgLeg::Request, MsgLeg::Ack, {}, false});
    return s;
  };
  auto oplog_stage = [&] {
    PlanStage s;
    s.origin = primary_;
    s.async = true;
    for (int sec : secondaries())
      s.targets.push_back(PlanTarget{sec, kEnvelopeBytes + kRecordBytes, kAckBytes,
                                     cfg_.mongo_proc_ms, MsgLeg::Replicate, MsgLeg::Replicate,
                                     {}, true});
    return s;
  };

  switch (op.kind) {
    case OpKind::Read:
      plan.stages.push_back(read_stage(kEnvelopeBytes, kEnvelopeBytes + kRecordBytes));
      break;
    case OpKind::Update:
    case OpKind::Insert:
      plan.stages.push_back(write_stage());
      plan.stages.push_back(oplog_stage());
      break;
    case OpKind::Scan:
      plan.stages.push_back(
          read_stage(kEnvelopeBytes, kEnvelopeBytes + op.scan_len * kRecordBytes));
      break;
    case OpKind::Rmw:
      plan.stages.push_back(read_stage(kEnvelopeBytes, kEnvelopeBytes + kRecordBytes));
      plan.stages.push_back(write_stage());
      plan.stages.push_back(oplog_stage());
      break;
    default:
      return not_viable("unsupported op kind");
  }
  plan.planned_ms = estimate_plan_ms(world_, plan);
  return plan;
}

ChurnPlan MongoModel::plan_remove(int node) {
  if (std::find(members_.begin(), members_.end(), node) == members_.end())
    throw SimError("not a replica set member: " + world_.topo.node(node).id);
  if (node == primary_) throw SimError("primary is not removable");
  if (non_voting_.count(node)) throw SimError("non-voting member is not removable");
  if (is_protected(node)) throw SimError("node is protected: " + world_.topo.node(node).id);

  // Membership change only: one round trip to the primary, zero bulk bytes.
  ChurnPlan plan;
  plan.kind = "remove";
  plan.node = node;
  plan.admin_origin = client_;
  plan.membership.emplace_back(primary_, kEnvelopeBytes);
  return plan;
}

ChurnPlan MongoModel::plan_add(int node) {
  if (std::find(members_.begin(), members_.end(), node) != members_.end())
    throw SimError("already a replica set member: " + world_.topo.node(node).id);
  ChurnPlan plan;
  plan.kind = "add";
  plan.node = node;
  plan.admin_origin = client_;
  plan.batch_bytes = static_cast<std::int64_t>(cfg_.stream_batch_kb) * 1000;
  plan.membership.emplace_back(primary_, kEnvelopeBytes);
  // Initial sync: the full dataset flows to the new secondary.
  plan.parallel_flows.push_back(ChurnFlow{primary_, node, record_count_ * kRecordBytes});
  return plan;
}

void MongoModel::churn_started(const ChurnPlan& plan) {
  if (plan.kind == "remove")
    members_.erase(std::remove(members_.begin(), members_.end(), plan.node), members_.end());
}

void MongoModel::churn_completed(const ChurnPlan& plan) {
  if (plan.kind == "add") {
    members_.push_back(plan.node);
    std::sort(members_.begin(), members_.end());
  }
}

// -------------------------------------------------------------------- redis

RedisModel::RedisModel(SimWorld& world, EngineConfig cfg) : DbModel(world, std::move(cfg)) {
  members_ = initial_members_;
  allocate_bootstrap();
}

int RedisModel::slot_of_key(std::uint64_t key) {
  return crc16_ccitt(key_name(key)) % kSlotCount;
}

void RedisModel::allocate_bootstrap() {
  const auto n = static_cast<int>(members_.size());
  if (n == 3) {
    // The canonical three-master bootstrap: 0-5500, 5501-11000, 11001-16383.
    for (int s = 0; s < kSlotCount; ++s)
      slot_owner_[static_cast<std::size_t>(s)] =
          members_[static_cast<std::size_t>(s <= 5500 ? 0 : (s <= 11000 ? 1 : 2))];
    return;
  }
  const int base = kSlotCount / n;
  const int extra = kSlotCount % n;
  int slot = 0;
  for (int i = 0; i < n; ++i) {
    int count = base + (i < extra ? 1 : 0);
    for (int c = 0; c < count; ++c)
      slot_owner_[static_cast<std::size_t>(slot++)] = members_[static_cast<std::size_t>(i)];
  }
}

void RedisModel::load(std::int64_t record_count) {
  DbModel::load(record_count);
  slot_records_.fill(0);
  for (std::int64_t k = 0; k < record_count; ++k)
    ++slot_records_[static_cast<std::size_t>(slot_of_key(static_cast<std::uint64_t>(k)))];
}

std::vector<int> RedisModel::owners_of_key(std::uint64_t key) const {
  return {slot_owner_[static_cast<std::size_t>(slot_of_key(key))]};
}

void RedisModel::note_insert(std::uint64_t key) {
  DbModel::note_insert(key);
  ++slot_records_[static_cast<std::size_t>(slot_of_key(key))];
}

std::vector<std::pair<int, int>> RedisModel::slot_ranges() const {
  std::vector<std::pair<int, int>> runs;
  for (int s = 0; s < kSlotCount; ++s) {
    int owner = slot_owner_[static_cast<std::size_t>(s)];
    if (runs.empty() || runs.back().first != owner) runs.emplace_back(owner, 0);
    ++runs.back().second;
  }
  return runs;
}

int RedisModel::slots_of(int node) const {
  int count = 0;
  for (int s = 0; s < kSlotCount; ++s)
    if (slot_owner_[static_cast<std::size_t>(s)] == node) ++count;
  return count;
}

OpPlan RedisModel::plan_operation(const OpRequest& op, SimTime t) {
  (void)t;
  if (members_.empty()) return not_viable("no cluster members");
  OpPlan plan;
  const int owner = slot_owner_[static_cast<std::size_t>(slot_of_key(op.key))];

  auto single = [&](std::int64_t req, std::int64_t resp, MsgLeg resp_leg) {
    PlanStage s;
    s.origin = client_;
    s.wait = 1;
    s.targets.push_back(PlanTarget{owner, req, resp, cfg_.redis_proc_ms, MsgLeg::Request,
                                   resp_leg, {}, false});
    return s;
  };

  switch (op.kind) {
    case OpKind::Read:
      plan.stages.push_back(single(kEnvelopeBytes, kEnvelopeBytes + kRecordBytes,
                                   MsgLeg::Response));
      break;
    case OpKind::Update:
    case OpKind::Insert:
      plan.stages.push_back(single(kEnvelopeBytes + kRecordBytes, kAckBytes, MsgLeg::Ack));
      break;
    case OpKind::Scan: {
      // Hash sharding scatters a key range; the client fans out and waits for
      // every owner's share.
      std::map<int, std::int64_t> shares;
      const std::uint64_t end =
          std::min<std::uint64_t>(op.key + static_cast<std::uint64_t>(op.scan_len),
                                  static_cast<std::uint64_t>(record_count_));
      for (std::uint64_t k = op.key; k < end; ++k)
        shares[slot_owner_[static_cast<std::size_t>(slot_of_key(k))]] += kRecordBytes;
      PlanStage s;
      s.origin = client_;
      s.wait = -1;
      for (const auto& [node, bytes] : shares)
        s.targets.push_back(PlanTarget{node, kEnvelopeBytes, kEnvelopeBytes + bytes,
                                       cfg_.redis_proc_ms, MsgLeg::Request, MsgLeg::Response,
                                       {}, false});
      plan.stages.push_back(std::move(s));
      break;
    }
    case OpKind::Rmw:
      plan.stages.push_back(single(kEnvelopeBytes, kEnvelopeBytes + kRecordBytes,
                                   MsgLeg::Response));
      plan.stages.push_back(single(kEnvelopeBytes + kRecordBytes, kAckBytes, MsgLeg::Ack));
      break;
    default:
      return not_viable("unsupported op kind");
  }
  plan.planned_ms = estimate_plan_ms(world_, plan);
  return plan;
}

void RedisModel::rebalance(std::vector<int>& owner, const std::vector<int>& members,
                           const std::vector<std::int64_t>& slot_records,
                           std::vector<ChurnFlow>* pieces) {
  const auto m = static_cast<int>(members.size());
  std::map<int, int> count;
  for (int node : members) count[node] = 0;
  for (int s = 0; s < kSlotCount; ++s) ++count[owner[static_cast<std::size_t>(s)]];

  std::map<int, int> target;
  const int base = kSlotCount / m;
  int extra = kSlotCount % m;
  for (int node : members) {
    target[node] = base + (extra > 0 ? 1 : 0);
    if (extra > 0) --extra;
  }

  // One pass: collect surplus slots in slot order, hand them to members still
  // under target in member order.
  std::vector<int> movable;
  std::map<int, int> surplus;
  for (int node : members) surplus[node] = count[node] - target[node];
  for (int s = 0; s < kSlotCount; ++s) {
    int node = owner[static_cast<std::size_t>(s)];
    if (surplus[node] > 0) {
      movable.push_back(s);
      --surplus[node];
    }
  }
  std::size_t next = 0;
  for (int node : members) {
    int deficit = target[node] - count[node];
    while (deficit > 0 && next < movable.size()) {
      int s = movable[next++];
      if (pieces)
        pieces->push_back(ChurnFlow{owner[static_cast<std::size_t>(s)], node,
                                    kEnvelopeBytes +
                                        slot_records[static_cast<std::size_t>(s)] * kRecordBytes});
      owner[static_cast<std::size_t>(s)] = node;
      --deficit;
    }
  }
}

RedisModel::Moves RedisModel::compute_remove_moves(int node) const {
  Moves mv;
  mv.final_owner.assign(slot_owner_.begin(), slot_owner_.end());
  std::vector<int> remaining;
  for (int m : members_)
    if (m != node) remaining.push_back(m);

  // Reshard: everything on the leaving node goes to one arbitrary member,
  // then the rebalance pass equalizes counts.
  const int dump = remaining.front();
  for (int s = 0; s < kSlotCount; ++s) {
    if (mv.final_owner[static_cast<std::size_t>(s)] != node) continue;
    mv.pieces.push_back(ChurnFlow{node, dump,
                                  kEnvelopeBytes +
                                      slot_records_[static_cast<std::size_t>(s)] * kRecordBytes});
    mv.final_owner[static_cast<std::size_t>(s)] = dump;
  }
  std::vector<std::int64_t> records(slot_records_.begin(), slot_records_.end());
  rebalance(mv.final_owner, remaining, records, &mv.pieces);
  return mv;
}

RedisModel::Moves RedisModel::compute_add_moves(int node) const {
  Moves mv;
  mv.final_owner.assign(slot_owner_.begin(), slot_owner_.end());
  std::vector<int> after = members_;
  after.push_back(node);
  std::sort(after.begin(), after.end());
  std::vector<std::int64_t> records(slot_records_.begin(), slot_records_.end());
  rebalance(mv.final_owner, after, records, &mv.pieces);
  return mv;
}

ChurnPlan RedisModel::plan_remove(int node) {
  if (std::find(members_.begin(), members_.end(), node) == members_.end())
    throw SimError("not a cluster member: " + world_.topo.node(node).id);
  if (members_.size() < 3) throw SimError("a redis cluster keeps at least two masters");
  if (is_protected(node)) throw SimError("node is protected: " + world_.topo.node(node).id);

  ChurnPlan plan;
  plan.kind = "remove";
  plan.node = node;
  plan.admin_origin = client_;
  plan.membership.emplace_back(node, kEnvelopeBytes);
  plan.sequential_pieces = compute_remove_moves(node).pieces;
  return plan;
}

ChurnPlan RedisModel::plan_add(int node) {
  if (std::find(members_.begin(), members_.end(), node) != members_.end())
    throw SimError("already a cluster member: " + world_.topo.node(node).id);
  ChurnPlan plan;
  plan.kind = "add";
  plan.node = node;
  plan.admin_origin = client_;
  plan.membership.emplace_back(node, kEnvelopeBytes);
  plan.sequential_pieces = compute_add_moves(node).pieces;
  return plan;
}

std::vector<int> RedisModel::moves_applied(const ChurnPlan& plan) const {
  return plan.kind == "remove" ? compute_remove_moves(plan.node).final_owner
                               : compute_add_moves(plan.node).final_owner;
}

void RedisModel::churn_started(const ChurnPlan&) {}

void RedisModel::churn_completed(const ChurnPlan& plan) {
  auto final_owner = moves_applied(plan);
  std::copy(final_owner.begin(), final_owner.end(), slot_owner_.begin());
  if (plan.kind == "remove") {
    members_.erase(std::remove(members_.begin(), members_.end(), plan.node), members_.end());
  } else {
    members_.push_back(plan.node);
    std::sort(members_.begin(), members_.end());
  }
}

// -------------------------------------------------------------------- mysql

MySqlModel::MySqlModel(SimWorld& world, EngineConfig cfg) : DbModel(world, std::move(cfg)) {
  const auto n = static_cast<int>(initial_members_.size());
  if (cfg_.replicas_per_shard <= 0) throw SimError("replicas_per_shard must be positive");
  if (n % cfg_.replicas_per_shard != 0)
    throw SimError("data node count must divide evenly into node groups");
  for (int i = 0; i < n; i += cfg_.replicas_per_shard) {
    std::vector<int> group;
    for (int j = 0; j < cfg_.replicas_per_shard; ++j)
      group.push_back(initial_members_[static_cast<std::size_t>(i + j)]);
    groups_.push_back(std::move(group));
  }
  for (int i = 0; i < world_.topo.node_count(); ++i) {
    if (world_.topo.node(i).has_role(kRoleSql)) sql_ = i;
    if (world_.topo.node(i).has_role(kRoleMgmt)) mgmt_ = i;
  }
  if (sql_ < 0) sql_ = initial_members_.front();
  if (mgmt_ < 0) mgmt_ = initial_members_.front();
}

std::vector<int> MySqlModel::members() const {
  std::vector<int> out;
  for (const auto& g : groups_)
    for (int m : g) out.push_back(m);
  return out;
}

int MySqlModel::group_of_key(std::uint64_t key) const {
  return static_cast<int>((splitmix64(key) >> 8) % groups_.size());
}

std::vector<int> MySqlModel::owners_of_key(std::uint64_t key) const {
  return groups_[static_cast<std::size_t>(group_of_key(key))];
}

int MySqlModel::best_member(const std::vector<int>& group, std::vector<int>* alternates) const {
  int best = group.front();
  double best_ms = route_ms(sql_, best);
  for (int m : group) {
    double ms = route_ms(sql_, m);
    if (ms < best_ms || (ms == best_ms && m < best)) {
      best = m;
      best_ms = ms;
    }
  }
  if (alternates) {
    alternates->clear();
    for (int m : group)
      if (m != best) alternates->push_back(m);
  }
  return best;
}

OpPlan MySqlModel::plan_operation(const OpRequest& op, SimTime t) {
  (void)t;
  OpPlan plan;

  auto to_sql = [&](std::int64_t bytes) {
    PlanStage s;
    s.origin = client_;
    s.targets.push_back(
        PlanTarget{sql_, bytes, 0, 0, MsgLeg::Request, MsgLeg::Response, {}, false});
    return s;
  };
  auto from_sql = [&](std::int64_t bytes) {
    PlanStage s;
    s.origin = sql_;
    s.targets.push_back(
        PlanTarget{client_, bytes, 0, 0, MsgLeg::Response, MsgLeg::Response, {}, false});
    return s;
  };
  auto read_fan = [&](std::uint64_t key) {
    PlanStage s;
    s.origin = sql_;
    s.origin_proc_ms = cfg_.mysql_sql_proc_ms;
    s.wait = 1;
    std::vector<int> alternates;
    int best = best_member(groups_[static_cast<std::size_t>(group_of_key(key))], &alternates);
    s.targets.push_back(PlanTarget{best, kEnvelopeBytes, kEnvelopeBytes + kRecordBytes,
                                   cfg_.mysql_replica_proc_ms, MsgLeg::Request,
                                   MsgLeg::Response, alternates, false});
    return s;
  };
  auto write_fan = [&](std::uint64_t key) {
    // Synchronous write to every replica of the owning group; unreachable
    // replicas are skipped the way the cluster evicts a dead data node.
    PlanStage s;
    s.origin = sql_;
    s.origin_proc_ms = cfg_.mysql_sql_proc_ms;
    s.wait = -1;
    for (int m : groups_[static_cast<std::size_t>(group_of_key(key))])
      s.targets.push_back(PlanTarget{m, kEnvelopeBytes + kRecordBytes, kAckBytes,
                                     cfg_.mysql_replica_proc_ms, MsgLeg::Request, MsgLeg::Ack,
                                     {}, true});
    return s;
  };

  switch (op.kind) {
    case OpKind::Read:
      plan.stages.push_back(to_sql(kEnvelopeBytes));
      plan.stages.push_back(read_fan(op.key));
      plan.stages.push_back(from_sql(kEnvelopeBytes + kRecordBytes));
      break;
    case OpKind::Update:
    case OpKind::Insert:
      plan.stages.push_back(to_sql(kEnvelopeBytes + kRecordBytes));
      plan.stages.push_back(write_fan(op.key));
      plan.stages.push_back(from_sql(kAckBytes));
      break;
    case OpKind::Scan: {
      plan.stages.push_back(to_sql(kEnvelopeBytes));
      std::map<int, std::int64_t> group_share;
      const std::uint64_t end =
          std::min<std::uint64_t>(op.key + static_cast<std::uint64_t>(op.scan_len),
                                  static_cast<std::uint64_t>(record_count_));
      for (std::uint64_t k = op.key; k < end; ++k) group_share[group_of_key(k)] += kRecordBytes;
      PlanStage s;
      s.origin = sql_;
      s.origin_proc_ms = cfg_.mysql_sql_proc_ms;
      s.wait = -1;
      for (const auto& [g, bytes] : group_share) {
        std::vector<int> alternates;
        int best = best_member(groups_[static_cast<std::size_t>(g)], &alternates);
        s.targets.push_back(PlanTarget{best, kEnvelopeBytes, kEnvelopeBytes + bytes,
                                       cfg_.mysql_replica_proc_ms, MsgLeg::Request,
                                       MsgLeg::Response, alternates, false});
      }
      plan.stages.push_back(std::move(s));
      plan.stages.push_back(from_sql(kEnvelopeBytes + op.scan_len * kRecordBytes));
      break;
    }
    case OpKind::Rmw:
      plan.stages.push_back(to_sql(kEnvelopeBytes));
      plan.stages.push_back(read_fan(op.key));
      plan.stages.push_back(from_sql(kEnvelopeBytes + kRecordBytes));
      plan.stages.push_back(to_sql(kEnvelopeBytes + kRecordBytes));
      plan.stages.push_back(write_fan(op.key));
      plan.stages.push_back(from_sql(kAckBytes));
      break;
    default:
      return not_viable("unsupported op kind");
  }
  plan.planned_ms = estimate_plan_ms(world_, plan);
  return plan;
}

ChurnPlan MySqlModel::plan_remove(int) {
  throw SimError("mysql node-group resizing is unsupported");
}

ChurnPlan MySqlModel::plan_add(int) {
  throw SimError("mysql node-group resizing is unsupported");
}

void MySqlModel::churn_started(const ChurnPlan&) {}
void MySqlModel::churn_completed(const ChurnPlan&) {}

}  // namespace fragsim
