#pragma once

#include <array>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "fragsim/sim.hpp"

namespace fragsim {

constexpr std::int64_t kRecordBytes = 1000;  // 10 fields x 100 B
constexpr std::int64_t kEnvelopeBytes = 128;
constexpr std::int64_t kAckBytes = 64;
constexpr int kSlotCount = 16384;

struct EngineConfig {
  std::string kind = "cassandra";  // cassandra | mongodb | redis | mysql
  int replication_factor = 3;
  int consistency_level = 1;
  std::string read_preference = "primary";  // primary | nearest_secondary
  int replicas_per_shard = 2;
  std::vector<std::string> protected_nodes;
  std::vector<std::string> initial_members;  // empty = every data node
  bool gossip = true;
  int gossip_interval_ms = 1000;
  int gossip_bytes = 128;
  // Per-operation service overheads, the engines' fixed costs.
  double cassandra_coord_proc_ms = 30.0;
  double cassandra_replica_proc_ms = 0.5;
  double mongo_proc_ms = 1.0;
  double redis_proc_ms = 0.2;
  double mysql_sql_proc_ms = 2.0;
  double mysql_replica_proc_ms = 0.5;
  bool cassandra_allow_rf_underflow = false;  // drain below RF, resize runs need it
  int stream_batch_kb = 64;
};

struct OpRequest {
  OpKind kind = OpKind::Read;
  std::uint64_t key = 0;
  int scan_len = 0;
};

// One fan-out of an operation flow: origin sends a request to each target;
// targets respond after their service delay.
struct PlanTarget {
  int node = -1;
  std::int64_t req_bytes = 0;
  std::int64_t resp_bytes = 0;  // 0: transport leg, delivery itself completes it
  double proc_ms = 0;
  MsgLeg req_leg = MsgLeg::Request;
  MsgLeg resp_leg = MsgLeg::Response;
  std::vector<int> alternates;  // tried in order when the send fails
  bool optional = false;        // failure excludes the target instead of failing the stage
};

struct PlanStage {
  int origin = -1;
  double origin_proc_ms = 0;
  std::vector<PlanTarget> targets;
  int wait = -1;       // responses required; -1 = every non-failed target
  bool async = false;  // fire and forget, does not gate op completion
};

struct OpPlan {
  std::vector<PlanStage> stages;
  double planned_ms = 0;  // estimate for timeout sizing
  bool viable = true;
  std::string error;  // set when !viable
};

struct ChurnFlow {
  int src = -1;
  int dst = -1;
  std::int64_t bytes = 0;
};

struct ChurnPlan {
  std::string kind;  // "remove" | "add"
  int node = -1;
  int admin_origin = -1;  // client node issuing the command
  std::vector<std::pair<int, std::int64_t>> membership;  // (target, request bytes)
  std::vector<ChurnFlow> parallel_flows;     // batched streams, flows run concurrently
  std::vector<ChurnFlow> sequential_pieces;  // strictly one piece per round trip
  std::int64_t batch_bytes = 64'000;

  std::int64_t total_bulk_bytes() const {
    std::int64_t total = 0;
    for (const auto& f : parallel_flows) total += f.bytes;
    for (const auto& f : sequential_pieces) total += f.bytes;
    return total;
  }
};

class DbModel {
 public:
  DbModel(SimWorld& world, EngineConfig cfg);
  virtual ~DbModel() = default;

  virtual std::string engine() const = 0;

  // Assigns the dataset to its owners; throws when the cluster is too small.
  virtual void load(std::int64_t record_count);

  virtual OpPlan plan_operation(const OpRequest& op, SimTime t) = 0;

  virtual ChurnPlan plan_remove(int node) = 0;
  virtual ChurnPlan plan_add(int node) = 0;
  virtual void churn_started(const ChurnPlan& plan) = 0;
  virtual void churn_completed(const ChurnPlan& plan) = 0;

  virtual std::vector<int> members() const = 0;
  virtual std::vector<int> owners_of_key(std::uint64_t key) const = 0;

  // Called once per insert before the operation is planned.
  virtual void note_insert(std::uint64_t key);

  std::int64_t record_count() const { return record_count_; }
  int client() const { return client_; }

  static std::string key_name(std::uint64_t key);

 protected:
  int resolve_member(const std::string& id) const;
  bool is_protected(int node) const;
  double route_ms(int a, int b) const;

  SimWorld& world_;
  EngineConfig cfg_;
  int client_ = -1;
  std::int64_t record_count_ = 0;
  std::vector<int> initial_members_;
};

std::unique_ptr<DbModel> make_db_model(SimWorld& world, const EngineConfig& cfg);

class CassandraModel : public DbModel {
 public:
  CassandraModel(SimWorld& world, EngineConfig cfg);
  std::string engine() const override { return "cassandra"; }
  void load(std::int64_t record_count) override;
  OpPlan plan_operation(const OpRequest& op, SimTime t) override;
  ChurnPlan plan_remove(int node) override;
  ChurnPlan plan_add(int node) override;
  void churn_started(const ChurnPlan& plan) override;
  void churn_completed(const ChurnPlan& plan) override;
  std::vector<int> members() const override { return members_; }
  std::vector<int> owners_of_key(std::uint64_t key) const override;

  int seed_node() const { return seed_; }

 private:
  int rf_effective(std::size_t member_count) const;
  std::vector<int> owners_among(const std::vector<int>& members, std::uint64_t key,
                                int rf) const;
  int next_coordinator();

  std::vector<int> members_;  // sorted by ring position
  std::vector<int> ring_pos_; // ring position per topology node index
  int seed_ = -1;
  std::size_t rr_ = 0;
};

class MongoModel : public DbModel {
 public:
  MongoModel(SimWorld& world, EngineConfig cfg);
  std::string engine() const override { return "mongodb"; }
  OpPlan plan_operation(const OpRequest& op, SimTime t) override;
  ChurnPlan plan_remove(int node) override;
  ChurnPlan plan_add(int node) override;
  void churn_started(const ChurnPlan& plan) override;
  void churn_completed(const ChurnPlan& plan) override;
  std::vector<int> members() const override { return members_; }
  std::vector<int> owners_of_key(std::uint64_t key) const override { return members_; }

  int primary() const { return primary_; }
  int read_target(SimTime t) const;
  std::vector<int> secondaries() const;

 private:
  std::vector<int> members_;
  int primary_ = -1;
  std::set<int> non_voting_;
};

class RedisModel : public DbModel {
 public:
  RedisModel(SimWorld& world, EngineConfig cfg);
  std::string engine() const override { return "redis"; }
  void load(std::int64_t record_count) override;
  OpPlan plan_operation(const OpRequest& op, SimTime t) override;
  ChurnPlan plan_remove(int node) override;
  ChurnPlan plan_add(int node) override;
  void churn_started(const ChurnPlan& plan) override;
  void churn_completed(const ChurnPlan& plan) override;
  std::vector<int> members() const override { return members_; }
  std::vector<int> owners_of_key(std::uint64_t key) const override;

  void note_insert(std::uint64_t key) override;

  static int slot_of_key(std::uint64_t key);
  int slot_owner(int slot) const { return slot_owner_[static_cast<std::size_t>(slot)]; }
  std::vector<std::pair<int, int>> slot_ranges() const;  // contiguous (owner, count) runs
  int slots_of(int node) const;
  std::int64_t records_in_slot(int slot) const {
    return slot_records_[static_cast<std::size_t>(slot)];
  }

  // Ownership after executing the plan; exposed so tests can check balance.
  std::vector<int> moves_applied(const ChurnPlan& plan) const;

 private:
  struct Moves {
    std::vector<ChurnFlow> pieces;
    std::vector<int> final_owner;
  };
  Moves compute_remove_moves(int node) const;
  Moves compute_add_moves(int node) const;
  void allocate_bootstrap();
  static void rebalance(std::vector<int>& owner, const std::vector<int>& members,
                        const std::vector<std::int64_t>& slot_records,
                        std::vector<ChurnFlow>* pieces);

  std::vector<int> members_;
  std::array<int, kSlotCount> slot_owner_{};
  std::array<std::int64_t, kSlotCount> slot_records_{};
};

class MySqlModel : public DbModel {
 public:
  MySqlModel(SimWorld& world, EngineConfig cfg);
  std::string engine() const override { return "mysql"; }
  OpPlan plan_operation(const OpRequest& op, SimTime t) override;
  ChurnPlan plan_remove(int node) override;
  ChurnPlan plan_add(int node) override;
  void churn_started(const ChurnPlan& plan) override;
  void churn_completed(const ChurnPlan& plan) override;
  std::vector<int> members() const override;
  std::vector<int> owners_of_key(std::uint64_t key) const override;

  int group_count() const { return static_cast<int>(groups_.size()); }
  const std::vector<int>& group(int g) const { return groups_[static_cast<std::size_t>(g)]; }
  int group_of_key(std::uint64_t key) const;
  int sql_node() const { return sql_; }

 private:
  int best_member(const std::vector<int>& group, std::vector<int>* alternates) const;

  std::vector<std::vector<int>> groups_;
  int sql_ = -1;
  int mgmt_ = -1;
};

}  // namespace fragsim
