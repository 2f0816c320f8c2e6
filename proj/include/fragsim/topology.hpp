#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fragsim/core.hpp"

namespace fragsim {

// Node role flags. A node may carry several (e.g. data + seed).
enum NodeRole : unsigned {
  kRoleClient = 1u << 0,
  kRoleData = 1u << 1,
  kRoleSeed = 1u << 2,
  kRolePrimary = 1u << 3,
  kRoleNonVoting = 1u << 4,
  kRoleSql = 1u << 5,
  kRoleMgmt = 1u << 6,
};

struct NodeSpec {
  std::string id;
  std::string region;
  unsigned roles = kRoleData;
  bool has_role(unsigned r) const { return (roles & r) != 0; }
};

struct LinkSpec {
  std::string id;
  int a = -1;
  int b = -1;
  int conn_type = 0;  // distinguishes redundant links between the same pair
  double base_latency_ms = 1.0;
  double down_bw_mbps = 100.0;  // a -> b
  double up_bw_mbps = 100.0;    // b -> a
  bool up = true;
};

struct QosEpoch {
  SimTime start_us = 0;
  double lat_mult = 1.0;
  double bw_mult = 1.0;
};

struct QosSchedule {
  std::vector<QosEpoch> epochs{QosEpoch{}};
  // Optional inverse coupling: bandwidth scales as bw/lat_mult, capped at the
  // link's base capacity.
  bool inverse_bw = false;

  void validate() const;
  const QosEpoch& epoch_at(SimTime t) const;
  // Multiply every epoch's latency multiplier (used by LSF sweeps).
  QosSchedule scaled(double lat_factor) const;
};

struct QosValue {
  SimTime latency_us = 0;
  double bw_mbps = 0.0;
};

// The measured 8-datacenter latency / download-bandwidth table.
struct ReferenceMatrix {
  std::vector<std::string> regions;
  std::vector<std::vector<double>> latency_ms;
  std::vector<std::vector<double>> down_bw_mbps;

  int index_of(const std::string& region) const;
  double latency(const std::string& ra, const std::string& rb) const;
  double down_bw(const std::string& ra, const std::string& rb) const;
};

const ReferenceMatrix& builtin_reference_matrix();

class ClusterTopology {
 public:
  int add_node(NodeSpec n);
  int add_link(const std::string& id, int a, int b, double latency_ms, double down_mbps,
               double up_mbps);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int link_count() const { return static_cast<int>(links_.size()); }
  const NodeSpec& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const LinkSpec& link(int i) const { return links_[static_cast<std::size_t>(i)]; }
  int find_node(const std::string& id) const;
  int find_link(const std::string& id) const;
  const std::vector<int>& links_of(int node) const {
    return adjacency_[static_cast<std::size_t>(node)];
  }

  void set_schedule(int link, QosSchedule s);
  const QosSchedule& schedule(int link) const { return schedules_[static_cast<std::size_t>(link)]; }
  void scale_all_schedules(double lat_factor);

  // Returns true when the state actually changed (idempotent otherwise).
  bool set_link_state(int link, bool up);
  bool set_link_state(const std::string& id, bool up);

  // Effective latency/bandwidth for the epoch containing t. Throws on a down
  // link.
  QosValue effective_qos(int link, SimTime t) const;

  bool connected(bool up_only = true) const;
  bool connected_without(int excluded_link) const;

  int client_node() const;
  std::vector<int> data_nodes() const;

  // Link indices ranked by lexicographic id, used for route tie-breaking.
  const std::vector<int>& link_rank() const;

  std::string to_json_string(int indent = 2) const;
  static ClusterTopology from_json_string(const std::string& text);

 private:
  std::vector<NodeSpec> nodes_;
  std::vector<LinkSpec> links_;
  std::vector<QosSchedule> schedules_;
  std::vector<std::vector<int>> adjacency_;
  std::map<std::string, int> node_index_;
  std::map<std::pair<int, int>, int> pair_link_count_;
  std::map<std::string, int> link_index_;
  mutable std::vector<int> link_rank_;  // lazily built
};

struct MeshQosRange {
  double latency_lo_ms = 7.0;
  double latency_hi_ms = 223.0;
  double bw_lo_mbps = 97.0;
  double bw_hi_mbps = 995.0;
  double intra_region_latency_ms = 1.0;
  double intra_region_bw_mbps = 1000.0;
};

// Connected random multigraph with exactly link_count links. The first link
// between a pair takes reference-matrix values when both regions are known;
// redundant links sample uniformly from the range.
ClusterTopology build_mesh(const std::vector<NodeSpec>& nodes, int link_count,
                           std::uint64_t rng_seed, const MeshQosRange& range = {},
                           const ReferenceMatrix* ref = &builtin_reference_matrix());

// The built-in preset: 8 datacenter nodes fully meshed from the reference
// matrix plus a client node in Singapore linked to every datacenter.
ClusterTopology make_reference_topology(const MeshQosRange& range = {});

std::vector<NodeSpec> reference_node_specs(bool with_client = true);

}  // namespace fragsim
