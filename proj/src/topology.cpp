#include "fragsim/topology.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "json.hpp"

namespace fragsim {

void QosSchedule::validate() const {
  if (epochs.empty()) throw SimError("qos schedule has no epochs");
  if (epochs.front().start_us != 0) throw SimError("first qos epoch must start at 0");
  SimTime prev = -1;
  for (const auto& e : epochs) {
    if (e.start_us <= prev) throw SimError("qos epochs must be strictly increasing");
    if (e.lat_mult <= 0 || e.bw_mult <= 0) throw SimError("qos multipliers must be > 0");
    prev = e.start_us;
  }
}

const QosEpoch& QosSchedule::epoch_at(SimTime t) const {
  // Epochs are sorted; find the last one with start <= t.
  std::size_t lo = 0;
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    if (epochs[i].start_us <= t) lo = i;
    else break;
  }
  return epochs[lo];
}

QosSchedule QosSchedule::scaled(double lat_factor) const {
  QosSchedule out = *this;
  for (auto& e : out.epochs) e.lat_mult *= lat_factor;
  return out;
}

namespace {

ReferenceMatrix make_builtin_matrix() {
  ReferenceMatrix m;
  m.regions = {"Melbourne", "Sydney", "Canberra", "Pune",
               "Singapore", "Seoul",  "Dubai",    "Virginia"};
  const int n = 8;
  m.latency_ms.assign(n, std::vector<double>(n, 0.0));
  m.down_bw_mbps.assign(n, std::vector<double>(n, 0.0));

  auto lat = [&](int i, int j, double v) {
    m.latency_ms[i][j] = v;
    m.latency_ms[j][i] = v;
  };
  auto bw = [&](int i, int j, double v) {
    m.down_bw_mbps[i][j] = v;
    m.down_bw_mbps[j][i] = v;
  };

  lat(1, 0, 189);
  lat(2, 0, 181); lat(2, 1, 142);
  lat(3, 0, 223); lat(3, 1, 81);  lat(3, 2, 64);
  lat(4, 0, 195); lat(4, 1, 35);  lat(4, 2, 109); lat(4, 3, 49);
  lat(5, 0, 207); lat(5, 1, 172); lat(5, 2, 156); lat(5, 3, 93);  lat(5, 4, 153);
  lat(6, 0, 208); lat(6, 1, 168); lat(6, 2, 152); lat(6, 3, 149); lat(6, 4, 147); lat(6, 5, 7);
  lat(7, 0, 219); lat(7, 1, 165); lat(7, 2, 148); lat(7, 3, 109); lat(7, 4, 142); lat(7, 5, 12);
  lat(7, 6, 14);

  bw(0, 1, 948); bw(0, 2, 990); bw(0, 3, 171); bw(0, 4, 192); bw(0, 5, 164); bw(0, 6, 151);
  bw(0, 7, 114);
  bw(1, 2, 995); bw(1, 3, 167); bw(1, 4, 206); bw(1, 5, 163); bw(1, 6, 140); bw(1, 7, 121);
  bw(2, 3, 173); bw(2, 4, 255); bw(2, 5, 157); bw(2, 6, 138); bw(2, 7, 117);
  bw(3, 4, 489); bw(3, 5, 220); bw(3, 6, 625); bw(3, 7, 119);
  bw(4, 5, 372); bw(4, 6, 271); bw(4, 7, 111);
  bw(5, 6, 174); bw(5, 7, 127);
  bw(6, 7, 128);
  return m;
}

}  // namespace

const ReferenceMatrix& builtin_reference_matrix() {
  static const ReferenceMatrix m = make_builtin_matrix();
  return m;
}

int ReferenceMatrix::index_of(const std::string& region) const {
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i] == region) return static_cast<int>(i);
  return -1;
}

double ReferenceMatrix::latency(const std::string& ra, const std::string& rb) const {
  int i = index_of(ra), j = index_of(rb);
  if (i < 0 || j < 0) throw SimError("unknown region in reference matrix lookup");
  return latency_ms[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
}

double ReferenceMatrix::down_bw(const std::string& ra, const std::string& rb) const {
  int i = index_of(ra), j = index_of(rb);
  if (i < 0 || j < 0) throw SimError("unknown region in reference matrix lookup");
  return down_bw_mbps[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
}

int ClusterTopology::add_node(NodeSpec n) {
  if (node_index_.count(n.id)) throw SimError("duplicate node id: " + n.id);
  int idx = node_count();
  node_index_[n.id] = idx;
  nodes_.push_back(std::move(n));
  adjacency_.emplace_back();
  return idx;
}

int ClusterTopology::add_link(const std::string& id, int a, int b, double latency_ms,
                              double down_mbps, double up_mbps) {
  if (a == b) throw SimError("link endpoints must differ: " + id);
  if (a < 0 || b < 0 || a >= node_count() || b >= node_count())
    throw SimError("link references unknown node: " + id);
  if (latency_ms <= 0 || down_mbps <= 0 || up_mbps <= 0)
    throw SimError("link latency and bandwidths must be > 0: " + id);
  if (link_index_.count(id)) throw SimError("duplicate link id: " + id);
  LinkSpec l;
  l.id = id;
  l.a = std::min(a, b);
  l.b = std::max(a, b);
  l.base_latency_ms = latency_ms;
  l.down_bw_mbps = down_mbps;
  l.up_bw_mbps = up_mbps;
  l.conn_type = pair_link_count_[{l.a, l.b}]++;
  int idx = link_count();
  link_index_[id] = idx;
  links_.push_back(l);
  schedules_.emplace_back();
  adjacency_[static_cast<std::size_t>(l.a)].push_back(idx);
  adjacency_[static_cast<std::size_t>(l.b)].push_back(idx);
  link_rank_.clear();
  return idx;
}

int ClusterTopology::find_node(const std::string& id) const {
  auto it = node_index_.find(id);
  return it == node_index_.end() ? -1 : it->second;
}

int ClusterTopology::find_link(const std::string& id) const {
  auto it = link_index_.find(id);
  return it == link_index_.end() ? -1 : it->second;
}

void ClusterTopology::set_schedule(int link, QosSchedule s) {
  s.validate();
  schedules_[static_cast<std::size_t>(link)] = std::move(s);
}

void ClusterTopology::scale_all_schedules(double lat_factor) {
  for (auto& s : schedules_) s = s.scaled(lat_factor);
}

bool ClusterTopology::set_link_state(int link, bool up) {
  if (link < 0 || link >= link_count()) throw SimError("unknown link index");
  LinkSpec& l = links_[static_cast<std::size_t>(link)];
  if (l.up == up) return false;
  l.up = up;
  return true;
}

bool ClusterTopology::set_link_state(const std::string& id, bool up) {
  int idx = find_link(id);
  if (idx < 0) throw SimError("unknown link id: " + id);
  return set_link_state(idx, up);
}

QosValue ClusterTopology::effective_qos(int link, SimTime t) const {
  const LinkSpec& l = links_[static_cast<std::size_t>(link)];
  if (!l.up) throw SimError("link unavailable: " + l.id);
  const QosEpoch& e = schedules_[static_cast<std::size_t>(link)].epoch_at(t);
  QosValue v;
  v.latency_us = ms_to_us(l.base_latency_ms * e.lat_mult);
  double bw = l.down_bw_mbps * e.bw_mult;
  if (schedules_[static_cast<std::size_t>(link)].inverse_bw)
    bw = std::min(bw / e.lat_mult, l.down_bw_mbps);
  v.bw_mbps = bw;
  return v;
}

bool ClusterTopology::connected(bool up_only) const {
  if (nodes_.empty()) return true;
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int li : adjacency_[static_cast<std::size_t>(u)]) {
      const LinkSpec& l = links_[static_cast<std::size_t>(li)];
      if (up_only && !l.up) continue;
      int v = (l.a == u) ? l.b : l.a;
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == node_count();
}

bool ClusterTopology::connected_without(int excluded_link) const {
  if (nodes_.empty()) return true;
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int li : adjacency_[static_cast<std::size_t>(u)]) {
      if (li == excluded_link) continue;
      const LinkSpec& l = links_[static_cast<std::size_t>(li)];
      if (!l.up) continue;
      int v = (l.a == u) ? l.b : l.a;
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == node_count();
}

int ClusterTopology::client_node() const {
  for (int i = 0; i < node_count(); ++i)
    if (nodes_[static_cast<std::size_t>(i)].has_role(kRoleClient)) return i;
  return -1;
}

std::vector<int> ClusterTopology::data_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < node_count(); ++i)
    if (nodes_[static_cast<std::size_t>(i)].has_role(kRoleData)) out.push_back(i);
  return out;
}

const std::vector<int>& ClusterTopology::link_rank() const {
  if (link_rank_.size() != links_.size()) {
    std::vector<int> order(links_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      return links_[static_cast<std::size_t>(x)].id < links_[static_cast<std::size_t>(y)].id;
    });
    link_rank_.assign(links_.size(), 0);
    for (std::size_t r = 0; r < order.size(); ++r)
      link_rank_[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
  }
  return link_rank_;
}

std::string ClusterTopology::to_json_string(int indent) const {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nlohmann::json jn;
    jn["id"] = n.id;
    jn["region"] = n.region;
    std::vector<std::string> roles;
    if (n.has_role(kRoleClient)) roles.push_back("client");
    if (n.has_role(kRoleData)) roles.push_back("data");
    if (n.has_role(kRoleSeed)) roles.push_back("seed");
    if (n.has_role(kRolePrimary)) roles.push_back("primary");
    if (n.has_role(kRoleNonVoting)) roles.push_back("non_voting");
    if (n.has_role(kRoleSql)) roles.push_back("sql");
    if (n.has_role(kRoleMgmt)) roles.push_back("mgmt");
    jn["roles"] = roles;
    doc["nodes"].push_back(jn);
  }
  doc["links"] = nlohmann::json::array();
  for (const auto& l : links_) {
    nlohmann::json jl;
    jl["id"] = l.id;
    jl["a"] = nodes_[static_cast<std::size_t>(l.a)].id;
    jl["b"] = nodes_[static_cast<std::size_t>(l.b)].id;
    jl["conn_type"] = l.conn_type;
    jl["latency_ms"] = l.base_latency_ms;
    jl["down_mbps"] = l.down_bw_mbps;
    jl["up_mbps"] = l.up_bw_mbps;
    doc["links"].push_back(jl);
  }
  doc["schedules"] = nlohmann::json::object();
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const QosSchedule& s = schedules_[i];
    if (s.epochs.size() == 1 && s.epochs[0].lat_mult == 1.0 && s.epochs[0].bw_mult == 1.0 &&
        !s.inverse_bw)
      continue;
    nlohmann::json js = nlohmann::json::array();
    for (const auto& e : s.epochs)
      js.push_back({{"t_ms", us_to_ms(e.start_us)}, {"lat_mult", e.lat_mult},
                    {"bw_mult", e.bw_mult}});
    doc["schedules"][links_[i].id] = js;
  }
  return doc.dump(indent);
}

unsigned role_from_string(const std::string& r) {
  if (r == "client") return kRoleClient;
  if (r == "data") return kRoleData;
  if (r == "seed") return kRoleSeed;
  if (r == "primary") return kRolePrimary;
  if (r == "non_voting") return kRoleNonVoting;
  if (r == "sql") return kRoleSql;
  if (r == "mgmt") return kRoleMgmt;
  throw SimError("unknown role: " + r);
}

ClusterTopology ClusterTopology::from_json_string(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text);
  ClusterTopology topo;
  for (const auto& jn : doc.at("nodes")) {
    NodeSpec n;
    n.id = jn.at("id").get<std::string>();
    n.region = jn.value("region", std::string{});
    n.roles = 0;
    for (const auto& r : jn.value("roles", std::vector<std::string>{"data"}))
      n.roles |= role_from_string(r);
    topo.add_node(std::move(n));
  }
  for (const auto& jl : doc.at("links")) {
    int a = topo.find_node(jl.at("a").get<std::string>());
    int b = topo.find_node(jl.at("b").get<std::string>());
    if (a < 0 || b < 0) throw SimError("link endpoint not found");
    double up = jl.value("up_mbps", jl.at("down_mbps").get<double>());
    topo.add_link(jl.at("id").get<std::string>(), a, b, jl.at("latency_ms").get<double>(),
                  jl.at("down_mbps").get<double>(), up);
  }
  if (doc.contains("schedules")) {
    for (auto it = doc["schedules"].begin(); it != doc["schedules"].end(); ++it) {
      int li = topo.find_link(it.key());
      if (li < 0) throw SimError("schedule references unknown link: " + it.key());
      QosSchedule s;
      s.epochs.clear();
      for (const auto& je : it.value())
        s.epochs.push_back(QosEpoch{ms_to_us(je.at("t_ms").get<double>()),
                                    je.at("lat_mult").get<double>(),
                                    je.at("bw_mult").get<double>()});
      topo.set_schedule(li, std::move(s));
    }
  }
  return topo;
}

std::vector<NodeSpec> reference_node_specs(bool with_client) {
  const auto& m = builtin_reference_matrix();
  std::vector<NodeSpec> nodes;
  for (const auto& region : m.regions) {
    NodeSpec n;
    std::string id = region;
    std::transform(id.begin(), id.end(), id.begin(), [](unsigned char c) { return std::tolower(c); });
    n.id = id;
    n.region = region;
    n.roles = kRoleData;
    if (region == "Melbourne") n.roles |= kRoleSeed | kRolePrimary | kRoleMgmt;
    if (region == "Virginia") n.roles |= kRoleNonVoting;
    if (region == "Singapore") n.roles |= kRoleSql;
    nodes.push_back(std::move(n));
  }
  if (with_client) {
    NodeSpec c;
    c.id = "client";
    c.region = "Singapore";
    c.roles = kRoleClient;
    nodes.push_back(std::move(c));
  }
  return nodes;
}

namespace {

std::string link_name(int idx) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "L%03d", idx);
  return buf;
}

// Reference values for the first link of a pair; falls back to the sampled
// range when a region is unknown.
struct PairQos {
  double latency, down, up;
};

PairQos first_link_qos(const NodeSpec& na, const NodeSpec& nb, const ReferenceMatrix* ref,
                       const MeshQosRange& range, Rng& rng) {
  if (na.region == nb.region && !na.region.empty())
    return {range.intra_region_latency_ms, range.intra_region_bw_mbps, range.intra_region_bw_mbps};
  if (ref && ref->index_of(na.region) >= 0 && ref->index_of(nb.region) >= 0) {
    double lat = ref->latency(na.region, nb.region);
    double bw = ref->down_bw(na.region, nb.region);
    return {lat, bw, bw};
  }
  double lat = rng.uniform(range.latency_lo_ms, range.latency_hi_ms);
  double bw = rng.uniform(range.bw_lo_mbps, range.bw_hi_mbps);
  return {lat, bw, bw};
}

}  // namespace

ClusterTopology build_mesh(const std::vector<NodeSpec>& nodes, int link_count,
                           std::uint64_t rng_seed, const MeshQosRange& range,
                           const ReferenceMatrix* ref) {
  const int n = static_cast<int>(nodes.size());
  if (n < 2) throw SimError("mesh needs at least two nodes");
  if (link_count < n - 1)
    throw SimError("link_count too small for a connected mesh");

  ClusterTopology topo;
  for (const auto& ns : nodes) topo.add_node(ns);

  Rng rng(rng_seed);
  std::set<std::pair<int, int>> seen_pairs;
  int next = 0;

  auto add = [&](int a, int b) {
    int lo = std::min(a, b), hi = std::max(a, b);
    bool first = !seen_pairs.count({lo, hi});
    double lat, down, up;
    if (first) {
      PairQos q = first_link_qos(nodes[static_cast<std::size_t>(lo)],
                                 nodes[static_cast<std::size_t>(hi)], ref, range, rng);
      lat = q.latency;
      down = q.down;
      up = q.up;
      seen_pairs.insert({lo, hi});
    } else {
      lat = rng.uniform(range.latency_lo_ms, range.latency_hi_ms);
      down = rng.uniform(range.bw_lo_mbps, range.bw_hi_mbps);
      up = down;
    }
    topo.add_link(link_name(next++), lo, hi, lat, down, up);
  };

  // Random spanning tree first, then uniform random extra pairs.
  for (int v = 1; v < n; ++v) add(v, static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(v))));
  while (topo.link_count() < link_count) {
    int a = static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(n - 1)));
    if (b >= a) ++b;
    add(a, b);
  }
  return topo;
}

ClusterTopology make_reference_topology(const MeshQosRange& range) {
  auto nodes = reference_node_specs(true);
  ClusterTopology topo;
  for (const auto& n : nodes) topo.add_node(n);
  const auto& m = builtin_reference_matrix();
  int next = 0;
  const int dc = static_cast<int>(m.regions.size());
  for (int i = 0; i < dc; ++i) {
    for (int j = i + 1; j < dc; ++j) {
      topo.add_link(link_name(next++), i, j,
                    m.latency_ms[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                    m.down_bw_mbps[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                    m.down_bw_mbps[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
  }
  int client = topo.find_node("client");
  for (int i = 0; i < dc; ++i) {
    const auto& region = m.regions[static_cast<std::size_t>(i)];
    double lat = (region == "Singapore") ? range.intra_region_latency_ms
                                         : m.latency("Singapore", region);
    double bw = (region == "Singapore") ? range.intra_region_bw_mbps
                                        : m.down_bw("Singapore", region);
    topo.add_link(link_name(next++), client, i, lat, bw, bw);
  }
  return topo;
}

}  // namespace fragsim
