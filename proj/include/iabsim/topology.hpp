#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iabsim/channel.hpp"
#include "iabsim/packet.hpp"
#include "iabsim/rng.hpp"

namespace iabsim {

enum class NodeKind { Donor, IabNode, WigigAp, Ue };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Donor: return "donor";
    case NodeKind::IabNode: return "iab";
    case NodeKind::WigigAp: return "ap";
    case NodeKind::Ue: return "ue";
  }
  return "?";
}

inline bool is_infrastructure(NodeKind k) { return k != NodeKind::Ue; }

struct NodeRecord {
  int id = -1;
  NodeKind kind = NodeKind::Ue;
  double x = 0.0;
  double y = 0.0;
  int sectors = 1;  // 3 for infrastructure, 1 for UE
  std::vector<AntennaPattern> antennas;  // one per sector
};

enum class LinkKind { Access, Backhaul };

inline const char* to_string(LinkKind k) { return k == LinkKind::Access ? "access" : "backhaul"; }

// Directional link src -> dst in the downlink direction of traffic flow.
struct LinkState {
  int src = -1;
  int dst = -1;
  LinkKind kind = LinkKind::Access;
  double distance_m = 0.0;
  double static_shadowing_db = 0.0;
  double sinr_estimate_db = 0.0;  // interference-free boresight SNR
  std::deque<Packet> queue;
};

struct LinkGeometry {
  double distance_m = 0.0;
  double aod_deg = 0.0;  // bearing a -> b
  double aoa_deg = 0.0;  // bearing b -> a
};

// Angles are kept in [0, 360); offsets wrapped to [-180, 180].
inline double normalize_deg(double a) {
  a = std::fmod(a, 360.0);
  if (a < 0.0) a += 360.0;
  return a;
}

inline double wrap_deg(double a) {
  a = std::fmod(a + 180.0, 360.0);
  if (a < 0.0) a += 360.0;
  return a - 180.0;
}

inline double bearing_deg(double from_x, double from_y, double to_x, double to_y) {
  return normalize_deg(std::atan2(to_y - from_y, to_x - from_x) * 57.295779513082320876798154814105);
}

inline constexpr double kMinLinkDistanceM = 1.0;  // keeps the pathloss law defined

inline LinkGeometry link_geometry(const NodeRecord& a, const NodeRecord& b) {
  LinkGeometry g;
  const double d = std::hypot(b.x - a.x, b.y - a.y);
  g.distance_m = std::max(d, kMinLinkDistanceM);
  g.aod_deg = bearing_deg(a.x, a.y, b.x, b.y);
  g.aoa_deg = bearing_deg(b.x, b.y, a.x, a.y);
  return g;
}

struct TopologyParams {
  double ue_drop_radius_m = 30.0;     // UE placement radius around its cell
  int max_tiers = 2;                  // backhaul depth below the donor
  double tx_power_dbm = 23.0;
  double noise_dbm = -87.0;
  AntennaPattern infra_pattern{};     // per-sector pattern for donor/IAB/AP
  AntennaPattern ue_pattern{};
  ChannelParams channel{};
};

struct Topology {
  std::vector<NodeRecord> nodes;
  std::vector<LinkState> links;
  double cell_radius_m = 0.0;
  std::uint64_t seed = 0;

  // serving[id]: serving node for a UE, backhaul parent for an IAB node,
  // -1 for the donor and WiGig APs.
  std::vector<int> serving;
  // tier[id]: 0 for the donor, parent tier + 1 for IAB nodes, -1 otherwise.
  std::vector<int> tier;

  const NodeRecord& node(int id) const { return nodes[static_cast<std::size_t>(id)]; }
  NodeRecord& node(int id) { return nodes[static_cast<std::size_t>(id)]; }

  int donor_id() const { return 0; }

  int count(NodeKind k) const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(),
                                          [k](const NodeRecord& n) { return n.kind == k; }));
  }
};

namespace detail {

inline AntennaPattern sector_pattern(const AntennaPattern& base, double boresight_deg) {
  AntennaPattern p = base;
  p.boresight_deg = normalize_deg(boresight_deg);
  return p;
}

// Static per-pair shadowing, derived from the topology seed so that any pair
// (association candidates, interference paths) sees a consistent value.
inline double pair_shadowing_db(const Topology& t, const TopologyParams& p, int a, int b) {
  if (p.channel.sigma_db <= 0.0) return 0.0;
  return pair_normal(t.seed, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b),
                     RngPurpose::Shadowing, 0.0, p.channel.sigma_db);
}

// Boresight-aligned received power used for association decisions.
inline double boresight_rx_power_dbm(const Topology& t, const TopologyParams& p, int tx, int rx) {
  const auto g = link_geometry(t.node(tx), t.node(rx));
  const double gain = t.node(tx).antennas.front().mainlobe_gain_dbi +
                      t.node(rx).antennas.front().mainlobe_gain_dbi;
  LinkBudget b;
  b.tx_power_dbm = p.tx_power_dbm;
  b.combined_gain_db = gain;
  b.pathloss_db = pathloss_db(g.distance_m, p.channel, pair_shadowing_db(t, p, tx, rx));
  return received_power_dbm(b);
}

}  // namespace detail

// Places the donor at the origin, round(0.4*n_infra) IAB nodes and the rest
// WiGig APs uniformly in the disk of radius R, and ue_per_cell UEs around each
// non-donor infrastructure node. Deterministic in the seed.
inline Topology generate(int n_infra, int ue_per_cell, double radius_m, std::uint64_t seed,
                         const TopologyParams& params = {}) {
  if (n_infra < 0) throw std::invalid_argument("generate: n_infra must be >= 0");
  if (ue_per_cell < 0) throw std::invalid_argument("generate: ue_per_cell must be >= 0");
  if (!(radius_m > 0.0)) throw std::invalid_argument("generate: radius must be > 0");

  Topology t;
  t.cell_radius_m = radius_m;
  t.seed = seed;

  const int n_iab = static_cast<int>(std::lround(0.4 * n_infra));
  const int n_ap = n_infra - n_iab;

  auto add_infra = [&](NodeKind kind, double x, double y) {
    NodeRecord n;
    n.id = static_cast<int>(t.nodes.size());
    n.kind = kind;
    n.x = x;
    n.y = y;
    n.sectors = 3;
    for (int s = 0; s < 3; ++s) n.antennas.push_back(detail::sector_pattern(params.infra_pattern, 120.0 * s));
    t.nodes.push_back(std::move(n));
  };

  add_infra(NodeKind::Donor, 0.0, 0.0);

  RngStream place(seed, 0, RngPurpose::Placement);
  auto drop_in_disk = [&](double r_max) {
    const double r = r_max * std::sqrt(place.uniform());
    const double phi = 2.0 * 3.141592653589793238462643383279 * place.uniform();
    return std::pair<double, double>{r * std::cos(phi), r * std::sin(phi)};
  };

  for (int i = 0; i < n_iab; ++i) {
    auto [x, y] = drop_in_disk(radius_m);
    add_infra(NodeKind::IabNode, x, y);
  }
  for (int i = 0; i < n_ap; ++i) {
    auto [x, y] = drop_in_disk(radius_m);
    add_infra(NodeKind::WigigAp, x, y);
  }

  // UEs dropped per sector wedge of each non-donor infrastructure node.
  const int infra_count = static_cast<int>(t.nodes.size());
  for (int cell = 1; cell < infra_count; ++cell) {
    for (int u = 0; u < ue_per_cell; ++u) {
      const int sector = u % 3;
      const double wedge_center = 120.0 * sector;
      const double ang = (wedge_center + (place.uniform() - 0.5) * 120.0) / 57.295779513082320876798154814105;
      const double r = kMinLinkDistanceM +
                       (params.ue_drop_radius_m - kMinLinkDistanceM) * std::sqrt(place.uniform());
      NodeRecord n;
      n.id = static_cast<int>(t.nodes.size());
      n.kind = NodeKind::Ue;
      n.x = t.node(cell).x + r * std::cos(ang);
      n.y = t.node(cell).y + r * std::sin(ang);
      n.sectors = 1;
      n.antennas.push_back(detail::sector_pattern(params.ue_pattern, 0.0));
      t.nodes.push_back(std::move(n));
    }
  }

  t.serving.assign(t.nodes.size(), -1);
  t.tier.assign(t.nodes.size(), -1);
  t.tier[0] = 0;
  return t;
}

// Attaches every UE to the infrastructure node with the highest boresight
// received power and every IAB node to the donor or a nearer IAB node, then
// materializes the directional links with their static shadowing.
inline Topology associate(Topology t, const TopologyParams& params = {}) {
  const int n = static_cast<int>(t.nodes.size());
  t.serving.assign(static_cast<std::size_t>(n), -1);
  t.tier.assign(static_cast<std::size_t>(n), -1);
  t.tier[0] = 0;
  t.links.clear();

  std::vector<int> iab_ids;
  for (const auto& node : t.nodes)
    if (node.kind == NodeKind::IabNode) iab_ids.push_back(node.id);

  // Backhaul parents: nodes are processed by increasing donor distance so a
  // parent is always assigned before its children; candidates must be
  // strictly nearer the donor, which rules out cycles.
  auto donor_dist = [&](int id) {
    return std::hypot(t.node(id).x, t.node(id).y);
  };
  std::sort(iab_ids.begin(), iab_ids.end(), [&](int a, int b) {
    const double da = donor_dist(a), db = donor_dist(b);
    if (da != db) return da < db;
    return a < b;
  });

  for (int id : iab_ids) {
    int best = 0;  // donor
    double best_power = detail::boresight_rx_power_dbm(t, params, 0, id);
    for (int cand : iab_ids) {
      if (cand == id || t.tier[cand] < 0) continue;
      if (t.tier[cand] + 1 > params.max_tiers) continue;
      if (!(donor_dist(cand) < donor_dist(id))) continue;
      const double p = detail::boresight_rx_power_dbm(t, params, cand, id);
      if (p > best_power || (p == best_power && cand < best)) {
        best = cand;
        best_power = p;
      }
    }
    t.serving[id] = best;
    t.tier[id] = t.tier[best] + 1;
  }

  // UE association by maximum boresight received power, lower id on ties.
  for (const auto& node : t.nodes) {
    if (node.kind != NodeKind::Ue) continue;
    int best = -1;
    double best_power = -std::numeric_limits<double>::infinity();
    for (const auto& cand : t.nodes) {
      if (!is_infrastructure(cand.kind)) continue;
      const double p = detail::boresight_rx_power_dbm(t, params, cand.id, node.id);
      if (p > best_power) {
        best = cand.id;
        best_power = p;
      }
    }
    t.serving[node.id] = best;
  }

  auto make_link = [&](int src, int dst, LinkKind kind) {
    LinkState l;
    l.src = src;
    l.dst = dst;
    l.kind = kind;
    const auto g = link_geometry(t.node(src), t.node(dst));
    l.distance_m = g.distance_m;
    l.static_shadowing_db = detail::pair_shadowing_db(t, params, src, dst);
    const double gain = t.node(src).antennas.front().mainlobe_gain_dbi +
                        t.node(dst).antennas.front().mainlobe_gain_dbi;
    LinkBudget b;
    b.tx_power_dbm = params.tx_power_dbm;
    b.combined_gain_db = gain;
    b.pathloss_db = pathloss_db(l.distance_m, params.channel, l.static_shadowing_db);
    l.sinr_estimate_db = received_power_dbm(b) - params.noise_dbm;
    return l;
  };

  for (int id : iab_ids) t.links.push_back(make_link(t.serving[id], id, LinkKind::Backhaul));
  for (const auto& node : t.nodes) {
    if (node.kind == NodeKind::Ue && t.serving[node.id] >= 0)
      t.links.push_back(make_link(t.serving[node.id], node.id, LinkKind::Access));
  }
  return t;
}

// True when the backhaul links form a forest rooted at the donor.
inline bool backhaul_is_forest(const Topology& t) {
  for (const auto& node : t.nodes) {
    if (node.kind != NodeKind::IabNode) continue;
    int hops = 0;
    int cur = node.id;
    while (cur != t.donor_id()) {
      cur = t.serving[static_cast<std::size_t>(cur)];
      if (cur < 0 || ++hops > static_cast<int>(t.nodes.size())) return false;
      if (cur != t.donor_id() && t.node(cur).kind != NodeKind::IabNode) return false;
    }
  }
  return true;
}

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline std::optional<NodeKind> kind_from_string(std::string_view s) {
  if (s == "donor") return NodeKind::Donor;
  if (s == "iab") return NodeKind::IabNode;
  if (s == "ap") return NodeKind::WigigAp;
  if (s == "ue") return NodeKind::Ue;
  return std::nullopt;
}

}  // namespace detail

// Plain-text export: a node table (id, kind, x, y, sectors) and a link table
// (src, dst, kind). Doubles are written in shortest round-trip form.
inline std::string export_topology(const Topology& t) {
  std::string out = "topology 1\nradius ";
  detail::append_double(out, t.cell_radius_m);
  out += "\nnodes " + std::to_string(t.nodes.size()) + "\n";
  for (const auto& n : t.nodes) {
    out += std::to_string(n.id);
    out += ' ';
    out += to_string(n.kind);
    out += ' ';
    detail::append_double(out, n.x);
    out += ' ';
    detail::append_double(out, n.y);
    out += ' ';
    out += std::to_string(n.sectors);
    out += '\n';
  }
  out += "links " + std::to_string(t.links.size()) + "\n";
  for (const auto& l : t.links) {
    out += std::to_string(l.src);
    out += ' ';
    out += std::to_string(l.dst);
    out += ' ';
    out += to_string(l.kind);
    out += '\n';
  }
  return out;
}

// Inverse of export_topology. Geometry is recomputed from positions; the
// detailed link state (shadowing, SINR estimates) is rebuilt by re-running
// associate() when a full replay is needed.
inline Topology import_topology(const std::string& text, const TopologyParams& params = {}) {
  std::istringstream in(text);
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "topology" || version != 1)
    throw std::runtime_error("import_topology: bad header");

  Topology t;
  if (!(in >> word >> t.cell_radius_m) || word != "radius")
    throw std::runtime_error("import_topology: bad radius line");

  std::size_t n_nodes = 0;
  if (!(in >> word >> n_nodes) || word != "nodes") throw std::runtime_error("import_topology: bad node count");
  t.nodes.reserve(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    NodeRecord n;
    std::string kind;
    if (!(in >> n.id >> kind >> n.x >> n.y >> n.sectors))
      throw std::runtime_error("import_topology: bad node row " + std::to_string(i));
    const auto k = detail::kind_from_string(kind);
    if (!k) throw std::runtime_error("import_topology: unknown node kind '" + kind + "'");
    n.kind = *k;
    const auto& base = is_infrastructure(n.kind) ? params.infra_pattern : params.ue_pattern;
    for (int s = 0; s < n.sectors; ++s) n.antennas.push_back(detail::sector_pattern(base, 120.0 * s));
    t.nodes.push_back(std::move(n));
  }

  std::size_t n_links = 0;
  if (!(in >> word >> n_links) || word != "links") throw std::runtime_error("import_topology: bad link count");
  t.serving.assign(t.nodes.size(), -1);
  t.tier.assign(t.nodes.size(), -1);
  if (!t.nodes.empty()) t.tier[0] = 0;
  for (std::size_t i = 0; i < n_links; ++i) {
    int src = 0, dst = 0;
    std::string kind;
    if (!(in >> src >> dst >> kind)) throw std::runtime_error("import_topology: bad link row " + std::to_string(i));
    LinkState l;
    l.src = src;
    l.dst = dst;
    l.kind = kind == "access" ? LinkKind::Access : LinkKind::Backhaul;
    const auto g = link_geometry(t.node(src), t.node(dst));
    l.distance_m = g.distance_m;
    t.links.push_back(std::move(l));
    t.serving[static_cast<std::size_t>(dst)] = src;
  }
  for (const auto& n : t.nodes) {
    if (n.kind == NodeKind::IabNode) {
      int cur = n.id, hops = 0;
      while (cur > 0 && hops <= static_cast<int>(t.nodes.size())) {
        cur = t.serving[static_cast<std::size_t>(cur)];
        ++hops;
      }
      t.tier[static_cast<std::size_t>(n.id)] = hops;
    }
  }
  return t;
}

}  // namespace iabsim
