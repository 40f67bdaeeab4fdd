#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iabsim/topology.hpp"

namespace iabsim {

// UE channel-status feedback forwarded through the serving node. A populated
// interferer marks an incorrect-LBT (Interfered) reception.
struct ChannelReport {
  int ue = -1;
  int serving = -1;
  double sinr_db = 0.0;
  std::optional<int> interferer;
  double timestamp_s = 0.0;
};

struct Reconfiguration {
  enum class Kind { ResteerBeam, ReassignUe };
  Kind kind = Kind::ResteerBeam;
  double time_s = 0.0;
  int node = -1;                 // offender (resteer) or UE (reassign)
  double new_boresight_deg = 0;  // resteer only
  int new_serving = -1;          // reassign only
};

inline const char* to_string(Reconfiguration::Kind k) {
  return k == Reconfiguration::Kind::ResteerBeam ? "resteer_beam" : "reassign_ue";
}

// Sets both boresights of a link onto the straight line between the nodes.
// Returns (AoD at a, AoA at b).
inline std::pair<double, double> beam_align(const NodeRecord& a, const NodeRecord& b) {
  const auto g = link_geometry(a, b);
  return {g.aod_deg, g.aoa_deg};
}

struct ControllerConfig {
  int trigger_count = 3;        // consecutive Interfered reports before acting
  double margin_deg_factor = 0.25;  // separation margin as a fraction of beamwidth
};

// Centralized view of UE channel status. Holds only UEs that have reported at
// least once; stale timestamps are ignored.
class SdnController {
 public:
  explicit SdnController(ControllerConfig cfg = {}) : cfg_(cfg) {}

  void ingest(const ChannelReport& report) {
    auto it = latest_.find(report.ue);
    if (it != latest_.end() && report.timestamp_s < it->second.timestamp_s) return;
    if (report.interferer.has_value()) {
      ++consecutive_interfered_[report.ue];
    } else {
      consecutive_interfered_[report.ue] = 0;
    }
    latest_[report.ue] = report;
  }

  bool has_report(int ue) const { return latest_.count(ue) > 0; }
  const ChannelReport* latest(int ue) const {
    auto it = latest_.find(ue);
    return it == latest_.end() ? nullptr : &it->second;
  }
  int interfered_streak(int ue) const {
    auto it = consecutive_interfered_.find(ue);
    return it == consecutive_interfered_.end() ? 0 : it->second;
  }

  // For every UE whose interfered streak reached the trigger, either re-steer
  // the offender's beam so the victim leaves its mainlobe, or, when the
  // victim sits angularly too close to the offender's own receiver, reassign
  // the victim to the next-best node. Acting resets the UE's streak, so a
  // second call without new Interfered reports is a no-op.
  std::vector<Reconfiguration> mitigate(const Topology& topo, const TopologyParams& params, double now_s) {
    std::vector<Reconfiguration> actions;
    for (auto& [ue, streak] : consecutive_interfered_) {
      if (streak < cfg_.trigger_count) continue;
      const ChannelReport& rep = latest_.at(ue);
      if (!rep.interferer.has_value()) continue;
      const int offender = *rep.interferer;
      Reconfiguration act = plan(topo, params, ue, offender, now_s);
      log_.push_back(act);
      actions.push_back(act);
      streak = 0;
    }
    return actions;
  }

  const std::vector<Reconfiguration>& log() const { return log_; }

  // CSV export of the reconfiguration log: time, action, node, parameters.
  std::string export_log_csv() const {
    std::string out = "time,action,node,parameter\n";
    for (const auto& a : log_) {
      char buf[96];
      if (a.kind == Reconfiguration::Kind::ResteerBeam) {
        std::snprintf(buf, sizeof(buf), "%.9g,%s,%d,%.9g\n", a.time_s, to_string(a.kind), a.node,
                      a.new_boresight_deg);
      } else {
        std::snprintf(buf, sizeof(buf), "%.9g,%s,%d,%d\n", a.time_s, to_string(a.kind), a.node,
                      a.new_serving);
      }
      out += buf;
    }
    return out;
  }

 private:
  Reconfiguration plan(const Topology& topo, const TopologyParams& params, int victim, int offender,
                       double now_s) const {
    const auto& off_node = topo.node(offender);
    const double dir_victim = bearing_deg(off_node.x, off_node.y, topo.node(victim).x, topo.node(victim).y);
    const double beamwidth = off_node.antennas.front().beamwidth_deg;

    // The offender's beam implicated is the one aimed at whichever of its
    // receivers lies angularly closest to the victim.
    std::optional<double> target_dir;
    double best_sep = 0.0;
    for (const auto& n : topo.nodes) {
      if (n.id == victim || n.id == offender) continue;
      if (topo.serving[static_cast<std::size_t>(n.id)] != offender) continue;
      const double dir = bearing_deg(off_node.x, off_node.y, n.x, n.y);
      const double sep = std::abs(wrap_deg(dir - dir_victim));
      if (!target_dir || sep < best_sep) {
        target_dir = dir;
        best_sep = sep;
      }
    }

    const double margin = cfg_.margin_deg_factor * beamwidth;
    if (target_dir && best_sep >= margin) {
      // Shift the beam away from the victim, keeping the own receiver at the
      // (inclusive) mainlobe edge; the victim ends up sep + bw/2 off axis.
      const double away = wrap_deg(dir_victim - *target_dir) > 0.0 ? -1.0 : 1.0;
      Reconfiguration act;
      act.kind = Reconfiguration::Kind::ResteerBeam;
      act.time_s = now_s;
      act.node = offender;
      act.new_boresight_deg = normalize_deg(*target_dir + away * 0.5 * beamwidth);
      return act;
    }

    // Angularly inseparable: hand the victim to the next-best server.
    int best = topo.donor_id();
    double best_power = -std::numeric_limits<double>::infinity();
    const int current = topo.serving[static_cast<std::size_t>(victim)];
    for (const auto& cand : topo.nodes) {
      if (!is_infrastructure(cand.kind) || cand.id == current) continue;
      const double p = detail::boresight_rx_power_dbm(topo, params, cand.id, victim);
      if (p > best_power) {
        best = cand.id;
        best_power = p;
      }
    }
    Reconfiguration act;
    act.kind = Reconfiguration::Kind::ReassignUe;
    act.time_s = now_s;
    act.node = victim;
    act.new_serving = best;
    return act;
  }

  ControllerConfig cfg_;
  std::map<int, ChannelReport> latest_;
  std::map<int, int> consecutive_interfered_;
  std::vector<Reconfiguration> log_;
};

}  // namespace iabsim
