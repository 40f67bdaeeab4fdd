#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "iabsim/channel.hpp"
#include "iabsim/lbt_mac.hpp"
#include "iabsim/mac_analytics.hpp"
#include "iabsim/packet.hpp"
#include "iabsim/rng.hpp"
#include "iabsim/schedulers.hpp"
#include "iabsim/sdn_controller.hpp"
#include "iabsim/topology.hpp"

namespace iabsim {

struct SimConfig {
  // run
  double duration_s = 1.0;
  std::uint64_t seed = 1;
  double lambda_pps = 500.0;  // packet arrival rate per source node
  double mean_packet_bits = 12000.0;
  bool exponential_packet_sizes = false;
  int retry_cap = 7;

  // deployment
  int n_infra = 10;
  int ue_per_cell = 20;
  double cell_radius_m = 150.0;
  double ue_drop_radius_m = 30.0;
  int max_tiers = 2;

  // radio
  ChannelParams channel{};
  ThroughputParams throughput{};
  CcaConfig cca{};
  AntennaPattern infra_pattern{};
  AntennaPattern ue_pattern{};
  double tx_power_dbm = 23.0;
  double noise_figure_db = 7.0;
  double decode_threshold_db = 0.0;
  bool interference_enabled = true;
  bool wigig_adjacent_channel = false;

  // MAC
  DcfParams dcf{};
  int lbt_cw = 16;

  // strategy & framing
  StrategyConfig strategy{};
  int subframe_slots = 25;

  // controller
  bool controller_enabled = true;
  double controller_delay_s = 1e-3;
  ControllerConfig controller{};
  int interfered_backoff_slots = 25;  // proposed: rest an interfered link this long

  // optional per-slot trace (CSV), empty = off
  std::string trace_path;

  void validate() const {
    if (!(duration_s >= 0.0)) throw std::invalid_argument("SimConfig: duration must be >= 0");
    if (lambda_pps < 0.0) throw std::invalid_argument("SimConfig: lambda must be >= 0");
    if (!(mean_packet_bits > 0.0)) throw std::invalid_argument("SimConfig: mean_packet_bits must be > 0");
    if (retry_cap < 1) throw std::invalid_argument("SimConfig: retry_cap must be >= 1");
    if (n_infra < 0) throw std::invalid_argument("SimConfig: n_infra must be >= 0");
    if (ue_per_cell < 0) throw std::invalid_argument("SimConfig: ue_per_cell must be >= 0");
    if (!(cell_radius_m > 0.0)) throw std::invalid_argument("SimConfig: cell_radius must be > 0");
    if (!(ue_drop_radius_m > kMinLinkDistanceM))
      throw std::invalid_argument("SimConfig: ue_drop_radius must exceed the 1 m clamp");
    if (max_tiers < 1) throw std::invalid_argument("SimConfig: max_tiers must be >= 1");
    if (lbt_cw < 1) throw std::invalid_argument("SimConfig: lbt_cw must be >= 1");
    if (subframe_slots < 1) throw std::invalid_argument("SimConfig: subframe_slots must be >= 1");
    if (interfered_backoff_slots < 0)
      throw std::invalid_argument("SimConfig: interfered_backoff_slots must be >= 0");
    channel.validate();
    throughput.validate();
    cca.validate();
    infra_pattern.validate();
    ue_pattern.validate();
    dcf.validate();
    strategy.validate();
  }

  TopologyParams topology_params() const {
    TopologyParams p;
    p.ue_drop_radius_m = ue_drop_radius_m;
    p.max_tiers = max_tiers;
    p.tx_power_dbm = tx_power_dbm;
    p.noise_dbm = noise_floor_dbm(throughput.bandwidth_hz, noise_figure_db);
    p.infra_pattern = infra_pattern;
    p.ue_pattern = ue_pattern;
    p.channel = channel;
    return p;
  }
};

struct MetricsRecord {
  double duration_s = 0.0;
  long long total_slots = 0;

  // packet conservation
  long long arrived = 0;
  long long delivered = 0;
  long long dropped = 0;
  long long dropped_admission = 0;
  long long dropped_retry = 0;
  long long queued_end = 0;

  // throughput
  double delivered_bits = 0.0;
  std::vector<double> per_node_delivered_bits;  // indexed by node id, credited to the serving cell
  std::vector<double> per_ue_delivered_bits;    // indexed by node id, zero for non-UEs
  std::vector<long long> per_ue_interfered;     // interfered receptions per UE
  std::vector<int> ue_ids;

  // per-link accounting (index = link id)
  std::vector<double> per_link_delivered_bits;
  std::vector<double> per_link_capacity_bits;  // sum of rate*slot over successful slots

  // slot outcomes
  long long success_count = 0;
  long long collision_count = 0;
  long long interfered_count = 0;
  double last_interfered_time_s = -1.0;

  // slot utilization
  long long tx_slots = 0;       // slots with at least one unlicensed transmission
  long long grant_wins = 0;     // medium-access wins
  long long wasted_wins = 0;    // wins the strategy could not use
  long long backoff_step_slots = 0;   // node-slots spent counting down on an idle medium
  long long busy_step_slots = 0;      // node-slots frozen on a busy medium
  long long defer_node_slots = 0;     // node-slots in post-burst defer
  long long no_service_node_slots = 0;  // backlogged node-slots the strategy left idle

  double cell_throughput_bps() const { return duration_s > 0.0 ? delivered_bits / duration_s : 0.0; }

  double mean_ue_throughput_bps() const {
    if (ue_ids.empty() || duration_s <= 0.0) return 0.0;
    double sum = 0.0;
    for (int ue : ue_ids) sum += per_ue_delivered_bits[static_cast<std::size_t>(ue)];
    return sum / (duration_s * static_cast<double>(ue_ids.size()));
  }

  double interfered_fraction() const {
    const long long total = success_count + collision_count + interfered_count;
    return total > 0 ? static_cast<double>(interfered_count) / static_cast<double>(total) : 0.0;
  }

  double dropped_fraction() const {
    return arrived > 0 ? static_cast<double>(dropped) / static_cast<double>(arrived) : 0.0;
  }
};

// Poisson arrival count for one slot.
inline int poisson_arrivals(double lambda_pps, double slot_s, RngStream& rng) {
  if (lambda_pps < 0.0) throw std::invalid_argument("poisson_arrivals: lambda must be >= 0");
  if (!(slot_s > 0.0)) throw std::invalid_argument("poisson_arrivals: slot must be > 0");
  return static_cast<int>(rng.poisson(lambda_pps * slot_s));
}

namespace detail {

// Slot-driven engine for one replication. Single-threaded; all randomness
// comes from counter-based streams keyed by (seed, node, purpose).
class SimEngine {
 public:
  SimEngine(const SimConfig& cfg, Topology topo) : cfg_(cfg), topo_(std::move(topo)) {
    tparams_ = cfg_.topology_params();
    noise_dbm_ = tparams_.noise_dbm;
    slot_s_ = cfg_.cca.slot_duration_s;
    defer_slots_ = static_cast<int>(std::ceil(cfg_.cca.defer_duration_s / slot_s_));
    cot_slots_ = std::max<long long>(1, static_cast<long long>(std::floor(cfg_.strategy.cot_s / slot_s_)));
    cot_cap_slots_ =
        std::max<long long>(1, static_cast<long long>(std::floor(cfg_.cca.cot_max_s / slot_s_)));
    cot_slots_ = std::min(cot_slots_, cot_cap_slots_);
    frame_slots_ = 10LL * cfg_.subframe_slots;
    frame_ = cfg_.strategy.frame();
    n_slots_ = static_cast<long long>(std::floor(cfg_.duration_s / slot_s_ + 0.5));
    setup();
  }

  MetricsRecord run() {
    std::ofstream trace;
    if (!cfg_.trace_path.empty()) {
      trace.open(cfg_.trace_path);
      trace << "time,node,phase,cca_result,outcome\n";
    }

    for (long long slot = 0; slot < n_slots_; ++slot) {
      now_ = static_cast<double>(slot) * slot_s_;
      if (slot % frame_slots_ == 0) on_frame_boundary();
      if (slot % cfg_.subframe_slots == 0) on_subframe_boundary();
      apply_due_reconfigurations();
      generate_arrivals();
      collect_active_transmissions();
      step_contenders(trace);
      resolve_active(trace);
      advance_bursts();
      serve_donor_direct();
      if (!active_.empty()) ++metrics_.tx_slots;
    }

    finalize_metrics();
    return metrics_;
  }

 private:
  enum class NodeChannel : int { Shared = 0, WigigAdjacent = 1 };

  struct NodeState {
    MacState mac;
    RngStream backoff_rng;
    RngStream arrival_rng;
    RngStream size_rng;
    RngStream route_rng;
    RngStream dest_rng;
    int defer_remaining = 0;
    int channel_id = 0;

    std::vector<int> access_links;   // link ids with src == this node
    int inbound_backhaul = -1;       // link id parent -> this node (IAB only)

    bool in_burst = false;
    bool hold = false;               // CotHold turnaround slot
    int burst_link = -1;
    long long budget_slots = 0;

    LinkKind subframe_pool = LinkKind::Access;  // probabilistic: this subframe's reserved pool
    TddFrame frame{};                            // baseline: pattern in force this frame

    // proposed strategy state
    double mu_access = 1.0;
    double mu_backhaul = 1.0;
    double meas_access = -1.0;
    double meas_backhaul = -1.0;

    std::optional<double> steer_override_deg;
  };

  struct LiveTx {
    ActiveTransmission tx;
    int link_id = -1;
    int owner = -1;  // grant holder whose MAC gets the outcome
  };

  void setup() {
    const int n = static_cast<int>(topo_.nodes.size());
    nodes_.resize(static_cast<std::size_t>(n));
    metrics_.duration_s = static_cast<double>(n_slots_) * slot_s_;
    metrics_.total_slots = n_slots_;
    metrics_.per_node_delivered_bits.assign(static_cast<std::size_t>(n), 0.0);
    metrics_.per_ue_delivered_bits.assign(static_cast<std::size_t>(n), 0.0);
    metrics_.per_ue_interfered.assign(static_cast<std::size_t>(n), 0);
    metrics_.per_link_delivered_bits.assign(topo_.links.size(), 0.0);
    metrics_.per_link_capacity_bits.assign(topo_.links.size(), 0.0);
    for (const auto& node : topo_.nodes)
      if (node.kind == NodeKind::Ue) metrics_.ue_ids.push_back(node.id);

    for (const auto& node : topo_.nodes) {
      auto& st = nodes_[static_cast<std::size_t>(node.id)];
      st.backoff_rng = RngStream(cfg_.seed, static_cast<std::uint64_t>(node.id), RngPurpose::Backoff);
      st.arrival_rng = RngStream(cfg_.seed, static_cast<std::uint64_t>(node.id), RngPurpose::Arrivals);
      st.size_rng = RngStream(cfg_.seed, static_cast<std::uint64_t>(node.id), RngPurpose::PacketSize);
      st.route_rng = RngStream(cfg_.seed, static_cast<std::uint64_t>(node.id), RngPurpose::Routing);
      st.dest_rng = RngStream(cfg_.seed, static_cast<std::uint64_t>(node.id), RngPurpose::DestPick);
      st.channel_id = (node.kind == NodeKind::WigigAp && cfg_.wigig_adjacent_channel)
                          ? static_cast<int>(NodeChannel::WigigAdjacent)
                          : static_cast<int>(NodeChannel::Shared);
    }
    for (int li = 0; li < static_cast<int>(topo_.links.size()); ++li) {
      const auto& l = topo_.links[static_cast<std::size_t>(li)];
      if (l.kind == LinkKind::Access) {
        nodes_[static_cast<std::size_t>(l.src)].access_links.push_back(li);
      } else {
        nodes_[static_cast<std::size_t>(l.dst)].inbound_backhaul = li;
      }
    }
    for (auto& node : topo_.nodes) {
      auto& st = nodes_[static_cast<std::size_t>(node.id)];
      if (node.kind != NodeKind::IabNode) continue;
      st.mu_access = initial_mu(st.access_links);
      if (st.inbound_backhaul >= 0)
        st.mu_backhaul = std::max(
            db_to_linear(topo_.links[static_cast<std::size_t>(st.inbound_backhaul)].sinr_estimate_db), 1e-9);
    }

    for (auto& st : nodes_) st.frame = frame_;
    controller_ = SdnController(cfg_.controller);

    // power cache: transmitter-side base power (tx power minus pathloss with
    // static shadowing) in mW, for infra transmitters only
    const int n_nodes = static_cast<int>(topo_.nodes.size());
    base_power_mw_.assign(static_cast<std::size_t>(n_nodes) * n_nodes,
                          std::numeric_limits<double>::quiet_NaN());
    bearing_cache_.assign(static_cast<std::size_t>(n_nodes) * n_nodes,
                          std::numeric_limits<double>::quiet_NaN());

    link_bad_until_.assign(topo_.links.size(), -1.0);
    link_bad_streak_.assign(topo_.links.size(), 0);
    link_mu_.assign(topo_.links.size(), 1.0);
    for (std::size_t li = 0; li < topo_.links.size(); ++li)
      link_mu_[li] = std::max(db_to_linear(topo_.links[li].sinr_estimate_db), 1e-9);

    resolve_params_.channel = cfg_.channel;
    resolve_params_.noise_dbm = noise_dbm_;
    resolve_params_.decode_threshold_db = cfg_.decode_threshold_db;
    resolve_params_.cca_threshold_dbm = cfg_.cca.threshold_dbm;
    resolve_params_.power_mw_override = [this](const ActiveTransmission& t, const ActiveTransmission& r) {
      return pair_power_mw(t.tx_node, t.tx_pattern.boresight_deg, r.rx_node, r.rx_pattern.boresight_deg);
    };
  }

  double initial_mu(const std::vector<int>& access_links) const {
    if (access_links.empty()) return 1.0;
    double sum = 0.0;
    for (int li : access_links)
      sum += db_to_linear(topo_.links[static_cast<std::size_t>(li)].sinr_estimate_db);
    return std::max(sum / static_cast<double>(access_links.size()), 1e-9);
  }

  // ---- cached directional power ------------------------------------------

  double cached_bearing(int from, int to) {
    auto& v = bearing_cache_[static_cast<std::size_t>(from) * topo_.nodes.size() + to];
    if (std::isnan(v))
      v = bearing_deg(topo_.node(from).x, topo_.node(from).y, topo_.node(to).x, topo_.node(to).y);
    return v;
  }

  double cached_base_power_mw(int tx, int rx) {
    auto& v = base_power_mw_[static_cast<std::size_t>(tx) * topo_.nodes.size() + rx];
    if (std::isnan(v)) {
      const auto& a = topo_.node(tx);
      const auto& b = topo_.node(rx);
      const double d = std::max(std::hypot(b.x - a.x, b.y - a.y), kMinLinkDistanceM);
      const double shadow = pair_shadow(tx, rx);
      v = dbm_to_mw(cfg_.tx_power_dbm - pathloss_db(d, cfg_.channel, shadow));
    }
    return v;
  }

  double pair_shadow(int a, int b) const {
    if (cfg_.channel.sigma_db <= 0.0) return 0.0;
    return pair_normal(topo_.seed, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b),
                       RngPurpose::Shadowing, 0.0, cfg_.channel.sigma_db);
  }

  double gain_linear(const AntennaPattern& p, double offset_deg) const {
    return db_to_linear(pattern_gain_db(p, offset_deg));
  }

  // Linear received power of transmitter tx (beam at tx_boresight) at node rx
  // listening toward rx_boresight.
  double pair_power_mw(int tx, double tx_boresight, int rx, double rx_boresight) {
    const double off_tx = wrap_deg(cached_bearing(tx, rx) - tx_boresight);
    const double off_rx = wrap_deg(cached_bearing(rx, tx) - rx_boresight);
    const auto& tx_pat = topo_.node(tx).antennas.front();
    const auto& rx_pat = topo_.node(rx).antennas.front();
    return cached_base_power_mw(tx, rx) * gain_linear(tx_pat, off_tx) * gain_linear(rx_pat, off_rx);
  }

  // ---- traffic -------------------------------------------------------------

  double draw_packet_bits(NodeState& st) {
    if (!cfg_.exponential_packet_sizes) return cfg_.mean_packet_bits;
    return std::max(1.0, st.size_rng.exponential(1.0 / cfg_.mean_packet_bits));
  }

  // First queue on the path of a packet for UE `ue` served by `serving`.
  int first_hop_link(int serving) const {
    const auto& node = topo_.node(serving);
    if (node.kind != NodeKind::IabNode) {
      return -1;  // donor/AP serve their access link directly
    }
    int cur = serving;
    while (topo_.serving[static_cast<std::size_t>(cur)] != topo_.donor_id()) {
      cur = topo_.serving[static_cast<std::size_t>(cur)];
    }
    return nodes_[static_cast<std::size_t>(cur)].inbound_backhaul;
  }

  int access_link_of(int ue) const {
    for (int li : nodes_[static_cast<std::size_t>(topo_.serving[static_cast<std::size_t>(ue)])].access_links)
      if (topo_.links[static_cast<std::size_t>(li)].dst == ue) return li;
    return -1;
  }

  void generate_arrivals() {
    if (cfg_.lambda_pps <= 0.0) return;
    for (const auto& node : topo_.nodes) {
      if (!is_infrastructure(node.kind)) continue;
      auto& st = nodes_[static_cast<std::size_t>(node.id)];
      if (st.access_links.empty()) continue;
      const int count = poisson_arrivals(cfg_.lambda_pps, slot_s_, st.arrival_rng);
      for (int k = 0; k < count; ++k) {
        const int li = st.access_links[st.dest_rng.uniform_int(st.access_links.size())];
        Packet p;
        p.id = next_packet_id_++;
        p.size_bits = draw_packet_bits(st);
        p.arrival_time_s = now_;
        p.src = node.id;
        p.dst = topo_.links[static_cast<std::size_t>(li)].dst;
        ++metrics_.arrived;

        if (node.kind == NodeKind::IabNode && cfg_.strategy.kind == StrategyKind::Probabilistic) {
          PoolState pools;
          pools.capacity = cfg_.strategy.pool_capacity;
          pools.backhaul_occupied =
              st.inbound_backhaul >= 0
                  ? static_cast<int>(topo_.links[static_cast<std::size_t>(st.inbound_backhaul)].queue.size())
                  : 0;
          pools.access_occupied = static_cast<int>(total_access_queue(st));
          if (probabilistic_route(cfg_.strategy.delta, pools, st.route_rng) == RouteDecision::Dropped) {
            ++metrics_.dropped_admission;
            ++metrics_.dropped;
            continue;
          }
        }

        const int hop = node.kind == NodeKind::IabNode ? first_hop_link(node.id) : -1;
        const int target = hop >= 0 ? hop : li;
        topo_.links[static_cast<std::size_t>(target)].queue.push_back(p);
      }
    }
  }

  std::size_t total_access_queue(const NodeState& st) const {
    std::size_t total = 0;
    for (int li : st.access_links) total += topo_.links[static_cast<std::size_t>(li)].queue.size();
    return total;
  }

  // Access link with the oldest waiting head packet. skip_resting honors the
  // proposed strategy's per-receiver interference hold-offs.
  int oldest_access_link(const NodeState& st, bool skip_resting = false) const {
    int best = -1;
    std::int64_t best_id = std::numeric_limits<std::int64_t>::max();
    for (int li : st.access_links) {
      if (skip_resting && link_bad(li)) continue;
      const auto& q = topo_.links[static_cast<std::size_t>(li)].queue;
      if (!q.empty() && q.front().id < best_id) {
        best = li;
        best_id = q.front().id;
      }
    }
    return best;
  }

  // SINR-aware pick for the proposed strategy: the backlogged access link
  // with the best reported SINR, resting links excluded.
  int best_access_link(const NodeState& st) const {
    int best = -1;
    double best_mu = -1.0;
    for (int li : st.access_links) {
      if (link_bad(li)) continue;
      const auto& q = topo_.links[static_cast<std::size_t>(li)].queue;
      if (q.empty()) continue;
      const double mu = link_mu_[static_cast<std::size_t>(li)];
      if (mu > best_mu) {
        best_mu = mu;
        best = li;
      }
    }
    return best;
  }

  std::size_t serviceable_access_queue(const NodeState& st) const {
    std::size_t total = 0;
    for (int li : st.access_links) {
      if (link_bad(li)) continue;
      total += topo_.links[static_cast<std::size_t>(li)].queue.size();
    }
    return total;
  }

  // ---- strategy integration -------------------------------------------------

  struct LinkChoice {
    int link_id = -1;
    LinkKind kind = LinkKind::Access;
  };

  int current_subframe() const {
    return static_cast<int>((now_ms_slot() / cfg_.subframe_slots) % 10);
  }

  long long now_ms_slot() const { return static_cast<long long>(now_ / slot_s_ + 0.5); }

  bool link_bad(int link_id) const { return now_ < link_bad_until_[static_cast<std::size_t>(link_id)]; }

  // What the node would serve if it won the medium right now. Also used for
  // the CCA listening direction.
  std::optional<LinkChoice> tentative_choice(const NodeRecord& node, NodeState& st) {
    const std::size_t access_len = total_access_queue(st);
    const std::size_t backhaul_len =
        st.inbound_backhaul >= 0 ? topo_.links[static_cast<std::size_t>(st.inbound_backhaul)].queue.size()
                                 : 0;
    if (access_len == 0 && backhaul_len == 0) return std::nullopt;

    if (node.kind == NodeKind::WigigAp) {
      const int li = oldest_access_link(st);
      if (li < 0) return std::nullopt;
      return LinkChoice{li, LinkKind::Access};
    }

    switch (cfg_.strategy.kind) {
      case StrategyKind::Baseline: {
        const auto d = baseline_decide(st.frame, current_subframe(), access_len, backhaul_len);
        if (d == BaselineDecision::None) return std::nullopt;
        if (d == BaselineDecision::Access) return LinkChoice{oldest_access_link(st), LinkKind::Access};
        return LinkChoice{st.inbound_backhaul, LinkKind::Backhaul};
      }
      case StrategyKind::Probabilistic: {
        if (st.subframe_pool == LinkKind::Backhaul) {
          if (backhaul_len == 0) return std::nullopt;
          return LinkChoice{st.inbound_backhaul, LinkKind::Backhaul};
        }
        if (access_len == 0) return std::nullopt;
        return LinkChoice{oldest_access_link(st), LinkKind::Access};
      }
      case StrategyKind::Proposed: {
        // Receiver-side interference assessment: links whose receiver
        // recently reported incorrect-LBT interference rest until their
        // hold-off expires and are not eligible for grants.
        const std::size_t good_access = serviceable_access_queue(st);
        const std::size_t good_backhaul =
            (st.inbound_backhaul >= 0 && !link_bad(st.inbound_backhaul)) ? backhaul_len : 0;
        SchedulerWeights w;
        w.access_sinr = std::max(st.mu_access, 1e-9);
        w.backhaul_sinr = std::max(st.mu_backhaul, 1e-9);
        auto grant = proposed_decide(Medium::Idle, w, good_access, good_backhaul, cfg_.strategy.cot_s);
        if (!grant) return std::nullopt;
        if (grant->link == LinkKind::Access) return LinkChoice{best_access_link(st), LinkKind::Access};
        return LinkChoice{st.inbound_backhaul, LinkKind::Backhaul};
      }
    }
    return std::nullopt;
  }

  long long grant_budget_slots(const NodeRecord& node) const {
    if (node.kind == NodeKind::WigigAp) return cot_cap_slots_;
    if (cfg_.strategy.kind == StrategyKind::Baseline ||
        cfg_.strategy.kind == StrategyKind::Probabilistic) {
      // period-committed strategies cannot carry a grant past their slice
      const long long into_subframe = now_ms_slot() % cfg_.subframe_slots;
      return std::min(cot_slots_, static_cast<long long>(cfg_.subframe_slots) - into_subframe);
    }
    return cot_slots_;
  }

  // ---- CCA ------------------------------------------------------------------

  Medium sense(const NodeRecord& node, NodeState& st, const LinkChoice& choice) {
    scratch_view_.sensor = node.id;
    scratch_view_.active.clear();
    const auto& link = topo_.links[static_cast<std::size_t>(choice.link_id)];
    // listen toward the peer of the link about to be served
    const int peer = link.src == node.id ? link.dst : link.src;
    const double listen = cached_bearing(node.id, peer);
    for (const auto& live : active_) {
      if (live.tx.tx_node == node.id) continue;
      if (live.tx.channel_id != st.channel_id) continue;
      SensedTransmission s;
      s.tx_node = live.tx.tx_node;
      s.rx_node = live.tx.rx_node;
      s.power_dbm = mw_to_dbm(pair_power_mw(live.tx.tx_node, live.tx.tx_pattern.boresight_deg, node.id, listen));
      scratch_view_.active.push_back(s);
    }
    return cca(scratch_view_, cfg_.cca);
  }

  // ---- burst lifecycle --------------------------------------------------------

  void start_grant(const NodeRecord& node, NodeState& st) {
    ++metrics_.grant_wins;
    auto choice = tentative_choice(node, st);
    if (!choice || choice->link_id < 0 ||
        topo_.links[static_cast<std::size_t>(choice->link_id)].queue.empty()) {
      ++metrics_.wasted_wins;
      end_burst(st);
      return;
    }
    st.in_burst = true;
    st.hold = true;  // one turnaround slot before energy is on the air
    st.mac.phase = MacPhase::CotHold;
    st.burst_link = choice->link_id;
    st.budget_slots = grant_budget_slots(node);
  }

  void end_burst(NodeState& st) {
    st.in_burst = false;
    st.hold = false;
    st.burst_link = -1;
    st.budget_slots = 0;
    st.mac.phase = MacPhase::Idle;
    st.mac.cot_remaining_s = 0.0;
    st.defer_remaining = defer_slots_;
  }

  void step_contenders(std::ofstream& trace) {
    for (const auto& node : topo_.nodes) {
      if (node.kind != NodeKind::IabNode && node.kind != NodeKind::WigigAp) continue;
      auto& st = nodes_[static_cast<std::size_t>(node.id)];
      if (st.in_burst) continue;
      if (st.defer_remaining > 0) {
        --st.defer_remaining;
        ++metrics_.defer_node_slots;
        continue;
      }
      auto choice = tentative_choice(node, st);
      if (!choice) {
        if (total_access_queue(st) > 0 ||
            (st.inbound_backhaul >= 0 &&
             !topo_.links[static_cast<std::size_t>(st.inbound_backhaul)].queue.empty()))
          ++metrics_.no_service_node_slots;
        // nothing serviceable: freeze any pending backoff
        if (st.mac.phase == MacPhase::Backoff && node.kind == NodeKind::WigigAp)
          dcf_step(st.mac, Medium::Busy, cfg_.dcf, st.backoff_rng);
        else if (st.mac.phase == MacPhase::Backoff)
          lbt_step(st.mac, Medium::Busy, cfg_.lbt_cw, cfg_.cca.cot_max_s, st.backoff_rng);
        continue;
      }
      const Medium medium = sense(node, st, *choice);
      if (medium == Medium::Busy) ++metrics_.busy_step_slots; else ++metrics_.backoff_step_slots;
      bool start = false;
      if (node.kind == NodeKind::WigigAp) {
        start = dcf_step(st.mac, medium, cfg_.dcf, st.backoff_rng);
      } else {
        start = lbt_step(st.mac, medium, cfg_.lbt_cw, cfg_.cca.cot_max_s, st.backoff_rng);
      }
      if (trace.is_open()) {
        trace << now_ << ',' << node.id << ',' << phase_name(st.mac.phase) << ','
              << (medium == Medium::Busy ? "busy" : "idle") << ",\n";
      }
      if (start) start_grant(node, st);
    }
  }

  void collect_active_transmissions() {
    active_.clear();
    for (const auto& node : topo_.nodes) {
      auto& st = nodes_[static_cast<std::size_t>(node.id)];
      if (!st.in_burst || st.hold || st.burst_link < 0) continue;
      auto& link = topo_.links[static_cast<std::size_t>(st.burst_link)];
      if (link.queue.empty()) continue;
      LiveTx live;
      live.link_id = st.burst_link;
      live.owner = node.id;
      live.tx.tx_node = link.src;
      live.tx.rx_node = link.dst;
      const auto& src = topo_.node(link.src);
      const auto& dst = topo_.node(link.dst);
      live.tx.tx_x = src.x;
      live.tx.tx_y = src.y;
      live.tx.rx_x = dst.x;
      live.tx.rx_y = dst.y;
      live.tx.tx_power_dbm = cfg_.tx_power_dbm;
      live.tx.channel_id = nodes_[static_cast<std::size_t>(link.src)].channel_id;
      live.tx.tx_pattern = src.antennas.front();
      const auto& steer = nodes_[static_cast<std::size_t>(link.src)].steer_override_deg;
      live.tx.tx_pattern.boresight_deg = steer ? *steer : cached_bearing(link.src, link.dst);
      live.tx.rx_pattern = dst.antennas.front();
      live.tx.rx_pattern.boresight_deg = cached_bearing(link.dst, link.src);
      active_.push_back(live);
    }
  }

  void resolve_active(std::ofstream& trace) {
    if (active_.empty()) return;

    scratch_txs_.clear();
    for (const auto& live : active_) scratch_txs_.push_back(live.tx);

    scratch_results_.clear();
    if (cfg_.interference_enabled) {
      scratch_results_ = resolve_slot(scratch_txs_, resolve_params_);
    } else {
      for (const auto& tx : scratch_txs_) {
        std::vector<ActiveTransmission> alone{tx};
        auto r = resolve_slot(alone, resolve_params_);
        scratch_results_.push_back(r.front());
      }
    }

    for (std::size_t i = 0; i < active_.size(); ++i) {
      const auto& live = active_[i];
      const auto& res = scratch_results_[i];
      auto& st = nodes_[static_cast<std::size_t>(live.owner)];
      auto& link = topo_.links[static_cast<std::size_t>(live.link_id)];
      Packet& pkt = link.queue.front();

      if (res.outcome == SlotOutcome::Success) {
        ++metrics_.success_count;
        const double rate = throughput_bps(res.sinr, cfg_.throughput);
        const double chunk = rate * slot_s_;
        pkt.progress_bits += chunk;
        metrics_.per_link_capacity_bits[static_cast<std::size_t>(live.link_id)] += chunk;
        record_measurement(st, link.kind, res.sinr);
        link_mu_[static_cast<std::size_t>(live.link_id)] = std::max(res.sinr, 1e-9);
        if (pkt.progress_bits >= pkt.size_bits) {
          if (cfg_.strategy.kind == StrategyKind::Proposed) mark_good(live.link_id);
          report_to_controller(link, res);  // one status report per delivery
          complete_packet(live, st, link);
        }
      } else {
        if (res.outcome == SlotOutcome::Collision) {
          ++metrics_.collision_count;
        } else {
          ++metrics_.interfered_count;
          metrics_.last_interfered_time_s = now_;
          if (link.kind == LinkKind::Access)
            ++metrics_.per_ue_interfered[static_cast<std::size_t>(link.dst)];
          if (cfg_.strategy.kind == StrategyKind::Proposed) mark_bad(live.link_id);
        }
        record_measurement(st, link.kind, res.sinr);
        link_mu_[static_cast<std::size_t>(live.link_id)] = std::max(res.sinr, 1e-9);
        report_to_controller(link, res);  // one status report per failed attempt
        fail_packet(live, st, link);
      }
      if (trace.is_open()) {
        trace << now_ << ',' << live.tx.tx_node << ",transmitting,," << outcome_name(res.outcome) << "\n";
      }
    }
  }

  void record_measurement(NodeState& st, LinkKind kind, double sinr) {
    if (kind == LinkKind::Access) {
      st.meas_access = sinr;
    } else {
      st.meas_backhaul = sinr;
    }
  }

  // Persistent receiver-side interference rests the victim's link with an
  // exponentially escalating hold-off; one clean delivery resets it.
  void mark_bad(int link_id) {
    int& streak = link_bad_streak_[static_cast<std::size_t>(link_id)];
    streak = std::min(streak + 1, 3);
    const double hold = static_cast<double>(cfg_.interfered_backoff_slots) *
                        static_cast<double>(1 << (streak - 1)) * slot_s_;
    link_bad_until_[static_cast<std::size_t>(link_id)] = now_ + hold;
  }

  void mark_good(int link_id) { link_bad_streak_[static_cast<std::size_t>(link_id)] = 0; }

  void complete_packet(const LiveTx& live, NodeState& st, LinkState& link) {
    Packet pkt = link.queue.front();
    link.queue.pop_front();
    if (link.kind == LinkKind::Access) {
      ++metrics_.delivered;
      metrics_.delivered_bits += pkt.size_bits;
      metrics_.per_ue_delivered_bits[static_cast<std::size_t>(pkt.dst)] += pkt.size_bits;
      metrics_.per_node_delivered_bits[static_cast<std::size_t>(link.src)] += pkt.size_bits;
      metrics_.per_link_delivered_bits[static_cast<std::size_t>(live.link_id)] += pkt.size_bits;
    } else {
      metrics_.per_link_delivered_bits[static_cast<std::size_t>(live.link_id)] += pkt.size_bits;
      forward_packet(std::move(pkt), link.dst);
    }
    if (topo_.node(live.owner).kind == NodeKind::WigigAp) dcf_notify(st.mac, true, cfg_.dcf);
  }

  // Continue a packet toward its UE after finishing a backhaul hop at `at`.
  void forward_packet(Packet pkt, int at) {
    pkt.progress_bits = 0.0;
    pkt.attempts = 0;
    const int serving = topo_.serving[static_cast<std::size_t>(pkt.dst)];
    if (serving < 0) return;  // UE detached (should not happen)
    if (serving == at) {
      const int li = access_link_of(pkt.dst);
      if (li >= 0) topo_.links[static_cast<std::size_t>(li)].queue.push_back(std::move(pkt));
      return;
    }
    // walk the parent chain of the serving node until just below `at`
    if (topo_.node(serving).kind != NodeKind::IabNode) {
      const int li = access_link_of(pkt.dst);
      if (li >= 0) topo_.links[static_cast<std::size_t>(li)].queue.push_back(std::move(pkt));
      return;
    }
    int cur = serving;
    while (topo_.serving[static_cast<std::size_t>(cur)] != at &&
           topo_.serving[static_cast<std::size_t>(cur)] != topo_.donor_id()) {
      cur = topo_.serving[static_cast<std::size_t>(cur)];
    }
    const int hop = nodes_[static_cast<std::size_t>(cur)].inbound_backhaul;
    if (hop >= 0) topo_.links[static_cast<std::size_t>(hop)].queue.push_back(std::move(pkt));
  }

  void fail_packet(const LiveTx& live, NodeState& st, LinkState& link) {
    Packet& pkt = link.queue.front();
    pkt.progress_bits = 0.0;
    ++pkt.attempts;
    if (pkt.attempts >= cfg_.retry_cap) {
      link.queue.pop_front();
      ++metrics_.dropped;
      ++metrics_.dropped_retry;
    }
    if (topo_.node(live.owner).kind == NodeKind::WigigAp) dcf_notify(st.mac, false, cfg_.dcf);
    end_burst(st);
  }

  void report_to_controller(const LinkState& link, const ReceptionResult& res) {
    if (link.kind != LinkKind::Access) return;
    const auto serving_kind = topo_.node(link.src).kind;
    if (serving_kind != NodeKind::IabNode && serving_kind != NodeKind::Donor) return;
    ChannelReport rep;
    rep.ue = link.dst;
    rep.serving = link.src;
    rep.sinr_db = 10.0 * std::log10(std::max(res.sinr, 1e-30));
    if (res.outcome == SlotOutcome::Interfered) rep.interferer = res.interferer;
    rep.timestamp_s = now_;
    controller_.ingest(rep);
  }

  void advance_bursts() {
    for (const auto& node : topo_.nodes) {
      auto& st = nodes_[static_cast<std::size_t>(node.id)];
      if (!st.in_burst) continue;
      if (st.hold) {
        st.hold = false;
        st.mac.phase = MacPhase::Transmitting;
        continue;
      }
      if (st.burst_link < 0) {
        end_burst(st);
        continue;
      }
      auto& link = topo_.links[static_cast<std::size_t>(st.burst_link)];
      --st.budget_slots;
      st.mac.cot_remaining_s = std::max(0.0, st.mac.cot_remaining_s - slot_s_);

      if (link.queue.empty()) {
        // head packet finished this slot; decide whether the grant continues
        if (st.budget_slots <= 0 || !grant_still_valid(node, st)) {
          end_burst(st);
        } else {
          auto choice = tentative_choice(node, st);
          if (choice && choice->link_id >= 0 &&
              !topo_.links[static_cast<std::size_t>(choice->link_id)].queue.empty() &&
              same_kind(choice->kind, link.kind)) {
            st.burst_link = choice->link_id;
          } else {
            end_burst(st);
          }
        }
        continue;
      }

      if (st.budget_slots <= 0) {
        // budget exhausted mid-packet: treat as a failed attempt so oversized
        // packets cannot occupy the medium forever
        auto& pkt = link.queue.front();
        if (pkt.progress_bits > 0.0) {
          pkt.progress_bits = 0.0;
          ++pkt.attempts;
          if (pkt.attempts >= cfg_.retry_cap) {
            link.queue.pop_front();
            ++metrics_.dropped;
            ++metrics_.dropped_retry;
          }
        }
        end_burst(st);
      }
    }
  }

  static bool same_kind(LinkKind a, LinkKind b) { return a == b; }

  bool grant_still_valid(const NodeRecord& node, NodeState& st) {
    if (node.kind == NodeKind::WigigAp) return true;
    const auto& link = topo_.links[static_cast<std::size_t>(st.burst_link)];
    if (cfg_.strategy.kind == StrategyKind::Probabilistic)
      return st.subframe_pool == link.kind;
    if (cfg_.strategy.kind != StrategyKind::Baseline) return true;
    // a baseline grant must not outlive its subframe type at packet boundaries
    const std::size_t access_len = total_access_queue(st);
    const std::size_t backhaul_len =
        st.inbound_backhaul >= 0 ? topo_.links[static_cast<std::size_t>(st.inbound_backhaul)].queue.size()
                                 : 0;
    const auto d = baseline_decide(st.frame, current_subframe(), access_len, backhaul_len);
    if (d == BaselineDecision::None) return false;
    return (d == BaselineDecision::Access) == (link.kind == LinkKind::Access);
  }

  // Donor-attached UEs are served out of band (the donor falls back to its
  // licensed carrier), so they see contention-free service.
  void serve_donor_direct() {
    auto& donor_state = nodes_[static_cast<std::size_t>(topo_.donor_id())];
    for (int li : donor_state.access_links) {
      auto& link = topo_.links[static_cast<std::size_t>(li)];
      if (link.queue.empty()) continue;
      Packet& pkt = link.queue.front();
      const double sinr = db_to_linear(link.sinr_estimate_db);
      const double chunk = throughput_bps(sinr, cfg_.throughput) * slot_s_;
      pkt.progress_bits += chunk;
      metrics_.per_link_capacity_bits[static_cast<std::size_t>(li)] += chunk;
      if (pkt.progress_bits >= pkt.size_bits) {
        Packet done = pkt;
        link.queue.pop_front();
        ++metrics_.delivered;
        metrics_.delivered_bits += done.size_bits;
        metrics_.per_ue_delivered_bits[static_cast<std::size_t>(done.dst)] += done.size_bits;
        metrics_.per_node_delivered_bits[static_cast<std::size_t>(link.src)] += done.size_bits;
        metrics_.per_link_delivered_bits[static_cast<std::size_t>(li)] += done.size_bits;
      }
    }
  }

  // ---- controller ----------------------------------------------------------

  // The probabilistic strategy reserves each subframe for one pool, drawn
  // with the split probability; a reserved period whose pool is empty is
  // forfeited, mirroring the blind division of resources.
  void on_subframe_boundary() {
    if (cfg_.strategy.kind != StrategyKind::Probabilistic) return;
    for (const auto& node : topo_.nodes) {
      if (node.kind != NodeKind::IabNode) continue;
      auto& st = nodes_[static_cast<std::size_t>(node.id)];
      st.subframe_pool =
          st.route_rng.uniform() < cfg_.strategy.delta ? LinkKind::Backhaul : LinkKind::Access;
    }
  }

  void on_frame_boundary() {
    for (const auto& node : topo_.nodes) {
      if (node.kind != NodeKind::IabNode) continue;
      auto& st = nodes_[static_cast<std::size_t>(node.id)];
      if (st.meas_access > 0.0) st.mu_access = st.meas_access;
      if (st.meas_backhaul > 0.0) st.mu_backhaul = st.meas_backhaul;
      st.meas_access = -1.0;
      st.meas_backhaul = -1.0;
      if (cfg_.strategy.kind == StrategyKind::Baseline && cfg_.strategy.adaptive_tdd &&
          cfg_.strategy.tdd_pattern.empty()) {
        const std::size_t backhaul_len =
            st.inbound_backhaul >= 0
                ? topo_.links[static_cast<std::size_t>(st.inbound_backhaul)].queue.size()
                : 0;
        st.frame = TddFrame::standard(
            adapt_tdd_config(total_access_queue(st), backhaul_len, st.frame.config_index));
      }
    }
    if (!cfg_.controller_enabled) return;
    auto actions = controller_.mitigate(topo_, tparams_, now_);
    for (auto& a : actions) pending_actions_.push_back({now_ + cfg_.controller_delay_s, a});
  }

  void apply_due_reconfigurations() {
    while (next_action_ < pending_actions_.size() && pending_actions_[next_action_].first <= now_) {
      apply_reconfiguration(pending_actions_[next_action_].second);
      ++next_action_;
    }
  }

  void apply_reconfiguration(const Reconfiguration& act) {
    if (act.kind == Reconfiguration::Kind::ResteerBeam) {
      nodes_[static_cast<std::size_t>(act.node)].steer_override_deg = act.new_boresight_deg;
      return;
    }
    // ReassignUe: retarget the UE's access link onto the new serving node.
    const int ue = act.node;
    const int li = access_link_of(ue);
    const int old_serving = topo_.serving[static_cast<std::size_t>(ue)];
    if (li < 0 || act.new_serving < 0 || act.new_serving == old_serving) return;
    auto& link = topo_.links[static_cast<std::size_t>(li)];
    auto& old_list = nodes_[static_cast<std::size_t>(old_serving)].access_links;
    old_list.erase(std::remove(old_list.begin(), old_list.end(), li), old_list.end());
    for (auto& live_owner : nodes_) {
      if (live_owner.burst_link == li) end_burst(live_owner);
    }
    link.src = act.new_serving;
    const auto g = link_geometry(topo_.node(link.src), topo_.node(link.dst));
    link.distance_m = g.distance_m;
    link.static_shadowing_db = pair_shadow(link.src, link.dst);
    LinkBudget b;
    b.tx_power_dbm = cfg_.tx_power_dbm;
    b.combined_gain_db = topo_.node(link.src).antennas.front().mainlobe_gain_dbi +
                         topo_.node(link.dst).antennas.front().mainlobe_gain_dbi;
    b.pathloss_db = pathloss_db(link.distance_m, cfg_.channel, link.static_shadowing_db);
    link.sinr_estimate_db = received_power_dbm(b) - noise_dbm_;
    nodes_[static_cast<std::size_t>(act.new_serving)].access_links.push_back(li);
    topo_.serving[static_cast<std::size_t>(ue)] = act.new_serving;
  }

  // ---- wrap-up ---------------------------------------------------------------

  void finalize_metrics() {
    long long queued = 0;
    for (const auto& link : topo_.links) queued += static_cast<long long>(link.queue.size());
    metrics_.queued_end = queued;
  }

  static const char* phase_name(MacPhase p) {
    switch (p) {
      case MacPhase::Idle: return "idle";
      case MacPhase::Sensing: return "sensing";
      case MacPhase::Backoff: return "backoff";
      case MacPhase::Transmitting: return "transmitting";
      case MacPhase::CotHold: return "cot_hold";
    }
    return "?";
  }

  static const char* outcome_name(SlotOutcome o) {
    switch (o) {
      case SlotOutcome::Success: return "success";
      case SlotOutcome::Collision: return "collision";
      case SlotOutcome::Interfered: return "interfered";
    }
    return "?";
  }

  const SimConfig& cfg_;
  Topology topo_;
  TopologyParams tparams_;
  ResolveParams resolve_params_;
  SdnController controller_{ControllerConfig{}};

  double noise_dbm_ = -87.0;
  double slot_s_ = 5e-6;
  int defer_slots_ = 3;
  long long cot_slots_ = 1;
  long long cot_cap_slots_ = 1;
  long long frame_slots_ = 250;
  long long n_slots_ = 0;
  double now_ = 0.0;
  TddFrame frame_{};
  std::int64_t next_packet_id_ = 1;

  std::vector<NodeState> nodes_;
  std::vector<LiveTx> active_;
  std::vector<ActiveTransmission> scratch_txs_;
  std::vector<ReceptionResult> scratch_results_;
  MediumView scratch_view_;
  std::vector<std::pair<double, Reconfiguration>> pending_actions_;
  std::size_t next_action_ = 0;

  std::vector<double> base_power_mw_;
  std::vector<double> bearing_cache_;
  std::vector<double> link_bad_until_;
  std::vector<int> link_bad_streak_;
  std::vector<double> link_mu_;  // latest per-link reported SINR (linear)

  MetricsRecord metrics_;
};

}  // namespace detail

// Runs one replication on an externally constructed topology (used for
// scripted geometries).
inline MetricsRecord run(const SimConfig& cfg, Topology topo) {
  cfg.validate();
  detail::SimEngine engine(cfg, std::move(topo));
  return engine.run();
}

// Runs one replication end to end: deployment, association, slot loop.
inline MetricsRecord run(const SimConfig& cfg) {
  cfg.validate();
  Topology topo = associate(
      generate(cfg.n_infra, cfg.ue_per_cell, cfg.cell_radius_m, cfg.seed, cfg.topology_params()),
      cfg.topology_params());
  return run(cfg, std::move(topo));
}

struct ReplicationSummary {
  int n_runs = 0;
  std::vector<MetricsRecord> runs;
  std::vector<double> ue_throughput_samples;  // pooled, run-major then UE id order

  double mean_cell_throughput_bps = 0.0;
  double mean_ue_throughput_bps = 0.0;
  double mean_interfered_fraction = 0.0;
  double mean_dropped_fraction = 0.0;
};

// Runs n_runs independent replications with seeds base_seed + i. The result
// is independent of worker_count: workers only race on run indices and every
// aggregation happens in index order afterwards.
inline ReplicationSummary replicate(const SimConfig& cfg, int n_runs, int worker_count = 1) {
  if (n_runs < 1) throw std::invalid_argument("replicate: n_runs must be >= 1");
  cfg.validate();

  ReplicationSummary summary;
  summary.n_runs = n_runs;
  summary.runs.resize(static_cast<std::size_t>(n_runs));

  const int workers = std::max(1, std::min(worker_count, n_runs));
  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_runs) break;
      SimConfig c = cfg;
      c.seed = cfg.seed + static_cast<std::uint64_t>(i);
      summary.runs[static_cast<std::size_t>(i)] = run(c);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  for (const auto& r : summary.runs) {
    summary.mean_cell_throughput_bps += r.cell_throughput_bps();
    summary.mean_ue_throughput_bps += r.mean_ue_throughput_bps();
    summary.mean_interfered_fraction += r.interfered_fraction();
    summary.mean_dropped_fraction += r.dropped_fraction();
    for (int ue : r.ue_ids) {
      summary.ue_throughput_samples.push_back(
          r.duration_s > 0.0 ? r.per_ue_delivered_bits[static_cast<std::size_t>(ue)] / r.duration_s : 0.0);
    }
  }
  const double inv = 1.0 / static_cast<double>(n_runs);
  summary.mean_cell_throughput_bps *= inv;
  summary.mean_ue_throughput_bps *= inv;
  summary.mean_interfered_fraction *= inv;
  summary.mean_dropped_fraction *= inv;
  return summary;
}

}  // namespace iabsim
