#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "iabsim/channel.hpp"
#include "iabsim/mac_analytics.hpp"
#include "iabsim/rng.hpp"
#include "iabsim/topology.hpp"

namespace iabsim {

enum class Medium { Idle, Busy };

enum class MacPhase { Idle, Sensing, Backoff, Transmitting, CotHold };

// Per-node medium-access state. The step functions below operate on the
// contention-slot abstraction; defer periods and burst bookkeeping are the
// engine's job.
struct MacState {
  MacPhase phase = MacPhase::Idle;
  int backoff_counter = 0;
  int current_stage = 0;  // DCF only
  double cot_remaining_s = 0.0;
};

struct CcaConfig {
  double threshold_dbm = -63.0;
  double slot_duration_s = 5e-6;
  double defer_duration_s = 15e-6;
  double cot_max_s = 9e-3;

  void validate() const {
    if (!std::isfinite(threshold_dbm)) throw std::invalid_argument("CcaConfig: threshold must be finite");
    if (!(slot_duration_s > 0.0 && defer_duration_s > 0.0 && cot_max_s > 0.0))
      throw std::invalid_argument("CcaConfig: durations must be > 0");
  }
};

// What one node's directional sensor hears in a slot: each active
// transmission's power after both sides' antenna gains.
struct SensedTransmission {
  int tx_node = -1;
  int rx_node = -1;
  double power_dbm = kNoPower;
};

struct MediumView {
  int sensor = -1;
  std::vector<SensedTransmission> active;
};

// Energy-detect CCA: busy iff the linear sum of sensed powers reaches the
// threshold.
inline Medium cca(const MediumView& view, const CcaConfig& cfg) {
  double total_mw = 0.0;
  for (const auto& s : view.active) total_mw += dbm_to_mw(s.power_dbm);
  return total_mw >= dbm_to_mw(cfg.threshold_dbm) ? Medium::Busy : Medium::Idle;
}

namespace detail {

inline int dcf_window(const DcfParams& p, int stage) {
  return p.max_backoff << std::min(stage, p.stage_count);
}

}  // namespace detail

// One contention slot of binary exponential backoff. Entering from Idle draws
// a fresh counter at the current stage, then the slot is processed normally:
// freeze on Busy, transmit at zero, otherwise decrement. Returns true when a
// transmission starts in this slot.
inline bool dcf_step(MacState& st, Medium medium, const DcfParams& p, RngStream& rng) {
  if (st.phase == MacPhase::Transmitting || st.phase == MacPhase::CotHold) return false;
  if (st.phase == MacPhase::Idle) {
    st.backoff_counter = static_cast<int>(rng.uniform_int(
        static_cast<std::uint64_t>(detail::dcf_window(p, st.current_stage))));
    st.phase = MacPhase::Backoff;
  }
  if (medium == Medium::Busy) return false;
  if (st.backoff_counter == 0) {
    st.phase = MacPhase::Transmitting;
    return true;
  }
  --st.backoff_counter;
  return false;
}

// Post-attempt stage update: collisions escalate the window (capped at the
// stage count), success resets it.
inline void dcf_notify(MacState& st, bool success, const DcfParams& p) {
  st.current_stage = success ? 0 : std::min(st.current_stage + 1, p.stage_count);
}

// One contention slot of single-stage LBT with a Uniform[0, Z-1] window.
// Winning a slot arms the full channel-occupancy budget.
inline bool lbt_step(MacState& st, Medium medium, int cw_size, double cot_max_s, RngStream& rng) {
  if (cw_size < 1) throw std::invalid_argument("lbt_step: cw_size must be >= 1");
  if (st.phase == MacPhase::Transmitting || st.phase == MacPhase::CotHold) return false;
  if (st.phase == MacPhase::Idle) {
    st.backoff_counter = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cw_size)));
    st.phase = MacPhase::Backoff;
  }
  if (medium == Medium::Busy) return false;
  if (st.backoff_counter == 0) {
    st.phase = MacPhase::Transmitting;
    st.cot_remaining_s = cot_max_s;
    return true;
  }
  --st.backoff_counter;
  return false;
}

enum class SlotOutcome { Success, Collision, Interfered };

// One active directional transmission in the current slot. Patterns carry the
// live boresights.
struct ActiveTransmission {
  int tx_node = -1;
  int rx_node = -1;
  double tx_x = 0.0, tx_y = 0.0;
  double rx_x = 0.0, rx_y = 0.0;
  AntennaPattern tx_pattern{};
  AntennaPattern rx_pattern{};
  double tx_power_dbm = 23.0;
  int channel_id = 0;
};

struct ReceptionResult {
  int tx_node = -1;
  int rx_node = -1;
  SlotOutcome outcome = SlotOutcome::Success;
  double sinr = 0.0;     // linear
  int interferer = -1;   // strongest incorrect-LBT offender, if any
};

struct ResolveParams {
  ChannelParams channel{};
  double noise_dbm = -87.0;
  double decode_threshold_db = 0.0;
  double cca_threshold_dbm = -63.0;
  // Static shadowing lookup keyed by node pair; defaults to none.
  std::function<double(int, int)> shadowing = nullptr;
  // Optional cached fast path: linear received power (mW) of transmission t
  // at the receiver of transmission r, after both directional gains and
  // pathloss. Must agree with the geometric evaluation below.
  std::function<double(const ActiveTransmission& t, const ActiveTransmission& r)> power_mw_override =
      nullptr;
};

namespace detail {

// Received power of transmission t at an arbitrary receiver position with the
// receiver's own listening pattern.
inline double tx_power_at(const ActiveTransmission& t, double rx_x, double rx_y,
                          const AntennaPattern& rx_pattern, const ResolveParams& rp, int rx_node) {
  const double d = std::max(std::hypot(rx_x - t.tx_x, rx_y - t.tx_y), kMinLinkDistanceM);
  const double bear_tx = bearing_deg(t.tx_x, t.tx_y, rx_x, rx_y);
  const double bear_rx = bearing_deg(rx_x, rx_y, t.tx_x, t.tx_y);
  const double off_tx = wrap_deg(bear_tx - t.tx_pattern.boresight_deg);
  const double off_rx = wrap_deg(bear_rx - rx_pattern.boresight_deg);
  const double shadow = rp.shadowing ? rp.shadowing(t.tx_node, rx_node) : 0.0;
  LinkBudget b;
  b.tx_power_dbm = t.tx_power_dbm;
  b.combined_gain_db = effective_gain_db(t.tx_pattern, rx_pattern, off_tx, off_rx);
  b.pathloss_db = pathloss_db(d, rp.channel, shadow);
  return received_power_dbm(b);
}

}  // namespace detail

// Resolves all co-slot transmissions into per-receiver outcomes. A failure is
// tagged Interfered when some foreign transmitter, having itself sensed idle,
// lands energy above the CCA threshold on this receiver (the incorrect-LBT
// signature); a failure among transmissions aimed at the same receiver, or
// with only sub-threshold interference, is a plain Collision.
inline std::vector<ReceptionResult> resolve_slot(const std::vector<ActiveTransmission>& txs,
                                                 const ResolveParams& rp) {
  std::vector<ReceptionResult> results;
  results.reserve(txs.size());
  const double noise_mw = dbm_to_mw(rp.noise_dbm);
  const double cca_mw = dbm_to_mw(rp.cca_threshold_dbm);
  const double threshold = db_to_linear(rp.decode_threshold_db);
  const double aci_lin = db_to_linear(rp.channel.aci_rejection_db);

  auto power_at_receiver = [&rp](const ActiveTransmission& from, const ActiveTransmission& at) {
    if (rp.power_mw_override) return rp.power_mw_override(from, at);
    return dbm_to_mw(detail::tx_power_at(from, at.rx_x, at.rx_y, at.rx_pattern, rp, at.rx_node));
  };

  for (std::size_t i = 0; i < txs.size(); ++i) {
    const auto& t = txs[i];
    ReceptionResult r;
    r.tx_node = t.tx_node;
    r.rx_node = t.rx_node;

    const double signal_mw = power_at_receiver(t, t);
    double interference_mw = 0.0;
    bool same_rx_collision = false;
    int offender = -1;
    double offender_mw = 0.0;
    for (std::size_t j = 0; j < txs.size(); ++j) {
      if (j == i) continue;
      const auto& o = txs[j];
      if (o.tx_node == t.tx_node && o.rx_node == t.rx_node) continue;
      if (o.rx_node == t.rx_node) same_rx_collision = true;
      double p_mw = power_at_receiver(o, t);
      if (o.channel_id != t.channel_id) p_mw /= aci_lin;  // adjacent-channel leakage
      interference_mw += p_mw;
      if (o.rx_node != t.rx_node && p_mw >= cca_mw && p_mw > offender_mw) {
        offender = o.tx_node;
        offender_mw = p_mw;
      }
    }

    r.sinr = signal_mw / (noise_mw + interference_mw);
    if (r.sinr >= threshold) {
      r.outcome = SlotOutcome::Success;
    } else if (!same_rx_collision && offender >= 0) {
      r.outcome = SlotOutcome::Interfered;
      r.interferer = offender;
    } else {
      r.outcome = SlotOutcome::Collision;
    }
    results.push_back(r);
  }
  return results;
}

}  // namespace iabsim
