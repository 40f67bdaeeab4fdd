#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace iabsim {

// DCF (binary exponential backoff) contention parameters.
struct DcfParams {
  double collision_prob = 0.0;  // P_cw
  int max_backoff = 16;         // C, stage-0 window
  int stage_count = 4;          // m, backoff stage cap

  void validate() const {
    if (!(collision_prob >= 0.0 && collision_prob <= 1.0))
      throw std::invalid_argument("DcfParams: collision_prob must be in [0, 1]");
    if (max_backoff < 1) throw std::invalid_argument("DcfParams: max_backoff must be >= 1");
    if (stage_count < 1) throw std::invalid_argument("DcfParams: stage_count must be >= 1");
  }
};

// Single-stage LBT contention parameters.
struct IabLbtParams {
  double collision_prob = 0.0;  // P_cb
  int cw_size = 16;             // Z

  void validate() const {
    if (!(collision_prob >= 0.0 && collision_prob <= 1.0))
      throw std::invalid_argument("IabLbtParams: collision_prob must be in [0, 1]");
    if (cw_size < 1) throw std::invalid_argument("IabLbtParams: cw_size must be >= 1");
  }
};

// Parameters of the probabilistic split-rate expression.
struct ProbSplitParams {
  double split_prob = 0.5;         // delta
  double mean_packet_bits = 12000;  // E[P_k]
  double success_prob = 1.0;        // P_s
  int backhaul_active = 1;          // t
  int access_active = 1;            // t'
  double mean_slot_backhaul_s = 1e-3;  // E[T]
  double mean_slot_access_s = 1e-3;    // E[T']

  void validate() const {
    if (!(split_prob >= 0.0 && split_prob <= 1.0))
      throw std::invalid_argument("ProbSplitParams: split_prob must be in [0, 1]");
    if (!(mean_slot_backhaul_s > 0.0 && mean_slot_access_s > 0.0))
      throw std::invalid_argument("ProbSplitParams: mean slot times must be > 0");
    if ((backhaul_active != 0 && backhaul_active != 1) || (access_active != 0 && access_active != 1))
      throw std::invalid_argument("ProbSplitParams: activity indicators must be 0 or 1");
  }
};

// Per-slot transmission probability of a DCF station under constant collision
// probability. The printed denominator degenerates at P_cw = 1/2, which is
// surfaced as an error; callers must perturb.
inline double wifi_access_probability(const DcfParams& p) {
  p.validate();
  const double pc = p.collision_prob;
  if (pc == 0.5) throw std::domain_error("wifi_access_probability: singular at collision_prob = 0.5");
  const double c = static_cast<double>(p.max_backoff);
  const double one_minus_2p = 1.0 - 2.0 * pc;
  const double denom = one_minus_2p * (c + 1.0) + pc * c * (1.0 - std::pow(2.0 * pc, p.stage_count));
  return 2.0 * one_minus_2p / denom;
}

namespace detail {

inline double clamp_probability(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace detail

// Direct-sum evaluation of the LBT access probability; kept as an independent
// route against the geometric closed form below.
inline double iab_access_probability_direct_sum(const IabLbtParams& p) {
  p.validate();
  const double pc = p.collision_prob;
  const int z = p.cw_size;
  if (pc == 0.0) return 2.0 / (z + 1.0);  // analytic 0/0 limit
  double s = 0.0;
  double term = 1.0;
  for (int j = 1; j <= z; ++j) {
    s += term;
    term *= 1.0 - pc;
  }
  const double num = pc * s / z;
  const double den = 1.0 - (1.0 - pc) * s / z;
  return detail::clamp_probability(num / den);
}

// Per-slot transmission probability of an LBT node with a uniform single-stage
// window; geometric closed form of the direct sum. 1 - (1-pc)^Z goes through
// expm1/log1p so small collision probabilities keep their precision.
inline double iab_access_probability(const IabLbtParams& p) {
  p.validate();
  const double pc = p.collision_prob;
  const int z = p.cw_size;
  if (pc == 0.0) return 2.0 / (z + 1.0);
  const double s = -std::expm1(static_cast<double>(z) * std::log1p(-pc)) / pc;
  const double num = pc * s / z;
  const double den = 1.0 - (1.0 - pc) * s / z;
  return detail::clamp_probability(num / den);
}

struct ContentionFixedPoint {
  double wifi_collision_prob = 0.0;  // P_cw
  double iab_collision_prob = 0.0;   // P_cb
  double wifi_access_prob = 0.0;     // tau_w
  double iab_access_prob = 0.0;      // tau_i
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

// Eq. 5 with the removable singularity nudged, for use inside solvers whose
// iterates may step through 1/2 exactly.
inline double wifi_tau_safe(double pc, int c, int m) {
  if (pc == 0.5) pc = 0.5 - 1e-12;
  DcfParams p;
  p.collision_prob = pc;
  p.max_backoff = c;
  p.stage_count = m;
  return wifi_access_probability(p);
}

inline double iab_tau(double pcb, int z) {
  IabLbtParams p;
  p.collision_prob = pcb;
  p.cw_size = z;
  return iab_access_probability(p);
}

// Collision probabilities seen by each population when everyone transmits
// independently per slot.
inline double coupled_pcw(double tau_w, double tau_i, int n_wifi, int n_iab) {
  if (n_wifi == 0) return 0.0;
  return 1.0 - std::pow(1.0 - tau_w, n_wifi - 1) * std::pow(1.0 - tau_i, n_iab);
}

inline double coupled_pcb(double tau_w, double tau_i, int n_wifi, int n_iab) {
  if (n_iab == 0) return 0.0;
  return 1.0 - std::pow(1.0 - tau_w, n_wifi) * std::pow(1.0 - tau_i, n_iab - 1);
}

}  // namespace detail

// Damped fixed-point iteration on (P_cw, P_cb). Throws on non-convergence,
// carrying the last residual in the message.
inline ContentionFixedPoint solve_fixed_point(int n_wifi, int n_iab, int c, int m, int z,
                                              double tol = 1e-10, double pcw0 = 0.0, double pcb0 = 0.0,
                                              double damping = 0.5, int max_iters = 10000) {
  if (n_wifi < 0 || n_iab < 0 || n_wifi + n_iab < 1)
    throw std::invalid_argument("solve_fixed_point: need at least one contender");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_fixed_point: tol must be > 0");

  double pcw = n_wifi > 0 ? pcw0 : 0.0;
  double pcb = n_iab > 0 ? pcb0 : 0.0;
  double residual = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    const double tau_w = n_wifi > 0 ? detail::wifi_tau_safe(pcw, c, m) : 0.0;
    const double tau_i = n_iab > 0 ? detail::iab_tau(pcb, z) : 0.0;
    const double pcw_next = detail::coupled_pcw(tau_w, tau_i, n_wifi, n_iab);
    const double pcb_next = detail::coupled_pcb(tau_w, tau_i, n_wifi, n_iab);
    residual = std::max(std::abs(pcw_next - pcw), std::abs(pcb_next - pcb));
    if (residual < tol) {
      ContentionFixedPoint out;
      out.wifi_collision_prob = pcw_next;
      out.iab_collision_prob = pcb_next;
      out.wifi_access_prob = n_wifi > 0 ? detail::wifi_tau_safe(pcw_next, c, m) : 0.0;
      out.iab_access_prob = n_iab > 0 ? detail::iab_tau(pcb_next, z) : 0.0;
      out.residual = residual;
      out.iterations = it;
      return out;
    }
    pcw = pcw + damping * (pcw_next - pcw);
    pcb = pcb + damping * (pcb_next - pcb);
  }
  throw std::runtime_error("solve_fixed_point: no convergence after " + std::to_string(max_iters) +
                           " iterations, residual " + std::to_string(residual));
}

// Independent solver: outer bisection on P_cw, inner bisection on P_cb.
// Both residuals are monotone on [0, 1], so the brackets are safe.
inline ContentionFixedPoint solve_fixed_point_bisection(int n_wifi, int n_iab, int c, int m, int z,
                                                        double tol = 1e-12) {
  if (n_wifi < 0 || n_iab < 0 || n_wifi + n_iab < 1)
    throw std::invalid_argument("solve_fixed_point_bisection: need at least one contender");

  auto inner_pcb = [&](double tau_w) {
    if (n_iab == 0) return 0.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double tau_i = detail::iab_tau(mid, z);
      const double r = mid - detail::coupled_pcb(tau_w, tau_i, n_wifi, n_iab);
      (r > 0.0 ? hi : lo) = mid;
      if (hi - lo < tol * 1e-3) break;
    }
    return 0.5 * (lo + hi);
  };

  double pcw = 0.0;
  if (n_wifi > 0) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double tau_w = detail::wifi_tau_safe(mid, c, m);
      const double pcb_mid = inner_pcb(tau_w);
      const double tau_i = n_iab > 0 ? detail::iab_tau(pcb_mid, z) : 0.0;
      const double r = mid - detail::coupled_pcw(tau_w, tau_i, n_wifi, n_iab);
      (r > 0.0 ? hi : lo) = mid;
      if (hi - lo < tol) break;
    }
    pcw = 0.5 * (lo + hi);
  }

  const double tau_w = n_wifi > 0 ? detail::wifi_tau_safe(pcw, c, m) : 0.0;
  const double pcb = inner_pcb(tau_w);
  const double tau_i = n_iab > 0 ? detail::iab_tau(pcb, z) : 0.0;

  ContentionFixedPoint out;
  out.wifi_collision_prob = n_wifi > 0 ? pcw : 0.0;
  out.iab_collision_prob = pcb;
  out.wifi_access_prob = tau_w;
  out.iab_access_prob = tau_i;
  out.residual = std::max(std::abs(pcw - detail::coupled_pcw(tau_w, tau_i, n_wifi, n_iab)),
                          std::abs(pcb - detail::coupled_pcb(tau_w, tau_i, n_wifi, n_iab)));
  return out;
}

// Rate of the probabilistic split strategy: the access-probability prefactor
// times the delta-weighted per-pool service rates.
inline double probabilistic_strategy_rate(double access_prob, const ProbSplitParams& p) {
  p.validate();
  if (!(access_prob >= 0.0 && access_prob <= 1.0))
    throw std::invalid_argument("probabilistic_strategy_rate: access_prob must be in [0, 1]");
  const double backhaul_rate = p.mean_packet_bits * p.success_prob / p.mean_slot_backhaul_s;
  const double access_rate = p.mean_packet_bits * p.success_prob / p.mean_slot_access_s;
  return access_prob * (p.split_prob * backhaul_rate * p.backhaul_active +
                        (1.0 - p.split_prob) * access_rate * p.access_active);
}

}  // namespace iabsim
