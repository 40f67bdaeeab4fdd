#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "iabsim/lbt_mac.hpp"
#include "iabsim/rng.hpp"

namespace iabsim {

enum class SubframeType : char { Access = 'A', Backhaul = 'B', Special = 'S' };

// 10-subframe frame pattern. The seven standard patterns map the LTE TDD
// UL/DL configurations with D->B, U->A, S->S.
struct TddFrame {
  int config_index = 0;
  std::array<SubframeType, 10> subframes{};

  void validate() const {
    bool has_special = false;
    for (auto s : subframes) {
      if (s != SubframeType::Access && s != SubframeType::Backhaul && s != SubframeType::Special)
        throw std::invalid_argument("TddFrame: invalid subframe type");
      has_special |= s == SubframeType::Special;
    }
    if (!has_special) throw std::invalid_argument("TddFrame: at least one special subframe required");
  }

  static TddFrame from_pattern(std::string_view pattern, int config_index = -1) {
    if (pattern.size() != 10) throw std::invalid_argument("TddFrame: pattern must have 10 entries");
    TddFrame f;
    f.config_index = config_index;
    for (std::size_t i = 0; i < 10; ++i) {
      const char c = pattern[i];
      if (c != 'A' && c != 'B' && c != 'S')
        throw std::invalid_argument("TddFrame: pattern entries must be A, B or S");
      f.subframes[i] = static_cast<SubframeType>(c);
    }
    f.validate();
    return f;
  }

  static TddFrame standard(int config_index) {
    static constexpr std::array<std::string_view, 7> kPatterns = {
        "BSAAABSAAA", "BSAABBSAAB", "BSABBBSABB", "BSAAABBBBB",
        "BSAABBBBBB", "BSABBBBBBB", "BSAAABSAAB",
    };
    if (config_index < 0 || config_index > 6)
      throw std::invalid_argument("TddFrame: config index must be 0..6");
    return from_pattern(kPatterns[static_cast<std::size_t>(config_index)], config_index);
  }
};

enum class StrategyKind { Baseline, Probabilistic, Proposed };

inline const char* to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Baseline: return "baseline";
    case StrategyKind::Probabilistic: return "probabilistic";
    case StrategyKind::Proposed: return "proposed";
  }
  return "?";
}

inline std::optional<StrategyKind> strategy_from_string(std::string_view s) {
  if (s == "baseline") return StrategyKind::Baseline;
  if (s == "probabilistic") return StrategyKind::Probabilistic;
  if (s == "proposed") return StrategyKind::Proposed;
  return std::nullopt;
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::Proposed;
  int tdd_config = 1;
  bool adaptive_tdd = false;   // baseline re-selects its pattern per frame from queue demand
  double delta = 0.5;          // probabilistic split
  double cot_s = 9e-3;         // per-grant occupancy budget
  int pool_capacity = 10;      // sessions per pool (probabilistic)
  std::string tdd_pattern;     // optional override, 10 chars of A/B/S

  void validate() const {
    if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("StrategyConfig: delta must be in [0, 1]");
    if (!(cot_s > 0.0)) throw std::invalid_argument("StrategyConfig: cot must be > 0");
    if (pool_capacity < 1) throw std::invalid_argument("StrategyConfig: pool_capacity must be >= 1");
    if (tdd_config < 0 || tdd_config > 6) throw std::invalid_argument("StrategyConfig: tdd_config must be 0..6");
    if (!tdd_pattern.empty()) TddFrame::from_pattern(tdd_pattern);
  }

  TddFrame frame() const {
    return tdd_pattern.empty() ? TddFrame::standard(tdd_config) : TddFrame::from_pattern(tdd_pattern);
  }
};

// Per-link reported SINR (linear) feeding the weighted-fair decision; the
// weight of each link is 1/mu.
struct SchedulerWeights {
  double access_sinr = 1.0;    // mu of the access link
  double backhaul_sinr = 1.0;  // mu of the backhaul link

  void validate() const {
    if (!(access_sinr > 0.0 && backhaul_sinr > 0.0))
      throw std::invalid_argument("SchedulerWeights: reported SINR must be > 0");
  }
};

// Access share of the non-special entries, used to match a pattern to the
// current traffic mix.
inline double access_share(const TddFrame& f) {
  int a = 0, total = 0;
  for (auto sf : f.subframes) {
    if (sf == SubframeType::Special) continue;
    ++total;
    a += sf == SubframeType::Access;
  }
  return total > 0 ? static_cast<double>(a) / static_cast<double>(total) : 0.5;
}

// Dynamic pattern adaptation: pick the standard configuration whose access
// share best matches the demand split; ties go to the lower index.
inline int adapt_tdd_config(std::size_t access_len, std::size_t backhaul_len, int fallback) {
  if (access_len + backhaul_len == 0) return fallback;
  const double demand =
      static_cast<double>(access_len) / static_cast<double>(access_len + backhaul_len);
  int best = fallback;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int cfg = 0; cfg <= 6; ++cfg) {
    const double gap = std::abs(access_share(TddFrame::standard(cfg)) - demand);
    if (gap < best_gap - 1e-12) {
      best = cfg;
      best_gap = gap;
    }
  }
  return best;
}

enum class BaselineDecision { Access, Backhaul, None };

// Static pattern lookup with the special subframe resolved by queue length
// (longer queue wins, tie goes to backhaul). Returns None when the selected
// queue is empty — the slot is forfeited.
inline BaselineDecision baseline_decide(const TddFrame& frame, int subframe_idx, std::size_t access_len,
                                        std::size_t backhaul_len) {
  if (subframe_idx < 0 || subframe_idx > 9)
    throw std::out_of_range("baseline_decide: subframe index must be 0..9");
  SubframeType entry = frame.subframes[static_cast<std::size_t>(subframe_idx)];
  if (entry == SubframeType::Special)
    entry = access_len > backhaul_len ? SubframeType::Access : SubframeType::Backhaul;
  if (entry == SubframeType::Access)
    return access_len > 0 ? BaselineDecision::Access : BaselineDecision::None;
  return backhaul_len > 0 ? BaselineDecision::Backhaul : BaselineDecision::None;
}

enum class RouteDecision { BackhaulPool, AccessPool, Dropped };

struct PoolState {
  int backhaul_occupied = 0;
  int access_occupied = 0;
  int capacity = 10;  // per pool
};

// Blind delta-split of an arriving session: backhaul pool with probability
// delta, otherwise access pool; dropped when the selected pool is full.
inline RouteDecision probabilistic_route(double delta, const PoolState& pools, RngStream& rng) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("probabilistic_route: delta in [0, 1]");
  if (rng.uniform() < delta)
    return pools.backhaul_occupied < pools.capacity ? RouteDecision::BackhaulPool : RouteDecision::Dropped;
  return pools.access_occupied < pools.capacity ? RouteDecision::AccessPool : RouteDecision::Dropped;
}

struct Grant {
  LinkKind link = LinkKind::Backhaul;
  double duration_s = 0.0;
};

// Medium-status-first decision: nothing is allocated on a busy medium; on an
// idle one the nonempty-queue link with the larger weight 1/mu gets the slot
// for up to one COT. Equal weights go to backhaul.
inline std::optional<Grant> proposed_decide(Medium medium, const SchedulerWeights& w, std::size_t access_len,
                                            std::size_t backhaul_len, double cot_s) {
  w.validate();
  if (medium == Medium::Busy) return std::nullopt;
  if (access_len == 0 && backhaul_len == 0) return std::nullopt;
  Grant g;
  g.duration_s = cot_s;
  if (backhaul_len == 0) {
    g.link = LinkKind::Access;
  } else if (access_len == 0) {
    g.link = LinkKind::Backhaul;
  } else {
    const double zeta_a = 1.0 / w.access_sinr;
    const double zeta_b = 1.0 / w.backhaul_sinr;
    g.link = zeta_a > zeta_b ? LinkKind::Access : LinkKind::Backhaul;
  }
  return g;
}

}  // namespace iabsim
