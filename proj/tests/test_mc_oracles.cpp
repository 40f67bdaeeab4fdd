#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "iabsim/mac_analytics.hpp"
#include "oracles.hpp"

using namespace iabsim;

TEST_CASE("DCF Monte Carlo attempt rate matches the zero-collision limit") {
  for (int c : {4, 16, 64}) {
    const auto mc = oracles::dcf_attempt_rate(c, 4, 1'000'000, 42);
    const double expected = 2.0 / (c + 1.0);
    INFO("C=" << c << " rate=" << mc.rate());
    CHECK(std::abs(mc.rate() - expected) < 0.01 * expected);
  }
}

TEST_CASE("LBT Monte Carlo attempt rate matches the vanishing-collision limit") {
  for (int z : {1, 8, 16, 64}) {
    const auto mc = oracles::lbt_attempt_rate(z, 1'000'000, 43);
    const double expected = 2.0 / (z + 1.0);
    INFO("Z=" << z << " rate=" << mc.rate());
    CHECK(std::abs(mc.rate() - expected) < 0.01 * expected);
  }
}

TEST_CASE("DCF contention window doubles per collision up to the stage cap") {
  DcfParams p;
  p.max_backoff = 8;
  p.stage_count = 3;
  RngStream rng(44, 0, RngPurpose::Backoff);

  for (int collisions = 0; collisions <= 5; ++collisions) {
    MacState proto;
    for (int k = 0; k < collisions; ++k) dcf_notify(proto, false, p);
    const int window = 8 << std::min(collisions, 3);

    int max_seen = 0;
    int min_seen = window;
    for (int trial = 0; trial < 20000; ++trial) {
      MacState st = proto;
      st.phase = MacPhase::Idle;
      dcf_step(st, Medium::Busy, p, rng);  // busy slot: draw happens, counter frozen
      max_seen = std::max(max_seen, st.backoff_counter);
      min_seen = std::min(min_seen, st.backoff_counter);
    }
    INFO("collisions=" << collisions << " window=" << window);
    CHECK(max_seen == window - 1);
    CHECK(min_seen == 0);
  }
}

TEST_CASE("tagged-station Monte Carlo reproduces the fixed point") {
  struct Case {
    int nw, ni;
  };
  for (const Case tc : {Case{2, 2}, Case{5, 5}, Case{10, 10}}) {
    const auto fp = solve_fixed_point(tc.nw, tc.ni, 16, 4, 16);
    const auto mc = oracles::tagged_dcf_contention(tc.nw, tc.ni, 16, 4, fp.wifi_access_prob,
                                                   fp.iab_access_prob, 2'000'000, 45);
    INFO("nw=" << tc.nw << " ni=" << tc.ni << " mc_pcw=" << mc.collision_prob()
               << " fp_pcw=" << fp.wifi_collision_prob << " mc_tau=" << mc.attempt_rate()
               << " fp_tau=" << fp.wifi_access_prob);
    CHECK(std::abs(mc.collision_prob() - fp.wifi_collision_prob) < 0.02 * fp.wifi_collision_prob);
    CHECK(std::abs(mc.attempt_rate() - fp.wifi_access_prob) < 0.02 * fp.wifi_access_prob);
  }
}

TEST_CASE("coupled DCF population satisfies the per-station law") {
  for (int n : {2, 5, 10}) {
    const auto mc = oracles::dcf_population(n, 16, 4, 2'000'000, 46);
    DcfParams p;
    p.collision_prob = mc.collision_prob;
    p.max_backoff = 16;
    p.stage_count = 4;
    const double tau_expected = wifi_access_probability(p);
    INFO("n=" << n << " measured tau=" << mc.attempt_rate << " eq5(at measured p)=" << tau_expected);
    CHECK(std::abs(mc.attempt_rate - tau_expected) < 0.02 * tau_expected);
  }
}
