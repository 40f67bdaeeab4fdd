#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "iabsim/mac_analytics.hpp"

using namespace iabsim;

namespace {

DcfParams dcf(double pc, int c, int m) {
  DcfParams p;
  p.collision_prob = pc;
  p.max_backoff = c;
  p.stage_count = m;
  return p;
}

IabLbtParams lbt(double pc, int z) {
  IabLbtParams p;
  p.collision_prob = pc;
  p.cw_size = z;
  return p;
}

}  // namespace

TEST_CASE("wifi access probability closed form") {
  CHECK(wifi_access_probability(dcf(0.0, 15, 3)) == Catch::Approx(0.125).margin(1e-12));
  CHECK(wifi_access_probability(dcf(0.0, 1, 1)) == Catch::Approx(1.0).margin(1e-12));

  SECTION("zero-collision limit is 2/(C+1) across the window range") {
    for (int c = 1; c <= 1024; ++c) {
      const double tau = wifi_access_probability(dcf(0.0, c, 4));
      CHECK(std::abs(tau - 2.0 / (c + 1.0)) < 1e-9);
    }
  }
  SECTION("singularity at one half") {
    CHECK_THROWS_AS(wifi_access_probability(dcf(0.5, 16, 4)), std::domain_error);
  }
  SECTION("valid probabilities below the singularity") {
    for (double pc = 0.0; pc < 0.5; pc += 0.01) {
      const double tau = wifi_access_probability(dcf(pc, 16, 4));
      CHECK(tau >= 0.0);
      CHECK(tau <= 1.0);
    }
  }
  SECTION("parameter validation") {
    CHECK_THROWS_AS(wifi_access_probability(dcf(-0.1, 16, 4)), std::invalid_argument);
    CHECK_THROWS_AS(wifi_access_probability(dcf(0.2, 0, 4)), std::invalid_argument);
  }
}

TEST_CASE("iab access probability closed form") {
  for (double pc : {0.1, 0.5, 1.0}) {
    CHECK(iab_access_probability(lbt(pc, 1)) == Catch::Approx(1.0).margin(1e-12));
  }
  CHECK(iab_access_probability(lbt(1.0, 4)) == Catch::Approx(0.25).margin(1e-12));

  SECTION("vanishing collision probability approaches 2/(Z+1)") {
    CHECK(iab_access_probability(lbt(1e-9, 15)) == Catch::Approx(0.125).margin(1e-4));
    for (int z : {2, 8, 32}) {
      const double limit = 2.0 / (z + 1.0);
      const double err_coarse = std::abs(iab_access_probability(lbt(1e-2, z)) - limit);
      const double err_mid = std::abs(iab_access_probability(lbt(1e-4, z)) - limit);
      const double err_fine = std::abs(iab_access_probability(lbt(1e-6, z)) - limit);
      CHECK(err_mid < err_coarse);
      CHECK(err_fine < err_mid);
      CHECK(err_fine < 1e-4);
      CHECK(iab_access_probability(lbt(0.0, z)) == Catch::Approx(limit).margin(1e-12));
    }
  }
  SECTION("direct sum agrees with the geometric closed form") {
    for (int z = 1; z <= 64; ++z) {
      for (int i = 1; i <= 99; ++i) {
        const double pc = i / 100.0;
        const double a = iab_access_probability(lbt(pc, z));
        const double b = iab_access_probability_direct_sum(lbt(pc, z));
        CHECK(std::abs(a - b) < 1e-12);
      }
    }
  }
  SECTION("monotone decreasing in Z") {
    for (double pc : {0.05, 0.3, 0.7, 0.95}) {
      double prev = 2.0;
      for (int z = 1; z <= 64; ++z) {
        const double tau = iab_access_probability(lbt(pc, z));
        CHECK(tau < prev);
        CHECK(tau >= 0.0);
        CHECK(tau <= 1.0);
        prev = tau;
      }
    }
  }
}

TEST_CASE("fixed point with a single population") {
  SECTION("one wifi station, no collisions") {
    const auto fp = solve_fixed_point(1, 0, 16, 4, 16);
    CHECK(fp.wifi_collision_prob == Catch::Approx(0.0).margin(1e-10));
    CHECK(fp.wifi_access_prob == Catch::Approx(2.0 / 17.0).margin(1e-9));
    CHECK(fp.iab_access_prob == 0.0);
  }
  SECTION("one iab node, no collisions") {
    const auto fp = solve_fixed_point(0, 1, 16, 4, 16);
    CHECK(fp.iab_collision_prob == Catch::Approx(0.0).margin(1e-10));
    CHECK(fp.iab_access_prob == Catch::Approx(2.0 / 17.0).margin(1e-9));
    CHECK(fp.wifi_access_prob == 0.0);
  }
  SECTION("no contenders is invalid") {
    CHECK_THROWS_AS(solve_fixed_point(0, 0, 16, 4, 16), std::invalid_argument);
  }
}

TEST_CASE("fixed point: damped iteration and bisection agree") {
  for (int nw : {1, 5, 10}) {
    for (int ni : {1, 5, 10}) {
      const auto a = solve_fixed_point(nw, ni, 16, 4, 16);
      const auto b = solve_fixed_point_bisection(nw, ni, 16, 4, 16);
      INFO("nw=" << nw << " ni=" << ni);
      CHECK(std::abs(a.wifi_collision_prob - b.wifi_collision_prob) < 1e-8);
      CHECK(std::abs(a.iab_collision_prob - b.iab_collision_prob) < 1e-8);
      CHECK(std::abs(a.wifi_access_prob - b.wifi_access_prob) < 1e-8);
      CHECK(std::abs(a.iab_access_prob - b.iab_access_prob) < 1e-8);
    }
  }
}

TEST_CASE("fixed point is independent of the starting point") {
  const auto ref = solve_fixed_point(5, 5, 16, 4, 16);
  for (double start : {0.1, 0.3, 0.45, 0.7, 0.9}) {
    const auto fp = solve_fixed_point(5, 5, 16, 4, 16, 1e-10, start, 1.0 - start);
    CHECK(std::abs(fp.wifi_collision_prob - ref.wifi_collision_prob) < 1e-8);
    CHECK(std::abs(fp.iab_collision_prob - ref.iab_collision_prob) < 1e-8);
  }
}

TEST_CASE("fixed point residual is below tolerance") {
  const auto fp = solve_fixed_point(8, 3, 32, 5, 8, 1e-10);
  CHECK(fp.residual < 1e-10);
  CHECK(fp.wifi_collision_prob > 0.0);
  CHECK(fp.iab_collision_prob > 0.0);
}

TEST_CASE("probabilistic strategy rate") {
  ProbSplitParams p;
  p.mean_packet_bits = 12000.0;
  p.success_prob = 0.9;
  p.mean_slot_backhaul_s = 1e-3;
  p.mean_slot_access_s = 1e-3;

  SECTION("single-pool reductions") {
    p.split_prob = 1.0;
    p.backhaul_active = 1;
    p.access_active = 0;
    CHECK(probabilistic_strategy_rate(0.5, p) ==
          Catch::Approx(0.5 * 12000.0 * 0.9 / 1e-3).epsilon(1e-12));

    p.split_prob = 0.0;
    p.backhaul_active = 0;
    p.access_active = 1;
    CHECK(probabilistic_strategy_rate(0.5, p) ==
          Catch::Approx(0.5 * 12000.0 * 0.9 / 1e-3).epsilon(1e-12));
  }
  SECTION("both pools active") {
    p.split_prob = 0.5;
    p.backhaul_active = 1;
    p.access_active = 1;
    CHECK(probabilistic_strategy_rate(0.2, p) == Catch::Approx(2.16e6).epsilon(1e-12));
  }
  SECTION("linear in packet size and success probability") {
    p.split_prob = 0.3;
    const double base = probabilistic_strategy_rate(0.4, p);
    ProbSplitParams doubled = p;
    doubled.mean_packet_bits *= 2.0;
    CHECK(probabilistic_strategy_rate(0.4, doubled) == Catch::Approx(2.0 * base).epsilon(1e-12));
    ProbSplitParams half_ps = p;
    half_ps.success_prob *= 0.5;
    CHECK(probabilistic_strategy_rate(0.4, half_ps) == Catch::Approx(0.5 * base).epsilon(1e-12));
  }
  SECTION("validation") {
    ProbSplitParams bad = p;
    bad.split_prob = 1.5;
    CHECK_THROWS_AS(probabilistic_strategy_rate(0.5, bad), std::invalid_argument);
    CHECK_THROWS_AS(probabilistic_strategy_rate(-0.1, p), std::invalid_argument);
  }
}
