#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace iabsim {

// Purpose tags keep RNG streams disjoint per (seed, node, purpose) so that
// adding or reordering consumers never shifts another stream's draws.
enum class RngPurpose : std::uint64_t {
  Placement = 1,
  Shadowing = 2,
  Arrivals = 3,
  Backoff = 4,
  PacketSize = 5,
  Routing = 6,
  DestPick = 7,
  Fading = 8,
  Generic = 9,
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

}  // namespace detail

// Counter-based stream: the state is (key, counter) and every output is a
// hash of the pair, so streams can be created cheaply anywhere and draws are
// independent of evaluation order across streams.
class RngStream {
 public:
  RngStream() : RngStream(0, 0, 0) {}

  RngStream(std::uint64_t seed, std::uint64_t substream, RngPurpose purpose)
      : RngStream(seed, substream, static_cast<std::uint64_t>(purpose)) {}

  RngStream(std::uint64_t seed, std::uint64_t substream, std::uint64_t purpose) {
    std::uint64_t k = detail::mix64(seed + detail::kGolden);
    k = detail::mix64(k ^ (substream + detail::kGolden));
    k = detail::mix64(k ^ (purpose * 0xD1B54A32D192ED03ull + detail::kGolden));
    key_ = k;
  }

  std::uint64_t next_u64() { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound); bound must be >= 1.
  std::uint64_t uniform_int(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      std::uint64_t thresh = (0 - bound) % bound;
      while (low < thresh) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double normal(double mean, double stddev) {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    return mean + stddev * z;
  }

  double exponential(double rate) {
    double u = 1.0 - uniform();
    return -std::log(u) / rate;
  }

  // Knuth's product method, split additively for large means so the loop
  // count stays bounded.
  std::uint64_t poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    std::uint64_t total = 0;
    while (mean > 32.0) {
      total += poisson_knuth(32.0);
      mean -= 32.0;
    }
    return total + poisson_knuth(mean);
  }

 private:
  std::uint64_t poisson_knuth(double mean) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Deterministic one-shot draw for ad-hoc per-pair quantities (e.g. shadowing
// between two nodes) without storing a stream.
inline double pair_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, RngPurpose purpose,
                          double mean, double stddev) {
  if (a > b) std::swap(a, b);
  RngStream s(seed, detail::mix64(a * 0x100000001B3ull + b), purpose);
  return s.normal(mean, stddev);
}

}  // namespace iabsim
