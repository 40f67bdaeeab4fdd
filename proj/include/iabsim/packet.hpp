#pragma once

#include <cstdint>

namespace iabsim {

// One queued transfer unit. `progress_bits` tracks partial delivery within a
// burst; it resets when an attempt fails.
struct Packet {
  std::int64_t id = 0;
  double size_bits = 0.0;
  double arrival_time_s = 0.0;
  int src = -1;
  int dst = -1;
  int attempts = 0;
  double progress_bits = 0.0;
};

}  // namespace iabsim
