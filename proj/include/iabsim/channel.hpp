#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

namespace iabsim {

inline constexpr double kNoPower = -std::numeric_limits<double>::infinity();

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Floating-intercept pathloss parameters plus the multipath/ACI knobs of the
// link model.
struct ChannelParams {
  double alpha_db = 72.0;       // floating intercept
  double beta = 2.92;           // pathloss exponent
  double sigma_db = 0.0;        // shadowing std-dev
  double carrier_freq_hz = 28e9;
  int num_taps = 3;             // multipath component count L
  double aci_rejection_db = 30.0;

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("ChannelParams: beta must be > 0");
    if (sigma_db < 0.0) throw std::invalid_argument("ChannelParams: sigma must be >= 0");
    if (num_taps < 0) throw std::invalid_argument("ChannelParams: num_taps must be >= 0");
    if (aci_rejection_db < 0.0) throw std::invalid_argument("ChannelParams: aci_rejection must be >= 0");
  }
};

// Sectored beam abstraction: full mainlobe gain inside the beamwidth,
// flat sidelobe floor outside.
struct AntennaPattern {
  double mainlobe_gain_dbi = 10.0;
  double beamwidth_deg = 45.0;
  double sidelobe_gain_dbi = -10.0;
  double boresight_deg = 0.0;
  int num_elements = 16;

  void validate() const {
    if (!(beamwidth_deg > 0.0 && beamwidth_deg <= 360.0))
      throw std::invalid_argument("AntennaPattern: beamwidth must be in (0, 360]");
    if (sidelobe_gain_dbi > mainlobe_gain_dbi)
      throw std::invalid_argument("AntennaPattern: sidelobe gain must not exceed mainlobe gain");
    if (num_elements < 1) throw std::invalid_argument("AntennaPattern: num_elements must be >= 1");
  }
};

// One multipath component of the tapped channel.
struct PathComponent {
  std::complex<double> gain;  // complex small-scale coefficient
  double aod_rad = 0.0;
  double aoa_rad = 0.0;
};

struct LinkBudget {
  double tx_power_dbm = 0.0;
  double combined_gain_db = 0.0;       // Tx+Rx antenna gain
  double subpath_attenuation_db = 0.0;
  double pathloss_db = 0.0;
  double noise_dbm = 0.0;
  double aci_interference_dbm = kNoPower;
};

enum class ThroughputFormula {
  Product,  // overhead * bandwidth * log2(1 + sinr)
  Literal,  // overhead * bandwidth + log2(1 + sinr)
};

struct ThroughputParams {
  double overhead = 0.8;       // usable fraction after protocol overhead
  double bandwidth_hz = 100e6;
  ThroughputFormula formula = ThroughputFormula::Product;

  void validate() const {
    if (!(overhead > 0.0 && overhead <= 1.0))
      throw std::invalid_argument("ThroughputParams: overhead must be in (0, 1]");
    if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("ThroughputParams: bandwidth must be > 0");
  }
};

// Mean pathloss in dB at distance d plus a caller-supplied shadowing term.
inline double pathloss_db(double distance_m, const ChannelParams& p, double shadowing_db = 0.0) {
  if (!(distance_m > 0.0)) throw std::domain_error("pathloss_db: distance must be > 0");
  return p.alpha_db + 10.0 * p.beta * std::log10(distance_m) + shadowing_db;
}

// dB-domain link budget: P_t + combined gain - subpath attenuation - pathloss.
inline double received_power_dbm(const LinkBudget& b) {
  return b.tx_power_dbm + b.combined_gain_db - b.subpath_attenuation_db - b.pathloss_db;
}

// Uniform linear array response, unit-norm entries: exp(j*pi*k*sin(angle))/sqrt(n).
inline std::vector<std::complex<double>> array_response(double angle_rad, int n) {
  if (n < 1) throw std::invalid_argument("array_response: element count must be >= 1");
  std::vector<std::complex<double>> u(static_cast<std::size_t>(n));
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  const double phase_step = 3.141592653589793238462643383279 * std::sin(angle_rad);
  for (int k = 0; k < n; ++k) {
    u[static_cast<std::size_t>(k)] = std::polar(norm, phase_step * k);
  }
  return u;
}

// Dense row-major complex matrix, just large enough for channel evaluation.
struct ComplexMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::complex<double>> data;

  ComplexMatrix() = default;
  ComplexMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c) {}

  std::complex<double>& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const std::complex<double>& operator()(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
};

// Tapped channel matrix H = sum_l g_l * u_rx(theta_l) * u_tx(phi_l)^H.
inline ComplexMatrix channel_matrix(const std::vector<PathComponent>& paths, int n_rx, int n_tx) {
  if (n_rx < 1 || n_tx < 1) throw std::invalid_argument("channel_matrix: dimensions must be >= 1");
  ComplexMatrix h(n_rx, n_tx);
  for (const auto& path : paths) {
    const auto rx = array_response(path.aoa_rad, n_rx);
    const auto tx = array_response(path.aod_rad, n_tx);
    for (int r = 0; r < n_rx; ++r) {
      for (int c = 0; c < n_tx; ++c) {
        h(r, c) += path.gain * rx[static_cast<std::size_t>(r)] * std::conj(tx[static_cast<std::size_t>(c)]);
      }
    }
  }
  return h;
}

// Gain seen at an angular offset from boresight; the beam edge is inclusive.
inline double pattern_gain_db(const AntennaPattern& p, double offset_deg) {
  return std::abs(offset_deg) <= 0.5 * p.beamwidth_deg ? p.mainlobe_gain_dbi : p.sidelobe_gain_dbi;
}

// Combined Tx+Rx gain of a directional link, given each side's offset from
// its own boresight.
inline double effective_gain_db(const AntennaPattern& tx, const AntennaPattern& rx, double tx_offset_deg,
                                double rx_offset_deg) {
  return pattern_gain_db(tx, tx_offset_deg) + pattern_gain_db(rx, rx_offset_deg);
}

inline double sinr_linear(double received_dbm, double noise_dbm, double aci_dbm) {
  return dbm_to_mw(received_dbm) / (dbm_to_mw(noise_dbm) + dbm_to_mw(aci_dbm));
}

inline double throughput_bps(double sinr, const ThroughputParams& t) {
  if (sinr < 0.0) throw std::domain_error("throughput_bps: sinr must be >= 0");
  const double spectral = std::log2(1.0 + sinr);
  if (t.formula == ThroughputFormula::Literal) return t.overhead * t.bandwidth_hz + spectral;
  return t.overhead * t.bandwidth_hz * spectral;
}

// Thermal noise floor over the given bandwidth.
inline double noise_floor_dbm(double bandwidth_hz, double noise_figure_db = 7.0) {
  return -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

}  // namespace iabsim
