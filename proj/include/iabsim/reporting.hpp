#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iabsim/sim_core.hpp"

namespace iabsim {

// Batch description: which strategies to run over which deployment sizes,
// with how many replications, on top of a base simulation config.
struct Scenario {
  std::string name = "scenario";
  std::vector<int> sweep;
  std::vector<StrategyKind> strategies;
  int replications = 1;
  SimConfig base{};

  void validate() const {
    if (sweep.empty()) throw std::invalid_argument("Scenario: sweep must be non-empty");
    if (strategies.empty()) throw std::invalid_argument("Scenario: strategies must be non-empty");
    if (replications < 1) throw std::invalid_argument("Scenario: replications must be >= 1");
    for (int n : sweep)
      if (n < 0) throw std::invalid_argument("Scenario: sweep entries must be >= 0");
    base.validate();
  }
};

struct ReportRow {
  std::string strategy;
  int n_infra = 0;
  double cell_tput_bps = 0.0;
  double ue_tput_bps = 0.0;
  double interfered_frac = 0.0;
  double dropped_frac = 0.0;
};

class ScenarioParseError : public std::runtime_error {
 public:
  ScenarioParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view v, int line) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ScenarioParseError(line, "expected a number, got '" + std::string(v) + "'");
  return out;
}

inline long long parse_int(std::string_view v, int line) {
  long long out = 0;
  const char* end = v.data() + v.size();
  auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ScenarioParseError(line, "expected an integer, got '" + std::string(v) + "'");
  return out;
}

inline bool parse_bool(std::string_view v, int line) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ScenarioParseError(line, "expected a boolean, got '" + std::string(v) + "'");
}

inline std::vector<std::string_view> split(std::string_view v, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t pos = v.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(v.substr(start)));
      break;
    }
    out.push_back(trim(v.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

// Flat key-value format with section headers:
//
//   name = demo
//   [sweep]
//   nodes = 20,40,60
//   strategies = baseline,proposed
//   replications = 4
//   [sim]
//   lambda = 2000
//   ...
//
// Unknown sections or keys are rejected with the offending line number.
inline Scenario parse_scenario(const std::string& text) {
  Scenario s;
  s.sweep.clear();
  s.strategies.clear();

  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  bool sweep_given = false, strategies_given = false;

  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line(text.data() + pos, (eol == std::string::npos ? text.size() : eol) - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ScenarioParseError(line_no, "unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section != "sweep" && section != "sim" && section != "channel" && section != "throughput" &&
          section != "cca" && section != "mac" && section != "strategy" && section != "controller")
        throw ScenarioParseError(line_no, "unknown section [" + section + "]");
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ScenarioParseError(line_no, "expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ScenarioParseError(line_no, "empty key or value");

    auto unknown = [&]() -> ScenarioParseError {
      return ScenarioParseError(line_no, "unknown key '" + key + "' in section [" + section + "]");
    };

    if (section.empty()) {
      if (key == "name") {
        s.name = std::string(value);
      } else {
        throw unknown();
      }
    } else if (section == "sweep") {
      if (key == "nodes") {
        s.sweep.clear();
        for (auto item : detail::split(value, ',')) s.sweep.push_back(static_cast<int>(detail::parse_int(item, line_no)));
        sweep_given = true;
      } else if (key == "strategies") {
        s.strategies.clear();
        for (auto item : detail::split(value, ',')) {
          auto k = strategy_from_string(item);
          if (!k) throw ScenarioParseError(line_no, "unknown strategy '" + std::string(item) + "'");
          s.strategies.push_back(*k);
        }
        strategies_given = true;
      } else if (key == "replications") {
        s.replications = static_cast<int>(detail::parse_int(value, line_no));
      } else {
        throw unknown();
      }
    } else if (section == "sim") {
      if (key == "seed") s.base.seed = static_cast<std::uint64_t>(detail::parse_int(value, line_no));
      else if (key == "duration") s.base.duration_s = detail::parse_double(value, line_no);
      else if (key == "lambda") s.base.lambda_pps = detail::parse_double(value, line_no);
      else if (key == "mean_packet_bits") s.base.mean_packet_bits = detail::parse_double(value, line_no);
      else if (key == "exponential_sizes") s.base.exponential_packet_sizes = detail::parse_bool(value, line_no);
      else if (key == "retry_cap") s.base.retry_cap = static_cast<int>(detail::parse_int(value, line_no));
      else if (key == "n_infra") s.base.n_infra = static_cast<int>(detail::parse_int(value, line_no));
      else if (key == "ue_per_cell") s.base.ue_per_cell = static_cast<int>(detail::parse_int(value, line_no));
      else if (key == "cell_radius") s.base.cell_radius_m = detail::parse_double(value, line_no);
      else if (key == "ue_drop_radius") s.base.ue_drop_radius_m = detail::parse_double(value, line_no);
      else if (key == "max_tiers") s.base.max_tiers = static_cast<int>(detail::parse_int(value, line_no));
      else if (key == "tx_power") s.base.tx_power_dbm = detail::parse_double(value, line_no);
      else if (key == "noise_figure") s.base.noise_figure_db = detail::parse_double(value, line_no);
      else if (key == "decode_threshold") s.base.decode_threshold_db = detail::parse_double(value, line_no);
      else if (key == "interference") s.base.interference_enabled = detail::parse_bool(value, line_no);
      else if (key == "wigig_adjacent_channel") s.base.wigig_adjacent_channel = detail::parse_bool(value, line_no);
      else if (key == "subframe_slots") s.base.subframe_slots = static_cast<int>(detail::parse_int(value, line_no));
      else throw unknown();
    } else if (section == "channel") {
      if (key == "alpha") s.base.channel.alpha_db = detail::parse_double(value, line_no);
      else if (key == "beta") s.base.channel.beta = detail::parse_double(value, line_no);
      else if (key == "sigma") s.base.channel.sigma_db = detail::parse_double(value, line_no);
      else if (key == "carrier_freq") s.base.channel.carrier_freq_hz = detail::parse_double(value, line_no);
      else if (key == "num_taps") s.base.channel.num_taps = static_cast<int>(detail::parse_int(value, line_no));
      else if (key == "aci_rejection") s.base.channel.aci_rejection_db = detail::parse_double(value, line_no);
      else throw unknown();
    } else if (section == "throughput") {
      if (key == "overhead") s.base.throughput.overhead = detail::parse_double(value, line_no);
      else if (key == "bandwidth") s.base.throughput.bandwidth_hz = detail::parse_double(value, line_no);
      else if (key == "throughput_formula") {
        if (value == "product") s.base.throughput.formula = ThroughputFormula::Product;
        else if (value == "literal") s.base.throughput.formula = ThroughputFormula::Literal;
        else throw ScenarioParseError(line_no, "throughput_formula must be 'product' or 'literal'");
      } else throw unknown();
    } else if (section == "cca") {
      if (key == "threshold") s.base.cca.threshold_dbm = detail::parse_double(value, line_no);
      else if (key == "slot_duration") s.base.cca.slot_duration_s = detail::parse_double(value, line_no);
      else if (key == "defer_duration") s.base.cca.defer_duration_s = detail::parse_double(value, line_no);
      else if (key == "cot_max") s.base.cca.cot_max_s = detail::parse_double(value, line_no);
      else throw unknown();
    } else if (section == "mac") {
      if (key == "dcf_c") s.base.dcf.max_backoff = static_cast<int>(detail::parse_int(value, line_no));
      else if (key == "dcf_m") s.base.dcf.stage_count = static_cast<int>(detail::parse_int(value, line_no));
      else if (key == "lbt_z") s.base.lbt_cw = static_cast<int>(detail::parse_int(value, line_no));
      else throw unknown();
    } else if (section == "strategy") {
      if (key == "kind") {
        auto k = strategy_from_string(value);
        if (!k) throw ScenarioParseError(line_no, "unknown strategy '" + std::string(value) + "'");
        s.base.strategy.kind = *k;
      } else if (key == "tdd_config") {
        s.base.strategy.tdd_config = static_cast<int>(detail::parse_int(value, line_no));
      } else if (key == "adaptive_tdd") {
        s.base.strategy.adaptive_tdd = detail::parse_bool(value, line_no);
      } else if (key == "delta") {
        s.base.strategy.delta = detail::parse_double(value, line_no);
      } else if (key == "cot") {
        s.base.strategy.cot_s = detail::parse_double(value, line_no);
      } else if (key == "pool_capacity") {
        s.base.strategy.pool_capacity = static_cast<int>(detail::parse_int(value, line_no));
      } else if (key == "tdd_pattern") {
        s.base.strategy.tdd_pattern = std::string(value);
      } else throw unknown();
    } else if (section == "controller") {
      if (key == "enabled") s.base.controller_enabled = detail::parse_bool(value, line_no);
      else if (key == "delay") s.base.controller_delay_s = detail::parse_double(value, line_no);
      else if (key == "trigger_count") s.base.controller.trigger_count = static_cast<int>(detail::parse_int(value, line_no));
      else if (key == "interfered_backoff_slots") s.base.interfered_backoff_slots = static_cast<int>(detail::parse_int(value, line_no));
      else throw unknown();
    }
  }

  if (!sweep_given) s.sweep = {s.base.n_infra};
  if (!strategies_given) s.strategies = {s.base.strategy.kind};
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ScenarioParseError(line_no, std::string("validation failed: ") + e.what());
  }
  return s;
}

struct ScenarioOutput {
  std::vector<ReportRow> rows;
  // (strategy, n_infra) -> sorted per-UE throughput samples pooled over runs
  std::map<std::pair<std::string, int>, std::vector<double>> cdf_samples;
};

inline ScenarioOutput run_scenario(const Scenario& s, int worker_count = 1) {
  s.validate();
  ScenarioOutput out;
  for (StrategyKind strat : s.strategies) {
    for (int n : s.sweep) {
      SimConfig cfg = s.base;
      cfg.n_infra = n;
      cfg.strategy.kind = strat;
      const auto summary = replicate(cfg, s.replications, worker_count);
      ReportRow row;
      row.strategy = to_string(strat);
      row.n_infra = n;
      row.cell_tput_bps = summary.mean_cell_throughput_bps;
      row.ue_tput_bps = summary.mean_ue_throughput_bps;
      row.interfered_frac = summary.mean_interfered_fraction;
      row.dropped_frac = summary.mean_dropped_fraction;
      out.rows.push_back(row);

      auto samples = summary.ue_throughput_samples;
      std::sort(samples.begin(), samples.end());
      out.cdf_samples[{row.strategy, n}] = std::move(samples);
    }
  }
  return out;
}

inline constexpr std::string_view kReportHeader =
    "strategy,n_infra,cell_tput_bps,ue_tput_bps,interfered_frac,dropped_frac";

inline std::string emit_csv(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("emit_csv: no rows");
  std::string out{kReportHeader};
  out += '\n';
  for (const auto& r : rows) {
    out += r.strategy;
    out += ',';
    out += std::to_string(r.n_infra);
    out += ',';
    detail::append_double(out, r.cell_tput_bps);
    out += ',';
    detail::append_double(out, r.ue_tput_bps);
    out += ',';
    detail::append_double(out, r.interfered_frac);
    out += ',';
    detail::append_double(out, r.dropped_frac);
    out += '\n';
  }
  return out;
}

// Lossless inverse of emit_csv.
inline std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::vector<ReportRow> rows;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line(text.data() + pos, (eol == std::string::npos ? text.size() : eol) - pos);
    pos = eol == std::string::npos ? text.size() : eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kReportHeader) throw std::runtime_error("parse_report_csv: bad header");
      continue;
    }
    const auto fields = detail::split(line, ',');
    if (fields.size() != 6) throw std::runtime_error("parse_report_csv: bad row " + std::to_string(line_no));
    ReportRow r;
    r.strategy = std::string(fields[0]);
    r.n_infra = static_cast<int>(detail::parse_int(fields[1], line_no));
    r.cell_tput_bps = detail::parse_double(fields[2], line_no);
    r.ue_tput_bps = detail::parse_double(fields[3], line_no);
    r.interfered_frac = detail::parse_double(fields[4], line_no);
    r.dropped_frac = detail::parse_double(fields[5], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

// Empirical CDF file: one "value,cdf" row per sorted sample, reaching 1 at
// the maximum.
inline std::string emit_cdf_csv(const std::vector<double>& sorted_samples) {
  std::string out = "throughput_bps,cdf\n";
  const std::size_t n = sorted_samples.size();
  for (std::size_t i = 0; i < n; ++i) {
    detail::append_double(out, sorted_samples[i]);
    out += ',';
    detail::append_double(out, static_cast<double>(i + 1) / static_cast<double>(n));
    out += '\n';
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

// Writes report.csv plus one CDF file per (strategy, sweep point) into dir.
inline void write_outputs(const ScenarioOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.csv", emit_csv(out.rows));
  for (const auto& [key, samples] : out.cdf_samples) {
    const auto name = "cdf_" + key.first + "_" + std::to_string(key.second) + ".csv";
    write_file(dir / name, emit_cdf_csv(samples));
  }
}

}  // namespace iabsim
