#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "iabsim/mac_analytics.hpp"
#include "iabsim/reporting.hpp"
#include "iabsim/sim_core.hpp"
#include "iabsim/topology.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitSimError = 2;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

struct RunOptions {
  std::string scenario_path;
  std::string strategy;
  std::string nodes;
  std::string out_dir = "out";
  std::string trace_path;
  long long seed = -1;
  int runs = -1;
  double duration = -1.0;
  int workers = 1;
};

int do_run(const RunOptions& opt) {
  iabsim::Scenario scenario;
  if (!opt.scenario_path.empty()) {
    std::string text;
    try {
      text = read_file(opt.scenario_path);
    } catch (const std::exception& e) {
      throw std::invalid_argument(e.what());
    }
    scenario = iabsim::parse_scenario(text);
  } else {
    scenario.name = "default";
    scenario.sweep = {scenario.base.n_infra};
    scenario.strategies = {scenario.base.strategy.kind};
  }

  // flags override file values
  if (!opt.strategy.empty()) {
    const auto k = iabsim::strategy_from_string(opt.strategy);
    if (!k) throw std::invalid_argument("unknown strategy '" + opt.strategy + "'");
    scenario.strategies = {*k};
  }
  if (!opt.nodes.empty()) scenario.sweep = parse_int_list(opt.nodes);
  if (opt.seed >= 0) scenario.base.seed = static_cast<std::uint64_t>(opt.seed);
  if (opt.runs > 0) scenario.replications = opt.runs;
  if (opt.duration > 0.0) scenario.base.duration_s = opt.duration;
  if (!opt.trace_path.empty()) scenario.base.trace_path = opt.trace_path;
  scenario.validate();

  const auto output = iabsim::run_scenario(scenario, opt.workers);
  iabsim::write_outputs(output, opt.out_dir);
  std::cout << iabsim::emit_csv(output.rows);
  std::cerr << "wrote " << (output.rows.size() + output.cdf_samples.size() + 0) << " rows + "
            << output.cdf_samples.size() << " CDF files to " << opt.out_dir << "\n";
  return kExitOk;
}

struct AnalyticsOptions {
  std::string n_wifi = "1,5,10";
  std::string n_iab = "1,5,10";
  int c = 16;
  int m = 4;
  int z = 16;
  double tol = 1e-10;
  std::string out_path;
};

int do_analytics(const AnalyticsOptions& opt) {
  std::string csv = "n_wifi,n_iab,C,m,Z,P_cw,P_cb,tau_w,tau_i\n";
  for (int nw : parse_int_list(opt.n_wifi)) {
    for (int ni : parse_int_list(opt.n_iab)) {
      if (nw + ni < 1) continue;
      const auto fp = iabsim::solve_fixed_point(nw, ni, opt.c, opt.m, opt.z, opt.tol);
      char buf[192];
      std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%d,%.12g,%.12g,%.12g,%.12g\n", nw, ni, opt.c, opt.m,
                    opt.z, fp.wifi_collision_prob, fp.iab_collision_prob, fp.wifi_access_prob,
                    fp.iab_access_prob);
      csv += buf;
    }
  }
  if (opt.out_path.empty()) {
    std::cout << csv;
  } else {
    iabsim::write_file(opt.out_path, csv);
  }
  return kExitOk;
}

struct TopoOptions {
  int nodes = 10;
  int ue_per_cell = 20;
  double radius = 150.0;
  long long seed = 1;
  std::string out_path;
  std::string in_path;
};

int do_topo(const TopoOptions& opt) {
  if (!opt.in_path.empty()) {
    const auto topo = iabsim::import_topology(read_file(opt.in_path));
    std::cout << "nodes " << topo.nodes.size() << " links " << topo.links.size() << " donors "
              << topo.count(iabsim::NodeKind::Donor) << " iab " << topo.count(iabsim::NodeKind::IabNode)
              << " ap " << topo.count(iabsim::NodeKind::WigigAp) << " ue "
              << topo.count(iabsim::NodeKind::Ue) << "\n";
    return kExitOk;
  }
  iabsim::TopologyParams params;
  auto topo = iabsim::associate(
      iabsim::generate(opt.nodes, opt.ue_per_cell, opt.radius, static_cast<std::uint64_t>(opt.seed), params),
      params);
  const std::string text = iabsim::export_topology(topo);
  if (opt.out_path.empty()) {
    std::cout << text;
  } else {
    iabsim::write_file(opt.out_path, text);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IAB/WiGig mmWave unlicensed coexistence simulator"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and emit report + CDF files");
  run_cmd->add_option("--scenario", run_opt.scenario_path, "Scenario file path");
  run_cmd->add_option("--strategy", run_opt.strategy, "baseline|probabilistic|proposed");
  run_cmd->add_option("--nodes", run_opt.nodes, "Comma-separated n_infra sweep");
  run_cmd->add_option("--seed", run_opt.seed, "Base seed");
  run_cmd->add_option("--runs", run_opt.runs, "Replications per sweep point");
  run_cmd->add_option("--duration", run_opt.duration, "Simulated seconds per run");
  run_cmd->add_option("--out", run_opt.out_dir, "Output directory");
  run_cmd->add_option("--workers", run_opt.workers, "Parallel replication workers");
  run_cmd->add_option("--trace", run_opt.trace_path, "Per-slot trace CSV path")->expected(0, 1);

  AnalyticsOptions an_opt;
  auto* an_cmd = app.add_subcommand("analytics", "Solve the contention fixed point over a grid");
  an_cmd->add_option("--n-wifi", an_opt.n_wifi, "Comma-separated WiGig AP counts");
  an_cmd->add_option("--n-iab", an_opt.n_iab, "Comma-separated IAB node counts");
  an_cmd->add_option("--c", an_opt.c, "DCF initial window C");
  an_cmd->add_option("--m", an_opt.m, "DCF stage count m");
  an_cmd->add_option("--z", an_opt.z, "LBT window Z");
  an_cmd->add_option("--tol", an_opt.tol, "Fixed point tolerance");
  an_cmd->add_option("--out", an_opt.out_path, "Output CSV path (default stdout)");

  TopoOptions topo_opt;
  auto* topo_cmd = app.add_subcommand("topo", "Export or inspect a deployment");
  topo_cmd->add_option("--nodes", topo_opt.nodes, "Infrastructure node count");
  topo_cmd->add_option("--ue-per-cell", topo_opt.ue_per_cell, "UEs per cell");
  topo_cmd->add_option("--radius", topo_opt.radius, "Cell radius in meters");
  topo_cmd->add_option("--seed", topo_opt.seed, "Placement seed");
  topo_cmd->add_option("--out", topo_opt.out_path, "Export path (default stdout)");
  topo_cmd->add_option("--in", topo_opt.in_path, "Import and summarize this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run_cmd->parsed()) {
      if (run_cmd->count("--trace") && run_opt.trace_path.empty()) run_opt.trace_path = "trace.csv";
      return do_run(run_opt);
    }
    if (an_cmd->parsed()) return do_analytics(an_opt);
    if (topo_cmd->parsed()) return do_topo(topo_opt);
  } catch (const iabsim::ScenarioParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return kExitSimError;
  }
  return kExitConfigError;
}
