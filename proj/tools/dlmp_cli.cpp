// dlmp: command-line driver for the scheduling harness.
//
//   dlmp synth    --nodes 307 --seed 7 --out feeder.json
//   dlmp validate feeder.json
//   dlmp solve    --feeder feeder.json --scenario 3ev:3:30 --options Full-opt --out run/
//   dlmp dlmp     --solution run/solutions/3ev__Full-opt.json --out prices/
//
// Exit codes: 0 ok, 1 config or I/O error, 2 every cell failed, 3 validation failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dlmp/error.hpp"
#include "dlmp/io.hpp"
#include "dlmp/netmodel.hpp"
#include "dlmp/opf.hpp"
#include "dlmp/pricing.hpp"
#include "dlmp/schedules.hpp"
#include "dlmp/synth.hpp"
#include "dlmp/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dlmp;

namespace {

enum Exit { kOk = 0, kConfig = 1, kAllFailed = 2, kInvalid = 3 };

struct ConfigError : Error {
  using Error::Error;
};

struct RunConfig {
  std::string feeder;
  int synth_nodes = 0;
  std::uint64_t seed = 7;
  std::vector<std::string> scenarios;  // name:ev:pv[:fleet]
  std::vector<int> ev_grid;
  std::vector<double> pv_grid;
  std::vector<std::string> options{"BaU", "ToU", "PQ-opt", "Full-opt"};
  std::string out = "dlmp-out";
  bool cyclic = true;
  double lol_factor = 10.0;
  double violation_tol = 1e-6;
  double exactness_tol = 1e-6;
  double decomposition_tol = 1e-4;
  bool decompose = true;
  conic::SolverSettings solver;
};

schedules::ScenarioSpec parse_scenario(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream s(text);
  std::string p;
  while (std::getline(s, p, ':')) parts.push_back(p);
  if (parts.size() < 3 || parts.size() > 4) {
    throw ConfigError("scenario '" + text + "': expected name:ev_per_site:pv_kva_per_site[:fleet]");
  }
  schedules::ScenarioSpec spec;
  spec.name = parts[0];
  try {
    std::size_t used = 0;
    spec.ev_per_site = std::stoi(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument(parts[1]);
    spec.pv_kva_per_site = std::stod(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument(parts[2]);
  } catch (const std::logic_error&) {
    throw ConfigError("scenario '" + text + "': counts must be numbers");
  }
  if (spec.ev_per_site < 0 || spec.pv_kva_per_site < 0) throw ConfigError("scenario '" + text + "': negative count");
  if (parts.size() == 4) {
    if (parts[3] != "fleet") throw ConfigError("scenario '" + text + "': fourth field must be 'fleet'");
    spec.include_feeder_fleet = true;
  }
  if (spec.name.empty()) spec.name = schedules::scenario_label(spec);
  return spec;
}

std::vector<schedules::ScenarioSpec> scenarios_of(const RunConfig& cfg) {
  std::vector<schedules::ScenarioSpec> out;
  for (const auto& s : cfg.scenarios) out.push_back(parse_scenario(s));
  if (!cfg.ev_grid.empty() || !cfg.pv_grid.empty()) {
    const std::vector<int> evs = cfg.ev_grid.empty() ? std::vector<int>{0} : cfg.ev_grid;
    const std::vector<double> pvs = cfg.pv_grid.empty() ? std::vector<double>{0.0} : cfg.pv_grid;
    for (int e : evs) {
      for (double pv : pvs) {
        schedules::ScenarioSpec spec{"", e, pv, false};
        if (spec.is_base()) continue;  // the base case is always computed
        spec.name = schedules::scenario_label(spec);
        out.push_back(spec);
      }
    }
  }
  if (out.empty()) out.push_back({"feeder", 0, 0.0, true});
  return out;
}

net::Feeder load_input_feeder(const RunConfig& cfg, std::string& label) {
  if (!cfg.feeder.empty() && cfg.synth_nodes > 0) throw ConfigError("give either --feeder or --synth, not both");
  if (cfg.synth_nodes > 0) {
    label = "synth:" + std::to_string(cfg.synth_nodes) + ":" + std::to_string(cfg.seed);
    return net::to_per_unit(synth::synthesize_feeder(cfg.synth_nodes, cfg.seed));
  }
  if (cfg.feeder.empty()) throw ConfigError("no feeder: pass --feeder PATH or --synth NODES");
  if (!fs::exists(cfg.feeder)) throw ConfigError("feeder file not found: " + cfg.feeder);
  label = cfg.feeder;
  return net::load_feeder(cfg.feeder);
}

void check_tolerances(const RunConfig& cfg) {
  const std::pair<const char*, double> tols[] = {
      {"feastol", cfg.solver.feastol},           {"abstol", cfg.solver.abstol},
      {"reltol", cfg.solver.reltol},             {"exactness-tol", cfg.exactness_tol},
      {"violation-tol", cfg.violation_tol},      {"decomposition-tol", cfg.decomposition_tol},
      {"lol-factor", cfg.lol_factor}};
  for (const auto& [name, v] : tols) {
    if (!(v > 0.0)) throw ConfigError(std::string("--") + name + " must be positive");
  }
  if (cfg.solver.max_iters < 1) throw ConfigError("--max-iter must be at least 1");
}

int cmd_solve(const RunConfig& cfg) {
  check_tolerances(cfg);
  std::vector<schedules::Option> options;
  for (const auto& o : cfg.options) {
    try {
      options.push_back(schedules::parse_option(o));
    } catch (const SchemaError& e) {
      throw ConfigError(e.what());
    }
  }
  const auto scenarios = scenarios_of(cfg);
  std::string feeder_label;
  const net::Feeder feeder = load_input_feeder(cfg, feeder_label);

  schedules::HarnessSettings settings;
  settings.cyclic = cfg.cyclic;
  settings.lol_factor = cfg.lol_factor;
  settings.violation_tol = cfg.violation_tol;
  settings.opf.exactness_tol = cfg.exactness_tol;
  settings.solver = cfg.solver;

  const auto started = std::chrono::system_clock::now();
  const auto table = schedules::comparison_table(feeder, scenarios, options, settings);

  const fs::path out(cfg.out);
  io::write_csv(out / "comparison.csv", io::comparison_csv(table));
  io::write_csv(out / "cells" / "base__BaU.csv", io::cell_csv(table.base));

  json cells = json::array();
  int produced = 0;
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    const auto& cell = table.cells[i];
    const auto& row = table.rows[i];
    const std::string stem = io::cell_stem(cell.scenario, cell.option);
    json entry = {{"scenario", cell.scenario},
                  {"option", schedules::to_string(cell.option)},
                  {"solved", cell.solved},
                  {"failed", cell.failed},
                  {"status", row.status},
                  {"solver_status", cell.solver_status},
                  {"relaxation_exact", cell.relaxation_exact}};
    if (cell.solved) {
      ++produced;
      io::write_csv(out / "cells" / (stem + ".csv"), io::cell_csv(cell));
      entry["files"] = {"cells/" + stem + ".csv"};
    }
    if (cell.dispatch) {
      io::SavedSolution saved;
      saved.feeder_path = feeder_label;
      for (const auto& s : scenarios) {
        if (s.name == cell.scenario) saved.scenario = s;
      }
      saved.options = cell.dispatch_options;
      saved.solution = *cell.dispatch;
      io::write_text(out / "solutions" / (stem + ".json"), io::dump_solution(saved));
      entry["files"].push_back("solutions/" + stem + ".json");
      io::write_csv(out / "dlmp" / (stem + ".csv"), io::dlmp_csv(*cell.dlmps));
      entry["files"].push_back("dlmp/" + stem + ".csv");
      entry["solver"] = {{"iterations", cell.dispatch->iterations},
                         {"primal_residual", cell.dispatch->primal_residual},
                         {"dual_residual", cell.dispatch->dual_residual},
                         {"gap", cell.dispatch->gap},
                         {"degenerate", cell.dispatch->degenerate}};
      if (cfg.decompose) {
        try {
          const der::DerFleet fleet = schedules::build_fleet(feeder, saved.scenario);
          const auto problem = opf::assemble(feeder, fleet, cell.dispatch_options);
          const auto dec = pricing::decompose(problem, *cell.dispatch, feeder, *cell.dlmps, false,
                                              cfg.decomposition_tol);
          io::write_csv(out / "decomposition" / (stem + ".csv"), io::decomposition_csv(dec, *cell.dlmps));
          entry["files"].push_back("decomposition/" + stem + ".csv");
          entry["decomposition_max_mismatch"] = dec.max_mismatch;
        } catch (const Error& e) {
          entry["decomposition_error"] = e.what();
        }
      }
    }
    cells.push_back(entry);
  }

  json manifest;
  manifest["tool"] = {{"name", "dlmp"}, {"version", kVersion}};
  manifest["solver"] = {{"name", kSolverName},
                        {"version", kSolverVersion},
                        {"feastol", cfg.solver.feastol},
                        {"abstol", cfg.solver.abstol},
                        {"reltol", cfg.solver.reltol},
                        {"feastol_inaccurate", cfg.solver.feastol_inaccurate},
                        {"abstol_inaccurate", cfg.solver.abstol_inaccurate},
                        {"reltol_inaccurate", cfg.solver.reltol_inaccurate},
                        {"max_iters", cfg.solver.max_iters}};
  manifest["config"] = {{"feeder", feeder_label},
                        {"seed", cfg.seed},
                        {"options", cfg.options},
                        {"cyclic", cfg.cyclic},
                        {"lol_factor", cfg.lol_factor},
                        {"violation_tol", cfg.violation_tol},
                        {"exactness_tol", cfg.exactness_tol},
                        {"decomposition_tol", cfg.decomposition_tol},
                        {"pwl_breakpoints", settings.opf.pwl_breakpoints}};
  manifest["base"] = {{"real_power_cost", table.base.real_power_cost},
                      {"reactive_cost", table.base.reactive_cost},
                      {"transformer_cost", table.base.transformer_cost},
                      {"lol_hours", table.base.lol_hours},
                      {"lol_threshold", table.lol_threshold}};
  manifest["cells"] = cells;
  io::write_text(out / "manifest.json", manifest.dump(1) + "\n");

  const auto finished = std::chrono::system_clock::now();
  auto stamp = [](std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return std::string(buf);
  };
  json run = {{"started", stamp(started)},
              {"finished", stamp(finished)},
              {"seconds", std::chrono::duration<double>(finished - started).count()}};
  io::write_text(out / "run_info.json", run.dump(1) + "\n");

  std::cout << "base case: LoL " << table.base.lol_hours << " h, threshold " << table.lol_threshold << " h\n";
  for (const auto& row : table.rows) {
    std::cout << row.scenario << " " << schedules::to_string(row.option) << ": total " << io::format_number(row.delta_total)
              << " $, LoL " << io::format_number(row.lol_hours) << " h, " << row.status << "\n";
  }
  std::cout << "wrote " << out.string() << "\n";
  if (!table.cells.empty() && produced == 0) {
    std::cerr << "no cell produced a result\n";
    return kAllFailed;
  }
  return kOk;
}

int cmd_validate(const std::string& path, bool as_json) {
  std::vector<std::pair<std::string, std::string>> issues;  // (check, message)
  std::vector<std::string> passed;
  net::FeederRaw raw;
  try {
    raw = net::parse_feeder(io::read_text(path));
    passed.push_back("schema");
  } catch (const SchemaError& e) {
    issues.push_back({"schema", e.what()});
  }
  std::optional<net::Feeder> feeder;
  if (issues.empty()) {
    try {
      net::validate_topology(raw);
      passed.push_back("topology");
    } catch (const TopologyError& e) {
      issues.push_back({"topology", e.what()});
    }
  }
  if (issues.empty()) {
    try {
      feeder = net::to_per_unit(raw);
      passed.push_back("per-unit conversion");
      passed.push_back("thermal parameters");
    } catch (const Error& e) {
      issues.push_back({"per-unit conversion", e.what()});
    }
  }
  if (feeder) {
    const std::size_t before = issues.size();
    for (bool cyclic : {false, true}) {
      for (std::size_t d = 0; d < feeder->fleet.ev.size(); ++d) {
        der::DerFleet one;
        one.ev = {feeder->fleet.ev[d]};
        try {
          schedules::schedule_bau(one, *feeder, cyclic);
        } catch (const InfeasibleError& e) {
          issues.push_back({"itinerary", "ev " + std::to_string(d) + (cyclic ? " (cyclic)" : "") + ": " + e.what()});
        }
      }
    }
    for (const auto& site : feeder->sites) {
      schedules::ScenarioSpec spec{"", 1, 1.0, false};
      net::Feeder single = *feeder;
      single.sites = {site};
      try {
        const auto fleet = schedules::build_fleet(single, spec);
        schedules::schedule_bau(fleet, single, true);
      } catch (const Error& e) {
        issues.push_back({"site", site.name + ": " + e.what()});
      }
    }
    if (issues.size() == before) passed.push_back("der itineraries");
    try {
      opf::Grid p, q;
      opf::net_injections(*feeder, der::DerFleet{}, der::DerSchedule{}, p, q);
      opf::fixed_injection_powerflow(*feeder, p, q);
      passed.push_back("base power flow");
    } catch (const Error& e) {
      issues.push_back({"base power flow", e.what()});
    }
  }

  if (as_json) {
    json report = {{"file", path}, {"ok", issues.empty()}, {"passed", passed}, {"issues", json::array()}};
    for (const auto& [check, msg] : issues) report["issues"].push_back({{"check", check}, {"message", msg}});
    std::cout << report.dump(1) << "\n";
  } else {
    for (const auto& p : passed) std::cout << "ok      " << p << "\n";
    for (const auto& [check, msg] : issues) std::cout << "FAILED  " << check << ": " << msg << "\n";
    std::cout << (issues.empty() ? "OK" : "INVALID (" + std::to_string(issues.size()) + " issues)") << "\n";
  }
  return issues.empty() ? kOk : kInvalid;
}

int cmd_synth(int nodes, std::uint64_t seed, const std::string& out) {
  const auto raw = synth::synthesize_feeder(nodes, seed);
  const std::string text = net::dump_feeder(raw);
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    io::write_text(out, text);
    std::cerr << "wrote " << out << " (" << nodes << " nodes, " << raw.transformers.size() << " transformers)\n";
  }
  return kOk;
}

int cmd_dlmp(const std::string& solution_path, const std::string& feeder_override, const std::string& out,
             bool strict, double tol) {
  if (!fs::exists(solution_path)) throw ConfigError("solution file not found: " + solution_path);
  const auto saved = io::parse_solution(io::read_text(solution_path));
  const std::string src = feeder_override.empty() ? saved.feeder_path : feeder_override;
  net::Feeder feeder;
  if (src.rfind("synth:", 0) == 0) {
    int nodes = 0;
    unsigned long long seed = 0;
    if (std::sscanf(src.c_str(), "synth:%d:%llu", &nodes, &seed) != 2) throw ConfigError("bad feeder label " + src);
    feeder = net::to_per_unit(synth::synthesize_feeder(nodes, seed));
  } else {
    if (!fs::exists(src)) throw ConfigError("feeder file not found: " + src);
    feeder = net::load_feeder(src);
  }
  if (!saved.solution.optimal()) {
    std::cerr << "saved solution is not optimal (" << saved.solution.message << ")\n";
    return kInvalid;
  }
  const auto fleet = schedules::build_fleet(feeder, saved.scenario);
  const auto problem = opf::assemble(feeder, fleet, saved.options);
  const auto dlmps = pricing::extract_dlmps(saved.solution, feeder);
  const auto dec = pricing::decompose(problem, saved.solution, feeder, dlmps, false, tol);
  const fs::path dir(out);
  io::write_csv(dir / "dlmp.csv", io::dlmp_csv(dlmps));
  io::write_csv(dir / "decomposition.csv", io::decomposition_csv(dec, dlmps));
  std::cout << "max relative mismatch " << io::format_number(dec.max_mismatch);
  if (dec.worst_hour >= 0) {
    std::cout << " at hour " << dec.worst_hour << ", node " << dec.worst_node << (dec.worst_is_reactive ? " (q)" : " (p)");
  }
  std::cout << "\nwrote " << dir.string() << "\n";
  if (strict && dec.max_mismatch > tol) {
    std::cerr << "components do not add up to the nodal price within " << tol << "\n";
    return kInvalid;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution prices, DER scheduling and transformer aging"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  RunConfig cfg;
  auto* solve = app.add_subcommand("solve", "Run scheduling options over scenarios and write the comparison");
  solve->set_config("--config", "", "TOML/INI file with the same keys as the flags");
  solve->add_option("--feeder", cfg.feeder, "Feeder JSON file");
  solve->add_option("--synth", cfg.synth_nodes, "Use a synthetic feeder with this many buses instead");
  solve->add_option("--seed", cfg.seed, "Seed for --synth")->capture_default_str();
  solve->add_option("--scenario", cfg.scenarios, "name:ev_per_site:pv_kva_per_site[:fleet], repeatable");
  solve->add_option("--ev-grid", cfg.ev_grid, "EVs per site, crossed with --pv-grid")->delimiter(',');
  solve->add_option("--pv-grid", cfg.pv_grid, "PV kVA per site, crossed with --ev-grid")->delimiter(',');
  solve->add_option("--options", cfg.options, "Subset of BaU,ToU,PQ-opt,Full-opt")->delimiter(',');
  solve->add_option("--out", cfg.out, "Output directory")->capture_default_str();
  solve->add_flag("--cyclic,!--no-cyclic", cfg.cyclic, "Daily-periodic thermal state and EV sessions");
  solve->add_option("--lol-factor", cfg.lol_factor, "Fail a cell above this multiple of base-case LoL")
      ->capture_default_str();
  solve->add_option("--violation-tol", cfg.violation_tol, "Voltage/ampacity tolerance, pu^2")->capture_default_str();
  solve->add_option("--exactness-tol", cfg.exactness_tol, "Relaxation gap tolerance")->capture_default_str();
  solve->add_option("--decomposition-tol", cfg.decomposition_tol)->capture_default_str();
  solve->add_flag("--decompose,!--no-decompose", cfg.decompose, "Write price decompositions");
  solve->add_option("--feastol", cfg.solver.feastol)->capture_default_str();
  solve->add_option("--abstol", cfg.solver.abstol)->capture_default_str();
  solve->add_option("--reltol", cfg.solver.reltol)->capture_default_str();
  solve->add_option("--max-iter", cfg.solver.max_iters)->capture_default_str();
  solve->add_flag("--verbose", cfg.solver.verbose, "Print solver iterations");

  std::string validate_path;
  bool validate_json = false;
  auto* validate = app.add_subcommand("validate", "Check a feeder file and report every problem found");
  validate->add_option("feeder", validate_path, "Feeder JSON file")->required();
  validate->add_flag("--json", validate_json, "Machine-readable report");

  int synth_nodes = 307;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic radial feeder");
  synth->add_option("--nodes", synth_nodes, "Number of buses (>= 2)")->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--out", synth_out, "Output file (stdout when omitted)");

  std::string sol_path, sol_feeder, sol_out = "dlmp-prices";
  bool sol_strict = false;
  double sol_tol = 1e-4;
  auto* dlmp_cmd = app.add_subcommand("dlmp", "Decompose the nodal prices of a saved dispatch");
  dlmp_cmd->add_option("--solution", sol_path, "Solution JSON written by solve")->required();
  dlmp_cmd->add_option("--feeder", sol_feeder, "Feeder file, if it moved since the solve");
  dlmp_cmd->add_option("--out", sol_out)->capture_default_str();
  dlmp_cmd->add_flag("--strict", sol_strict, "Exit 3 when components miss the price by more than --tol");
  dlmp_cmd->add_option("--tol", sol_tol)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*solve) return cmd_solve(cfg);
    if (*validate) return cmd_validate(validate_path, validate_json);
    if (*synth) return cmd_synth(synth_nodes, synth_seed, synth_out);
    if (*dlmp_cmd) return cmd_dlmp(sol_path, sol_feeder, sol_out, sol_strict, sol_tol);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const TopologyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}
