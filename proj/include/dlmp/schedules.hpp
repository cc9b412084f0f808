#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dlmp/conic.hpp"
#include "dlmp/der.hpp"
#include "dlmp/netmodel.hpp"
#include "dlmp/opf.hpp"
#include "dlmp/pricing.hpp"
#include "dlmp/thermal.hpp"

namespace dlmp::schedules {

enum class Option { BaU, ToU, PqOpt, FullOpt };

std::string to_string(Option option);
/// Accepts "BaU", "ToU", "PQ-opt", "Full-opt" (case-insensitive). Throws SchemaError.
Option parse_option(const std::string& name);
inline const std::vector<Option>& all_options() {
  static const std::vector<Option> all{Option::BaU, Option::ToU, Option::PqOpt, Option::FullOpt};
  return all;
}

/// DER penetration: EVs and rooftop PV added at every site of the feeder.
struct ScenarioSpec {
  std::string name;
  int ev_per_site = 0;
  double pv_kva_per_site = 0.0;
  /// Start from the devices listed explicitly in the feeder file.
  bool include_feeder_fleet = false;

  bool is_base() const { return ev_per_site == 0 && pv_kva_per_site == 0.0 && !include_feeder_fleet; }
};

/// "3ev-30kva"-style label used when a scenario has no name.
std::string scenario_label(const ScenarioSpec& spec);

der::DerFleet build_fleet(const net::Feeder& feeder, const ScenarioSpec& spec);

/// Dumb charging: full rate from arrival until the session target is met,
/// one reduced-rate hour at the end; PV at its available real power.
/// Throws InfeasibleError if a need cannot be met at full rate.
der::DerSchedule schedule_bau(const der::DerFleet& fleet, const net::Feeder& feeder, bool cyclic);

/// LMP-responsive charging: cheapest plugged hours of each session first
/// (ties to the earlier hour), the reduced-rate hour is the dearest chosen.
der::DerSchedule schedule_tou(const der::DerFleet& fleet, const net::Feeder& feeder, bool cyclic);

struct HarnessSettings {
  bool cyclic = true;
  double lol_factor = 10.0;  // failure when LoL exceeds this multiple of the base case
  double violation_tol = 1e-6;
  opf::OpfOptions opf;  // breakpoints and exactness tolerance; flags set per option
  conic::SolverSettings solver;
};

struct OptionResult {
  Option option = Option::BaU;
  std::string scenario;
  bool solved = false;  // a schedule and an ex-post evaluation exist
  bool failed = false;  // breaches the failure criterion (or could not be solved)
  std::vector<std::string> failure_reasons;
  std::string solver_status;  // empty for open-loop options
  bool relaxation_exact = true;

  der::DerSchedule schedule;
  opf::NetworkState state;
  std::optional<pricing::DlmpSeries> dlmps;
  /// Dispatch solution and the options it was assembled with (PQ-/Full-opt).
  std::shared_ptr<const opf::OpfSolution> dispatch;
  opf::OpfOptions dispatch_options;

  double real_power_cost = 0.0;   // $
  double reactive_cost = 0.0;     // $
  double transformer_cost = 0.0;  // $, exact aging
  double linearized_transformer_cost = 0.0;  // optimizer's own estimate
  double lol_hours = 0.0;                    // summed over transformers
  std::vector<double> lol_per_transformer;
  std::vector<double> initial_top_oil;
  std::vector<thermal::ThermalTrajectory> thermal;
  double max_voltage_violation = 0.0;  // pu^2
  double max_ampacity_violation = 0.0;  // pu^2

  double total_cost() const { return real_power_cost + reactive_cost + transformer_cost; }
};

/// Evaluates an option on a fleet. Failures (infeasible program, diverging
/// power flow, limit breaches) are recorded in the result, never thrown.
/// `lol_threshold` is the absolute aggregate loss-of-life limit in hours.
OptionResult run_option(Option option, const net::Feeder& feeder, const der::DerFleet& fleet,
                        const HarnessSettings& settings, double lol_threshold = 1e300,
                        const std::string& scenario = "");

/// Ex-post scoring of a fixed schedule: power flow, costs and exact aging.
void evaluate_schedule(const net::Feeder& feeder, const der::DerFleet& fleet, const HarnessSettings& settings,
                       OptionResult& result);

struct ComparisonRow {
  std::string scenario;
  Option option = Option::BaU;
  double delta_real = 0.0;
  double delta_reactive = 0.0;
  double delta_transformer = 0.0;
  double delta_total = 0.0;
  double lol_hours = 0.0;
  bool failed = false;
  std::string status;  // "ok" or the failure reasons joined by "; "
};

struct ComparisonTable {
  OptionResult base;
  double lol_threshold = 0.0;
  std::vector<ComparisonRow> rows;
  std::vector<OptionResult> cells;  // parallel to rows
};

/// Runs every (scenario, option) cell against the DER-free base case.
ComparisonTable comparison_table(const net::Feeder& feeder, const std::vector<ScenarioSpec>& scenarios,
                                 const std::vector<Option>& options, const HarnessSettings& settings);

ComparisonRow make_row(const OptionResult& cell, const OptionResult& base);

}  // namespace dlmp::schedules
