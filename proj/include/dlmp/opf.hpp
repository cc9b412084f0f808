#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dlmp/conic.hpp"
#include "dlmp/der.hpp"
#include "dlmp/netmodel.hpp"
#include "dlmp/thermal.hpp"

namespace dlmp::opf {

using conic::Index;
using Grid = std::vector<std::vector<double>>;  // [t][node or line]

struct OpfOptions {
  /// false gives PQ-opt: no degradation cost, no thermal rows.
  bool include_transformer_cost = true;
  /// Thermal state and wrapping EV sessions repeat over the day.
  bool cyclic = false;
  std::vector<double> pwl_breakpoints = thermal::default_breakpoints();
  double exactness_tol = 1e-6;
};

/// Power-flow state for every hour. Line k feeds node k+1; v includes the root.
struct NetworkState {
  Grid P, Q, l, v;
  std::vector<double> p0, q0;
};

/// Index map of the assembled conic program. -1 marks an absent variable.
struct OpfProblem {
  conic::ConicProgram program;
  OpfOptions options;
  const net::Feeder* feeder = nullptr;
  der::DerFleet fleet;
  int T = 0;

  std::vector<Index> p0, q0;
  std::vector<std::vector<Index>> P, Q, l, v;  // [t][k], v[t][j] is -1 at the root
  std::vector<std::vector<Index>> pv_p, pv_q;  // [device][t]
  std::vector<std::vector<Index>> ev_p, ev_q;
  std::vector<std::vector<Index>> ev_soc_begin, ev_soc_end;  // [device][interval]
  std::vector<std::vector<Index>> h;  // [y][0..T]
  std::vector<std::vector<Index>> f;  // [y][t]

  // Equality rows.
  std::vector<std::vector<Index>> balance_p, balance_q;  // [t][j], root included
  std::vector<std::vector<Index>> voltage_drop;          // [t][k]
  std::vector<std::vector<Index>> thermal_recursion;     // [y][t]
  std::vector<Index> thermal_boundary;                   // [y]
  // Rows of G.
  std::vector<std::vector<Index>> v_lower, v_upper, ampacity;  // [t][j or k]
  std::vector<std::vector<Index>> line_cone;                   // [t][k] first row
  std::vector<std::vector<std::vector<Index>>> aging_rows;     // [y][t][segment]

  std::vector<thermal::LinearizedCoefficients> coefficients;  // [y]
  std::vector<double> initial_top_oil;                        // [y], non-cyclic only

  Index num_vars() const { return program.num_vars(); }
};

OpfProblem assemble(const net::Feeder& feeder, const der::DerFleet& fleet, const OpfOptions& options = {});

struct OpfSolution {
  conic::SolverStatus status = conic::SolverStatus::NumericalError;
  std::string message;
  int iterations = 0;
  double primal_residual = 0.0, dual_residual = 0.0, gap = 0.0;

  double objective = 0.0;         // $
  double real_power_cost = 0.0;   // sum c^P p0
  double reactive_cost = 0.0;     // sum c^Q q0
  double transformer_cost = 0.0;  // sum c_y f Dt (linearized aging)

  NetworkState state;
  der::DerSchedule schedule;
  Grid top_oil;  // [y][0..T]
  Grid aging;    // [y][t] (epigraph variable f)

  // Duals scaled to $/kWh per unit of the constraint; consumption-positive.
  Grid lambda_p, lambda_q;         // [t][j]
  Grid mu_v_lower, mu_v_upper;     // [t][j]
  Grid mu_ampacity;                // [t][k]
  std::vector<Grid> xi;            // [y][t][segment]
  Grid thermal_dual;               // [y][t] dual of the recursion rows

  /// Pairs with both slack and multiplier near zero: duals may not be unique.
  bool degenerate = false;
  int degenerate_pairs = 0;

  bool optimal() const { return status == conic::SolverStatus::Optimal; }
};

OpfSolution solve(const OpfProblem& problem, const conic::SolverSettings& settings = {});

/// Throws InfeasibleError / ConvergenceError on a non-optimal outcome.
OpfSolution solve_or_throw(const OpfProblem& problem, const conic::SolverSettings& settings = {});

struct ExactnessReport {
  Grid gap;  // [t][k] v_i l - P^2 - Q^2
  double max_gap = 0.0;
  double min_gap = 0.0;
  std::vector<std::pair<int, int>> flagged;  // (t, k) above tolerance
  bool exact() const { return flagged.empty(); }
};

ExactnessReport exactness_check(const OpfSolution& solution, const net::Feeder& feeder, double tol = 1e-6);

/// Net injections (generation positive) of fixed loads plus a DER schedule.
void net_injections(const net::Feeder& feeder, const der::DerFleet& fleet, const der::DerSchedule& schedule,
                    Grid& p_inj, Grid& q_inj);

/// Solves the branch-flow equations with the current equation tight by a
/// backward/forward sweep. Throws ConvergenceError with the last residual.
NetworkState fixed_injection_powerflow(const net::Feeder& feeder, const Grid& p_inj, const Grid& q_inj,
                                       double tol = 1e-10, int max_sweeps = 500);

/// Largest violation of the branch-flow equations (balance, drop, current).
double powerflow_residual(const net::Feeder& feeder, const NetworkState& s, const Grid& p_inj, const Grid& q_inj);

/// Solve with the daily wrap-around built into the program.
OpfSolution cyclic_fixpoint(const net::Feeder& feeder, const der::DerFleet& fleet, OpfOptions options = {});

/// Top-oil temperature at t = 0 for the non-cyclic boundary: steady state at
/// the last-hour current of the fixed-load power flow.
std::vector<double> fixed_load_initial_top_oil(const net::Feeder& feeder);

void write_cbf(const OpfProblem& problem, std::ostream& out);

}  // namespace dlmp::opf
