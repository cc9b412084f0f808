#pragma once

#include <string>
#include <vector>

#include "dlmp/error.hpp"
#include "dlmp/netmodel.hpp"
#include "dlmp/opf.hpp"

namespace dlmp::pricing {

using opf::Grid;

/// Nodal prices in $/kWh ($/kvarh) for consumption, [t][j].
struct DlmpSeries {
  Grid p;
  Grid q;
};

/// Reads the balance duals. Throws Error when the solution carries no duals
/// or the root prices differ from the wholesale prices.
DlmpSeries extract_dlmps(const opf::OpfSolution& solution, const net::Feeder& feeder, double root_tol = 1e-6);

/// Partial derivatives of the branch-flow state with respect to one unit of
/// additional consumption at a node, one hour, everything else fixed.
struct Partials {
  std::vector<double> dP, dQ, dl;  // per line
  std::vector<double> dv;          // per node, root entry 0
  double dp0 = 0.0, dq0 = 0.0;     // substation import
};

struct HourSensitivity {
  int hour = 0;
  std::vector<Partials> real;      // [j'] w.r.t. real consumption at j'
  std::vector<Partials> reactive;  // [j'] w.r.t. reactive consumption at j'
};

/// Differentiates the balance, voltage-drop and tight current equations
/// around `state` at `hour` and solves for every node. Throws Error when
/// the linearized system is singular (e.g. a collapsed voltage).
HourSensitivity build_sensitivities(const net::Feeder& feeder, const opf::NetworkState& state, int hour);

/// Residual of the differentiated equations for one set of partials.
double sensitivity_residual(const net::Feeder& feeder, const opf::NetworkState& state, int hour, int node,
                            bool reactive, const Partials& d);

struct Components {
  double real_power = 0.0;
  double reactive_power = 0.0;
  double transformer = 0.0;
  double voltage = 0.0;
  double current = 0.0;
  double total() const { return real_power + reactive_power + transformer + voltage + current; }
};

struct DlmpDecomposition {
  std::vector<std::vector<Components>> p;  // [t][j]
  std::vector<std::vector<Components>> q;
  /// Hours whose relaxation was not tight: sensitivities there are not a
  /// faithful model of the optimum and the split is reported untrusted.
  std::vector<bool> trusted;
  double max_mismatch = 0.0;  // max |sum - dlmp| / max(1, |dlmp|)
  int worst_hour = -1, worst_node = -1;
  bool worst_is_reactive = false;
};

/// Five-way split of every nodal price. With `strict`, a component sum
/// further than `tol` (relative) from the dual price raises DecompositionError.
DlmpDecomposition decompose(const opf::OpfProblem& problem, const opf::OpfSolution& solution,
                            const net::Feeder& feeder, const DlmpSeries& dlmps, bool strict = false,
                            double tol = 1e-4);

class DecompositionError : public Error {
 public:
  DecompositionError(const std::string& what, Components parts, double dlmp)
      : Error(what), parts_(parts), dlmp_(dlmp) {}
  const Components& parts() const { return parts_; }
  double dlmp() const { return dlmp_; }

 private:
  Components parts_;
  double dlmp_;
};

/// Weight of current at hour tp on top oil at hour index t (recursion
/// output h_{t+1}): gamma2 * gamma1^(t - tp), or the periodic response.
double top_oil_response(const thermal::LinearizedCoefficients& co, int t, int tp, int horizon, bool cyclic);

struct DeviceCheck {
  std::string kind;  // "pv" or "ev"
  int index = 0;
  double dispatched_value = 0.0;  // $ at the announced prices (revenue for pv, cost for ev)
  double best_value = 0.0;        // $ of the device's own optimum
  double gap = 0.0;               // >= 0 up to solver accuracy
  std::vector<int> differing_hours;
  bool consistent = true;
};

struct SelfScheduleReport {
  std::vector<DeviceCheck> devices;
  double max_gap = 0.0;
  bool consistent() const;
};

/// Re-solves every device's own problem at the nodal prices and compares it
/// with the dispatched schedule by value (set membership under degeneracy).
SelfScheduleReport verify_self_schedule(const opf::OpfSolution& solution, const der::DerFleet& fleet,
                                        const net::Feeder& feeder, const DlmpSeries& dlmps, bool cyclic,
                                        double tol = 1e-5);

/// Prices seen by a device: DLMP at the node it is connected to each hour.
std::vector<double> node_prices(const Grid& price, const der::EvUnit& ev);
std::vector<double> node_prices(const Grid& price, int node);

}  // namespace dlmp::pricing
