#pragma once

#include <span>
#include <string>
#include <vector>

namespace dlmp::der {

/// Irradiation at or below this value counts as "no sun": output forced to zero.
inline constexpr double kIrradiationCutoff = 1e-6;

/// Rooftop PV with an apparent-power-rated inverter. Power in per unit.
struct PvUnit {
  int node = 0;
  double nameplate = 0.0;
  std::vector<double> irradiation;  // rho_t in [0,1], one per hour

  double adjusted_capacity(std::size_t t) const { return irradiation[t] * nameplate; }
  bool producing(std::size_t t) const { return irradiation[t] > kIrradiationCutoff; }
};

/// One plug-in session at a node. The EV is connected during hours
/// begin+1 .. end of the horizon (0 <= begin < end <= T); arrays use index
/// t-1 for hour t, so the plugged indices are [begin, end).
struct PlugInterval {
  int node = 0;
  int begin = 0;
  int end = 0;
  double min_soc_at_end = 0.0;
  double trip_energy_after = 0.0;  // SoC drop before the next interval
  /// End clipped by the horizon; its minimum SoC is dropped when the
  /// session wraps around midnight under cyclic boundary conditions.
  bool truncated_end = false;
};

struct EvItinerary {
  std::vector<PlugInterval> intervals;
  double initial_soc = 0.0;
  /// The last interval continues into the first one across the day boundary.
  bool wraps = false;
};

struct EvUnit {
  EvItinerary itinerary;
  double battery_capacity = 0.0;
  double charger_capacity = 0.0;  // apparent power
  double max_rate = 0.0;          // real power

  bool plugged(std::size_t t) const;
  /// Node the EV is connected to at hour index t, or -1 when driving.
  int node_at(std::size_t t) const;
  /// Plugged hour indices in session order: arrival first. With `cyclic` and
  /// a wrapping itinerary the evening interval precedes the morning one.
  std::vector<std::size_t> charging_order(bool cyclic) const;
  /// True when the SoC wraps around the day boundary.
  bool soc_wraps(bool cyclic) const { return cyclic && itinerary.wraps; }
};

/// Whether the end-of-interval SoC floor of interval z is enforced.
bool min_soc_applies(const EvUnit& unit, std::size_t z, bool cyclic);

struct DerFleet {
  std::vector<PvUnit> pv;
  std::vector<EvUnit> ev;
  bool empty() const { return pv.empty() && ev.empty(); }
};

/// Hourly device set points. PV values are generation, EV values are
/// consumption (q < 0 means the charger supplies reactive power).
struct DeviceSeries {
  std::vector<double> p;
  std::vector<double> q;
};

struct DerSchedule {
  std::vector<DeviceSeries> pv;
  std::vector<DeviceSeries> ev;

  static DerSchedule zeros(const DerFleet& fleet, std::size_t hours);
};

struct Violation {
  std::size_t hour = 0;  // index t-1, or interval index for SoC rows
  std::string constraint;
  double amount = 0.0;
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  double max_violation = 0.0;
  /// Minimum slack per hour on the apparent-power circle (>= 0 when inside).
  std::vector<double> apparent_slack;
  bool feasible(double tol = 1e-8) const { return max_violation <= tol; }
  void add(std::size_t hour, std::string what, double amount);
};

struct EvFeasibilityReport : FeasibilityReport {
  std::vector<double> soc_begin;  // u at tau_z^beg
  std::vector<double> soc_end;    // u at tau_z^end
  double deficit = 0.0;           // largest shortfall below a minimum SoC
};

FeasibilityReport pv_feasible(const PvUnit& unit, std::span<const double> p, std::span<const double> q);

/// Rebuilds the SoC at interval boundaries and checks every device limit.
/// Under a wrapping cyclic session the initial SoC is the lowest level that
/// keeps the trajectory feasible; the wrap residual is reported as a violation.
EvFeasibilityReport ev_feasible(const EvUnit& unit, std::span<const double> p, std::span<const double> q,
                                bool cyclic = false);

/// Revenue-maximizing PV schedule at announced prices (closed form per hour).
DeviceSeries pv_opt(const PvUnit& unit, std::span<const double> price_p, std::span<const double> price_q);

/// Cost-minimizing EV schedule at announced prices. Prices are those of the
/// node the EV is connected to at each hour. Ties go to the earliest hours in
/// session order. Throws InfeasibleError if the itinerary cannot be met.
DeviceSeries ev_opt(const EvUnit& unit, std::span<const double> price_p, std::span<const double> price_q,
                    bool cyclic = false);

/// Device objective at given prices: PV returns revenue, EV returns cost.
double pv_revenue(std::span<const double> price_p, std::span<const double> price_q, const DeviceSeries& s);
double ev_cost(std::span<const double> price_p, std::span<const double> price_q, const DeviceSeries& s);

}  // namespace dlmp::der
