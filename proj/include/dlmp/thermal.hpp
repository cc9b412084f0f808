#pragma once

#include <span>
#include <string>
#include <vector>

namespace dlmp::thermal {

/// Nameplate thermal data of one distribution transformer.
///
/// Temperatures in degrees C, time constants in hours. `rated_current_sq` is
/// the squared rated current in per unit, i.e. (rated kVA / base kVA)^2.
struct ThermalParams {
  std::string name;
  double rated_kva = 0.0;
  double rated_current_sq = 0.0;
  double loss_ratio = 5.0;        // R: load losses / no-load losses at rated load
  double top_oil_rise = 55.0;     // rated top-oil rise over ambient
  double hot_spot_rise = 25.0;    // rated hot-spot rise over top oil
  double tau_top_oil = 3.0;
  double k11 = 1.0;
  double n = 0.8;
  double m = 0.8;
  double hourly_cost = 0.0;       // $ per hour of insulation life consumed

  /// Throws dlmp::SchemaError naming the offending field.
  void validate() const;
};

/// Aging acceleration factor relative to the 110 C reference hot spot.
double aging_factor_exact(double hot_spot_c);

/// Convex piecewise-linear overestimator f(theta) = max_k (a_k theta - b_k).
struct PwlSegments {
  std::vector<double> breakpoints;  // M+1 strictly increasing temperatures
  std::vector<double> slopes;       // a_k, k = 1..M
  std::vector<double> intercepts;   // b_k, k = 1..M

  std::size_t size() const { return slopes.size(); }
  double evaluate(double hot_spot_c) const;
  /// True when the temperature lies outside the declared validity range.
  static bool outside_validity(double hot_spot_c);
};

inline constexpr double kValidityLow = -30.0;
inline constexpr double kValidityHigh = 200.0;

std::vector<double> default_breakpoints();

/// Chords of aging_factor_exact over consecutive breakpoints.
PwlSegments build_pwl(std::span<const double> breakpoints);
inline PwlSegments build_pwl() { return build_pwl(default_breakpoints()); }

/// Coefficients of the hot-spot epigraph rows and the top-oil recursion,
/// both affine in (top oil h, squared current l).
struct LinearizedCoefficients {
  std::vector<double> alpha1;  // per segment
  std::vector<double> alpha2;  // per segment
  std::vector<double> beta;    // per segment
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  std::vector<double> delta;   // per hour

  /// Right-hand side of the linear top-oil recursion.
  double top_oil_next(double prev, double current_sq, std::size_t hour) const {
    return gamma1 * prev + gamma2 * current_sq + delta[hour];
  }
  /// max_k(alpha1 h + alpha2 l + beta); the embedded aging factor.
  double aging_bound(double top_oil, double current_sq) const;
};

LinearizedCoefficients linearize(const ThermalParams& params, const PwlSegments& pwl,
                                 std::span<const double> ambient, double dt_hours);

double gamma1(const ThermalParams& params, double dt_hours);

/// One step of the exact (power-n) top-oil difference equation.
double top_oil_step_exact(double prev_top_oil, double current_sq_ratio, double ambient,
                          const ThermalParams& params, double dt_hours);

/// Steady-state top oil at a constant squared current `current_sq` (pu^2).
double top_oil_initial(const ThermalParams& params, double ambient0, double current_sq);

double hot_spot_rise_exact(double current_sq_ratio, const ThermalParams& params);

struct ThermalState {
  double top_oil = 0.0;
  double hot_spot = 0.0;
  double aging_factor = 0.0;
};

struct ThermalTrajectory {
  std::vector<ThermalState> states;  // t = 1..T
  double loss_of_life_hours = 0.0;
  bool left_validity_range = false;
};

/// Exact recursion hour by hour; used to score every scheduling option.
ThermalTrajectory simulate_exact(const ThermalParams& params,
                                 std::span<const double> current_sq,
                                 std::span<const double> ambient, double initial_top_oil,
                                 double dt_hours);

/// Top oil at t=0 of the periodic orbit of the exact recursion under a
/// repeating daily input.
double periodic_top_oil_exact(const ThermalParams& params, std::span<const double> current_sq,
                              std::span<const double> ambient, double dt_hours);

struct ErrorStats {
  double max_abs = 0.0;
  double mean_abs = 0.0;
};

struct LinearizationErrorReport {
  ErrorStats top_oil_term;   // C, of the rated-rise times bracket term
  ErrorStats hot_spot_rise;  // C
  ErrorStats aging_factor;   // PWL vs exact, dimensionless
};

/// Errors of the two Taylor approximations and of the PWL over a grid of
/// squared currents (pu^2) and top-oil temperatures.
LinearizationErrorReport linearization_error_report(const ThermalParams& params,
                                                    const PwlSegments& pwl,
                                                    std::span<const double> current_sq_grid,
                                                    std::span<const double> top_oil_grid);

}  // namespace dlmp::thermal
