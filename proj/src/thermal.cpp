#include "dlmp/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dlmp/error.hpp"

namespace dlmp::thermal {

namespace {

constexpr double kAgingConstant = 15000.0;
constexpr double kReferenceKelvin = 383.0;  // 110 C

void require_positive(double value, const char* field, const std::string& name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw SchemaError("transformer '" + name + "': " + field + " must be positive");
  }
}

double top_oil_bracket(double current_sq_ratio, const ThermalParams& p) {
  return std::pow((1.0 + current_sq_ratio * p.loss_ratio) / (1.0 + p.loss_ratio), p.n);
}

}  // namespace

void ThermalParams::validate() const {
  require_positive(rated_current_sq, "rated current", name);
  require_positive(loss_ratio, "R", name);
  require_positive(top_oil_rise, "dtheta_TO_R", name);
  require_positive(hot_spot_rise, "dtheta_H_R", name);
  require_positive(tau_top_oil, "tau_TO_h", name);
  require_positive(k11, "k11", name);
  if (!(n > 0.0 && n <= 1.0)) throw SchemaError("transformer '" + name + "': n must lie in (0,1]");
  if (!(m > 0.0 && m <= 1.0)) throw SchemaError("transformer '" + name + "': m must lie in (0,1]");
  if (hourly_cost < 0.0) throw SchemaError("transformer '" + name + "': cost_per_hour is negative");
}

double aging_factor_exact(double hot_spot_c) {
  if (!(hot_spot_c > -273.0)) {
    throw std::domain_error("hot-spot temperature at or below absolute zero");
  }
  return std::exp(kAgingConstant / kReferenceKelvin - kAgingConstant / (hot_spot_c + 273.0));
}

std::vector<double> default_breakpoints() {
  return {0.0, 110.0, 120.0, 130.0, 140.0, 150.0, 160.0, 170.0, 180.0};
}

PwlSegments build_pwl(std::span<const double> breakpoints) {
  if (breakpoints.size() < 2) {
    throw std::invalid_argument("piecewise-linear aging factor needs at least 2 breakpoints");
  }
  PwlSegments pwl;
  pwl.breakpoints.assign(breakpoints.begin(), breakpoints.end());
  for (std::size_t k = 1; k < breakpoints.size(); ++k) {
    const double lo = breakpoints[k - 1];
    const double hi = breakpoints[k];
    if (!(hi > lo)) throw std::invalid_argument("breakpoints must be strictly increasing");
    const double f_lo = aging_factor_exact(lo);
    const double f_hi = aging_factor_exact(hi);
    const double slope = (f_hi - f_lo) / (hi - lo);
    pwl.slopes.push_back(slope);
    pwl.intercepts.push_back(slope * lo - f_lo);
  }
  return pwl;
}

double PwlSegments::evaluate(double hot_spot_c) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < slopes.size(); ++k) {
    best = std::max(best, slopes[k] * hot_spot_c - intercepts[k]);
  }
  return best;
}

bool PwlSegments::outside_validity(double hot_spot_c) {
  return hot_spot_c < kValidityLow || hot_spot_c > kValidityHigh;
}

double gamma1(const ThermalParams& p, double dt_hours) {
  return p.k11 * p.tau_top_oil / (p.k11 * p.tau_top_oil + dt_hours);
}

LinearizedCoefficients linearize(const ThermalParams& p, const PwlSegments& pwl,
                                 std::span<const double> ambient, double dt_hours) {
  if (!(dt_hours > 0.0)) throw std::invalid_argument("time step must be positive");
  LinearizedCoefficients c;
  const std::size_t segments = pwl.size();
  c.alpha1.resize(segments);
  c.alpha2.resize(segments);
  c.beta.resize(segments);
  for (std::size_t k = 0; k < segments; ++k) {
    const double a = pwl.slopes[k];
    c.alpha1[k] = a;
    c.alpha2[k] = a * p.hot_spot_rise * p.m / p.rated_current_sq;
    c.beta[k] = a * p.hot_spot_rise * (1.0 - p.m) - pwl.intercepts[k];
  }
  const double k_tau = p.k11 * p.tau_top_oil;
  c.gamma1 = k_tau / (k_tau + dt_hours);
  c.gamma2 = c.gamma1 * dt_hours * p.top_oil_rise * p.n * p.loss_ratio /
             (k_tau * (1.0 + p.loss_ratio) * p.rated_current_sq);
  const double no_load_term =
      p.top_oil_rise * (1.0 + (1.0 - p.n) * p.loss_ratio) / (1.0 + p.loss_ratio);
  c.delta.resize(ambient.size());
  for (std::size_t t = 0; t < ambient.size(); ++t) {
    c.delta[t] = c.gamma1 * dt_hours / k_tau * (no_load_term + ambient[t]);
  }
  return c;
}

double LinearizedCoefficients::aging_bound(double top_oil, double current_sq) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < alpha1.size(); ++k) {
    best = std::max(best, alpha1[k] * top_oil + alpha2[k] * current_sq + beta[k]);
  }
  return best;
}

double top_oil_step_exact(double prev_top_oil, double current_sq_ratio, double ambient,
                          const ThermalParams& p, double dt_hours) {
  const double g = gamma1(p, dt_hours);
  const double target = p.top_oil_rise * top_oil_bracket(current_sq_ratio, p) + ambient;
  return g * prev_top_oil + (1.0 - g) * target;
}

double top_oil_initial(const ThermalParams& p, double ambient0, double current_sq) {
  return ambient0 + p.top_oil_rise * top_oil_bracket(current_sq / p.rated_current_sq, p);
}

double hot_spot_rise_exact(double current_sq_ratio, const ThermalParams& p) {
  return p.hot_spot_rise * std::pow(current_sq_ratio, p.m);
}

ThermalTrajectory simulate_exact(const ThermalParams& p, std::span<const double> current_sq,
                                 std::span<const double> ambient, double initial_top_oil,
                                 double dt_hours) {
  if (current_sq.size() != ambient.size()) {
    throw DimensionError("current and ambient series differ in length");
  }
  ThermalTrajectory out;
  out.states.reserve(current_sq.size());
  double top_oil = initial_top_oil;
  for (std::size_t t = 0; t < current_sq.size(); ++t) {
    const double ratio = std::max(current_sq[t], 0.0) / p.rated_current_sq;
    top_oil = top_oil_step_exact(top_oil, ratio, ambient[t], p, dt_hours);
    ThermalState s;
    s.top_oil = top_oil;
    s.hot_spot = top_oil + hot_spot_rise_exact(ratio, p);
    s.aging_factor = aging_factor_exact(s.hot_spot);
    out.left_validity_range |= PwlSegments::outside_validity(s.hot_spot);
    out.loss_of_life_hours += s.aging_factor * dt_hours;
    out.states.push_back(s);
  }
  return out;
}

double periodic_top_oil_exact(const ThermalParams& p, std::span<const double> current_sq,
                              std::span<const double> ambient, double dt_hours) {
  if (current_sq.size() != ambient.size()) {
    throw DimensionError("current and ambient series differ in length");
  }
  // The recursion is affine in the previous value: theta_T = g^T theta_0 + c.
  double offset = 0.0;
  for (std::size_t t = 0; t < current_sq.size(); ++t) {
    offset = top_oil_step_exact(offset, std::max(current_sq[t], 0.0) / p.rated_current_sq,
                                ambient[t], p, dt_hours);
  }
  const double decay = std::pow(gamma1(p, dt_hours), static_cast<double>(current_sq.size()));
  return offset / (1.0 - decay);
}

LinearizationErrorReport linearization_error_report(const ThermalParams& p,
                                                    const PwlSegments& pwl,
                                                    std::span<const double> current_sq_grid,
                                                    std::span<const double> top_oil_grid) {
  LinearizationErrorReport report;
  const double lN = p.rated_current_sq;
  auto accumulate = [](ErrorStats& s, double err) {
    s.max_abs = std::max(s.max_abs, err);
    s.mean_abs += err;
  };
  std::size_t n_terms = 0;
  std::size_t n_pwl = 0;
  for (double l : current_sq_grid) {
    const double ratio = l / lN;
    const double exact_to = p.top_oil_rise * top_oil_bracket(ratio, p);
    const double affine_to = p.top_oil_rise / (1.0 + p.loss_ratio) *
                             (p.n * p.loss_ratio * ratio + 1.0 + (1.0 - p.n) * p.loss_ratio);
    const double exact_hs = hot_spot_rise_exact(ratio, p);
    const double affine_hs = p.hot_spot_rise * (p.m * ratio + 1.0 - p.m);
    accumulate(report.top_oil_term, std::abs(exact_to - affine_to));
    accumulate(report.hot_spot_rise, std::abs(exact_hs - affine_hs));
    ++n_terms;
    for (double h : top_oil_grid) {
      const double hot_spot = h + exact_hs;
      accumulate(report.aging_factor, std::abs(pwl.evaluate(hot_spot) - aging_factor_exact(hot_spot)));
      ++n_pwl;
    }
  }
  if (n_terms > 0) {
    report.top_oil_term.mean_abs /= static_cast<double>(n_terms);
    report.hot_spot_rise.mean_abs /= static_cast<double>(n_terms);
  }
  if (n_pwl > 0) report.aging_factor.mean_abs /= static_cast<double>(n_pwl);
  return report;
}

}  // namespace dlmp::thermal
