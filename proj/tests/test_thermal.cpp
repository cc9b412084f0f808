#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dlmp/thermal.hpp"

using namespace dlmp::thermal;

namespace {

// Independent scalar evaluation of the aging law (no shared helpers).
double aging_oracle(double theta) { return std::exp(15000.0 / 383.0 - 15000.0 / (theta + 273.0)); }

ThermalParams pilot_transformer() {
  ThermalParams p;
  p.name = "T30";
  p.rated_kva = 30.0;
  p.rated_current_sq = 0.03 * 0.03;
  p.loss_ratio = 5.0;
  p.top_oil_rise = 55.0;
  p.hot_spot_rise = 25.0;
  return p;
}

}  // namespace

TEST_CASE("aging factor exact values") {
  CHECK(aging_factor_exact(110.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(aging_factor_exact(120.0) == doctest::Approx(2.7088).epsilon(1e-4));
  CHECK(aging_factor_exact(120.0) == doctest::Approx(aging_oracle(120.0)).epsilon(1e-14));
  CHECK(aging_factor_exact(98.0) == doctest::Approx(0.2817).epsilon(1e-3));
  CHECK_THROWS_AS(aging_factor_exact(-273.0), std::domain_error);
  double prev = 0.0;
  for (double t = -30.0; t <= 200.0; t += 0.5) {
    const double f = aging_factor_exact(t);
    CHECK(f > prev);
    prev = f;
  }
}

TEST_CASE("pwl chords over the default intervals") {
  const auto pwl = build_pwl();
  CHECK(pwl.size() == 8);
  const double slope = (aging_oracle(120.0) - aging_oracle(110.0)) / 10.0;
  CHECK(pwl.slopes[1] == doctest::Approx(slope).epsilon(1e-12));
  CHECK(pwl.slopes[1] == doctest::Approx(0.17088).epsilon(1e-4));
  CHECK(pwl.slopes[1] * 110.0 - pwl.intercepts[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(pwl.evaluate(110.0) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(build_pwl(std::vector<double>{100.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_pwl(std::vector<double>{0.0, 110.0, 105.0}), std::invalid_argument);
}

TEST_CASE("pwl overestimates the convex aging law") {
  // Convexity of the law on [0,180]: a/(theta+273) > 2 with a = 15000.
  CHECK(15000.0 / (180.0 + 273.0) > 2.0);
  const auto pwl = build_pwl();
  for (int i = 0; i <= 10000; ++i) {
    const double theta = 180.0 * i / 10000.0;
    CHECK(pwl.evaluate(theta) - aging_oracle(theta) >= -1e-12);
  }
  // Slopes increasing means max-of-affines is convex; continuity at breakpoints.
  for (std::size_t k = 1; k < pwl.size(); ++k) {
    CHECK(pwl.slopes[k] > pwl.slopes[k - 1]);
    const double theta = pwl.breakpoints[k];
    CHECK(pwl.slopes[k] * theta - pwl.intercepts[k] ==
          doctest::Approx(pwl.slopes[k - 1] * theta - pwl.intercepts[k - 1]).epsilon(1e-12));
  }
  CHECK(PwlSegments::outside_validity(205.0));
  CHECK_FALSE(PwlSegments::outside_validity(150.0));
}

TEST_CASE("linearized coefficients") {
  const auto p = pilot_transformer();
  const auto pwl = build_pwl();
  const std::vector<double> ambient(24, 30.0);
  const auto c = linearize(p, pwl, ambient, 1.0);
  CHECK(c.gamma1 == doctest::Approx(0.75).epsilon(1e-15));
  // gamma2 = gamma1 * Dt * 55 * 0.8 * 5 / (k11 tau (1+R) lN)
  const double lN = p.rated_current_sq;
  CHECK(c.gamma2 == doctest::Approx(0.75 * 1.0 * 55.0 * 0.8 * 5.0 / (3.0 * 6.0 * lN)).epsilon(1e-13));
  for (std::size_t k = 0; k < pwl.size(); ++k) {
    CHECK(c.alpha1[k] == pwl.slopes[k]);
    CHECK(c.alpha2[k] == doctest::Approx(pwl.slopes[k] * 25.0 * 0.8 / lN).epsilon(1e-14));
    CHECK(c.beta[k] == doctest::Approx(pwl.slopes[k] * 25.0 * 0.2 - pwl.intercepts[k]).epsilon(1e-14));
  }
  SUBCASE("zero-slope segment") {
    PwlSegments flat;
    flat.breakpoints = {0.0, 10.0};
    flat.slopes = {0.0};
    flat.intercepts = {-0.5};
    const auto cf = linearize(p, flat, ambient, 1.0);
    CHECK(cf.alpha1[0] == 0.0);
    CHECK(cf.alpha2[0] == 0.0);
    CHECK(cf.beta[0] == 0.5);
  }
  SUBCASE("linear recursion equals Taylor-approximated difference equation") {
    for (double l : {0.0, 0.3 * lN, lN, 1.7 * lN}) {
      for (double prev : {40.0, 85.0, 120.0}) {
        const double g = 0.75;
        const double taylor = 0.8 * 5.0 / 6.0 * (l / lN) + (1.0 + 0.2 * 5.0) / 6.0;
        const double expected = g * prev + (1.0 - g) * (55.0 * taylor + 30.0);
        CHECK(c.top_oil_next(prev, l, 3) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(linearize(p, pwl, ambient, 0.0), std::invalid_argument);
}

TEST_CASE("exact top-oil and hot-spot relations") {
  const auto p = pilot_transformer();
  CHECK(top_oil_step_exact(85.0, 1.0, 30.0, p, 1.0) == doctest::Approx(85.0).epsilon(1e-14));
  const double step = top_oil_step_exact(85.0, 1.2, 30.0, p, 1.0);
  CHECK(step == doctest::Approx(0.75 * 85.0 + 0.25 * (55.0 * std::pow((1.0 + 1.2 * 5.0) / 6.0, 0.8) + 30.0)));

  CHECK(top_oil_initial(p, 30.0, p.rated_current_sq) == doctest::Approx(85.0).epsilon(1e-14));
  const double no_load = top_oil_initial(p, 30.0, 0.0);
  CHECK(no_load == doctest::Approx(30.0 + 55.0 * std::pow(1.0 / 6.0, 0.8)).epsilon(1e-14));
  CHECK(no_load == doctest::Approx(43.16).epsilon(1e-3));

  // Geometric convergence to the steady state at ratio gamma1.
  double theta = 100.0;
  double prev_err = std::abs(theta - no_load);
  for (int i = 0; i < 200; ++i) {
    theta = top_oil_step_exact(theta, 0.0, 30.0, p, 1.0);
    const double err = std::abs(theta - no_load);
    if (prev_err > 1e-12) CHECK(err == doctest::Approx(0.75 * prev_err).epsilon(1e-6));
    prev_err = err;
  }
  CHECK(std::abs(theta - no_load) < 1e-9);

  CHECK(hot_spot_rise_exact(1.0, p) == 25.0);
  CHECK(hot_spot_rise_exact(0.0, p) == 0.0);
  CHECK(hot_spot_rise_exact(2.0, p) == doctest::Approx(43.53).epsilon(1e-3));
}

TEST_CASE("exact simulation") {
  const auto p = pilot_transformer();
  const std::vector<double> ambient(24, 30.0);
  SUBCASE("rated load consumes life at rate one") {
    const std::vector<double> l(24, p.rated_current_sq);
    const auto traj = simulate_exact(p, l, ambient, 85.0, 1.0);
    for (const auto& s : traj.states) CHECK(std::abs(s.hot_spot - 110.0) < 1e-9);
    CHECK(std::abs(traj.loss_of_life_hours - 24.0) < 1e-9);
  }
  SUBCASE("no load") {
    const std::vector<double> l(24, 0.0);
    const double start = top_oil_initial(p, 30.0, 0.0);
    const auto traj = simulate_exact(p, l, ambient, start, 1.0);
    const double f = aging_oracle(start);
    for (const auto& s : traj.states) CHECK(s.hot_spot == doctest::Approx(start).epsilon(1e-12));
    CHECK(traj.loss_of_life_hours == doctest::Approx(24.0 * f).epsilon(1e-12));
  }
  SUBCASE("load step tracks the analytic first-order response") {
    std::vector<double> l(24, 0.0);
    for (int t = 12; t < 24; ++t) l[t] = p.rated_current_sq;
    const double start = top_oil_initial(p, 30.0, 0.0);
    const auto traj = simulate_exact(p, l, ambient, start, 1.0);
    // The implicit recursion decays as 0.75^k against exp(-k/3); the gap
    // peaks at k = 3 with 0.75^3 - exp(-1) = 0.05409 of the step height.
    const double height = 85.0 - start;
    double worst = 0.0;
    for (int t = 12; t < 24; ++t) {
      const double elapsed = t - 11;
      const double analytic = 85.0 + (start - 85.0) * std::exp(-elapsed / 3.0);
      worst = std::max(worst, std::abs(traj.states[t].top_oil - analytic));
      CHECK(traj.states[t].top_oil == doctest::Approx(85.0 - height * std::pow(0.75, elapsed)).epsilon(1e-12));
    }
    CHECK(worst == doctest::Approx(height * (0.421875 - std::exp(-1.0))).epsilon(1e-9));
    CHECK(worst < 0.06 * height);
    CHECK(traj.states[23].top_oil > 83.5);
  }
  SUBCASE("loss of life is monotone in the load") {
    std::vector<double> l(24);
    for (int t = 0; t < 24; ++t) l[t] = p.rated_current_sq * (0.5 + 0.04 * t);
    const double base = simulate_exact(p, l, ambient, 60.0, 1.0).loss_of_life_hours;
    for (int t = 0; t < 24; t += 5) {
      auto bumped = l;
      bumped[t] *= 1.3;
      CHECK(simulate_exact(p, bumped, ambient, 60.0, 1.0).loss_of_life_hours >= base);
    }
  }
  SUBCASE("periodic orbit") {
    std::vector<double> l(24);
    for (int t = 0; t < 24; ++t) l[t] = p.rated_current_sq * (0.6 + 0.4 * std::sin(t * 0.26));
    const double start = periodic_top_oil_exact(p, l, ambient, 1.0);
    const auto traj = simulate_exact(p, l, ambient, start, 1.0);
    CHECK(traj.states.back().top_oil == doctest::Approx(start).epsilon(1e-12));
  }
  const std::vector<double> shorter(23, 0.0);
  CHECK_THROWS(simulate_exact(p, shorter, ambient, 40.0, 1.0));
}

TEST_CASE("linearization error report") {
  const auto p = pilot_transformer();
  const auto pwl = build_pwl();
  const double lN = p.rated_current_sq;
  const std::vector<double> at_rated = {lN};
  const std::vector<double> top_oil = {85.0};
  auto r = linearization_error_report(p, pwl, at_rated, top_oil);
  CHECK(r.top_oil_term.max_abs < 1e-12);
  CHECK(r.hot_spot_rise.max_abs < 1e-12);
  CHECK(r.aging_factor.max_abs < 1e-12);  // hot spot 110 is a breakpoint

  const std::vector<double> no_load = {0.0};
  r = linearization_error_report(p, pwl, no_load, top_oil);
  CHECK(r.hot_spot_rise.max_abs == doctest::Approx(5.0).epsilon(1e-12));

  // hot spot 115 = 90 + 25 at rated current: chord minus exact, positive.
  const std::vector<double> h90 = {90.0};
  r = linearization_error_report(p, pwl, at_rated, h90);
  const double chord = 1.0 + (aging_oracle(120.0) - 1.0) * 0.5;
  CHECK(r.aging_factor.max_abs == doctest::Approx(chord - aging_oracle(115.0)).epsilon(1e-10));
  CHECK(chord - aging_oracle(115.0) > 0.0);
}
