#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "dlmp/error.hpp"
#include "dlmp/netmodel.hpp"
#include "dlmp/opf.hpp"

using namespace dlmp;
using conic::Index;

namespace {

std::string fixture(const char* name) { return std::string(DLMP_FIXTURE_DIR) + "/" + name; }

// Root plus one load bus, everything already in per unit.
net::Feeder two_bus(double r, double x, double load, int T = 1) {
  net::Feeder f;
  f.horizon = T;
  f.dt = 1.0;
  f.base.s_base = 1000.0;
  f.base.v_base["mv"] = 13.8;
  f.nodes.resize(2);
  f.nodes[1].id = 1;
  f.nodes[1].parent = 0;
  for (auto& n : f.nodes) {
    n.level = "mv";
    n.voltage_min_sq = 0.81;
    n.voltage_max_sq = 1.21;
  }
  net::Line ln;
  ln.from_node = 0;
  ln.to_node = 1;
  ln.resistance = r;
  ln.reactance = x;
  ln.ampacity_sq = 4.0;
  f.lines = {ln};
  f.lmp.assign(T, 0.05);
  f.q_price.assign(T, 0.005);
  f.ambient.assign(T, 25.0);
  f.load_p = {std::vector<double>(T, 0.0), std::vector<double>(T, load)};
  f.load_q = {std::vector<double>(T, 0.0), std::vector<double>(T, 0.0)};
  f.children = {{1}, {}};
  f.topological_order = {0, 1};
  return f;
}

}  // namespace

TEST_CASE("two-bus power flow against the closed form") {
  const auto f = two_bus(0.01, 0.01, 0.5);
  opf::Grid p = {{0.0, -0.5}}, q = {{0.0, 0.0}};
  const auto s = opf::fixed_injection_powerflow(f, p, q);
  // l = (0.5 + r l)^2 + (x l)^2 with v_0 = 1 is a quadratic in l.
  const double a = 2e-4, bq = 0.01 - 1.0, c = 0.25;
  const double l = (-bq - std::sqrt(bq * bq - 4 * a * c)) / (2 * a);
  CHECK(s.l[0][0] == doctest::Approx(l).epsilon(1e-9));
  CHECK(s.l[0][0] == doctest::Approx(0.2526).epsilon(1e-3));
  CHECK(s.P[0][0] == doctest::Approx(0.5026).epsilon(1e-4));
  CHECK(s.p0[0] == doctest::Approx(0.5 + 0.01 * l).epsilon(1e-9));
  CHECK(opf::powerflow_residual(f, s, p, q) < 1e-9);
}

TEST_CASE("power flow reports divergence") {
  const auto f = two_bus(0.3, 0.3, 5.0);
  opf::Grid p = {{0.0, -5.0}}, q = {{0.0, 0.0}};
  CHECK_THROWS_AS(opf::fixed_injection_powerflow(f, p, q), ConvergenceError);
}

TEST_CASE("without DERs the dispatch reproduces the power flow") {
  const auto f = net::load_feeder(fixture("feeder15.json"));
  der::DerFleet none;
  opf::OpfOptions opt;
  opt.include_transformer_cost = false;
  const auto sol = opf::solve_or_throw(opf::assemble(f, none, opt));
  opf::Grid p, q;
  opf::net_injections(f, none, der::DerSchedule::zeros(none, f.horizon), p, q);
  const auto pf = opf::fixed_injection_powerflow(f, p, q);
  for (int t = 0; t < f.horizon; ++t) {
    CHECK(sol.state.p0[t] == doctest::Approx(pf.p0[t]).epsilon(1e-6));
    for (int k = 0; k < f.num_lines(); ++k) CHECK(sol.state.l[t][k] == doctest::Approx(pf.l[t][k]).epsilon(1e-5));
  }
  CHECK(opf::exactness_check(sol, f).exact());
  CHECK(sol.top_oil.empty());
}

TEST_CASE("dispatch on the 15-node feeder") {
  const auto f = net::load_feeder(fixture("feeder15.json"));
  for (bool cyclic : {false, true}) {
    CAPTURE(cyclic);
    opf::OpfOptions opt;
    opt.cyclic = cyclic;
    const auto pr = opf::assemble(f, f.fleet, opt);
    const auto sol = opf::solve_or_throw(pr);
    const auto ex = opf::exactness_check(sol, f);
    CHECK(ex.exact());
    CHECK(ex.min_gap > -1e-7);
    for (std::size_t d = 0; d < f.fleet.ev.size(); ++d) {
      CHECK(der::ev_feasible(f.fleet.ev[d], sol.schedule.ev[d].p, sol.schedule.ev[d].q, cyclic).feasible(1e-7));
    }
    for (std::size_t d = 0; d < f.fleet.pv.size(); ++d) {
      CHECK(der::pv_feasible(f.fleet.pv[d], sol.schedule.pv[d].p, sol.schedule.pv[d].q).feasible(1e-7));
    }
    // Linear thermal recursion holds along the returned trajectory.
    REQUIRE(sol.top_oil.size() == 1);
    const auto& co = pr.coefficients[0];
    const int k = f.transformer_line[0];
    for (int t = 0; t < f.horizon; ++t) {
      CHECK(sol.top_oil[0][t + 1] ==
            doctest::Approx(co.top_oil_next(sol.top_oil[0][t], sol.state.l[t][k], t)).epsilon(1e-7));
      CHECK(sol.aging[0][t] >= co.aging_bound(sol.top_oil[0][t + 1], sol.state.l[t][k]) - 1e-7);
    }
    if (cyclic) {
      CHECK(sol.top_oil[0].front() == doctest::Approx(sol.top_oil[0].back()).epsilon(1e-7));
    } else {
      CHECK(sol.top_oil[0].front() == doctest::Approx(pr.initial_top_oil[0]).epsilon(1e-9));
    }
    // Re-running the physics with the optimal injections lands on the same point.
    opf::Grid p, q;
    opf::net_injections(f, f.fleet, sol.schedule, p, q);
    const auto pf = opf::fixed_injection_powerflow(f, p, q);
    for (int t = 0; t < f.horizon; ++t) CHECK(pf.p0[t] == doctest::Approx(sol.state.p0[t]).epsilon(1e-5));
    CHECK(sol.objective == doctest::Approx(sol.real_power_cost + sol.reactive_cost + sol.transformer_cost));
  }
}

TEST_CASE("nodal prices match finite differences of the optimal cost") {
  const auto base = net::load_feeder(fixture("feeder15.json"));
  opf::OpfOptions opt;
  const auto sol = opf::solve_or_throw(opf::assemble(base, base.fleet, opt));
  const double eps = 1e-5;
  struct Probe {
    int node, hour;
  };
  for (Probe pr : {Probe{6, 12}, Probe{11, 19}, Probe{12, 3}, Probe{3, 8}}) {
    CAPTURE(pr.node);
    CAPTURE(pr.hour);
    auto up = base, down = base;
    up.load_p[pr.node][pr.hour] += eps;
    down.load_p[pr.node][pr.hour] -= eps;
    const double cu = opf::solve_or_throw(opf::assemble(up, up.fleet, opt)).objective;
    const double cd = opf::solve_or_throw(opf::assemble(down, down.fleet, opt)).objective;
    const double fd = (cu - cd) / (2 * eps) / base.money_per_pu_period();
    CHECK(sol.lambda_p[pr.hour][pr.node] == doctest::Approx(fd).epsilon(1e-3));
  }
}

TEST_CASE("infeasible requirements raise distinct errors") {
  auto f = net::load_feeder(fixture("feeder15.json"));
  SUBCASE("voltage floor") {
    for (auto& n : f.nodes) n.voltage_min_sq = 1.2;
    f.nodes[0].voltage_min_sq = 0.0;
    CHECK_THROWS_AS(opf::solve_or_throw(opf::assemble(f, f.fleet)), InfeasibleError);
  }
  SUBCASE("ev need beyond the charger") {
    f.fleet.ev[1].itinerary.intervals[0].min_soc_at_end = f.fleet.ev[1].battery_capacity * 2.0;
    f.fleet.ev[1].battery_capacity *= 3.0;
    CHECK_THROWS_AS(opf::solve_or_throw(opf::assemble(f, f.fleet)), InfeasibleError);
  }
  SUBCASE("device on a missing node") {
    f.fleet.pv[0].node = 99;
    CHECK_THROWS_AS(opf::assemble(f, f.fleet), TopologyError);
  }
}

TEST_CASE("program export") {
  const auto f = two_bus(0.01, 0.01, 0.5, 2);
  const auto pr = opf::assemble(f, f.fleet);
  std::ostringstream os;
  opf::write_cbf(pr, os);
  CHECK(os.str().find("VER") != std::string::npos);
  CHECK(os.str().find("Q 4") != std::string::npos);
}

namespace {

// Two-bus feeder whose only line is a 30 kVA service transformer.
net::Feeder transformer_bus(std::vector<double> load, double ambient = 25.0) {
  const int T = static_cast<int>(load.size());
  auto f = two_bus(0.002, 0.004, 0.0, T);
  f.load_p[1] = load;
  f.ambient.assign(T, ambient);
  f.lines[0].transformer = 0;
  f.lines[0].ampacity_sq = 1.0;
  thermal::ThermalParams tp;
  tp.name = "T1";
  tp.rated_kva = 30.0;
  tp.rated_current_sq = 0.03 * 0.03;
  tp.hourly_cost = 0.5;
  f.transformers = {tp};
  f.transformer_line = {0};
  return f;
}

int rows_touching(const conic::SpMat& m, const std::vector<Index>& cols) {
  int count = 0;
  const conic::SpMat rm = m.transpose();
  for (Index r = 0; r < rm.outerSize(); ++r) {
    for (conic::SpMat::InnerIterator it(rm, r); it; ++it) {
      if (std::find(cols.begin(), cols.end(), it.row()) != cols.end()) {
        ++count;
        break;
      }
    }
  }
  return count;
}

}  // namespace

TEST_CASE("hand counts of the assembled program") {
  SUBCASE("two-bus, two hours, no devices") {
    const auto f = two_bus(0.01, 0.01, 0.5, 2);
    const auto pr = opf::assemble(f, f.fleet);
    // Per hour: p0, q0, P, Q, l, v1.
    CHECK(pr.num_vars() == 12);
    // Per hour: two balances at each of two nodes plus one voltage drop.
    CHECK(pr.program.num_eq() == 10);
    // Per hour: ampacity, vmin, vmax.
    CHECK(pr.program.num_linear == 6);
    CHECK(pr.program.soc_dims == std::vector<Index>{4, 4});
  }
  SUBCASE("one transformer, eight segments, a day") {
    const auto f = net::load_feeder(fixture("feeder15.json"));
    const auto pr = opf::assemble(f, f.fleet);
    REQUIRE(pr.aging_rows.size() == 1);
    int epigraph = 0;
    for (const auto& hour : pr.aging_rows[0]) epigraph += static_cast<int>(hour.size());
    CHECK(epigraph == 8 * 24);
    CHECK(pr.thermal_recursion[0].size() == 24);
    CHECK(pr.thermal_boundary.size() == 1);
    std::vector<Index> thermal_vars(pr.h[0].begin(), pr.h[0].end());
    thermal_vars.insert(thermal_vars.end(), pr.f[0].begin(), pr.f[0].end());
    // Recursion rows plus the boundary row.
    CHECK(rows_touching(pr.program.A, thermal_vars) == 24 + 1);
    // Epigraph rows plus f >= 0.
    CHECK(rows_touching(pr.program.G, thermal_vars) == 8 * 24 + 24);
  }
  SUBCASE("PQ-opt drops every thermal row") {
    const auto f = net::load_feeder(fixture("feeder15.json"));
    opf::OpfOptions opt;
    opt.include_transformer_cost = false;
    const auto pr = opf::assemble(f, f.fleet, opt);
    CHECK(pr.h.empty());
    CHECK(pr.f.empty());
    CHECK(pr.aging_rows.empty());
  }
}

TEST_CASE("root-only network pays for its own load") {
  net::Feeder f;
  f.horizon = 3;
  f.base.s_base = 100.0;
  f.nodes.resize(1);
  f.nodes[0].level = "mv";
  f.base.v_base["mv"] = 13.8;
  f.lmp = {0.04, 0.05, 0.06};
  f.q_price = {0.01, 0.02, 0.03};
  f.ambient.assign(3, 20.0);
  f.load_p = {{0.3, 0.4, 0.5}};
  f.load_q = {{0.1, 0.1, 0.2}};
  f.children = {{}};
  f.topological_order = {0};
  const auto sol = opf::solve_or_throw(opf::assemble(f, f.fleet));
  double expect = 0.0;
  for (int t = 0; t < 3; ++t) expect += 100.0 * (f.lmp[t] * f.load_p[0][t] + f.q_price[t] * f.load_q[0][t]);
  CHECK(sol.objective == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("two-bus prices") {
  SUBCASE("lossless line prices every node at the LMP") {
    const auto f = two_bus(0.0, 0.0, 0.5, 2);
    const auto sol = opf::solve_or_throw(opf::assemble(f, f.fleet));
    for (int t = 0; t < 2; ++t) {
      CHECK(sol.lambda_p[t][0] == doctest::Approx(f.lmp[t]).epsilon(1e-8));
      CHECK(sol.lambda_p[t][1] == doctest::Approx(f.lmp[t]).epsilon(1e-8));
      CHECK(sol.lambda_q[t][1] == doctest::Approx(f.q_price[t]).epsilon(1e-8));
    }
    // Current is free when it costs nothing: the relaxation need not be
    // tight, and a loose line is reported rather than raised.
    const auto ex = opf::exactness_check(sol, f);
    CHECK(ex.min_gap > -1e-9);
  }
  SUBCASE("lossy line adds the marginal loss") {
    const auto f = two_bus(0.01, 0.01, 0.5, 1);
    const auto sol = opf::solve_or_throw(opf::assemble(f, f.fleet));
    CHECK(sol.lambda_p[0][1] > f.lmp[0]);
    CHECK(opf::exactness_check(sol, f).max_gap < 1e-9);
    const double h = 1e-4;
    auto up = f, down = f;
    up.load_p[1][0] += h;
    down.load_p[1][0] -= h;
    const double fd = (opf::solve_or_throw(opf::assemble(up, up.fleet)).objective -
                       opf::solve_or_throw(opf::assemble(down, down.fleet)).objective) /
                      (2 * h) / f.money_per_pu_period();
    CHECK(std::abs(sol.lambda_p[0][1] - fd) < 1e-5);
    CHECK(sol.lambda_p[0][0] == doctest::Approx(f.lmp[0]).epsilon(1e-8));
  }
}

TEST_CASE("negative price hour is flagged, not raised") {
  auto f = net::load_feeder(fixture("feeder15.json"));
  opf::OpfOptions opt;
  opt.include_transformer_cost = false;
  f.lmp[3] = -0.5;
  f.q_price[3] = 0.0;
  const auto sol = opf::solve_or_throw(opf::assemble(f, f.fleet, opt));
  const auto ex = opf::exactness_check(sol, f);
  CHECK_FALSE(ex.exact());
  for (const auto& [t, k] : ex.flagged) CHECK(t == 3);
}

TEST_CASE("zero injections leave a flat profile") {
  const auto f = net::load_feeder(fixture("feeder15.json"));
  opf::Grid p(f.horizon, std::vector<double>(f.num_nodes(), 0.0)), q = p;
  const auto s = opf::fixed_injection_powerflow(f, p, q);
  for (int t = 0; t < f.horizon; ++t) {
    for (int k = 0; k < f.num_lines(); ++k) {
      CHECK(s.P[t][k] == 0.0);
      CHECK(s.l[t][k] == 0.0);
    }
    for (int j = 0; j < f.num_nodes(); ++j) CHECK(s.v[t][j] == 1.0);
  }
}

TEST_CASE("cyclic thermal boundary") {
  SUBCASE("constant load sits at the steady state of the recursion") {
    const auto f = transformer_bus(std::vector<double>(24, 0.027));
    opf::OpfOptions opt;
    const auto sol = opf::cyclic_fixpoint(f, f.fleet, opt);
    const auto co = thermal::linearize(f.transformers[0], thermal::build_pwl(), f.ambient, f.dt);
    const double l = sol.state.l[0][0];
    const double steady = (co.gamma2 * l + co.delta[0]) / (1.0 - co.gamma1);
    CHECK(sol.top_oil[0][0] == doctest::Approx(steady).epsilon(1e-6));
    for (double h : sol.top_oil[0]) CHECK(h == doctest::Approx(steady).epsilon(1e-6));
  }
  SUBCASE("periodic orbit attracts forward simulation") {
    std::vector<double> load(24);
    for (int t = 0; t < 24; ++t) load[t] = 0.02 + 0.012 * std::sin(2.0 * M_PI * t / 24.0);
    const auto f = transformer_bus(load);
    const auto sol = opf::cyclic_fixpoint(f, f.fleet);
    const auto co = thermal::linearize(f.transformers[0], thermal::build_pwl(), f.ambient, f.dt);
    double h = -40.0;
    std::vector<double> last(25);
    for (int day = 0; day < 10; ++day) {
      last[0] = h;
      for (int t = 0; t < 24; ++t) last[t + 1] = h = co.top_oil_next(h, sol.state.l[t][0], t);
    }
    for (int t = 0; t <= 24; ++t) CHECK(last[t] == doctest::Approx(sol.top_oil[0][t]).epsilon(1e-6));
  }
  SUBCASE("no transformer makes the option a no-op") {
    const auto f = two_bus(0.01, 0.01, 0.5, 3);
    opf::OpfOptions opt;
    const double open = opf::solve_or_throw(opf::assemble(f, f.fleet, opt)).objective;
    const double wrapped = opf::cyclic_fixpoint(f, f.fleet, opt).objective;
    CHECK(open == doctest::Approx(wrapped).epsilon(1e-9));
  }
}

TEST_CASE("optimality structure on the 15-node feeder") {
  const auto f = net::load_feeder(fixture("feeder15.json"));
  opf::OpfOptions full_opt;
  const auto full_pr = opf::assemble(f, f.fleet, full_opt);
  const auto full = opf::solve_or_throw(full_pr);
  opf::OpfOptions pq_opt;
  pq_opt.include_transformer_cost = false;
  const auto pq = opf::solve_or_throw(opf::assemble(f, f.fleet, pq_opt));

  SUBCASE("epigraph is tight where aging is priced") {
    const auto& co = full_pr.coefficients[0];
    const int k = f.transformer_line[0];
    for (int t = 0; t < f.horizon; ++t) {
      const double bound = co.aging_bound(full.top_oil[0][t + 1], full.state.l[t][k]);
      CHECK(full.aging[0][t] == doctest::Approx(std::max(bound, 0.0)).epsilon(1e-7));
    }
  }
  SUBCASE("cost ordering between the two optimizations") {
    const double pq_energy = pq.real_power_cost + pq.reactive_cost;
    const double full_energy = full.real_power_cost + full.reactive_cost;
    CHECK(pq_energy <= full_energy + 1e-7 * std::abs(full_energy));
    // PQ-opt schedule scored with the linearized aging model.
    const auto& co = full_pr.coefficients[0];
    const int k = f.transformer_line[0];
    double h = full_pr.initial_top_oil[0], aging = 0.0;
    for (int t = 0; t < f.horizon; ++t) {
      h = co.top_oil_next(h, pq.state.l[t][k], t);
      aging += std::max(0.0, co.aging_bound(h, pq.state.l[t][k]));
    }
    const double pq_total = pq_energy + f.transformers[0].hourly_cost * f.dt * aging;
    CHECK(full.objective <= pq_total + 1e-7 * std::abs(pq_total));
  }
  SUBCASE("dual feasibility and stationarity") {
    for (int t = 0; t < f.horizon; ++t) {
      for (int j = 1; j < f.num_nodes(); ++j) {
        CHECK(full.mu_v_lower[t][j] >= -1e-9);
        CHECK(full.mu_v_upper[t][j] >= -1e-9);
      }
      for (int k = 0; k < f.num_lines(); ++k) CHECK(full.mu_ampacity[t][k] >= -1e-9);
      for (double xi : full.xi[0][t]) CHECK(xi >= -1e-9);
      CHECK(full.lambda_p[t][0] == doctest::Approx(f.lmp[t]).epsilon(1e-7));
      CHECK(full.lambda_q[t][0] == doctest::Approx(f.q_price[t]).epsilon(1e-7));
    }
    CHECK(full.dual_residual < 1e-6);
  }
}
