#include "dlmp/opf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dlmp/error.hpp"
#include "dlmp/program_builder.hpp"

namespace dlmp::opf {

using conic::Affine;

namespace {

Grid make_grid(std::size_t rows, std::size_t cols, double fill = 0.0) {
  return Grid(rows, std::vector<double>(cols, fill));
}

std::vector<std::vector<Index>> make_index(std::size_t rows, std::size_t cols) {
  return std::vector<std::vector<Index>>(rows, std::vector<Index>(cols, -1));
}

void check_fleet(const net::Feeder& feeder, const der::DerFleet& fleet) {
  const auto T = static_cast<std::size_t>(feeder.horizon);
  const int N = feeder.num_nodes();
  for (std::size_t i = 0; i < fleet.pv.size(); ++i) {
    const auto& pv = fleet.pv[i];
    if (pv.node <= 0 || pv.node >= N) throw TopologyError("pv[" + std::to_string(i) + "] sits on an unknown node");
    if (pv.irradiation.size() != T) throw DimensionError("pv[" + std::to_string(i) + "] irradiation length");
  }
  for (std::size_t i = 0; i < fleet.ev.size(); ++i) {
    for (const auto& iv : fleet.ev[i].itinerary.intervals) {
      if (iv.node <= 0 || iv.node >= N) throw TopologyError("ev[" + std::to_string(i) + "] plugs into an unknown node");
      if (iv.begin < 0 || iv.end > feeder.horizon || iv.begin >= iv.end) {
        throw DimensionError("ev[" + std::to_string(i) + "] plug-in interval outside the horizon");
      }
    }
  }
}

}  // namespace

std::vector<double> fixed_load_initial_top_oil(const net::Feeder& feeder) {
  std::vector<double> out;
  if (feeder.transformers.empty()) return out;
  const int T = feeder.horizon;
  Grid p = make_grid(T, feeder.num_nodes()), q = p;
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < feeder.num_nodes(); ++j) {
      p[t][j] = -feeder.load_p[j][t];
      q[t][j] = -feeder.load_q[j][t];
    }
  }
  const auto pf = fixed_injection_powerflow(feeder, p, q);
  for (std::size_t y = 0; y < feeder.transformers.size(); ++y) {
    const double l = pf.l[T - 1][feeder.transformer_line[y]];
    out.push_back(thermal::top_oil_initial(feeder.transformers[y], feeder.ambient[T - 1], l));
  }
  return out;
}

OpfProblem assemble(const net::Feeder& feeder, const der::DerFleet& fleet, const OpfOptions& options) {
  check_fleet(feeder, fleet);
  OpfProblem pr;
  pr.options = options;
  pr.feeder = &feeder;
  pr.fleet = fleet;
  const int T = feeder.horizon;
  const int N = feeder.num_nodes();
  const int K = feeder.num_lines();
  pr.T = T;
  const double money = feeder.money_per_pu_period();

  conic::ProgramBuilder b;
  pr.p0.assign(T, -1);
  pr.q0.assign(T, -1);
  pr.P = make_index(T, K);
  pr.Q = make_index(T, K);
  pr.l = make_index(T, K);
  pr.v = make_index(T, N);
  for (int t = 0; t < T; ++t) {
    pr.p0[t] = b.add_var(feeder.lmp[t] * money);
    pr.q0[t] = b.add_var(feeder.q_price[t] * money);
    for (int k = 0; k < K; ++k) {
      pr.P[t][k] = b.add_var();
      pr.Q[t][k] = b.add_var();
      pr.l[t][k] = b.add_var();
    }
    for (int j = 1; j < N; ++j) pr.v[t][j] = b.add_var();
  }

  const std::size_t npv = fleet.pv.size(), nev = fleet.ev.size();
  pr.pv_p = make_index(npv, T);
  pr.pv_q = make_index(npv, T);
  for (std::size_t d = 0; d < npv; ++d) {
    const auto& pv = fleet.pv[d];
    for (int t = 0; t < T; ++t) {
      if (!pv.producing(t)) continue;
      pr.pv_p[d][t] = b.add_var();
      pr.pv_q[d][t] = b.add_var();
      b.add_nonneg(Affine::var(pr.pv_p[d][t]));
      b.add_nonneg(Affine(pv.adjusted_capacity(t)).add(pr.pv_p[d][t], -1.0));
      b.add_soc({Affine(pv.nameplate), Affine::var(pr.pv_p[d][t]), Affine::var(pr.pv_q[d][t])});
    }
  }
  pr.ev_p = make_index(nev, T);
  pr.ev_q = make_index(nev, T);
  pr.ev_soc_begin.resize(nev);
  pr.ev_soc_end.resize(nev);
  for (std::size_t d = 0; d < nev; ++d) {
    const auto& ev = fleet.ev[d];
    for (int t = 0; t < T; ++t) {
      if (!ev.plugged(t)) continue;
      pr.ev_p[d][t] = b.add_var();
      pr.ev_q[d][t] = b.add_var();
      b.add_nonneg(Affine::var(pr.ev_p[d][t]));
      b.add_nonneg(Affine(ev.max_rate).add(pr.ev_p[d][t], -1.0));
      b.add_soc({Affine(ev.charger_capacity), Affine::var(pr.ev_p[d][t]), Affine::var(pr.ev_q[d][t])});
    }
    const auto& ivs = ev.itinerary.intervals;
    const std::size_t Z = ivs.size();
    auto& ub = pr.ev_soc_begin[d];
    auto& ue = pr.ev_soc_end[d];
    ub.resize(Z);
    ue.resize(Z);
    for (std::size_t z = 0; z < Z; ++z) {
      ub[z] = b.add_var();
      ue[z] = b.add_var();
    }
    for (std::size_t z = 0; z < Z; ++z) {
      b.add_nonneg(Affine::var(ub[z]));
      b.add_nonneg(Affine(ev.battery_capacity).add(ue[z], -1.0));
      if (der::min_soc_applies(ev, z, options.cyclic)) b.add_nonneg(Affine(-ivs[z].min_soc_at_end).add(ue[z], 1.0));
      Affine energy = Affine::var(ue[z]).add(ub[z], -1.0);
      for (int t = ivs[z].begin; t < ivs[z].end; ++t) energy.add(pr.ev_p[d][t], -1.0);
      b.add_eq(energy);
      if (z + 1 < Z) b.add_eq(Affine(ivs[z].trip_energy_after).add(ub[z + 1], 1.0).add(ue[z], -1.0));
    }
    if (Z > 0) {
      if (ev.soc_wraps(options.cyclic)) {
        b.add_eq(Affine::var(ub[0]).add(ue[Z - 1], -1.0));
      } else {
        b.add_eq(Affine(-ev.itinerary.initial_soc).add(ub[0], 1.0));
      }
    }
  }

  // Network rows, hour by hour.
  pr.balance_p = make_index(T, N);
  pr.balance_q = make_index(T, N);
  pr.voltage_drop = make_index(T, K);
  pr.v_lower = make_index(T, N);
  pr.v_upper = make_index(T, N);
  pr.ampacity = make_index(T, K);
  pr.line_cone = make_index(T, K);
  std::vector<Index> lower_h, upper_h, amp_h, cone_h;
  const double v0 = feeder.root_voltage_sq;
  for (int t = 0; t < T; ++t) {
    std::vector<Affine> bp(N), bq(N);
    bp[0].add(pr.p0[t], 1.0);
    bq[0].add(pr.q0[t], 1.0);
    for (int j = 0; j < N; ++j) {
      bp[j].constant = -feeder.load_p[j][t];
      bq[j].constant = -feeder.load_q[j][t];
      for (int c : feeder.children[j]) {
        bp[j].add(pr.P[t][c - 1], -1.0);
        bq[j].add(pr.Q[t][c - 1], -1.0);
      }
    }
    for (int k = 0; k < K; ++k) {
      const auto& ln = feeder.lines[k];
      const int j = ln.to_node;
      bp[j].add(pr.P[t][k], 1.0).add(pr.l[t][k], -ln.resistance);
      bq[j].add(pr.Q[t][k], 1.0).add(pr.l[t][k], -ln.reactance);
    }
    for (std::size_t d = 0; d < npv; ++d) {
      if (pr.pv_p[d][t] < 0) continue;
      const int j = fleet.pv[d].node;
      bp[j].add(pr.pv_p[d][t], 1.0);
      bq[j].add(pr.pv_q[d][t], 1.0);
    }
    for (std::size_t d = 0; d < nev; ++d) {
      if (pr.ev_p[d][t] < 0) continue;
      const int j = fleet.ev[d].node_at(t);
      bp[j].add(pr.ev_p[d][t], -1.0);
      bq[j].add(pr.ev_q[d][t], -1.0);
    }
    for (int j = 0; j < N; ++j) {
      pr.balance_p[t][j] = b.add_eq(bp[j]);
      pr.balance_q[t][j] = b.add_eq(bq[j]);
    }

    for (int k = 0; k < K; ++k) {
      const auto& ln = feeder.lines[k];
      const int i = ln.from_node, j = ln.to_node;
      const double r = ln.resistance, x = ln.reactance;
      auto vi = [&](double coef) { return i == 0 ? Affine(coef * v0) : Affine::var(pr.v[t][i], coef); };
      Affine drop = vi(-1.0);
      drop.add(pr.v[t][j], 1.0)
          .add(pr.P[t][k], 2.0 * r)
          .add(pr.Q[t][k], 2.0 * x)
          .add(pr.l[t][k], -(r * r + x * x));
      pr.voltage_drop[t][k] = b.add_eq(drop);

      Affine top = vi(1.0), bottom = vi(1.0);
      top.add(pr.l[t][k], 1.0);
      bottom.add(pr.l[t][k], -1.0);
      cone_h.push_back(b.add_soc({top, Affine::var(pr.P[t][k], 2.0), Affine::var(pr.Q[t][k], 2.0), bottom}));
      if (ln.ampacity_sq > 0.0 && std::isfinite(ln.ampacity_sq)) {
        amp_h.push_back(b.add_nonneg(Affine(ln.ampacity_sq).add(pr.l[t][k], -1.0)));
      } else {
        amp_h.push_back(-1);
      }
    }
    for (int j = 1; j < N; ++j) {
      lower_h.push_back(b.add_nonneg(Affine(-feeder.nodes[j].voltage_min_sq).add(pr.v[t][j], 1.0)));
      upper_h.push_back(b.add_nonneg(Affine(feeder.nodes[j].voltage_max_sq).add(pr.v[t][j], -1.0)));
    }
  }

  // Transformer thermal model and aging epigraph.
  const std::size_t Y = options.include_transformer_cost ? feeder.transformers.size() : 0;
  pr.h.resize(Y);
  pr.f.resize(Y);
  pr.thermal_recursion.resize(Y);
  pr.thermal_boundary.assign(Y, -1);
  pr.aging_rows.resize(Y);
  std::vector<std::vector<std::vector<Index>>> aging_h(Y);
  if (Y > 0) {
    const auto pwl = thermal::build_pwl(options.pwl_breakpoints);
    if (!options.cyclic) pr.initial_top_oil = fixed_load_initial_top_oil(feeder);
    for (std::size_t y = 0; y < Y; ++y) {
      const auto& tp = feeder.transformers[y];
      const int k = feeder.transformer_line[y];
      pr.coefficients.push_back(thermal::linearize(tp, pwl, feeder.ambient, feeder.dt));
      const auto& co = pr.coefficients.back();
      auto& h = pr.h[y];
      auto& f = pr.f[y];
      h.resize(T + 1);
      f.resize(T);
      for (int t = 0; t <= T; ++t) h[t] = b.add_var();
      for (int t = 0; t < T; ++t) f[t] = b.add_var(tp.hourly_cost * feeder.dt);
      pr.thermal_recursion[y].resize(T);
      aging_h[y].resize(T);
      for (int t = 0; t < T; ++t) {
        pr.thermal_recursion[y][t] = b.add_eq(Affine(-co.delta[t])
                                                  .add(h[t + 1], 1.0)
                                                  .add(h[t], -co.gamma1)
                                                  .add(pr.l[t][k], -co.gamma2));
        b.add_nonneg(Affine::var(f[t]));
        for (std::size_t s = 0; s < co.alpha1.size(); ++s) {
          aging_h[y][t].push_back(b.add_nonneg(Affine(-co.beta[s])
                                                   .add(f[t], 1.0)
                                                   .add(h[t + 1], -co.alpha1[s])
                                                   .add(pr.l[t][k], -co.alpha2[s])));
        }
      }
      if (options.cyclic) {
        pr.thermal_boundary[y] = b.add_eq(Affine::var(h[0]).add(h[T], -1.0));
      } else {
        pr.thermal_boundary[y] = b.add_eq(Affine(-pr.initial_top_oil[y]).add(h[0], 1.0));
      }
    }
  }

  // Resolve inequality handles to final rows.
  std::size_t a = 0, c = 0, lo = 0, up = 0;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      pr.line_cone[t][k] = b.ineq_row(cone_h[c++]);
      const Index hdl = amp_h[a++];
      pr.ampacity[t][k] = hdl < 0 ? -1 : b.ineq_row(hdl);
    }
    for (int j = 1; j < N; ++j) {
      pr.v_lower[t][j] = b.ineq_row(lower_h[lo++]);
      pr.v_upper[t][j] = b.ineq_row(upper_h[up++]);
    }
  }
  for (std::size_t y = 0; y < Y; ++y) {
    pr.aging_rows[y].resize(T);
    for (int t = 0; t < T; ++t) {
      for (Index hdl : aging_h[y][t]) pr.aging_rows[y][t].push_back(b.ineq_row(hdl));
    }
  }
  pr.program = b.build();
  return pr;
}

OpfSolution solve(const OpfProblem& pr, const conic::SolverSettings& settings) {
  const auto& feeder = *pr.feeder;
  const int T = pr.T;
  const int N = feeder.num_nodes();
  const int K = feeder.num_lines();
  const double money = feeder.money_per_pu_period();

  const auto raw = conic::solve(pr.program, settings);
  OpfSolution out;
  out.status = raw.status;
  out.iterations = raw.iterations;
  out.primal_residual = raw.primal_residual;
  out.dual_residual = raw.dual_residual;
  out.gap = raw.gap;
  out.message = conic::to_string(raw.status);
  if (raw.status != conic::SolverStatus::Optimal) return out;

  const auto& x = raw.x;
  auto val = [&](Index i) { return i < 0 ? 0.0 : x(i); };

  auto& st = out.state;
  st.P = make_grid(T, K);
  st.Q = make_grid(T, K);
  st.l = make_grid(T, K);
  st.v = make_grid(T, N);
  st.p0.assign(T, 0.0);
  st.q0.assign(T, 0.0);
  for (int t = 0; t < T; ++t) {
    st.p0[t] = val(pr.p0[t]);
    st.q0[t] = val(pr.q0[t]);
    out.real_power_cost += feeder.lmp[t] * money * st.p0[t];
    out.reactive_cost += feeder.q_price[t] * money * st.q0[t];
    for (int k = 0; k < K; ++k) {
      st.P[t][k] = val(pr.P[t][k]);
      st.Q[t][k] = val(pr.Q[t][k]);
      st.l[t][k] = val(pr.l[t][k]);
    }
    st.v[t][0] = feeder.root_voltage_sq;
    for (int j = 1; j < N; ++j) st.v[t][j] = val(pr.v[t][j]);
  }

  out.schedule = der::DerSchedule::zeros(pr.fleet, T);
  for (std::size_t d = 0; d < pr.pv_p.size(); ++d) {
    for (int t = 0; t < T; ++t) {
      out.schedule.pv[d].p[t] = val(pr.pv_p[d][t]);
      out.schedule.pv[d].q[t] = val(pr.pv_q[d][t]);
    }
  }
  for (std::size_t d = 0; d < pr.ev_p.size(); ++d) {
    for (int t = 0; t < T; ++t) {
      out.schedule.ev[d].p[t] = val(pr.ev_p[d][t]);
      out.schedule.ev[d].q[t] = val(pr.ev_q[d][t]);
    }
  }

  const std::size_t Y = pr.h.size();
  out.top_oil.resize(Y);
  out.aging.resize(Y);
  out.xi.resize(Y);
  out.thermal_dual.resize(Y);
  for (std::size_t y = 0; y < Y; ++y) {
    const double cy = feeder.transformers[y].hourly_cost * feeder.dt;
    for (Index i : pr.h[y]) out.top_oil[y].push_back(val(i));
    out.xi[y] = make_grid(T, pr.coefficients[y].alpha1.size());
    out.thermal_dual[y].assign(T, 0.0);
    for (int t = 0; t < T; ++t) {
      const double f = val(pr.f[y][t]);
      out.aging[y].push_back(f);
      out.transformer_cost += cy * f;
      for (std::size_t s = 0; s < pr.aging_rows[y][t].size(); ++s) {
        out.xi[y][t][s] = raw.z(pr.aging_rows[y][t][s]) / money;
      }
      out.thermal_dual[y][t] = -raw.y(pr.thermal_recursion[y][t]) / money;
    }
  }
  out.objective = out.real_power_cost + out.reactive_cost + out.transformer_cost;

  out.lambda_p = make_grid(T, N);
  out.lambda_q = make_grid(T, N);
  out.mu_v_lower = make_grid(T, N);
  out.mu_v_upper = make_grid(T, N);
  out.mu_ampacity = make_grid(T, K);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < N; ++j) {
      out.lambda_p[t][j] = -raw.y(pr.balance_p[t][j]) / money;
      out.lambda_q[t][j] = -raw.y(pr.balance_q[t][j]) / money;
      if (j > 0) {
        out.mu_v_lower[t][j] = raw.z(pr.v_lower[t][j]) / money;
        out.mu_v_upper[t][j] = raw.z(pr.v_upper[t][j]) / money;
      }
    }
    for (int k = 0; k < K; ++k) {
      if (pr.ampacity[t][k] >= 0) out.mu_ampacity[t][k] = raw.z(pr.ampacity[t][k]) / money;
    }
  }

  // Weakly active linear rows: slack and multiplier both vanish.
  const Index m = pr.program.num_linear;
  const double zmax = m > 0 ? raw.z.head(m).cwiseAbs().maxCoeff() : 0.0;
  for (Index i = 0; i < m; ++i) {
    const double slack_scale = 1.0 + std::abs(pr.program.h(i));
    if (raw.s(i) < 1e-7 * slack_scale && raw.z(i) < 1e-7 * std::max(1.0, zmax)) ++out.degenerate_pairs;
  }
  out.degenerate = out.degenerate_pairs > 0;
  return out;
}

OpfSolution solve_or_throw(const OpfProblem& problem, const conic::SolverSettings& settings) {
  auto sol = solve(problem, settings);
  switch (sol.status) {
    case conic::SolverStatus::Optimal:
      return sol;
    case conic::SolverStatus::PrimalInfeasible:
      throw InfeasibleError("dispatch problem is infeasible: network limits and DER requirements conflict");
    case conic::SolverStatus::DualInfeasible:
      throw Error("dispatch problem is unbounded");
    default:
      throw ConvergenceError("dispatch solve ended with status " + sol.message,
                             std::max(sol.primal_residual, sol.dual_residual));
  }
}

ExactnessReport exactness_check(const OpfSolution& solution, const net::Feeder& feeder, double tol) {
  ExactnessReport rep;
  const auto& st = solution.state;
  const int T = static_cast<int>(st.P.size());
  rep.gap = make_grid(T, feeder.num_lines());
  bool first = true;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < feeder.num_lines(); ++k) {
      const double vi = st.v[t][feeder.lines[k].from_node];
      const double g = vi * st.l[t][k] - st.P[t][k] * st.P[t][k] - st.Q[t][k] * st.Q[t][k];
      rep.gap[t][k] = g;
      if (first) {
        rep.max_gap = rep.min_gap = g;
        first = false;
      }
      rep.max_gap = std::max(rep.max_gap, g);
      rep.min_gap = std::min(rep.min_gap, g);
      if (g > tol) rep.flagged.emplace_back(t, k);
    }
  }
  return rep;
}

void net_injections(const net::Feeder& feeder, const der::DerFleet& fleet, const der::DerSchedule& schedule,
                    Grid& p_inj, Grid& q_inj) {
  const int T = feeder.horizon;
  const int N = feeder.num_nodes();
  p_inj = make_grid(T, N);
  q_inj = make_grid(T, N);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < N; ++j) {
      p_inj[t][j] = -feeder.load_p[j][t];
      q_inj[t][j] = -feeder.load_q[j][t];
    }
    for (std::size_t d = 0; d < fleet.pv.size(); ++d) {
      p_inj[t][fleet.pv[d].node] += schedule.pv[d].p[t];
      q_inj[t][fleet.pv[d].node] += schedule.pv[d].q[t];
    }
    for (std::size_t d = 0; d < fleet.ev.size(); ++d) {
      const int j = fleet.ev[d].node_at(t);
      if (j < 0) continue;
      p_inj[t][j] -= schedule.ev[d].p[t];
      q_inj[t][j] -= schedule.ev[d].q[t];
    }
  }
}

NetworkState fixed_injection_powerflow(const net::Feeder& feeder, const Grid& p_inj, const Grid& q_inj, double tol,
                                       int max_sweeps) {
  const int T = static_cast<int>(p_inj.size());
  const int N = feeder.num_nodes();
  const int K = feeder.num_lines();
  if (static_cast<int>(q_inj.size()) != T) throw DimensionError("injection grids differ in length");
  NetworkState s;
  s.P = make_grid(T, K);
  s.Q = make_grid(T, K);
  s.l = make_grid(T, K);
  s.v = make_grid(T, N, feeder.root_voltage_sq);
  s.p0.assign(T, 0.0);
  s.q0.assign(T, 0.0);
  const auto& order = feeder.topological_order;

  for (int t = 0; t < T; ++t) {
    if (static_cast<int>(p_inj[t].size()) != N || static_cast<int>(q_inj[t].size()) != N) {
      throw DimensionError("injection grid width differs from the node count");
    }
    auto& P = s.P[t];
    auto& Q = s.Q[t];
    auto& l = s.l[t];
    auto& v = s.v[t];
    double change = 0.0;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
      change = 0.0;
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int j = *it;
        if (j == 0) continue;
        const int k = j - 1;
        double pj = -p_inj[t][j] + feeder.lines[k].resistance * l[k];
        double qj = -q_inj[t][j] + feeder.lines[k].reactance * l[k];
        for (int c : feeder.children[j]) {
          pj += P[c - 1];
          qj += Q[c - 1];
        }
        change = std::max({change, std::abs(pj - P[k]), std::abs(qj - Q[k])});
        P[k] = pj;
        Q[k] = qj;
      }
      for (int j : order) {
        if (j == 0) continue;
        const int k = j - 1;
        const auto& ln = feeder.lines[k];
        const double vi = v[ln.from_node];
        if (!(vi > 0.0)) throw ConvergenceError("voltage collapse in the power flow sweep", change);
        const double lk = (P[k] * P[k] + Q[k] * Q[k]) / vi;
        const double vj = vi - 2.0 * (ln.resistance * P[k] + ln.reactance * Q[k]) +
                          (ln.resistance * ln.resistance + ln.reactance * ln.reactance) * lk;
        change = std::max({change, std::abs(lk - l[k]), std::abs(vj - v[j])});
        l[k] = lk;
        v[j] = vj;
      }
      if (!std::isfinite(change)) throw ConvergenceError("power flow sweep diverged", change);
      if (change < tol) break;
    }
    if (sweep == max_sweeps) throw ConvergenceError("power flow sweep did not converge", change);
    double p0 = -p_inj[t][0], q0 = -q_inj[t][0];
    for (int c : feeder.children[0]) {
      p0 += P[c - 1];
      q0 += Q[c - 1];
    }
    s.p0[t] = p0;
    s.q0[t] = q0;
  }
  return s;
}

double powerflow_residual(const net::Feeder& feeder, const NetworkState& s, const Grid& p_inj, const Grid& q_inj) {
  double worst = 0.0;
  const int T = static_cast<int>(s.P.size());
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < feeder.num_nodes(); ++j) {
      double rp = p_inj[t][j], rq = q_inj[t][j];
      if (j == 0) {
        rp += s.p0[t];
        rq += s.q0[t];
      } else {
        const auto& ln = feeder.lines[j - 1];
        rp += s.P[t][j - 1] - ln.resistance * s.l[t][j - 1];
        rq += s.Q[t][j - 1] - ln.reactance * s.l[t][j - 1];
      }
      for (int c : feeder.children[j]) {
        rp -= s.P[t][c - 1];
        rq -= s.Q[t][c - 1];
      }
      worst = std::max({worst, std::abs(rp), std::abs(rq)});
    }
    for (int k = 0; k < feeder.num_lines(); ++k) {
      const auto& ln = feeder.lines[k];
      const double vi = s.v[t][ln.from_node];
      const double drop = s.v[t][ln.to_node] - vi + 2.0 * (ln.resistance * s.P[t][k] + ln.reactance * s.Q[t][k]) -
                          (ln.resistance * ln.resistance + ln.reactance * ln.reactance) * s.l[t][k];
      const double cur = vi * s.l[t][k] - s.P[t][k] * s.P[t][k] - s.Q[t][k] * s.Q[t][k];
      worst = std::max({worst, std::abs(drop), std::abs(cur)});
    }
  }
  return worst;
}

OpfSolution cyclic_fixpoint(const net::Feeder& feeder, const der::DerFleet& fleet, OpfOptions options) {
  options.cyclic = true;
  return solve_or_throw(assemble(feeder, fleet, options));
}

void write_cbf(const OpfProblem& problem, std::ostream& out) { conic::write_cbf(problem.program, out); }

}  // namespace dlmp::opf
