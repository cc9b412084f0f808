#include "dlmp/pricing.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace dlmp::pricing {

DlmpSeries extract_dlmps(const opf::OpfSolution& solution, const net::Feeder& feeder, double root_tol) {
  if (!solution.optimal() || solution.lambda_p.empty()) {
    throw Error("solution carries no balance duals (status " + solution.message + ")");
  }
  DlmpSeries out{solution.lambda_p, solution.lambda_q};
  for (int t = 0; t < feeder.horizon; ++t) {
    const double dp = std::abs(out.p[t][0] - feeder.lmp[t]);
    const double dq = std::abs(out.q[t][0] - feeder.q_price[t]);
    if (dp > root_tol * std::max(1.0, std::abs(feeder.lmp[t])) ||
        dq > root_tol * std::max(1.0, std::abs(feeder.q_price[t]))) {
      std::ostringstream msg;
      msg << "root price at hour " << t << " departs from the wholesale price by " << std::max(dp, dq);
      throw Error(msg.str());
    }
  }
  return out;
}

namespace {

// Unknowns per line k: dP_k, dQ_k, dl_k and dv of the node it feeds.
inline int var(int k, int which) { return 4 * k + which; }

Partials unpack(const net::Feeder& feeder, const Eigen::VectorXd& x, int node, bool reactive) {
  const int K = feeder.num_lines();
  Partials d;
  d.dP.resize(K);
  d.dQ.resize(K);
  d.dl.resize(K);
  d.dv.assign(feeder.num_nodes(), 0.0);
  for (int k = 0; k < K; ++k) {
    d.dP[k] = x(var(k, 0));
    d.dQ[k] = x(var(k, 1));
    d.dl[k] = x(var(k, 2));
    d.dv[k + 1] = x(var(k, 3));
  }
  d.dp0 = (node == 0 && !reactive) ? 1.0 : 0.0;
  d.dq0 = (node == 0 && reactive) ? 1.0 : 0.0;
  for (int c : feeder.children[0]) {
    d.dp0 += d.dP[c - 1];
    d.dq0 += d.dQ[c - 1];
  }
  return d;
}

}  // namespace

HourSensitivity build_sensitivities(const net::Feeder& feeder, const opf::NetworkState& s, int t) {
  const int N = feeder.num_nodes();
  const int K = feeder.num_lines();
  HourSensitivity out;
  out.hour = t;
  if (K == 0) {
    Partials root;
    root.dp0 = 1.0;
    out.real = {root};
    root.dp0 = 0.0;
    root.dq0 = 1.0;
    out.reactive = {root};
    return out;
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(20 * K);
  for (int k = 0; k < K; ++k) {
    const auto& ln = feeder.lines[k];
    const int i = ln.from_node, j = ln.to_node;
    const double r = ln.resistance, x = ln.reactance;
    const double vi = s.v[t][i];
    trip.emplace_back(var(k, 0), var(k, 0), 1.0);
    trip.emplace_back(var(k, 0), var(k, 2), -r);
    trip.emplace_back(var(k, 1), var(k, 1), 1.0);
    trip.emplace_back(var(k, 1), var(k, 2), -x);
    for (int c : feeder.children[j]) {
      trip.emplace_back(var(k, 0), var(c - 1, 0), -1.0);
      trip.emplace_back(var(k, 1), var(c - 1, 1), -1.0);
    }
    trip.emplace_back(var(k, 2), var(k, 3), 1.0);
    trip.emplace_back(var(k, 2), var(k, 0), 2.0 * r);
    trip.emplace_back(var(k, 2), var(k, 1), 2.0 * x);
    trip.emplace_back(var(k, 2), var(k, 2), -(r * r + x * x));
    trip.emplace_back(var(k, 3), var(k, 2), vi);
    trip.emplace_back(var(k, 3), var(k, 0), -2.0 * s.P[t][k]);
    trip.emplace_back(var(k, 3), var(k, 1), -2.0 * s.Q[t][k]);
    if (i != 0) {
      trip.emplace_back(var(k, 2), var(i - 1, 3), -1.0);
      trip.emplace_back(var(k, 3), var(i - 1, 3), s.l[t][k]);
    }
  }
  Eigen::SparseMatrix<double> M(4 * K, 4 * K);
  M.setFromTriplets(trip.begin(), trip.end());
  M.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success) {
    throw Error("sensitivity system is singular at hour " + std::to_string(t) + ": " + lu.lastErrorMessage());
  }
  out.real.resize(N);
  out.reactive.resize(N);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(4 * K);
  out.real[0] = unpack(feeder, rhs, 0, false);
  out.reactive[0] = unpack(feeder, rhs, 0, true);
  for (int j = 1; j < N; ++j) {
    for (int which : {0, 1}) {
      rhs.setZero();
      rhs(var(j - 1, which)) = 1.0;
      const Eigen::VectorXd x = lu.solve(rhs);
      if (!x.allFinite()) throw Error("sensitivity solve produced non-finite values at hour " + std::to_string(t));
      (which == 0 ? out.real : out.reactive)[j] = unpack(feeder, x, j, which == 1);
    }
  }
  return out;
}

double sensitivity_residual(const net::Feeder& feeder, const opf::NetworkState& s, int t, int node, bool reactive,
                            const Partials& d) {
  double worst = 0.0;
  for (int k = 0; k < feeder.num_lines(); ++k) {
    const auto& ln = feeder.lines[k];
    const int i = ln.from_node, j = ln.to_node;
    const double r = ln.resistance, x = ln.reactance;
    double bp = d.dP[k] - r * d.dl[k], bq = d.dQ[k] - x * d.dl[k];
    for (int c : feeder.children[j]) {
      bp -= d.dP[c - 1];
      bq -= d.dQ[c - 1];
    }
    if (j == node) (reactive ? bq : bp) -= 1.0;
    const double drop = d.dv[j] - d.dv[i] + 2 * r * d.dP[k] + 2 * x * d.dQ[k] - (r * r + x * x) * d.dl[k];
    const double cur = s.v[t][i] * d.dl[k] + s.l[t][k] * d.dv[i] - 2 * s.P[t][k] * d.dP[k] - 2 * s.Q[t][k] * d.dQ[k];
    worst = std::max({worst, std::abs(bp), std::abs(bq), std::abs(drop), std::abs(cur)});
  }
  return worst;
}

double top_oil_response(const thermal::LinearizedCoefficients& co, int t, int tp, int horizon, bool cyclic) {
  if (cyclic) {
    const int lag = ((t - tp) % horizon + horizon) % horizon;
    return co.gamma2 * std::pow(co.gamma1, lag) / (1.0 - std::pow(co.gamma1, horizon));
  }
  if (t < tp) return 0.0;
  return co.gamma2 * std::pow(co.gamma1, t - tp);
}

DlmpDecomposition decompose(const opf::OpfProblem& problem, const opf::OpfSolution& sol, const net::Feeder& feeder,
                            const DlmpSeries& dlmps, bool strict, double tol) {
  const int T = feeder.horizon;
  const int N = feeder.num_nodes();
  const int K = feeder.num_lines();
  DlmpDecomposition out;
  out.p.assign(T, std::vector<Components>(N));
  out.q.assign(T, std::vector<Components>(N));
  out.trusted.assign(T, true);

  // Marginal priced aging per unit of squared current, transformer by hour.
  const std::size_t Y = sol.xi.size();
  std::vector<std::vector<double>> weight(Y, std::vector<double>(T, 0.0));
  for (std::size_t y = 0; y < Y; ++y) {
    const auto& co = problem.coefficients[y];
    std::vector<double> via_top_oil(T, 0.0), direct(T, 0.0);
    for (int t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < co.alpha1.size(); ++s) {
        via_top_oil[t] += sol.xi[y][t][s] * co.alpha1[s];
        direct[t] += sol.xi[y][t][s] * co.alpha2[s];
      }
    }
    for (int tp = 0; tp < T; ++tp) {
      double w = direct[tp];
      for (int t = 0; t < T; ++t) w += via_top_oil[t] * top_oil_response(co, t, tp, T, problem.options.cyclic);
      weight[y][tp] = w;
    }
  }

  const auto exact = opf::exactness_check(sol, feeder, problem.options.exactness_tol);
  for (const auto& [t, k] : exact.flagged) out.trusted[t] = false;

  auto split = [&](const Partials& d, int t) {
    Components c;
    c.real_power = feeder.lmp[t] * d.dp0;
    c.reactive_power = feeder.q_price[t] * d.dq0;
    for (std::size_t y = 0; y < Y; ++y) c.transformer += weight[y][t] * d.dl[feeder.transformer_line[y]];
    for (int j = 1; j < N; ++j) c.voltage += (sol.mu_v_upper[t][j] - sol.mu_v_lower[t][j]) * d.dv[j];
    for (int k = 0; k < K; ++k) c.current += sol.mu_ampacity[t][k] * d.dl[k];
    return c;
  };

  for (int t = 0; t < T; ++t) {
    const auto sens = build_sensitivities(feeder, sol.state, t);
    for (int j = 0; j < N; ++j) {
      out.p[t][j] = split(sens.real[j], t);
      out.q[t][j] = split(sens.reactive[j], t);
      for (bool reactive : {false, true}) {
        const double price = reactive ? dlmps.q[t][j] : dlmps.p[t][j];
        const auto& c = reactive ? out.q[t][j] : out.p[t][j];
        const double mismatch = std::abs(c.total() - price) / std::max(1.0, std::abs(price));
        if (mismatch > out.max_mismatch) {
          out.max_mismatch = mismatch;
          out.worst_hour = t;
          out.worst_node = j;
          out.worst_is_reactive = reactive;
        }
      }
    }
  }
  if (strict && out.max_mismatch > tol) {
    const int t = out.worst_hour, j = out.worst_node;
    const auto& c = out.worst_is_reactive ? out.q[t][j] : out.p[t][j];
    const double price = out.worst_is_reactive ? dlmps.q[t][j] : dlmps.p[t][j];
    std::ostringstream msg;
    msg << "price components do not add up at node " << j << " hour " << t << (out.worst_is_reactive ? " (Q)" : " (P)")
        << ": real " << c.real_power << " reactive " << c.reactive_power << " transformer " << c.transformer
        << " voltage " << c.voltage << " current " << c.current << " sum " << c.total() << " vs " << price;
    throw DecompositionError(msg.str(), c, price);
  }
  return out;
}

std::vector<double> node_prices(const Grid& price, const der::EvUnit& ev) {
  std::vector<double> out(price.size(), 0.0);
  for (std::size_t t = 0; t < price.size(); ++t) {
    const int j = ev.node_at(t);
    if (j >= 0) out[t] = price[t][j];
  }
  return out;
}

std::vector<double> node_prices(const Grid& price, int node) {
  std::vector<double> out(price.size());
  for (std::size_t t = 0; t < price.size(); ++t) out[t] = price[t][node];
  return out;
}

bool SelfScheduleReport::consistent() const {
  return std::all_of(devices.begin(), devices.end(), [](const DeviceCheck& d) { return d.consistent; });
}

namespace {

std::vector<int> differing(const der::DeviceSeries& a, const der::DeviceSeries& b) {
  std::vector<int> hours;
  for (std::size_t t = 0; t < a.p.size(); ++t) {
    if (std::abs(a.p[t] - b.p[t]) > 1e-6 || std::abs(a.q[t] - b.q[t]) > 1e-6) hours.push_back(static_cast<int>(t));
  }
  return hours;
}

}  // namespace

SelfScheduleReport verify_self_schedule(const opf::OpfSolution& sol, const der::DerFleet& fleet,
                                        const net::Feeder& feeder, const DlmpSeries& dlmps, bool cyclic, double tol) {
  SelfScheduleReport rep;
  const double money = feeder.money_per_pu_period();
  for (std::size_t d = 0; d < fleet.pv.size(); ++d) {
    const auto pp = node_prices(dlmps.p, fleet.pv[d].node);
    const auto pq = node_prices(dlmps.q, fleet.pv[d].node);
    DeviceCheck c;
    c.kind = "pv";
    c.index = static_cast<int>(d);
    const auto best = der::pv_opt(fleet.pv[d], pp, pq);
    c.dispatched_value = money * der::pv_revenue(pp, pq, sol.schedule.pv[d]);
    c.best_value = money * der::pv_revenue(pp, pq, best);
    c.gap = c.best_value - c.dispatched_value;
    c.differing_hours = differing(best, sol.schedule.pv[d]);
    c.consistent = c.gap <= tol * std::max(1.0, std::abs(c.best_value));
    rep.devices.push_back(c);
  }
  for (std::size_t d = 0; d < fleet.ev.size(); ++d) {
    const auto pp = node_prices(dlmps.p, fleet.ev[d]);
    const auto pq = node_prices(dlmps.q, fleet.ev[d]);
    DeviceCheck c;
    c.kind = "ev";
    c.index = static_cast<int>(d);
    c.dispatched_value = money * der::ev_cost(pp, pq, sol.schedule.ev[d]);
    try {
      const auto best = der::ev_opt(fleet.ev[d], pp, pq, cyclic);
      c.best_value = money * der::ev_cost(pp, pq, best);
      c.gap = c.dispatched_value - c.best_value;
      c.differing_hours = differing(best, sol.schedule.ev[d]);
      c.consistent = c.gap <= tol * std::max(1.0, std::abs(c.best_value));
    } catch (const Error&) {
      c.best_value = std::nan("");
      c.gap = std::numeric_limits<double>::infinity();
      c.consistent = false;
    }
    rep.devices.push_back(c);
  }
  for (const auto& c : rep.devices) rep.max_gap = std::max(rep.max_gap, c.gap);
  return rep;
}

}  // namespace dlmp::pricing
