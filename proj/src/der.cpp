#include "dlmp/der.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dlmp/error.hpp"
#include "dlmp/program_builder.hpp"

namespace dlmp::der {

namespace {

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(want) + " hourly values, got " +
                         std::to_string(got));
  }
}

// Snap interior-point noise onto the box [lo, hi].
double snap(double v, double lo, double hi) {
  const double eps = 1e-9 * std::max(1.0, hi - lo);
  if (v < lo + eps) return lo;
  if (v > hi - eps) return hi;
  return v;
}

}  // namespace

bool min_soc_applies(const EvUnit& unit, std::size_t z, bool cyclic) {
  return !(unit.soc_wraps(cyclic) && unit.itinerary.intervals[z].truncated_end);
}

bool EvUnit::plugged(std::size_t t) const { return node_at(t) >= 0; }

int EvUnit::node_at(std::size_t t) const {
  for (const auto& iv : itinerary.intervals) {
    if (static_cast<int>(t) >= iv.begin && static_cast<int>(t) < iv.end) return iv.node;
  }
  return -1;
}

std::vector<std::size_t> EvUnit::charging_order(bool cyclic) const {
  std::vector<std::size_t> order;
  const auto& ivs = itinerary.intervals;
  auto append = [&](const PlugInterval& iv) {
    for (int t = iv.begin; t < iv.end; ++t) order.push_back(static_cast<std::size_t>(t));
  };
  if (soc_wraps(cyclic) && !ivs.empty()) {
    append(ivs.back());
    for (std::size_t z = 0; z + 1 < ivs.size(); ++z) append(ivs[z]);
  } else {
    for (const auto& iv : ivs) append(iv);
  }
  return order;
}

DerSchedule DerSchedule::zeros(const DerFleet& fleet, std::size_t hours) {
  DerSchedule s;
  s.pv.assign(fleet.pv.size(), DeviceSeries{std::vector<double>(hours, 0.0), std::vector<double>(hours, 0.0)});
  s.ev.assign(fleet.ev.size(), DeviceSeries{std::vector<double>(hours, 0.0), std::vector<double>(hours, 0.0)});
  return s;
}

void FeasibilityReport::add(std::size_t hour, std::string what, double amount) {
  if (!(amount > 0.0)) return;
  violations.push_back({hour, std::move(what), amount});
  max_violation = std::max(max_violation, amount);
}

FeasibilityReport pv_feasible(const PvUnit& unit, std::span<const double> p, std::span<const double> q) {
  const std::size_t T = unit.irradiation.size();
  require_length(p.size(), T, "pv real power");
  require_length(q.size(), T, "pv reactive power");
  FeasibilityReport rep;
  rep.apparent_slack.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (!unit.producing(t)) {
      rep.add(t, "output without irradiation", std::max(std::abs(p[t]), std::abs(q[t])));
      rep.apparent_slack[t] = unit.nameplate - std::hypot(p[t], q[t]);
      continue;
    }
    rep.add(t, "negative real power", -p[t]);
    rep.add(t, "real power above adjusted capacity", p[t] - unit.adjusted_capacity(t));
    const double slack = unit.nameplate - std::hypot(p[t], q[t]);
    rep.apparent_slack[t] = slack;
    rep.add(t, "apparent power above nameplate", -slack);
  }
  return rep;
}

EvFeasibilityReport ev_feasible(const EvUnit& unit, std::span<const double> p, std::span<const double> q,
                                bool cyclic) {
  require_length(q.size(), p.size(), "ev reactive power");
  const std::size_t T = p.size();
  const auto& ivs = unit.itinerary.intervals;
  EvFeasibilityReport rep;
  rep.apparent_slack.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double slack = unit.charger_capacity - std::hypot(p[t], q[t]);
    rep.apparent_slack[t] = slack;
    if (!unit.plugged(t)) {
      rep.add(t, "power while unplugged", std::max(std::abs(p[t]), std::abs(q[t])));
      continue;
    }
    rep.add(t, "negative charging", -p[t]);
    rep.add(t, "charging above rate", p[t] - unit.max_rate);
    rep.add(t, "apparent power above charger", -slack);
  }

  const std::size_t Z = ivs.size();
  std::vector<double> charge(Z, 0.0);
  for (std::size_t z = 0; z < Z; ++z) {
    for (int t = ivs[z].begin; t < ivs[z].end && t < static_cast<int>(T); ++t) charge[z] += p[t];
  }
  // SoC as offsets from the first arrival, then pin the starting level.
  std::vector<double> beg(Z), end(Z);
  double level = 0.0;
  for (std::size_t z = 0; z < Z; ++z) {
    beg[z] = level;
    end[z] = level + charge[z];
    level = end[z] - ivs[z].trip_energy_after;
  }
  double start = unit.itinerary.initial_soc;
  if (unit.soc_wraps(cyclic) && Z > 0) {
    start = 0.0;
    for (std::size_t z = 0; z < Z; ++z) {
      start = std::max(start, -beg[z]);
      start = std::max(start, -end[z]);
      if (min_soc_applies(unit, z, cyclic)) start = std::max(start, ivs[z].min_soc_at_end - end[z]);
    }
    // Closing the loop: SoC after the last interval must equal the first arrival level.
    const double closure = end[Z - 1] - beg[0];
    rep.add(Z - 1, "state of charge does not close over the day", std::abs(closure));
  }
  rep.soc_begin.resize(Z);
  rep.soc_end.resize(Z);
  for (std::size_t z = 0; z < Z; ++z) {
    rep.soc_begin[z] = beg[z] + start;
    rep.soc_end[z] = end[z] + start;
    rep.add(z, "negative state of charge", -rep.soc_begin[z]);
    rep.add(z, "state of charge above battery capacity", rep.soc_end[z] - unit.battery_capacity);
    if (min_soc_applies(unit, z, cyclic)) {
      const double shortfall = ivs[z].min_soc_at_end - rep.soc_end[z];
      rep.deficit = std::max(rep.deficit, shortfall);
      rep.add(z, "state of charge below minimum at departure", shortfall);
    }
  }
  return rep;
}

DeviceSeries pv_opt(const PvUnit& unit, std::span<const double> price_p, std::span<const double> price_q) {
  const std::size_t T = unit.irradiation.size();
  require_length(price_p.size(), T, "pv real price");
  require_length(price_q.size(), T, "pv reactive price");
  DeviceSeries s{std::vector<double>(T, 0.0), std::vector<double>(T, 0.0)};
  const double cap = unit.nameplate;
  for (std::size_t t = 0; t < T; ++t) {
    if (!unit.producing(t)) continue;
    const double lp = price_p[t], lq = price_q[t];
    const double sq = lq > 0.0 ? 1.0 : (lq < 0.0 ? -1.0 : 0.0);
    const double box = unit.adjusted_capacity(t);
    if (lp <= 0.0) {
      s.q[t] = sq * cap;
      continue;
    }
    const double norm = std::hypot(lp, lq);
    const double p_circle = cap * lp / norm;
    if (p_circle <= box) {
      s.p[t] = p_circle;
      s.q[t] = cap * lq / norm;
    } else {
      s.p[t] = box;
      s.q[t] = sq * std::sqrt(std::max(0.0, cap * cap - box * box));
    }
  }
  return s;
}

DeviceSeries ev_opt(const EvUnit& unit, std::span<const double> price_p, std::span<const double> price_q,
                    bool cyclic) {
  using conic::Affine;
  const std::size_t T = price_p.size();
  require_length(price_q.size(), T, "ev reactive price");
  const auto& ivs = unit.itinerary.intervals;
  for (const auto& iv : ivs) {
    if (iv.begin < 0 || iv.end > static_cast<int>(T) || iv.begin >= iv.end) {
      throw DimensionError("ev plug-in interval outside the horizon");
    }
  }
  const auto order = unit.charging_order(cyclic);

  conic::ProgramBuilder b;
  std::vector<conic::Index> pv(T, -1), qv(T, -1);
  for (std::size_t t : order) {
    pv[t] = b.add_var(price_p[t]);
    qv[t] = b.add_var(price_q[t]);
    b.add_nonneg(Affine::var(pv[t]));
    b.add_nonneg(Affine(unit.max_rate).add(pv[t], -1.0));
    b.add_soc({Affine(unit.charger_capacity), Affine::var(pv[t]), Affine::var(qv[t])});
  }
  const std::size_t Z = ivs.size();
  std::vector<conic::Index> ub(Z), ue(Z);
  for (std::size_t z = 0; z < Z; ++z) {
    ub[z] = b.add_var();
    ue[z] = b.add_var();
  }
  for (std::size_t z = 0; z < Z; ++z) {
    b.add_nonneg(Affine::var(ub[z]));
    b.add_nonneg(Affine(unit.battery_capacity).add(ue[z], -1.0));
    if (min_soc_applies(unit, z, cyclic)) b.add_nonneg(Affine(-ivs[z].min_soc_at_end).add(ue[z], 1.0));
    Affine energy = Affine::var(ue[z]).add(ub[z], -1.0);
    for (int t = ivs[z].begin; t < ivs[z].end; ++t) energy.add(pv[t], -1.0);
    b.add_eq(energy);
    if (z + 1 < Z) b.add_eq(Affine(ivs[z].trip_energy_after).add(ub[z + 1], 1.0).add(ue[z], -1.0));
  }
  if (Z > 0) {
    if (unit.soc_wraps(cyclic)) {
      b.add_eq(Affine::var(ub[0]).add(ue[Z - 1], -1.0));
    } else {
      b.add_eq(Affine(-unit.itinerary.initial_soc).add(ub[0], 1.0));
    }
  }

  auto run = [](const conic::ConicProgram& prog) {
    auto sol = conic::solve(prog);
    if (sol.status == conic::SolverStatus::PrimalInfeasible) {
      throw InfeasibleError("ev itinerary cannot be met within charger and battery limits");
    }
    if (sol.status != conic::SolverStatus::Optimal) {
      throw ConvergenceError("ev schedule solve ended with status " + conic::to_string(sol.status),
                             sol.primal_residual);
    }
    return sol;
  };
  const auto first = run(b.build());

  // Second stage: stay on the optimal face, charge as early as possible.
  double scale = 0.0;
  for (std::size_t t : order) scale += std::abs(price_p[t]) * unit.max_rate + std::abs(price_q[t]) * unit.charger_capacity;
  for (conic::Index v = 0; v < b.num_vars(); ++v) b.set_cost(v, 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    b.set_cost(pv[order[k]], static_cast<double>(k + 1) / static_cast<double>(order.size()));
  }
  // A thin optimal face can stall the interior-point method; widen the
  // budget step by step and keep the first-stage point if nothing works.
  Eigen::VectorXd chosen = first.x;
  for (double widen : {1.0, 10.0, 100.0}) {
    const double tol = widen * (1e-8 * std::abs(first.primal_objective) + 1e-10 * scale) + 1e-14;
    auto staged = b;
    Affine budget(first.primal_objective + tol);
    for (std::size_t t : order) budget.add(pv[t], -price_p[t]).add(qv[t], -price_q[t]);
    staged.add_nonneg(budget);
    const auto second = conic::solve(staged.build());
    if (second.status == conic::SolverStatus::Optimal) {
      chosen = second.x;
      break;
    }
  }

  DeviceSeries s{std::vector<double>(T, 0.0), std::vector<double>(T, 0.0)};
  for (std::size_t t : order) {
    s.p[t] = snap(chosen(pv[t]), 0.0, unit.max_rate);
    // Given p, the reactive set point is separable per hour.
    const double room = std::sqrt(std::max(0.0, unit.charger_capacity * unit.charger_capacity - s.p[t] * s.p[t]));
    s.q[t] = price_q[t] > 0.0 ? -room : (price_q[t] < 0.0 ? room : 0.0);
  }
  return s;
}

double pv_revenue(std::span<const double> price_p, std::span<const double> price_q, const DeviceSeries& s) {
  double v = 0.0;
  for (std::size_t t = 0; t < s.p.size(); ++t) v += price_p[t] * s.p[t] + price_q[t] * s.q[t];
  return v;
}

double ev_cost(std::span<const double> price_p, std::span<const double> price_q, const DeviceSeries& s) {
  return pv_revenue(price_p, price_q, s);
}

}  // namespace dlmp::der
