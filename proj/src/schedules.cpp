#include "dlmp/schedules.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "dlmp/error.hpp"

namespace dlmp::schedules {

std::string to_string(Option option) {
  switch (option) {
    case Option::BaU: return "BaU";
    case Option::ToU: return "ToU";
    case Option::PqOpt: return "PQ-opt";
    case Option::FullOpt: return "Full-opt";
  }
  return "?";
}

Option parse_option(const std::string& name) {
  std::string key;
  for (char c : name) {
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "bau") return Option::BaU;
  if (key == "tou") return Option::ToU;
  if (key == "pqopt" || key == "pq") return Option::PqOpt;
  if (key == "fullopt" || key == "full") return Option::FullOpt;
  throw SchemaError("unknown scheduling option '" + name + "'");
}

std::string scenario_label(const ScenarioSpec& spec) {
  if (!spec.name.empty()) return spec.name;
  std::ostringstream s;
  s << spec.ev_per_site << "ev-" << spec.pv_kva_per_site << "kva";
  return s.str();
}

der::DerFleet build_fleet(const net::Feeder& feeder, const ScenarioSpec& spec) {
  if (spec.ev_per_site < 0 || spec.pv_kva_per_site < 0.0) throw SchemaError("scenario counts must be nonnegative");
  der::DerFleet fleet;
  if (spec.include_feeder_fleet) fleet = feeder.fleet;
  for (const auto& site : feeder.sites) {
    if (spec.ev_per_site > 0) {
      const auto it = feeder.ev_templates.find(site.ev_template);
      if (it == feeder.ev_templates.end()) {
        throw SchemaError("site '" + site.name + "' names unknown ev template '" + site.ev_template + "'");
      }
      for (int e = 0; e < spec.ev_per_site; ++e) fleet.ev.push_back(net::ev_from_template(it->second, site.node));
    }
    if (spec.pv_kva_per_site > 0.0) {
      const auto it = feeder.irradiation.find(site.pv_irradiation);
      if (it == feeder.irradiation.end()) {
        throw SchemaError("site '" + site.name + "' names unknown irradiation '" + site.pv_irradiation + "'");
      }
      der::PvUnit pv;
      pv.node = site.node;
      pv.nameplate = feeder.power_to_pu(spec.pv_kva_per_site);
      pv.irradiation = it->second;
      fleet.pv.push_back(pv);
    }
  }
  return fleet;
}

namespace {

// Plug-in sessions in charging order. Under a wrapping cyclic itinerary the
// evening interval and the next morning form one session.
struct Session {
  std::vector<std::size_t> hours;
  double target = 0.0;
  double trip_after = 0.0;
};

std::vector<Session> sessions_of(const der::EvUnit& ev, bool cyclic) {
  const auto& ivs = ev.itinerary.intervals;
  const std::size_t Z = ivs.size();
  std::vector<Session> out;
  auto hours = [&](std::size_t z, Session& s) {
    for (int t = ivs[z].begin; t < ivs[z].end; ++t) s.hours.push_back(static_cast<std::size_t>(t));
  };
  if (ev.soc_wraps(cyclic) && Z >= 2) {
    Session merged;
    hours(Z - 1, merged);
    hours(0, merged);
    merged.target = ivs[0].min_soc_at_end;
    merged.trip_after = ivs[0].trip_energy_after;
    out.push_back(merged);
    for (std::size_t z = 1; z + 1 < Z; ++z) {
      Session s;
      hours(z, s);
      s.target = ivs[z].min_soc_at_end;
      s.trip_after = ivs[z].trip_energy_after;
      out.push_back(s);
    }
    return out;
  }
  for (std::size_t z = 0; z < Z; ++z) {
    Session s;
    hours(z, s);
    s.target = der::min_soc_applies(ev, z, cyclic) ? ivs[z].min_soc_at_end : 0.0;
    s.trip_after = ivs[z].trip_energy_after;
    out.push_back(s);
  }
  return out;
}

// Charge each session up to its target, hours taken in `order(session)`.
template <class Order>
der::DeviceSeries charge_open_loop(const der::EvUnit& ev, std::size_t T, bool cyclic, Order order) {
  const auto sessions = sessions_of(ev, cyclic);
  const bool wraps = ev.soc_wraps(cyclic);
  der::DeviceSeries s{std::vector<double>(T, 0.0), std::vector<double>(T, 0.0)};
  double arrival = ev.itinerary.initial_soc;
  for (int day = 0; day < 100; ++day) {
    std::fill(s.p.begin(), s.p.end(), 0.0);
    double soc = arrival;
    for (const auto& session : sessions) {
      const double target = std::min(session.target, ev.battery_capacity);
      double need = std::max(0.0, target - soc);
      const double available = ev.max_rate * static_cast<double>(session.hours.size());
      if (need > available * (1.0 + 1e-12)) {
        throw InfeasibleError("ev need of " + std::to_string(need) + " exceeds " + std::to_string(available) +
                              " deliverable at full rate");
      }
      soc += need;
      for (std::size_t t : order(session)) {
        if (need <= 0.0) break;
        const double p = std::min(ev.max_rate, need);
        s.p[t] = p;
        need -= p;
      }
      soc -= session.trip_after;
      if (soc < -1e-12) throw InfeasibleError("trip energy exceeds the state of charge at departure");
    }
    if (!wraps) break;
    if (std::abs(soc - arrival) <= 1e-12 * std::max(1.0, ev.battery_capacity)) break;
    arrival = soc;
  }
  return s;
}

der::DerSchedule open_loop(const der::DerFleet& fleet, const net::Feeder& feeder, bool cyclic, bool price_driven) {
  const auto T = static_cast<std::size_t>(feeder.horizon);
  auto sched = der::DerSchedule::zeros(fleet, T);
  for (std::size_t d = 0; d < fleet.pv.size(); ++d) {
    for (std::size_t t = 0; t < T; ++t) {
      if (fleet.pv[d].producing(t)) sched.pv[d].p[t] = fleet.pv[d].adjusted_capacity(t);
    }
  }
  for (std::size_t d = 0; d < fleet.ev.size(); ++d) {
    if (!price_driven) {
      sched.ev[d] = charge_open_loop(fleet.ev[d], T, cyclic, [](const Session& s) { return s.hours; });
    } else {
      sched.ev[d] = charge_open_loop(fleet.ev[d], T, cyclic, [&](const Session& s) {
        std::vector<std::size_t> idx(s.hours.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return feeder.lmp[s.hours[a]] < feeder.lmp[s.hours[b]]; });
        std::vector<std::size_t> out;
        for (std::size_t i : idx) out.push_back(s.hours[i]);
        return out;
      });
    }
  }
  return sched;
}

}  // namespace

der::DerSchedule schedule_bau(const der::DerFleet& fleet, const net::Feeder& feeder, bool cyclic) {
  return open_loop(fleet, feeder, cyclic, false);
}

der::DerSchedule schedule_tou(const der::DerFleet& fleet, const net::Feeder& feeder, bool cyclic) {
  return open_loop(fleet, feeder, cyclic, true);
}

void evaluate_schedule(const net::Feeder& feeder, const der::DerFleet& fleet, const HarnessSettings& settings,
                       OptionResult& r) {
  const int T = feeder.horizon;
  const double money = feeder.money_per_pu_period();
  opf::Grid p, q;
  opf::net_injections(feeder, fleet, r.schedule, p, q);
  try {
    r.state = opf::fixed_injection_powerflow(feeder, p, q);
  } catch (const ConvergenceError& e) {
    r.solved = false;
    r.failed = true;
    r.failure_reasons.push_back(std::string("power flow: ") + e.what());
    return;
  }
  r.solved = true;
  r.real_power_cost = r.reactive_cost = 0.0;
  for (int t = 0; t < T; ++t) {
    r.real_power_cost += feeder.lmp[t] * money * r.state.p0[t];
    r.reactive_cost += feeder.q_price[t] * money * r.state.q0[t];
    for (int j = 1; j < feeder.num_nodes(); ++j) {
      const auto& n = feeder.nodes[j];
      const double v = r.state.v[t][j];
      r.max_voltage_violation = std::max({r.max_voltage_violation, n.voltage_min_sq - v, v - n.voltage_max_sq});
    }
    for (int k = 0; k < feeder.num_lines(); ++k) {
      const double cap = feeder.lines[k].ampacity_sq;
      if (cap > 0.0 && std::isfinite(cap)) {
        r.max_ampacity_violation = std::max(r.max_ampacity_violation, r.state.l[t][k] - cap);
      }
    }
  }

  r.transformer_cost = r.lol_hours = 0.0;
  r.lol_per_transformer.clear();
  r.initial_top_oil.clear();
  r.thermal.clear();
  for (std::size_t y = 0; y < feeder.transformers.size(); ++y) {
    const auto& tp = feeder.transformers[y];
    std::vector<double> current(T);
    for (int t = 0; t < T; ++t) current[t] = r.state.l[t][feeder.transformer_line[y]];
    const double h0 = settings.cyclic
                          ? thermal::periodic_top_oil_exact(tp, current, feeder.ambient, feeder.dt)
                          : thermal::top_oil_initial(tp, feeder.ambient[T - 1], current[T - 1]);
    auto traj = thermal::simulate_exact(tp, current, feeder.ambient, h0, feeder.dt);
    r.initial_top_oil.push_back(h0);
    r.lol_per_transformer.push_back(traj.loss_of_life_hours);
    r.lol_hours += traj.loss_of_life_hours;
    r.transformer_cost += tp.hourly_cost * traj.loss_of_life_hours;
    r.thermal.push_back(std::move(traj));
  }

  std::ostringstream why;
  if (r.max_voltage_violation > settings.violation_tol) {
    why << "voltage limit exceeded by " << r.max_voltage_violation << " pu^2";
    r.failure_reasons.push_back(why.str());
    r.failed = true;
  }
  if (r.max_ampacity_violation > settings.violation_tol) {
    why.str("");
    why << "ampacity exceeded by " << r.max_ampacity_violation << " pu^2";
    r.failure_reasons.push_back(why.str());
    r.failed = true;
  }
}

OptionResult run_option(Option option, const net::Feeder& feeder, const der::DerFleet& fleet,
                        const HarnessSettings& settings, double lol_threshold, const std::string& scenario) {
  OptionResult r;
  r.option = option;
  r.scenario = scenario;
  try {
    switch (option) {
      case Option::BaU:
        r.schedule = schedule_bau(fleet, feeder, settings.cyclic);
        break;
      case Option::ToU:
        r.schedule = schedule_tou(fleet, feeder, settings.cyclic);
        break;
      case Option::PqOpt:
      case Option::FullOpt: {
        auto opts = settings.opf;
        opts.include_transformer_cost = option == Option::FullOpt;
        opts.cyclic = settings.cyclic;
        const auto pr = opf::assemble(feeder, fleet, opts);
        const auto sol = opf::solve(pr, settings.solver);
        r.solver_status = sol.message;
        if (!sol.optimal()) {
          r.failed = true;
          r.failure_reasons.push_back("dispatch " + sol.message);
          return r;
        }
        r.relaxation_exact = opf::exactness_check(sol, feeder, opts.exactness_tol).exact();
        r.schedule = sol.schedule;
        r.linearized_transformer_cost = sol.transformer_cost;
        r.dlmps = pricing::extract_dlmps(sol, feeder);
        r.dispatch_options = opts;
        r.dispatch = std::make_shared<const opf::OpfSolution>(sol);
        break;
      }
    }
  } catch (const Error& e) {
    r.failed = true;
    r.failure_reasons.push_back(e.what());
    return r;
  }
  evaluate_schedule(feeder, fleet, settings, r);
  if (r.solved && r.lol_hours > lol_threshold) {
    std::ostringstream why;
    why << "loss of life " << r.lol_hours << " h above threshold " << lol_threshold << " h";
    r.failure_reasons.push_back(why.str());
    r.failed = true;
  }
  return r;
}

ComparisonRow make_row(const OptionResult& cell, const OptionResult& base) {
  ComparisonRow row;
  row.scenario = cell.scenario;
  row.option = cell.option;
  row.failed = cell.failed;
  if (cell.solved) {
    row.delta_real = cell.real_power_cost - base.real_power_cost;
    row.delta_reactive = cell.reactive_cost - base.reactive_cost;
    row.delta_transformer = cell.transformer_cost - base.transformer_cost;
    row.delta_total = row.delta_real + row.delta_reactive + row.delta_transformer;
    row.lol_hours = cell.lol_hours;
  } else {
    row.delta_real = row.delta_reactive = row.delta_transformer = row.delta_total = row.lol_hours = std::nan("");
  }
  if (cell.failure_reasons.empty()) {
    row.status = "ok";
  } else {
    for (std::size_t i = 0; i < cell.failure_reasons.size(); ++i) {
      row.status += (i ? "; " : "") + cell.failure_reasons[i];
    }
  }
  return row;
}

ComparisonTable comparison_table(const net::Feeder& feeder, const std::vector<ScenarioSpec>& scenarios,
                                 const std::vector<Option>& options, const HarnessSettings& settings) {
  ComparisonTable table;
  table.base = run_option(Option::BaU, feeder, der::DerFleet{}, settings, 1e300, "base");
  if (!table.base.solved) {
    throw Error("base case could not be evaluated: " +
                (table.base.failure_reasons.empty() ? std::string("unknown") : table.base.failure_reasons[0]));
  }
  table.lol_threshold = settings.lol_factor * table.base.lol_hours;
  for (const auto& spec : scenarios) {
    const std::string label = scenario_label(spec);
    der::DerFleet fleet;
    std::string fleet_error;
    try {
      fleet = build_fleet(feeder, spec);
    } catch (const Error& e) {
      fleet_error = e.what();
    }
    for (Option option : options) {
      OptionResult cell;
      if (!fleet_error.empty()) {
        cell.option = option;
        cell.scenario = label;
        cell.failed = true;
        cell.failure_reasons.push_back(fleet_error);
      } else {
        cell = run_option(option, feeder, fleet, settings, table.lol_threshold, label);
      }
      table.rows.push_back(make_row(cell, table.base));
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace dlmp::schedules
