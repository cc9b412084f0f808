#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "dlmp/der.hpp"
#include "dlmp/error.hpp"
#include "dlmp/io.hpp"
#include "dlmp/netmodel.hpp"
#include "dlmp/opf.hpp"
#include "dlmp/pricing.hpp"
#include "dlmp/schedules.hpp"
#include "dlmp/synth.hpp"
#include "dlmp/thermal.hpp"
#include "dlmp/version.hpp"

namespace py = pybind11;
using namespace dlmp;

namespace {

py::array_t<double> to_array(const opf::Grid& g) {
  const std::size_t rows = g.size(), cols = rows ? g[0].size() : 0;
  py::array_t<double> a({rows, cols});
  auto m = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = g[i][j];
  }
  return a;
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::array_t<double> devices_p(const std::vector<der::DeviceSeries>& d, bool reactive) {
  opf::Grid g;
  for (const auto& s : d) g.push_back(reactive ? s.q : s.p);
  return to_array(g);
}

schedules::ScenarioSpec make_spec(int ev_per_site, double pv_kva_per_site, bool include_feeder_fleet,
                                  const std::string& name) {
  schedules::ScenarioSpec s{name, ev_per_site, pv_kva_per_site, include_feeder_fleet};
  if (s.name.empty()) s.name = schedules::scenario_label(s);
  return s;
}

py::dict result_dict(const schedules::OptionResult& r) {
  py::dict d;
  d["option"] = schedules::to_string(r.option);
  d["scenario"] = r.scenario;
  d["solved"] = r.solved;
  d["failed"] = r.failed;
  d["failure_reasons"] = r.failure_reasons;
  d["solver_status"] = r.solver_status;
  d["relaxation_exact"] = r.relaxation_exact;
  d["real_power_cost"] = r.real_power_cost;
  d["reactive_cost"] = r.reactive_cost;
  d["transformer_cost"] = r.transformer_cost;
  d["linearized_transformer_cost"] = r.linearized_transformer_cost;
  d["total_cost"] = r.total_cost();
  d["lol_hours"] = r.lol_hours;
  d["lol_per_transformer"] = to_array(r.lol_per_transformer);
  d["max_voltage_violation"] = r.max_voltage_violation;
  d["max_ampacity_violation"] = r.max_ampacity_violation;
  if (r.solved) {
    d["p0"] = to_array(r.state.p0);
    d["q0"] = to_array(r.state.q0);
    d["v"] = to_array(r.state.v);
    d["l"] = to_array(r.state.l);
    d["ev_p"] = devices_p(r.schedule.ev, false);
    d["ev_q"] = devices_p(r.schedule.ev, true);
    d["pv_p"] = devices_p(r.schedule.pv, false);
    d["pv_q"] = devices_p(r.schedule.pv, true);
  }
  if (r.dlmps) {
    d["dlmp_p"] = to_array(r.dlmps->p);
    d["dlmp_q"] = to_array(r.dlmps->q);
  }
  return d;
}

// Full-opt / PQ-opt solve with prices and their five-way split.
py::dict solve_dispatch(const net::Feeder& feeder, const der::DerFleet& fleet, bool include_transformer_cost,
                        bool cyclic, bool decompose) {
  opf::OpfOptions opts;
  opts.include_transformer_cost = include_transformer_cost;
  opts.cyclic = cyclic;
  const auto problem = opf::assemble(feeder, fleet, opts);
  opf::OpfSolution sol;
  {
    py::gil_scoped_release release;
    sol = opf::solve(problem);
  }
  py::dict d;
  d["status"] = sol.message;
  d["optimal"] = sol.optimal();
  d["iterations"] = sol.iterations;
  if (!sol.optimal()) return d;
  d["objective"] = sol.objective;
  d["real_power_cost"] = sol.real_power_cost;
  d["reactive_cost"] = sol.reactive_cost;
  d["transformer_cost"] = sol.transformer_cost;
  d["max_gap"] = opf::exactness_check(sol, feeder, opts.exactness_tol).max_gap;
  d["p0"] = to_array(sol.state.p0);
  d["l"] = to_array(sol.state.l);
  d["v"] = to_array(sol.state.v);
  d["ev_p"] = devices_p(sol.schedule.ev, false);
  d["pv_p"] = devices_p(sol.schedule.pv, false);
  d["pv_q"] = devices_p(sol.schedule.pv, true);
  d["top_oil"] = to_array(sol.top_oil);
  const auto dlmps = pricing::extract_dlmps(sol, feeder);
  d["dlmp_p"] = to_array(dlmps.p);
  d["dlmp_q"] = to_array(dlmps.q);
  if (decompose) {
    const auto dec = pricing::decompose(problem, sol, feeder, dlmps);
    const char* names[] = {"real_power", "reactive_power", "transformer", "voltage", "current"};
    py::dict parts;
    for (int kind = 0; kind < 2; ++kind) {
      const auto& src = kind == 0 ? dec.p : dec.q;
      py::dict comp;
      for (int c = 0; c < 5; ++c) {
        opf::Grid g(src.size());
        for (std::size_t t = 0; t < src.size(); ++t) {
          for (const auto& x : src[t]) {
            const double v[] = {x.real_power, x.reactive_power, x.transformer, x.voltage, x.current};
            g[t].push_back(v[c]);
          }
        }
        comp[names[c]] = to_array(g);
      }
      parts[kind == 0 ? "p" : "q"] = comp;
    }
    d["decomposition"] = parts;
    d["decomposition_max_mismatch"] = dec.max_mismatch;
    const auto check = pricing::verify_self_schedule(sol, fleet, feeder, dlmps, cyclic);
    d["self_schedule_max_gap"] = check.max_gap;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Distribution prices, DER scheduling and transformer aging";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "DlmpError", PyExc_RuntimeError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<TopologyError>(m, "TopologyError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);

  py::class_<der::DerFleet>(m, "Fleet")
      .def(py::init<>())
      .def_property_readonly("num_ev", [](const der::DerFleet& f) { return f.ev.size(); })
      .def_property_readonly("num_pv", [](const der::DerFleet& f) { return f.pv.size(); })
      .def("__repr__", [](const der::DerFleet& f) {
        return "<Fleet " + std::to_string(f.ev.size()) + " EV, " + std::to_string(f.pv.size()) + " PV>";
      });

  py::class_<net::Feeder>(m, "Feeder")
      .def_property_readonly("num_nodes", &net::Feeder::num_nodes)
      .def_property_readonly("num_lines", &net::Feeder::num_lines)
      .def_property_readonly("horizon", [](const net::Feeder& f) { return f.horizon; })
      .def_property_readonly("num_transformers", [](const net::Feeder& f) { return f.transformers.size(); })
      .def_property_readonly("num_sites", [](const net::Feeder& f) { return f.sites.size(); })
      .def_property_readonly("lmp", [](const net::Feeder& f) { return to_array(f.lmp); })
      .def_property_readonly("q_price", [](const net::Feeder& f) { return to_array(f.q_price); })
      .def_property_readonly("ambient", [](const net::Feeder& f) { return to_array(f.ambient); })
      .def_property_readonly("fleet", [](const net::Feeder& f) { return f.fleet; })
      .def("to_json", [](const net::Feeder& f) { return net::dump_feeder(net::from_per_unit(f)); })
      .def("__repr__", [](const net::Feeder& f) {
        return "<Feeder " + std::to_string(f.num_nodes()) + " buses, " + std::to_string(f.transformers.size()) +
               " transformers>";
      });

  m.def("load_feeder", [](const std::filesystem::path& p) { return net::load_feeder(p); }, py::arg("path"));
  m.def(
      "feeder_from_json", [](const std::string& text) { return net::to_per_unit(net::parse_feeder(text)); },
      py::arg("text"));
  m.def(
      "synthesize_feeder",
      [](int nodes, std::uint64_t seed) { return net::dump_feeder(synth::synthesize_feeder(nodes, seed)); },
      py::arg("nodes"), py::arg("seed") = 7, "Synthetic feeder document as JSON text.");

  m.def(
      "build_fleet",
      [](const net::Feeder& f, int ev_per_site, double pv_kva_per_site, bool include_feeder_fleet) {
        return schedules::build_fleet(f, make_spec(ev_per_site, pv_kva_per_site, include_feeder_fleet, ""));
      },
      py::arg("feeder"), py::arg("ev_per_site") = 0, py::arg("pv_kva_per_site") = 0.0,
      py::arg("include_feeder_fleet") = false);

  m.def(
      "run_option",
      [](const std::string& option, const net::Feeder& f, const der::DerFleet& fleet, bool cyclic,
         double lol_threshold) {
        schedules::HarnessSettings s;
        s.cyclic = cyclic;
        const auto opt = schedules::parse_option(option);
        schedules::OptionResult r;
        {
          py::gil_scoped_release release;
          r = schedules::run_option(opt, f, fleet, s, lol_threshold);
        }
        return result_dict(r);
      },
      py::arg("option"), py::arg("feeder"), py::arg("fleet"), py::arg("cyclic") = true,
      py::arg("lol_threshold") = 1e300);

  m.def(
      "comparison_table",
      [](const net::Feeder& f, const std::vector<std::tuple<int, double>>& scenarios,
         const std::vector<std::string>& options, bool cyclic, double lol_factor) {
        std::vector<schedules::ScenarioSpec> specs;
        for (const auto& [ev, pv] : scenarios) specs.push_back(make_spec(ev, pv, false, ""));
        std::vector<schedules::Option> opts;
        for (const auto& o : options) opts.push_back(schedules::parse_option(o));
        schedules::HarnessSettings s;
        s.cyclic = cyclic;
        s.lol_factor = lol_factor;
        schedules::ComparisonTable table;
        {
          py::gil_scoped_release release;
          table = schedules::comparison_table(f, specs, opts, s);
        }
        py::list rows;
        for (const auto& r : table.rows) {
          py::dict d;
          d["scenario"] = r.scenario;
          d["option"] = schedules::to_string(r.option);
          d["delta_real"] = r.delta_real;
          d["delta_reactive"] = r.delta_reactive;
          d["delta_transformer"] = r.delta_transformer;
          d["delta_total"] = r.delta_total;
          d["lol_hours"] = r.lol_hours;
          d["failed"] = r.failed;
          d["status"] = r.status;
          rows.append(d);
        }
        py::dict out;
        out["rows"] = rows;
        out["base_lol_hours"] = table.base.lol_hours;
        out["lol_threshold"] = table.lol_threshold;
        return out;
      },
      py::arg("feeder"), py::arg("scenarios"), py::arg("options") = std::vector<std::string>{"BaU", "ToU", "PQ-opt", "Full-opt"},
      py::arg("cyclic") = true, py::arg("lol_factor") = 10.0);

  m.def("solve_dispatch", &solve_dispatch, py::arg("feeder"), py::arg("fleet"),
        py::arg("include_transformer_cost") = true, py::arg("cyclic") = true, py::arg("decompose") = true,
        "Full-opt (or PQ-opt) dispatch with nodal prices and their components.");

  m.def("aging_factor", &thermal::aging_factor_exact, py::arg("hot_spot_c"));
  m.def(
      "simulate_top_oil",
      [](double rated_kva, double s_base_kva, const std::vector<double>& current_sq, const std::vector<double>& ambient,
         double initial_top_oil) {
        thermal::ThermalParams p;
        p.rated_kva = rated_kva;
        p.rated_current_sq = (rated_kva / s_base_kva) * (rated_kva / s_base_kva);
        const auto traj = thermal::simulate_exact(p, current_sq, ambient, initial_top_oil, 1.0);
        std::vector<double> top, hot;
        for (const auto& s : traj.states) {
          top.push_back(s.top_oil);
          hot.push_back(s.hot_spot);
        }
        py::dict d;
        d["top_oil"] = to_array(top);
        d["hot_spot"] = to_array(hot);
        d["loss_of_life_hours"] = traj.loss_of_life_hours;
        return d;
      },
      py::arg("rated_kva"), py::arg("s_base_kva"), py::arg("current_sq"), py::arg("ambient"),
      py::arg("initial_top_oil"));
}
