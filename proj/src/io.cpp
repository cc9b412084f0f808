#include "dlmp/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "dlmp/error.hpp"

namespace dlmp::io {

using nlohmann::json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw SchemaError("not a number: '" + text + "'");
  }
  return x;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw SchemaError("csv has no column '" + name + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::string text;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text += ',';
      text += fields[i];
    }
    text += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw DimensionError("csv row width differs from header");
    line(row);
  }
  write_text(path, text);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size()) {
        throw SchemaError("'" + path.string() + "': row width " + std::to_string(fields.size()) + " vs header " +
                          std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw SchemaError("'" + path.string() + "' is empty");
  return table;
}

namespace {

std::string clean(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void add_series(CsvTable& t, const std::string& name, const opf::Grid& g) {
  // g is [t][element]
  for (std::size_t h = 0; h < g.size(); ++h) {
    for (std::size_t e = 0; e < g[h].size(); ++e) {
      t.rows.push_back({std::to_string(h), name, std::to_string(e), format_number(g[h][e])});
    }
  }
}

void add_devices(CsvTable& t, const std::string& name, const std::vector<der::DeviceSeries>& devs) {
  if (devs.empty()) return;
  const std::size_t T = devs[0].p.size();
  for (std::size_t h = 0; h < T; ++h) {
    for (std::size_t d = 0; d < devs.size(); ++d) {
      t.rows.push_back({std::to_string(h), name + "_p", std::to_string(d), format_number(devs[d].p[h])});
      t.rows.push_back({std::to_string(h), name + "_q", std::to_string(d), format_number(devs[d].q[h])});
    }
  }
}

}  // namespace

CsvTable comparison_csv(const schedules::ComparisonTable& table) {
  CsvTable t;
  t.header = {"scenario",          "option", "delta_real_usd", "delta_reactive_usd", "delta_transformer_usd",
              "delta_total_usd",   "lol_hours", "failed",      "status"};
  for (const auto& r : table.rows) {
    t.rows.push_back({clean(r.scenario), schedules::to_string(r.option), format_number(r.delta_real),
                      format_number(r.delta_reactive), format_number(r.delta_transformer),
                      format_number(r.delta_total), format_number(r.lol_hours), r.failed ? "1" : "0",
                      clean(r.status)});
  }
  return t;
}

CsvTable cell_csv(const schedules::OptionResult& cell) {
  CsvTable t;
  t.header = {"hour", "series", "element", "value"};
  const auto& s = cell.state;
  for (std::size_t h = 0; h < s.p0.size(); ++h) {
    t.rows.push_back({std::to_string(h), "p0", "0", format_number(s.p0[h])});
    t.rows.push_back({std::to_string(h), "q0", "0", format_number(s.q0[h])});
  }
  add_series(t, "v", s.v);
  add_series(t, "l", s.l);
  add_devices(t, "pv", cell.schedule.pv);
  add_devices(t, "ev", cell.schedule.ev);
  if (cell.dlmps) {
    add_series(t, "lambda_p", cell.dlmps->p);
    add_series(t, "lambda_q", cell.dlmps->q);
  }
  for (std::size_t y = 0; y < cell.thermal.size(); ++y) {
    const auto& st = cell.thermal[y].states;
    for (std::size_t h = 0; h < st.size(); ++h) {
      const std::string hs = std::to_string(h), ys = std::to_string(y);
      t.rows.push_back({hs, "top_oil", ys, format_number(st[h].top_oil)});
      t.rows.push_back({hs, "hot_spot", ys, format_number(st[h].hot_spot)});
      t.rows.push_back({hs, "aging", ys, format_number(st[h].aging_factor)});
    }
  }
  return t;
}

CsvTable dlmp_csv(const pricing::DlmpSeries& dlmps) {
  CsvTable t;
  t.header = {"hour", "node", "lambda_p", "lambda_q"};
  for (std::size_t h = 0; h < dlmps.p.size(); ++h) {
    for (std::size_t j = 0; j < dlmps.p[h].size(); ++j) {
      t.rows.push_back(
          {std::to_string(h), std::to_string(j), format_number(dlmps.p[h][j]), format_number(dlmps.q[h][j])});
    }
  }
  return t;
}

CsvTable decomposition_csv(const pricing::DlmpDecomposition& dec, const pricing::DlmpSeries& dlmps) {
  CsvTable t;
  t.header = {"hour", "node", "kind", "real_power", "reactive_power", "transformer",
              "voltage", "current", "total", "dlmp", "trusted"};
  for (std::size_t h = 0; h < dec.p.size(); ++h) {
    for (std::size_t j = 0; j < dec.p[h].size(); ++j) {
      for (int kind = 0; kind < 2; ++kind) {
        const auto& c = kind == 0 ? dec.p[h][j] : dec.q[h][j];
        const double price = kind == 0 ? dlmps.p[h][j] : dlmps.q[h][j];
        t.rows.push_back({std::to_string(h), std::to_string(j), kind == 0 ? "p" : "q", format_number(c.real_power),
                          format_number(c.reactive_power), format_number(c.transformer), format_number(c.voltage),
                          format_number(c.current), format_number(c.total()), format_number(price),
                          dec.trusted[h] ? "1" : "0"});
      }
    }
  }
  return t;
}

std::string cell_stem(const std::string& scenario, schedules::Option option) {
  std::string s = scenario + "__" + schedules::to_string(option);
  for (char& c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Solution files. Non-finite numbers are stored as strings so that the text
// stays valid JSON and reads back exactly.

namespace {

json num(double x) {
  if (std::isfinite(x)) return x;
  return format_number(x);
}

double num(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_number(j.get<std::string>());
  throw SchemaError(where + ": expected a number");
}

json vec(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> vec(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(num(x, where));
  return v;
}

json grid(const opf::Grid& g) {
  json a = json::array();
  for (const auto& r : g) a.push_back(vec(r));
  return a;
}

opf::Grid grid(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of arrays");
  opf::Grid g;
  for (const auto& r : j) g.push_back(vec(r, where));
  return g;
}

json devices(const std::vector<der::DeviceSeries>& d) {
  json a = json::array();
  for (const auto& s : d) a.push_back({{"p", vec(s.p)}, {"q", vec(s.q)}});
  return a;
}

std::vector<der::DeviceSeries> devices(const json& j, const std::string& where) {
  std::vector<der::DeviceSeries> d;
  for (const auto& s : j) d.push_back({vec(s.at("p"), where + ".p"), vec(s.at("q"), where + ".q")});
  return d;
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + "." + key + ": missing");
  return j[key];
}

}  // namespace

std::string dump_solution(const SavedSolution& saved) {
  const auto& s = saved.solution;
  json doc;
  doc["format"] = "dlmp-solution/1";
  doc["feeder"] = saved.feeder_path;
  doc["scenario"] = {{"name", saved.scenario.name},
                     {"ev_per_site", saved.scenario.ev_per_site},
                     {"pv_kva_per_site", num(saved.scenario.pv_kva_per_site)},
                     {"include_feeder_fleet", saved.scenario.include_feeder_fleet}};
  doc["options"] = {{"include_transformer_cost", saved.options.include_transformer_cost},
                    {"cyclic", saved.options.cyclic},
                    {"pwl_breakpoints", vec(saved.options.pwl_breakpoints)},
                    {"exactness_tol", num(saved.options.exactness_tol)}};
  json sol;
  sol["status"] = conic::to_string(s.status);
  sol["status_code"] = static_cast<int>(s.status);
  sol["message"] = s.message;
  sol["iterations"] = s.iterations;
  sol["residuals"] = {num(s.primal_residual), num(s.dual_residual), num(s.gap)};
  sol["objective"] = num(s.objective);
  sol["real_power_cost"] = num(s.real_power_cost);
  sol["reactive_cost"] = num(s.reactive_cost);
  sol["transformer_cost"] = num(s.transformer_cost);
  sol["state"] = {{"P", grid(s.state.P)}, {"Q", grid(s.state.Q)},   {"l", grid(s.state.l)},
                  {"v", grid(s.state.v)}, {"p0", vec(s.state.p0)}, {"q0", vec(s.state.q0)}};
  sol["schedule"] = {{"pv", devices(s.schedule.pv)}, {"ev", devices(s.schedule.ev)}};
  sol["top_oil"] = grid(s.top_oil);
  sol["aging"] = grid(s.aging);
  sol["lambda_p"] = grid(s.lambda_p);
  sol["lambda_q"] = grid(s.lambda_q);
  sol["mu_v_lower"] = grid(s.mu_v_lower);
  sol["mu_v_upper"] = grid(s.mu_v_upper);
  sol["mu_ampacity"] = grid(s.mu_ampacity);
  json xi = json::array();
  for (const auto& g : s.xi) xi.push_back(grid(g));
  sol["xi"] = xi;
  sol["thermal_dual"] = grid(s.thermal_dual);
  sol["degenerate"] = s.degenerate;
  sol["degenerate_pairs"] = s.degenerate_pairs;
  doc["solution"] = sol;
  return doc.dump(1) + "\n";
}

SavedSolution parse_solution(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("solution file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "dlmp-solution/1") {
    throw SchemaError("format: expected 'dlmp-solution/1'");
  }
  SavedSolution out;
  try {
    out.feeder_path = field(doc, "feeder", "").get<std::string>();
    const auto& sc = field(doc, "scenario", "");
    out.scenario.name = sc.value("name", "");
    out.scenario.ev_per_site = sc.value("ev_per_site", 0);
    out.scenario.pv_kva_per_site = num(field(sc, "pv_kva_per_site", "scenario"), "scenario.pv_kva_per_site");
    out.scenario.include_feeder_fleet = sc.value("include_feeder_fleet", false);
    const auto& op = field(doc, "options", "");
    out.options.include_transformer_cost = field(op, "include_transformer_cost", "options").get<bool>();
    out.options.cyclic = field(op, "cyclic", "options").get<bool>();
    out.options.pwl_breakpoints = vec(field(op, "pwl_breakpoints", "options"), "options.pwl_breakpoints");
    out.options.exactness_tol = num(field(op, "exactness_tol", "options"), "options.exactness_tol");

    const auto& j = field(doc, "solution", "");
    auto& s = out.solution;
    const int code = field(j, "status_code", "solution").get<int>();
    if (code < 0 || code > static_cast<int>(conic::SolverStatus::NumericalError)) {
      throw SchemaError("solution.status_code: out of range");
    }
    s.status = static_cast<conic::SolverStatus>(code);
    s.message = j.value("message", "");
    s.iterations = j.value("iterations", 0);
    const auto res = vec(field(j, "residuals", "solution"), "solution.residuals");
    if (res.size() != 3) throw SchemaError("solution.residuals: expected 3 values");
    s.primal_residual = res[0];
    s.dual_residual = res[1];
    s.gap = res[2];
    s.objective = num(field(j, "objective", "solution"), "solution.objective");
    s.real_power_cost = num(field(j, "real_power_cost", "solution"), "solution.real_power_cost");
    s.reactive_cost = num(field(j, "reactive_cost", "solution"), "solution.reactive_cost");
    s.transformer_cost = num(field(j, "transformer_cost", "solution"), "solution.transformer_cost");
    const auto& st = field(j, "state", "solution");
    s.state.P = grid(field(st, "P", "state"), "state.P");
    s.state.Q = grid(field(st, "Q", "state"), "state.Q");
    s.state.l = grid(field(st, "l", "state"), "state.l");
    s.state.v = grid(field(st, "v", "state"), "state.v");
    s.state.p0 = vec(field(st, "p0", "state"), "state.p0");
    s.state.q0 = vec(field(st, "q0", "state"), "state.q0");
    const auto& sch = field(j, "schedule", "solution");
    s.schedule.pv = devices(field(sch, "pv", "schedule"), "schedule.pv");
    s.schedule.ev = devices(field(sch, "ev", "schedule"), "schedule.ev");
    s.top_oil = grid(field(j, "top_oil", "solution"), "solution.top_oil");
    s.aging = grid(field(j, "aging", "solution"), "solution.aging");
    s.lambda_p = grid(field(j, "lambda_p", "solution"), "solution.lambda_p");
    s.lambda_q = grid(field(j, "lambda_q", "solution"), "solution.lambda_q");
    s.mu_v_lower = grid(field(j, "mu_v_lower", "solution"), "solution.mu_v_lower");
    s.mu_v_upper = grid(field(j, "mu_v_upper", "solution"), "solution.mu_v_upper");
    s.mu_ampacity = grid(field(j, "mu_ampacity", "solution"), "solution.mu_ampacity");
    for (const auto& g : field(j, "xi", "solution")) s.xi.push_back(grid(g, "solution.xi"));
    s.thermal_dual = grid(field(j, "thermal_dual", "solution"), "solution.thermal_dual");
    s.degenerate = j.value("degenerate", false);
    s.degenerate_pairs = j.value("degenerate_pairs", 0);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("solution file: ") + e.what());
  }
  return out;
}

}  // namespace dlmp::io
