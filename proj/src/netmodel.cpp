#include "dlmp/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dlmp/error.hpp"

namespace dlmp::net {

using nlohmann::json;

namespace {

[[noreturn]] void schema_fail(const std::string& where, const std::string& what) {
  throw SchemaError(where + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) schema_fail(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(where + "." + key, "missing");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) schema_fail(where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_fail(where, "not finite");
  return d;
}

double number(const json& obj, const std::string& key, const std::string& where) {
  return number(field(obj, key, where), where + "." + key);
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  return number(obj[key], where + "." + key);
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) schema_fail(where, "expected an integer");
  return v.get<int>();
}

int integer(const json& obj, const std::string& key, const std::string& where) {
  return integer(field(obj, key, where), where + "." + key);
}

std::string text_or(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return {};
  if (!obj[key].is_string()) schema_fail(where + "." + key, "expected a string");
  return obj[key].get<std::string>();
}

std::vector<double> series(const json& v, const std::string& where) {
  if (!v.is_array()) schema_fail(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::map<std::string, std::vector<double>> named_series(const json& v, const std::string& where) {
  std::map<std::string, std::vector<double>> out;
  if (v.is_null()) return out;
  if (!v.is_object()) schema_fail(where, "expected an object of named series");
  for (auto it = v.begin(); it != v.end(); ++it) out[it.key()] = series(it.value(), where + "." + it.key());
  return out;
}

RawEv parse_ev(const json& e, const std::string& where) {
  RawEv ev;
  ev.battery_kwh = number(e, "battery_kwh", where);
  ev.charger_kva = number(e, "charger_kva", where);
  ev.rate_kw = number(e, "rate_kw", where);
  ev.initial_soc_kwh = number_or(e, "initial_soc_kwh", 0.0, where);
  ev.wraps = e.value("wraps", false);
  const auto& ivs = field(e, "intervals", where);
  if (!ivs.is_array()) schema_fail(where + ".intervals", "expected an array");
  for (std::size_t z = 0; z < ivs.size(); ++z) {
    const std::string w = where + ".intervals[" + std::to_string(z) + "]";
    RawPlugInterval iv;
    iv.node = ivs[z].contains("node") && !ivs[z]["node"].is_null() ? integer(ivs[z]["node"], w + ".node") : -1;
    iv.begin = integer(ivs[z], "begin", w);
    iv.end = integer(ivs[z], "end", w);
    iv.min_soc_kwh = number_or(ivs[z], "min_soc_kwh", 0.0, w);
    iv.trip_kwh = number_or(ivs[z], "trip_kwh", 0.0, w);
    iv.truncated_end = ivs[z].value("truncated_end", false);
    ev.intervals.push_back(iv);
  }
  return ev;
}

json dump_ev(const RawEv& ev) {
  json e = {{"battery_kwh", ev.battery_kwh},
            {"charger_kva", ev.charger_kva},
            {"rate_kw", ev.rate_kw},
            {"initial_soc_kwh", ev.initial_soc_kwh},
            {"wraps", ev.wraps},
            {"intervals", json::array()}};
  for (const auto& iv : ev.intervals) {
    json j = {{"begin", iv.begin},
              {"end", iv.end},
              {"min_soc_kwh", iv.min_soc_kwh},
              {"trip_kwh", iv.trip_kwh},
              {"truncated_end", iv.truncated_end}};
    j["node"] = iv.node >= 0 ? json(iv.node) : json(nullptr);
    e["intervals"].push_back(j);
  }
  return e;
}

void require_length(const std::vector<double>& v, int T, const std::string& where) {
  if (static_cast<int>(v.size()) != T) {
    throw DimensionError(where + ": expected " + std::to_string(T) + " hourly values, got " +
                         std::to_string(v.size()));
  }
}

der::EvUnit ev_to_pu(const RawEv& raw, const FeederRaw& f, bool is_template, const std::string& where) {
  const double e_scale = 1.0 / (f.s_base_kva * f.dt_hours);
  const double p_scale = 1.0 / f.s_base_kva;
  if (!(raw.battery_kwh > 0.0)) schema_fail(where + ".battery_kwh", "must be positive");
  if (!(raw.rate_kw > 0.0)) schema_fail(where + ".rate_kw", "must be positive");
  if (raw.rate_kw > raw.charger_kva) schema_fail(where + ".rate_kw", "exceeds charger_kva");
  if (raw.initial_soc_kwh < 0.0 || raw.initial_soc_kwh > raw.battery_kwh) {
    schema_fail(where + ".initial_soc_kwh", "outside [0, battery_kwh]");
  }
  if (raw.intervals.empty()) schema_fail(where + ".intervals", "at least one plug-in interval required");
  der::EvUnit ev;
  ev.battery_capacity = raw.battery_kwh * e_scale;
  ev.charger_capacity = raw.charger_kva * p_scale;
  ev.max_rate = raw.rate_kw * p_scale;
  ev.itinerary.initial_soc = raw.initial_soc_kwh * e_scale;
  ev.itinerary.wraps = raw.wraps;
  const int N = static_cast<int>(f.nodes.size());
  int prev_end = 0;
  for (std::size_t z = 0; z < raw.intervals.size(); ++z) {
    const auto& r = raw.intervals[z];
    const std::string w = where + ".intervals[" + std::to_string(z) + "]";
    if (r.begin < prev_end || r.begin >= r.end || r.end > f.horizon) {
      schema_fail(w, "plug-in windows must be ordered, disjoint and inside the horizon");
    }
    prev_end = r.end;
    if (is_template ? r.node != -1 && (r.node < 1 || r.node >= N) : (r.node < 1 || r.node >= N)) {
      schema_fail(w + ".node", "not a non-root node");
    }
    if (r.min_soc_kwh < 0.0 || r.min_soc_kwh > raw.battery_kwh) schema_fail(w + ".min_soc_kwh", "outside [0, battery]");
    if (r.trip_kwh < 0.0) schema_fail(w + ".trip_kwh", "negative");
    der::PlugInterval iv;
    iv.node = r.node;
    iv.begin = r.begin;
    iv.end = r.end;
    iv.min_soc_at_end = r.min_soc_kwh * e_scale;
    iv.trip_energy_after = r.trip_kwh * e_scale;
    iv.truncated_end = r.truncated_end;
    ev.itinerary.intervals.push_back(iv);
  }
  if (raw.wraps && (raw.intervals.front().begin != 0 || raw.intervals.back().end != f.horizon)) {
    schema_fail(where + ".wraps", "a wrapping itinerary must be plugged at both ends of the horizon");
  }
  return ev;
}

RawEv ev_from_pu(const der::EvUnit& ev, const Feeder& f) {
  const double e_scale = f.base.s_base * f.dt;
  RawEv raw;
  raw.battery_kwh = ev.battery_capacity * e_scale;
  raw.charger_kva = ev.charger_capacity * f.base.s_base;
  raw.rate_kw = ev.max_rate * f.base.s_base;
  raw.initial_soc_kwh = ev.itinerary.initial_soc * e_scale;
  raw.wraps = ev.itinerary.wraps;
  for (const auto& iv : ev.itinerary.intervals) {
    raw.intervals.push_back(
        {iv.node, iv.begin, iv.end, iv.min_soc_at_end * e_scale, iv.trip_energy_after * e_scale, iv.truncated_end});
  }
  return raw;
}

}  // namespace

double PerUnitBase::z_base(const std::string& level) const {
  auto it = v_base.find(level);
  if (it == v_base.end()) throw SchemaError("missing base for voltage level '" + level + "'");
  return it->second * it->second * 1000.0 / s_base;
}

double PerUnitBase::i_base(const std::string& level) const {
  auto it = v_base.find(level);
  if (it == v_base.end()) throw SchemaError("missing base for voltage level '" + level + "'");
  return s_base / (std::sqrt(3.0) * it->second);
}

FeederRaw parse_feeder(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("feeder document is not valid JSON: ") + e.what());
  }
  FeederRaw f;
  f.horizon = doc.contains("horizon") ? integer(doc["horizon"], "horizon") : 24;
  f.dt_hours = number_or(doc, "dt_hours", 1.0, "feeder");
  f.root_voltage_sq = number_or(doc, "root_voltage_sq", 1.0, "feeder");

  const auto& bases = field(doc, "bases", "feeder");
  f.s_base_kva = number(bases, "s_kva", "bases");
  const auto& levels = field(bases, "levels", "bases");
  if (!levels.is_object()) schema_fail("bases.levels", "expected an object of kV values");
  for (auto it = levels.begin(); it != levels.end(); ++it) {
    f.levels_kv[it.key()] = number(it.value(), "bases.levels." + it.key());
  }

  const auto& nodes = field(doc, "nodes", "feeder");
  if (!nodes.is_array()) schema_fail("nodes", "expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string w = "nodes[" + std::to_string(i) + "]";
    const auto& n = nodes[i];
    RawNode node;
    node.id = integer(n, "id", w);
    if (n.contains("parent") && !n["parent"].is_null()) node.parent = integer(n["parent"], w + ".parent");
    node.level = text_or(n, "level", w);
    if (node.level.empty()) schema_fail(w + ".level", "missing");
    node.vmin = number_or(n, "vmin", 0.95, w);
    node.vmax = number_or(n, "vmax", 1.05, w);
    node.load_profile = text_or(n, "load_profile", w);
    node.pf = number_or(n, "pf", 1.0, w);
    node.load_scale = number_or(n, "load_scale", 1.0, w);
    f.nodes.push_back(node);
  }

  const auto& lines = field(doc, "lines", "feeder");
  if (!lines.is_array()) schema_fail("lines", "expected an array");
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string w = "lines[" + std::to_string(i) + "]";
    RawLine l;
    l.from = integer(lines[i], "from", w);
    l.to = integer(lines[i], "to", w);
    l.r_ohm = number(lines[i], "r_ohm", w);
    l.x_ohm = number(lines[i], "x_ohm", w);
    l.ampacity_a = number(lines[i], "ampacity_A", w);
    l.transformer = text_or(lines[i], "transformer", w);
    f.lines.push_back(l);
  }

  if (doc.contains("transformers")) {
    const auto& tr = doc["transformers"];
    if (!tr.is_object()) schema_fail("transformers", "expected an object keyed by name");
    for (auto it = tr.begin(); it != tr.end(); ++it) {
      const std::string w = "transformers." + it.key();
      const auto& t = it.value();
      RawTransformer x;
      x.name = it.key();
      x.rated_kva = number(t, "rated_kVA", w);
      x.loss_ratio = number_or(t, "R", 5.0, w);
      x.top_oil_rise = number_or(t, "dtheta_TO_R", 55.0, w);
      x.hot_spot_rise = number_or(t, "dtheta_H_R", 25.0, w);
      x.tau_top_oil = number_or(t, "tau_TO_h", 3.0, w);
      x.k11 = number_or(t, "k11", 1.0, w);
      x.n = number_or(t, "n", 0.8, w);
      x.m = number_or(t, "m", 0.8, w);
      x.cost_per_hour = number_or(t, "cost_per_hour", 0.0, w);
      f.transformers.push_back(x);
    }
  }

  if (doc.contains("profiles")) f.profiles = named_series(doc["profiles"], "profiles");

  const auto& ser = field(doc, "series", "feeder");
  f.lmp = series(field(ser, "lmp", "series"), "series.lmp");
  if (ser.contains("q_price") && !ser["q_price"].is_null()) f.q_price = series(ser["q_price"], "series.q_price");
  f.ambient = series(field(ser, "ambient", "series"), "series.ambient");
  if (ser.contains("irradiation")) f.irradiation = named_series(ser["irradiation"], "series.irradiation");

  if (doc.contains("der")) {
    const auto& d = doc["der"];
    if (d.contains("pv")) {
      for (std::size_t i = 0; i < d["pv"].size(); ++i) {
        const std::string w = "der.pv[" + std::to_string(i) + "]";
        RawPv pv;
        pv.node = integer(d["pv"][i], "node", w);
        pv.kva = number(d["pv"][i], "kva", w);
        pv.irradiation = text_or(d["pv"][i], "irradiation", w);
        f.pv.push_back(pv);
      }
    }
    if (d.contains("ev")) {
      for (std::size_t i = 0; i < d["ev"].size(); ++i) f.ev.push_back(parse_ev(d["ev"][i], "der.ev[" + std::to_string(i) + "]"));
    }
    if (d.contains("ev_templates")) {
      for (auto it = d["ev_templates"].begin(); it != d["ev_templates"].end(); ++it) {
        f.ev_templates[it.key()] = parse_ev(it.value(), "der.ev_templates." + it.key());
      }
    }
    if (d.contains("sites")) {
      for (std::size_t i = 0; i < d["sites"].size(); ++i) {
        const std::string w = "der.sites[" + std::to_string(i) + "]";
        const auto& s = d["sites"][i];
        DerSite site;
        site.name = text_or(s, "name", w);
        site.node = integer(s, "node", w);
        site.ev_template = text_or(s, "ev_template", w);
        site.pv_irradiation = text_or(s, "pv_irradiation", w);
        site.pv_unit_kva = number_or(s, "pv_unit_kva", 10.0, w);
        f.sites.push_back(site);
      }
    }
  }
  return f;
}

std::string dump_feeder(const FeederRaw& f) {
  json doc;
  doc["horizon"] = f.horizon;
  doc["dt_hours"] = f.dt_hours;
  doc["root_voltage_sq"] = f.root_voltage_sq;
  doc["bases"] = {{"s_kva", f.s_base_kva}, {"levels", f.levels_kv}};
  doc["nodes"] = json::array();
  for (const auto& n : f.nodes) {
    json j = {{"id", n.id}, {"level", n.level}, {"vmin", n.vmin}, {"vmax", n.vmax}, {"pf", n.pf},
              {"load_scale", n.load_scale}};
    j["parent"] = n.parent ? json(*n.parent) : json(nullptr);
    j["load_profile"] = n.load_profile.empty() ? json(nullptr) : json(n.load_profile);
    doc["nodes"].push_back(j);
  }
  doc["lines"] = json::array();
  for (const auto& l : f.lines) {
    json j = {{"from", l.from}, {"to", l.to}, {"r_ohm", l.r_ohm}, {"x_ohm", l.x_ohm}, {"ampacity_A", l.ampacity_a}};
    j["transformer"] = l.transformer.empty() ? json(nullptr) : json(l.transformer);
    doc["lines"].push_back(j);
  }
  doc["transformers"] = json::object();
  for (const auto& t : f.transformers) {
    doc["transformers"][t.name] = {{"rated_kVA", t.rated_kva}, {"R", t.loss_ratio},     {"dtheta_TO_R", t.top_oil_rise},
                                   {"dtheta_H_R", t.hot_spot_rise}, {"tau_TO_h", t.tau_top_oil}, {"k11", t.k11},
                                   {"n", t.n},                   {"m", t.m},              {"cost_per_hour", t.cost_per_hour}};
  }
  doc["profiles"] = f.profiles;
  doc["series"] = {{"lmp", f.lmp}, {"ambient", f.ambient}, {"irradiation", f.irradiation}};
  if (!f.q_price.empty()) doc["series"]["q_price"] = f.q_price;
  json der = {{"pv", json::array()}, {"ev", json::array()}, {"ev_templates", json::object()}, {"sites", json::array()}};
  for (const auto& pv : f.pv) der["pv"].push_back({{"node", pv.node}, {"kva", pv.kva}, {"irradiation", pv.irradiation}});
  for (const auto& ev : f.ev) der["ev"].push_back(dump_ev(ev));
  for (const auto& [name, ev] : f.ev_templates) der["ev_templates"][name] = dump_ev(ev);
  for (const auto& s : f.sites) {
    der["sites"].push_back({{"name", s.name},
                            {"node", s.node},
                            {"ev_template", s.ev_template},
                            {"pv_irradiation", s.pv_irradiation},
                            {"pv_unit_kva", s.pv_unit_kva}});
  }
  doc["der"] = der;
  return doc.dump(1) + "\n";
}

void validate_topology(const FeederRaw& raw) {
  const int count = static_cast<int>(raw.nodes.size());
  if (count == 0) throw TopologyError("feeder has no nodes");
  std::vector<int> parent(count, -2);
  for (const auto& n : raw.nodes) {
    if (n.id < 0 || n.id >= count) {
      throw TopologyError("node id " + std::to_string(n.id) + " outside 0.." + std::to_string(count - 1));
    }
    if (parent[n.id] != -2) throw TopologyError("duplicate node id " + std::to_string(n.id));
    parent[n.id] = n.parent ? *n.parent : -1;
  }
  std::vector<int> roots;
  for (int i = 0; i < count; ++i) {
    if (parent[i] == -1) roots.push_back(i);
    else if (parent[i] < 0 || parent[i] >= count) {
      throw TopologyError("orphan node " + std::to_string(i) + ": parent " + std::to_string(parent[i]) +
                          " does not exist");
    }
  }
  if (roots.size() != 1 || roots.front() != 0) {
    throw TopologyError("exactly one root is required and it must be node 0 (found " +
                        std::to_string(roots.size()) + ")");
  }
  // 0 = unseen, 1 = on the current walk, 2 = reaches the root.
  std::vector<int> state(count, 0);
  state[0] = 2;
  for (int i = 0; i < count; ++i) {
    std::vector<int> walk;
    int cur = i;
    while (state[cur] == 0) {
      state[cur] = 1;
      walk.push_back(cur);
      cur = parent[cur];
    }
    if (state[cur] == 1) {
      std::string cycle;
      const auto start = std::find(walk.begin(), walk.end(), cur);
      for (auto it = start; it != walk.end(); ++it) cycle += std::to_string(*it) + " -> ";
      throw TopologyError("cycle in parent pointers: " + cycle + std::to_string(cur));
    }
    for (int w : walk) state[w] = 2;
  }
  if (static_cast<int>(raw.lines.size()) != count - 1) {
    throw TopologyError("expected " + std::to_string(count - 1) + " lines for " + std::to_string(count) +
                        " nodes, got " + std::to_string(raw.lines.size()));
  }
  std::vector<int> seen(count, 0);
  for (std::size_t k = 0; k < raw.lines.size(); ++k) {
    const auto& l = raw.lines[k];
    const std::string w = "lines[" + std::to_string(k) + "]";
    if (l.to <= 0 || l.to >= count) throw TopologyError(w + ": 'to' must be a non-root node");
    if (seen[l.to]++) throw TopologyError(w + ": node " + std::to_string(l.to) + " fed by more than one line");
    if (l.from != parent[l.to]) {
      throw TopologyError(w + ": 'from' " + std::to_string(l.from) + " is not the parent of node " +
                          std::to_string(l.to));
    }
  }
}

Feeder to_per_unit(const FeederRaw& raw) {
  if (raw.horizon <= 0) schema_fail("horizon", "must be positive");
  if (!(raw.dt_hours > 0.0)) schema_fail("dt_hours", "must be positive");
  if (!(raw.s_base_kva > 0.0)) schema_fail("bases.s_kva", "must be positive");
  if (!(raw.root_voltage_sq > 0.0)) schema_fail("root_voltage_sq", "must be positive");
  for (const auto& [name, kv] : raw.levels_kv) {
    if (!(kv > 0.0)) schema_fail("bases.levels." + name, "must be positive");
  }
  validate_topology(raw);

  const int T = raw.horizon;
  Feeder f;
  f.horizon = T;
  f.dt = raw.dt_hours;
  f.root_voltage_sq = raw.root_voltage_sq;
  f.base.s_base = raw.s_base_kva;
  f.base.v_base = raw.levels_kv;

  const int count = static_cast<int>(raw.nodes.size());
  f.nodes.resize(count);
  for (const auto& r : raw.nodes) {
    const std::string w = "nodes[" + std::to_string(r.id) + "]";
    if (!raw.levels_kv.count(r.level)) schema_fail(w + ".level", "missing base for voltage level '" + r.level + "'");
    if (!(r.vmin > 0.0 && r.vmin < r.vmax)) schema_fail(w, "voltage limits need 0 < vmin < vmax");
    if (!(r.pf > 0.0 && r.pf <= 1.0)) schema_fail(w + ".pf", "must lie in (0, 1]");
    if (r.load_scale < 0.0) schema_fail(w + ".load_scale", "negative");
    if (!r.load_profile.empty() && !raw.profiles.count(r.load_profile)) {
      schema_fail(w + ".load_profile", "unknown profile '" + r.load_profile + "'");
    }
    Node& n = f.nodes[r.id];
    n.id = r.id;
    n.parent = r.parent ? *r.parent : -1;
    n.level = r.level;
    n.voltage_min_sq = r.vmin * r.vmin;
    n.voltage_max_sq = r.vmax * r.vmax;
    n.load_profile = r.load_profile;
    n.power_factor = r.pf;
    n.load_scale = r.load_scale;
  }

  std::map<std::string, int> tr_index;
  for (std::size_t y = 0; y < raw.transformers.size(); ++y) {
    const auto& t = raw.transformers[y];
    if (tr_index.count(t.name)) schema_fail("transformers." + t.name, "duplicate name");
    if (!(t.rated_kva > 0.0)) schema_fail("transformers." + t.name + ".rated_kVA", "must be positive");
    tr_index[t.name] = static_cast<int>(y);
    thermal::ThermalParams p;
    p.name = t.name;
    p.rated_kva = t.rated_kva;
    p.rated_current_sq = std::pow(t.rated_kva / raw.s_base_kva, 2);
    p.loss_ratio = t.loss_ratio;
    p.top_oil_rise = t.top_oil_rise;
    p.hot_spot_rise = t.hot_spot_rise;
    p.tau_top_oil = t.tau_top_oil;
    p.k11 = t.k11;
    p.n = t.n;
    p.m = t.m;
    p.hourly_cost = t.cost_per_hour;
    p.validate();
    f.transformers.push_back(p);
  }
  f.transformer_line.assign(f.transformers.size(), -1);

  f.lines.resize(count - 1);
  for (std::size_t k = 0; k < raw.lines.size(); ++k) {
    const auto& r = raw.lines[k];
    const std::string w = "lines[" + std::to_string(k) + "]";
    if (r.r_ohm < 0.0) schema_fail(w + ".r_ohm", "negative resistance");
    if (!(r.ampacity_a > 0.0)) schema_fail(w + ".ampacity_A", "must be positive");
    const std::string& level = f.nodes[r.from].level;
    Line& l = f.lines[Feeder::line_into(r.to)];
    l.from_node = r.from;
    l.to_node = r.to;
    l.resistance = r.r_ohm / f.base.z_base(level);
    l.reactance = r.x_ohm / f.base.z_base(level);
    l.ampacity_sq = std::pow(r.ampacity_a / f.base.i_base(level), 2);
    if (!r.transformer.empty()) {
      auto it = tr_index.find(r.transformer);
      if (it == tr_index.end()) schema_fail(w + ".transformer", "unknown transformer '" + r.transformer + "'");
      if (f.transformer_line[it->second] >= 0) schema_fail(w + ".transformer", "transformer used by two lines");
      l.transformer = it->second;
      f.transformer_line[it->second] = Feeder::line_into(r.to);
    }
  }
  for (std::size_t y = 0; y < f.transformers.size(); ++y) {
    if (f.transformer_line[y] < 0) schema_fail("transformers." + f.transformers[y].name, "not referenced by any line");
  }

  for (const auto& [name, kw] : raw.profiles) {
    require_length(kw, T, "profiles." + name);
    for (double v : kw) {
      if (v < 0.0) schema_fail("profiles." + name, "negative demand");
    }
    f.profiles[name].real_kw = kw;
  }

  require_length(raw.lmp, T, "series.lmp");
  for (double c : raw.lmp) {
    if (!(c > 0.0)) schema_fail("series.lmp", "prices must be positive");
  }
  f.lmp = raw.lmp;
  if (raw.q_price.empty()) {
    f.q_price.resize(T);
    for (int t = 0; t < T; ++t) f.q_price[t] = 0.1 * raw.lmp[t];
  } else {
    require_length(raw.q_price, T, "series.q_price");
    f.q_price = raw.q_price;
  }
  require_length(raw.ambient, T, "series.ambient");
  f.ambient = raw.ambient;
  for (const auto& [name, rho] : raw.irradiation) {
    require_length(rho, T, "series.irradiation." + name);
    for (double v : rho) {
      if (v < 0.0 || v > 1.0) schema_fail("series.irradiation." + name, "values must lie in [0, 1]");
    }
  }
  f.irradiation = raw.irradiation;

  f.load_p.assign(count, std::vector<double>(T, 0.0));
  f.load_q.assign(count, std::vector<double>(T, 0.0));
  for (const auto& n : f.nodes) {
    if (n.load_profile.empty()) continue;
    const auto& kw = f.profiles.at(n.load_profile).real_kw;
    const double ratio = std::tan(std::acos(n.power_factor));
    for (int t = 0; t < T; ++t) {
      f.load_p[n.id][t] = kw[t] * n.load_scale / f.base.s_base;
      f.load_q[n.id][t] = f.load_p[n.id][t] * ratio;
    }
  }

  for (std::size_t i = 0; i < raw.pv.size(); ++i) {
    const auto& r = raw.pv[i];
    const std::string w = "der.pv[" + std::to_string(i) + "]";
    if (r.node < 1 || r.node >= count) schema_fail(w + ".node", "not a non-root node");
    if (!(r.kva > 0.0)) schema_fail(w + ".kva", "must be positive");
    auto it = raw.irradiation.find(r.irradiation);
    if (it == raw.irradiation.end()) schema_fail(w + ".irradiation", "unknown series '" + r.irradiation + "'");
    der::PvUnit pv;
    pv.node = r.node;
    pv.nameplate = r.kva / f.base.s_base;
    pv.irradiation = it->second;
    f.fleet.pv.push_back(pv);
    f.pv_irradiation.push_back(r.irradiation);
  }
  for (std::size_t i = 0; i < raw.ev.size(); ++i) {
    f.fleet.ev.push_back(ev_to_pu(raw.ev[i], raw, false, "der.ev[" + std::to_string(i) + "]"));
  }
  for (const auto& [name, ev] : raw.ev_templates) {
    f.ev_templates[name] = ev_to_pu(ev, raw, true, "der.ev_templates." + name);
  }
  for (std::size_t i = 0; i < raw.sites.size(); ++i) {
    const auto& s = raw.sites[i];
    const std::string w = "der.sites[" + std::to_string(i) + "]";
    if (s.node < 1 || s.node >= count) schema_fail(w + ".node", "not a non-root node");
    if (!s.ev_template.empty() && !raw.ev_templates.count(s.ev_template)) {
      schema_fail(w + ".ev_template", "unknown template '" + s.ev_template + "'");
    }
    if (!s.pv_irradiation.empty() && !raw.irradiation.count(s.pv_irradiation)) {
      schema_fail(w + ".pv_irradiation", "unknown series '" + s.pv_irradiation + "'");
    }
    if (!(s.pv_unit_kva > 0.0)) schema_fail(w + ".pv_unit_kva", "must be positive");
  }
  f.sites = raw.sites;

  f.children.assign(count, {});
  for (const auto& l : f.lines) f.children[l.from_node].push_back(l.to_node);
  for (auto& c : f.children) std::sort(c.begin(), c.end());
  std::queue<int> bfs;
  bfs.push(0);
  while (!bfs.empty()) {
    const int j = bfs.front();
    bfs.pop();
    f.topological_order.push_back(j);
    for (int k : f.children[j]) bfs.push(k);
  }
  return f;
}

FeederRaw from_per_unit(const Feeder& f) {
  FeederRaw raw;
  raw.horizon = f.horizon;
  raw.dt_hours = f.dt;
  raw.root_voltage_sq = f.root_voltage_sq;
  raw.s_base_kva = f.base.s_base;
  raw.levels_kv = f.base.v_base;
  for (const auto& n : f.nodes) {
    RawNode r;
    r.id = n.id;
    if (n.parent >= 0) r.parent = n.parent;
    r.level = n.level;
    r.vmin = std::sqrt(n.voltage_min_sq);
    r.vmax = std::sqrt(n.voltage_max_sq);
    r.load_profile = n.load_profile;
    r.pf = n.power_factor;
    r.load_scale = n.load_scale;
    raw.nodes.push_back(r);
  }
  for (const auto& l : f.lines) {
    const std::string& level = f.nodes[l.from_node].level;
    RawLine r;
    r.from = l.from_node;
    r.to = l.to_node;
    r.r_ohm = l.resistance * f.base.z_base(level);
    r.x_ohm = l.reactance * f.base.z_base(level);
    r.ampacity_a = std::sqrt(l.ampacity_sq) * f.base.i_base(level);
    if (l.is_transformer()) r.transformer = f.transformers[l.transformer].name;
    raw.lines.push_back(r);
  }
  for (const auto& p : f.transformers) {
    raw.transformers.push_back({p.name, p.rated_kva, p.loss_ratio, p.top_oil_rise, p.hot_spot_rise, p.tau_top_oil, p.k11,
                                p.n, p.m, p.hourly_cost});
  }
  for (const auto& [name, prof] : f.profiles) raw.profiles[name] = prof.real_kw;
  raw.lmp = f.lmp;
  raw.q_price = f.q_price;
  raw.ambient = f.ambient;
  raw.irradiation = f.irradiation;
  for (std::size_t i = 0; i < f.fleet.pv.size(); ++i) {
    raw.pv.push_back({f.fleet.pv[i].node, f.fleet.pv[i].nameplate * f.base.s_base, f.pv_irradiation[i]});
  }
  for (const auto& ev : f.fleet.ev) raw.ev.push_back(ev_from_pu(ev, f));
  for (const auto& [name, ev] : f.ev_templates) raw.ev_templates[name] = ev_from_pu(ev, f);
  raw.sites = f.sites;
  return raw;
}

Feeder load_feeder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open feeder file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return to_per_unit(parse_feeder(buf.str()));
}

std::vector<std::vector<int>> downstream_paths(const Feeder& f) {
  std::vector<std::vector<int>> paths(f.nodes.size());
  for (int j : f.topological_order) {
    if (j == 0) continue;
    paths[j] = paths[f.nodes[j].parent];
    paths[j].push_back(Feeder::line_into(j));
  }
  return paths;
}

der::EvUnit ev_from_template(const der::EvUnit& tmpl, int node) {
  der::EvUnit ev = tmpl;
  for (auto& iv : ev.itinerary.intervals) {
    if (iv.node < 0) iv.node = node;
  }
  return ev;
}

}  // namespace dlmp::net
