#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlmp/der.hpp"
#include "dlmp/thermal.hpp"

namespace dlmp::net {

// ---------------------------------------------------------------------------
// Physical-unit description, one-to-one with the feeder JSON document.

struct RawNode {
  int id = 0;
  std::optional<int> parent;
  std::string level;
  double vmin = 0.95;  // pu magnitude
  double vmax = 1.05;
  std::string load_profile;  // empty: no fixed load
  double pf = 1.0;
  double load_scale = 1.0;
};

struct RawLine {
  int from = 0;
  int to = 0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
  double ampacity_a = 0.0;
  std::string transformer;  // empty: ordinary line
};

struct RawTransformer {
  std::string name;
  double rated_kva = 0.0;
  double loss_ratio = 5.0;
  double top_oil_rise = 55.0;
  double hot_spot_rise = 25.0;
  double tau_top_oil = 3.0;
  double k11 = 1.0;
  double n = 0.8;
  double m = 0.8;
  double cost_per_hour = 0.0;
};

struct RawPlugInterval {
  int node = -1;  // -1 inside a template: the site node
  int begin = 0;
  int end = 0;
  double min_soc_kwh = 0.0;
  double trip_kwh = 0.0;
  bool truncated_end = false;
};

struct RawEv {
  double battery_kwh = 0.0;
  double charger_kva = 0.0;
  double rate_kw = 0.0;
  double initial_soc_kwh = 0.0;
  bool wraps = false;
  std::vector<RawPlugInterval> intervals;
};

struct RawPv {
  int node = 0;
  double kva = 0.0;
  std::string irradiation;
};

/// Location where scenario sweeps add EVs and rooftop PV.
struct DerSite {
  std::string name;
  int node = 0;
  std::string ev_template;
  std::string pv_irradiation;
  double pv_unit_kva = 10.0;
};

struct FeederRaw {
  int horizon = 24;
  double dt_hours = 1.0;
  double root_voltage_sq = 1.0;
  double s_base_kva = 1000.0;
  std::map<std::string, double> levels_kv;
  std::vector<RawNode> nodes;
  std::vector<RawLine> lines;
  std::vector<RawTransformer> transformers;
  std::map<std::string, std::vector<double>> profiles;  // kW
  std::vector<double> lmp;                               // $/kWh
  std::vector<double> q_price;                           // $/kvarh
  std::vector<double> ambient;                           // C
  std::map<std::string, std::vector<double>> irradiation;
  std::vector<RawPv> pv;
  std::vector<RawEv> ev;
  std::map<std::string, RawEv> ev_templates;
  std::vector<DerSite> sites;
};

// ---------------------------------------------------------------------------
// Per-unit model used by the solvers.

struct PerUnitBase {
  double s_base = 1000.0;  // kVA
  std::map<std::string, double> v_base;  // kV per level

  double z_base(const std::string& level) const;  // ohm
  double i_base(const std::string& level) const;  // A
};

struct Node {
  int id = 0;
  int parent = -1;
  std::string level;
  double voltage_min_sq = 0.0;
  double voltage_max_sq = 0.0;
  std::string load_profile;
  double power_factor = 1.0;
  double load_scale = 1.0;
};

/// Line into node `to` from its parent. Lines are stored so that the line
/// feeding node j has index j-1.
struct Line {
  int from_node = 0;
  int to_node = 0;
  double resistance = 0.0;
  double reactance = 0.0;
  double ampacity_sq = 0.0;
  int transformer = -1;  // index into Feeder::transformers
  bool is_transformer() const { return transformer >= 0; }
};

struct LoadProfile {
  std::vector<double> real_kw;
};

struct Feeder {
  int horizon = 24;
  double dt = 1.0;
  double root_voltage_sq = 1.0;
  PerUnitBase base;
  std::vector<Node> nodes;
  std::vector<Line> lines;
  std::vector<thermal::ThermalParams> transformers;
  std::vector<int> transformer_line;  // line index of each transformer
  std::map<std::string, LoadProfile> profiles;
  std::vector<double> lmp;
  std::vector<double> q_price;
  std::vector<double> ambient;
  std::map<std::string, std::vector<double>> irradiation;

  /// Fixed demand per node and hour in pu (consumption positive).
  std::vector<std::vector<double>> load_p;
  std::vector<std::vector<double>> load_q;

  der::DerFleet fleet;
  std::vector<std::string> pv_irradiation;  // parallel to fleet.pv
  std::map<std::string, der::EvUnit> ev_templates;
  std::vector<DerSite> sites;

  std::vector<std::vector<int>> children;
  std::vector<int> topological_order;  // parents before children

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_lines() const { return static_cast<int>(lines.size()); }
  static int line_into(int node) { return node - 1; }
  /// Converts an energy in kWh to the per-unit-period scale of EV SoC.
  double energy_to_pu(double kwh) const { return kwh / (base.s_base * dt); }
  double power_to_pu(double kw) const { return kw / base.s_base; }
  /// Converts a $/kWh price for consumption in pu over one period to $.
  double money_per_pu_period() const { return base.s_base * dt; }
};

Feeder load_feeder(const std::filesystem::path& path);
FeederRaw parse_feeder(const std::string& json_text);
std::string dump_feeder(const FeederRaw& raw);

/// Validates the raw document and converts it to per unit. Throws
/// SchemaError, TopologyError or DimensionError.
Feeder to_per_unit(const FeederRaw& raw);
FeederRaw from_per_unit(const Feeder& feeder);

/// Structural checks only: unique root, tree, one line per non-root node.
void validate_topology(const FeederRaw& raw);

/// Line indices from the root down to each node (empty for the root).
std::vector<std::vector<int>> downstream_paths(const Feeder& feeder);

/// EV instantiated from a template at a site node.
der::EvUnit ev_from_template(const der::EvUnit& tmpl, int node);

}  // namespace dlmp::net
