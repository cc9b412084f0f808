#include "dlmp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dlmp/error.hpp"

namespace dlmp::synth {

namespace {

const std::vector<double> kLmp{0.03,  0.03,  0.03,  0.03,  0.03,  0.032, 0.036, 0.04,  0.042, 0.045, 0.048, 0.05,
                               0.052, 0.054, 0.056, 0.058, 0.06,  0.062, 0.064, 0.08,  0.085, 0.078, 0.03,  0.03};
const std::vector<double> kAmbient{22, 21, 21, 20, 20, 21, 22, 24, 26, 28, 29, 30,
                                   31, 32, 32, 32, 31, 30, 28, 26, 25, 24, 23, 22};
const std::vector<double> kSun{0,    0,   0,    0,    0,   0.05, 0.15, 0.3, 0.48, 0.65, 0.8,  0.92,
                               0.98, 0.95, 0.85, 0.7, 0.5, 0.3,  0.12, 0.02, 0,    0,    0,    0};
// Per-unit shapes, peak 1.0: evening peak at home, daytime plateau at work.
const std::vector<double> kResidential{0.45, 0.4,  0.38, 0.37, 0.38, 0.45, 0.6,  0.7,  0.65, 0.55, 0.5,  0.5,
                                       0.5,  0.5,  0.52, 0.58, 0.7,  0.85, 0.95, 1.0,  0.98, 0.9,  0.75, 0.58};
const std::vector<double> kCommercial{0.3,  0.28, 0.28, 0.28, 0.3,  0.35, 0.45, 0.65, 0.85, 0.95, 1.0, 1.0,
                                      0.98, 1.0,  0.98, 0.95, 0.9,  0.75, 0.55, 0.45, 0.4,  0.35, 0.32, 0.3};

constexpr double kMvKv = 13.8;
constexpr double kLvKv = 0.24;
constexpr double kLifeHours = 180000.0;

// std distributions are implementation-defined; these are not.
struct Stream {
  std::mt19937_64 engine;
  explicit Stream(std::uint64_t seed) : engine(seed) {}
  double uniform() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int index(int n) { return std::min(n - 1, static_cast<int>(uniform() * n)); }
};

double round_to(double x, double step) { return std::round(x / step) * step; }

net::FeederRaw two_bus() {
  net::FeederRaw raw;
  raw.levels_kv["mv"] = kMvKv;
  raw.nodes.resize(2);
  raw.nodes[0].level = "mv";
  raw.nodes[1] = {1, 0, "mv", 0.95, 1.05, "flat", 0.95, 1.0};
  raw.lines.push_back({0, 1, 0.4, 0.6, 300.0, ""});
  raw.profiles["flat"] = std::vector<double>(24, 500.0);
  raw.lmp = kLmp;
  raw.ambient = kAmbient;
  return raw;
}

net::RawEv residential_ev(double arrive, double leave, double trip) {
  net::RawEv ev;
  ev.battery_kwh = 24.0;
  ev.charger_kva = 6.6;
  ev.rate_kw = 3.3;
  ev.wraps = true;
  ev.initial_soc_kwh = 24.0 - trip * 0.25;
  ev.intervals.push_back({-1, 0, static_cast<int>(leave), 24.0, trip, false});
  ev.intervals.push_back({-1, static_cast<int>(arrive), 24, 24.0 - trip * 0.25, 0.0, true});
  return ev;
}

net::RawEv commercial_ev() {
  net::RawEv ev;
  ev.battery_kwh = 24.0;
  ev.charger_kva = 6.6;
  ev.rate_kw = 3.3;
  ev.initial_soc_kwh = 12.0;
  ev.intervals.push_back({-1, 8, 17, 24.0, 12.0, false});
  return ev;
}

}  // namespace

int transformer_count(int nodes) {
  if (nodes <= 2) return 0;
  const int count = static_cast<int>(std::lround((nodes - 1) * 110.0 / 306.0));
  return std::clamp(count, 1, nodes - 2);
}

net::FeederRaw synthesize_feeder(int nodes, std::uint64_t seed) {
  if (nodes < 2) throw SchemaError("nodes: need at least 2 buses, got " + std::to_string(nodes));
  if (nodes == 2) return two_bus();

  Stream rng(seed);
  net::FeederRaw raw;
  raw.levels_kv["mv"] = kMvKv;
  raw.levels_kv["lv"] = kLvKv;
  raw.profiles["residential"] = kResidential;
  raw.profiles["commercial"] = kCommercial;
  raw.lmp = kLmp;
  raw.ambient = kAmbient;
  raw.irradiation["sun"] = kSun;
  raw.ev_templates["res_early"] = residential_ev(17, 7, 16.0);
  raw.ev_templates["res_late"] = residential_ev(19, 7, 18.0);
  raw.ev_templates["res_night"] = residential_ev(20, 8, 14.0);
  raw.ev_templates["work"] = commercial_ev();

  const int secondaries = transformer_count(nodes);
  const int backbone = nodes - 1 - secondaries;

  raw.nodes.resize(nodes);
  raw.nodes[0].level = "mv";
  for (int i = 1; i <= backbone; ++i) {
    // Mostly a trunk with laterals hanging off recent buses.
    const int parent = rng.uniform() < 0.35 ? i - 1 : rng.index(i);
    raw.nodes[i] = {i, parent, "mv", 0.95, 1.05, "", 1.0, 1.0};
    const double km = round_to(rng.uniform(0.05, 0.25), 0.001);
    raw.lines.push_back({parent, i, round_to(0.306 * km, 1e-5), round_to(0.441 * km, 1e-5), 400.0, ""});
  }

  for (int s = 0; s < secondaries; ++s) {
    const int id = backbone + 1 + s;
    const int hv = 1 + rng.index(backbone);
    const bool commercial = rng.uniform() < 0.25;
    const double kva = commercial ? 50.0 : 30.0;
    const std::string tname = "T" + std::to_string(id);

    net::RawTransformer tr;
    tr.name = tname;
    tr.rated_kva = kva;
    // Replacement cost spread over the 180,000 h normal insulation life.
    tr.cost_per_hour = round_to((commercial ? 150000.0 : 90000.0) / kLifeHours, 1e-6);
    raw.transformers.push_back(tr);

    // 2% resistance, 3% reactance on the unit's own rating, referred to MV.
    const double z_own = kMvKv * kMvKv / (kva / 1000.0);
    const double rated_a = kva / (std::sqrt(3.0) * kMvKv);
    raw.lines.push_back({hv, id, round_to(0.02 * z_own, 0.01), round_to(0.03 * z_own, 0.01),
                         round_to(2.0 * rated_a, 1e-4), tname});

    const double peak_kw = round_to(kva * (commercial ? rng.uniform(0.5, 0.65) : rng.uniform(0.45, 0.6)), 0.01);
    raw.nodes[id] = {id, hv, "lv", 0.95, 1.05, commercial ? "commercial" : "residential",
                     commercial ? 0.9 : 0.95, peak_kw};

    net::DerSite site;
    site.name = "site" + std::to_string(id);
    site.node = id;
    if (commercial) {
      site.ev_template = "work";
    } else {
      static const char* kRes[] = {"res_early", "res_late", "res_night"};
      site.ev_template = kRes[rng.index(3)];
    }
    site.pv_irradiation = "sun";
    raw.sites.push_back(site);
  }
  return raw;
}

}  // namespace dlmp::synth
