#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <string>

#include "dlmp/error.hpp"
#include "dlmp/io.hpp"
#include "dlmp/netmodel.hpp"
#include "dlmp/opf.hpp"
#include "dlmp/pricing.hpp"
#include "dlmp/schedules.hpp"
#include "dlmp/synth.hpp"

using namespace dlmp;
namespace fs = std::filesystem;

namespace {

std::string fixture(const char* name) { return std::string(DLMP_FIXTURE_DIR) + "/" + name; }

fs::path scratch(const char* name) {
  const fs::path dir = fs::temp_directory_path() / ("dlmp_test_io_" + std::to_string(::getpid())) / name;
  fs::create_directories(dir.parent_path());
  return dir;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same_grid(const opf::Grid& a, const opf::Grid& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      if (!same(a[i][j], b[i][j])) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("numbers survive text exactly") {
  for (double x : {0.0, -0.0, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.1 + 0.2}) {
    CHECK(io::parse_number(io::format_number(x)) == x);
  }
  CHECK(std::isnan(io::parse_number(io::format_number(std::nan("")))));
  CHECK(io::parse_number("inf") == std::numeric_limits<double>::infinity());
  CHECK(io::format_number(0.25) == "0.25");
  CHECK_THROWS_AS(io::parse_number("1.5x"), SchemaError);
}

TEST_CASE("csv tables round trip through the loader") {
  const auto f = net::load_feeder(fixture("feeder15.json"));
  schedules::HarnessSettings settings;
  const auto table = schedules::comparison_table(f, {{"fixture", 0, 0.0, true}}, schedules::all_options(), settings);
  const auto& full = table.cells.back();
  REQUIRE(full.dispatch);

  std::vector<io::CsvTable> tables{io::comparison_csv(table), io::cell_csv(full), io::dlmp_csv(*full.dlmps)};
  const auto problem = opf::assemble(f, f.fleet, full.dispatch_options);
  const auto dec = pricing::decompose(problem, *full.dispatch, f, *full.dlmps);
  tables.push_back(io::decomposition_csv(dec, *full.dlmps));

  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto path = scratch(("t" + std::to_string(i) + ".csv").c_str());
    io::write_csv(path, tables[i]);
    const auto back = io::read_csv(path);
    CHECK(back.header == tables[i].header);
    CHECK(back.rows == tables[i].rows);
  }

  // Values read back are the in-memory values bit for bit.
  const auto& cell = tables[1];
  const auto hour = cell.column("hour"), series = cell.column("series"), value = cell.column("value");
  std::size_t checked = 0;
  for (const auto& row : cell.rows) {
    if (row[series] == "p0") {
      CHECK(io::parse_number(row[value]) == full.state.p0[std::stoul(row[hour])]);
      ++checked;
    }
  }
  CHECK(checked == static_cast<std::size_t>(f.horizon));
  CHECK_THROWS_AS(cell.column("nope"), SchemaError);
}

TEST_CASE("saved solutions round trip") {
  const auto f = net::load_feeder(fixture("feeder15.json"));
  opf::OpfOptions opts;
  opts.cyclic = true;
  const auto sol = opf::solve(opf::assemble(f, f.fleet, opts));
  REQUIRE(sol.optimal());
  io::SavedSolution saved{"feeder15.json", {"fixture", 0, 0.0, true}, opts, sol};
  const std::string text = io::dump_solution(saved);
  const auto back = io::parse_solution(text);
  CHECK(io::dump_solution(back) == text);
  CHECK(back.feeder_path == "feeder15.json");
  CHECK(back.scenario.include_feeder_fleet);
  CHECK(back.options.cyclic);
  CHECK(back.solution.optimal());
  CHECK(same_grid(back.solution.lambda_p, sol.lambda_p));
  CHECK(same_grid(back.solution.state.l, sol.state.l));
  CHECK(same_grid(back.solution.xi[0], sol.xi[0]));
  CHECK(same_grid(back.solution.thermal_dual, sol.thermal_dual));
  CHECK(back.solution.schedule.ev[0].p == sol.schedule.ev[0].p);

  // The reloaded point prices exactly like the original.
  const auto problem = opf::assemble(f, f.fleet, back.options);
  const auto d1 = pricing::decompose(problem, sol, f, pricing::extract_dlmps(sol, f));
  const auto d2 = pricing::decompose(problem, back.solution, f, pricing::extract_dlmps(back.solution, f));
  CHECK(d1.max_mismatch == d2.max_mismatch);

  CHECK_THROWS_AS(io::parse_solution("{}"), SchemaError);
  CHECK_THROWS_AS(io::parse_solution("not json"), SchemaError);
}

TEST_CASE("two-bus synthetic feeder is the two-bus fixture") {
  const auto fixture_text = net::dump_feeder(net::parse_feeder(io::read_text(fixture("two_bus.json"))));
  CHECK(net::dump_feeder(synth::synthesize_feeder(2, 7)) == fixture_text);
  CHECK(net::dump_feeder(synth::synthesize_feeder(2, 99)) == fixture_text);
  CHECK_THROWS_AS(synth::synthesize_feeder(1, 7), SchemaError);
}

TEST_CASE("synthetic feeders are deterministic") {
  const auto a = net::dump_feeder(synth::synthesize_feeder(15, 7));
  CHECK(a == net::dump_feeder(synth::synthesize_feeder(15, 7)));
  CHECK(a != net::dump_feeder(synth::synthesize_feeder(15, 8)));
  // The written document loads back to the same feeder.
  CHECK(net::dump_feeder(net::parse_feeder(a)) == a);
}

TEST_CASE("307-bus synthetic feeder shape") {
  const auto raw = synth::synthesize_feeder(307, 7);
  CHECK(raw.nodes.size() == 307);
  CHECK(raw.transformers.size() == 110);
  CHECK(synth::transformer_count(307) == 110);
  CHECK(raw.sites.size() == 110);
  const auto f = net::to_per_unit(raw);
  std::set<std::string> profiles;
  for (const auto& n : f.nodes) {
    if (!n.load_profile.empty()) profiles.insert(n.load_profile);
  }
  CHECK(profiles == std::set<std::string>{"commercial", "residential"});
  // Every secondary bus hangs off its own service transformer.
  for (const auto& site : f.sites) {
    CHECK(f.lines[net::Feeder::line_into(site.node)].is_transformer());
  }

  for (int nodes : {3, 4, 10, 40}) {
    INFO(nodes);
    const auto small = net::to_per_unit(synth::synthesize_feeder(nodes, 3));
    CHECK(small.num_nodes() == nodes);
    CHECK(small.transformers.size() == static_cast<std::size_t>(synth::transformer_count(nodes)));
  }
}

TEST_CASE("residential peak in the evening, commercial during the day") {
  const auto raw = synth::synthesize_feeder(40, 1);
  const auto& res = raw.profiles.at("residential");
  const auto& com = raw.profiles.at("commercial");
  const auto peak = [](const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  CHECK(peak(res) >= 17);
  CHECK(peak(res) <= 21);
  CHECK(peak(com) >= 9);
  CHECK(peak(com) <= 15);
}
