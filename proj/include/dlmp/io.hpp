#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dlmp/opf.hpp"
#include "dlmp/pricing.hpp"
#include "dlmp/schedules.hpp"

namespace dlmp::io {

/// Shortest text that reads back to the same double; "nan"/"inf"/"-inf".
std::string format_number(double x);
double parse_number(const std::string& text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws SchemaError when absent.
  std::size_t column(const std::string& name) const;
};

/// Plain comma-separated values, no quoting (fields never contain commas).
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

CsvTable comparison_csv(const schedules::ComparisonTable& table);

/// Long format hour,series,element,value: import, voltages, currents, device
/// set points, nodal prices (when present) and the ex-post thermal path.
CsvTable cell_csv(const schedules::OptionResult& cell);

CsvTable dlmp_csv(const pricing::DlmpSeries& dlmps);
CsvTable decomposition_csv(const pricing::DlmpDecomposition& dec, const pricing::DlmpSeries& dlmps);

/// Everything needed to rebuild the program of a dispatch and price it again.
struct SavedSolution {
  std::string feeder_path;
  schedules::ScenarioSpec scenario;
  opf::OpfOptions options;
  opf::OpfSolution solution;
};

std::string dump_solution(const SavedSolution& saved);
SavedSolution parse_solution(const std::string& json_text);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Filesystem-safe name for a (scenario, option) cell.
std::string cell_stem(const std::string& scenario, schedules::Option option);

}  // namespace dlmp::io
