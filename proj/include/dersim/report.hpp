#pragma once

// Report rendering for a set of assessed runs. Every output is a pure
// function of the run list, so identical inputs give byte-identical files.

#include "dersim/assessment.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dersim::assessment {

/// Run indices ordered by descending lost P, ties by (grid, case, scenario).
std::vector<std::size_t> lost_p_order(std::span<const SeverityReport> runs);

/// Heat table: one row per (grid, case), one column per scenario, cells hold
/// the severity index (empty if that run is missing).
std::string severity_table_csv(std::span<const SeverityReport> runs);
/// Bar data in lost_p_order.
std::string lost_p_csv(std::span<const SeverityReport> runs);
/// One row per run with all metrics, in table order.
std::string runs_csv(std::span<const SeverityReport> runs);

std::string severity_svg(std::span<const SeverityReport> runs);
std::string lost_p_svg(std::span<const SeverityReport> runs);

std::string report_json(const SeverityReport& run);
std::string aggregate_json(std::span<const SeverityReport> runs);

/// Writes severity.csv, lost_p.csv, runs.csv, severity.svg, lost_p.svg and
/// report.json into `dir`. Throws ConfigError on I/O failure or an empty list.
void write_report_bundle(const std::filesystem::path& dir, std::span<const SeverityReport> runs);

} // namespace dersim::assessment
