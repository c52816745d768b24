#pragma once

// Batch execution of (study case x scenario) runs: initialization, simulation,
// assessment and artifacts on disk.
//
// Output layout under RunPlan::out:
//   runs/<case>__<scenario>/report.json, trips.csv, trace.dstr | trace/
//   severity.csv, lost_p.csv, runs.csv, severity.svg, lost_p.svg, report.json

#include "dersim/assessment.hpp"
#include "dersim/simulation.hpp"
#include "dersim/trace_io.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace dersim::batch {

enum class TraceFormat { none, csv, binary };
TraceFormat parse_trace_format(const std::string& text);

struct RunPlan {
    std::filesystem::path grid;
    std::vector<std::string> cases;     ///< study case names
    std::vector<std::string> scenarios; ///< built-in names, "none", or scenario files
    std::filesystem::path out;
    Real step = 0.01;
    Real t_end = 300.0;
    dynamics::Integrator integrator = dynamics::Integrator::trapezoidal;
    unsigned jobs = 1;
    TraceFormat trace_format = TraceFormat::binary;
    trace_io::TraceDetail trace_detail = trace_io::TraceDetail::all_buses;

    /// Structural checks only (non-empty sets, positive step...). Throws ConfigError.
    void check() const;
};

struct Diagnostic {
    std::string subject; ///< grid, scenario or case the finding is about
    std::string message;
};

/// Loads the grid and scenarios and dry-runs every case for `dry_run` seconds
/// without a scenario. Problems are reported, not thrown.
std::vector<Diagnostic> validate(const RunPlan& plan, Real dry_run = 5.0, Real drift_tolerance = 1e-6);

struct RunFailure {
    std::string study_case;
    std::string scenario;
    std::string message;
};

struct BatchResult {
    std::vector<assessment::SeverityReport> reports; ///< plan order (case-major)
    std::vector<RunFailure> failures;
    int exit_code = 0; ///< 0, or 3 when any run aborted numerically
};

/// Called once per finished run with its trace (concurrently when jobs > 1).
using TraceHook = std::function<void(const dynamics::PreparedCase&, const attack::ManipulationScenario&,
                                     const dynamics::TraceSet&)>;

/// Executes the plan. Configuration problems (unknown case or scenario,
/// unreadable grid) throw ConfigError before anything is written; numerical
/// aborts of single runs are collected and give exit code 3. Voltage collapse
/// is an assessed outcome, not an abort. Set `write` to false to skip all
/// file output.
BatchResult run(const RunPlan& plan, bool write = true, const TraceHook& hook = {});

} // namespace dersim::batch
