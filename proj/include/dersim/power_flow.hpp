#pragma once

// Steady-state initialization: Newton-Raphson AC power flow with every DER
// modeled as a PQ injection, and the sequential OLTC tap settling that
// precedes each dynamic run.

#include "dersim/grid_model.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dersim::powerflow {

struct PowerFlowOptions {
    Real tolerance = 1e-8; ///< max nodal mismatch, system pu
    int max_iterations = 50;
};

struct BranchFlow {
    std::string id;
    bool transformer = false;
    Real p_from_mw = 0.0;
    Real q_from_mvar = 0.0;
    Real p_to_mw = 0.0;
    Real q_to_mvar = 0.0;
};

struct PowerFlowSolution {
    std::vector<Real> vm;
    std::vector<Real> va;
    std::vector<BranchFlow> flows; ///< lines first, then transformers
    Real slack_p_mw = 0.0;
    Real slack_q_mvar = 0.0;
    int iterations = 0;
    Real max_mismatch = 0.0;

    std::vector<Complex> voltages() const;
};

/// Specified complex power injection per bus (generation minus load), system pu.
std::vector<Complex> specified_injections(const grid::GridModel& grid);

/// Solves the power flow at the transformer positions stored in `grid`.
/// `start` (optional) replaces the flat start. Throws NumericalError on
/// non-convergence (naming the worst bus) or a singular Jacobian.
PowerFlowSolution solve_power_flow(const grid::GridModel& grid, const PowerFlowOptions& options = {},
                                   std::span<const Complex> start = {});

enum class HuntPolicy {
    settle_smallest_violation, ///< keep the visited tap vector with the least violation
    abort,                     ///< throw NumericalError
};

struct OltcInitOptions {
    PowerFlowOptions power_flow;
    HuntPolicy hunt_policy = HuntPolicy::settle_smallest_violation;
    int max_rounds = 200;
};

struct OltcInitResult {
    grid::GridModel grid; ///< tap positions settled
    PowerFlowSolution solution;
    int rounds_stage1 = 0;
    int rounds_stage2 = 0;
    bool hunting = false;
};

/// Settles the OLTC taps of an already scaled grid: EHV/HV transformers first,
/// then HV/MV, one tap per violating OLTC per round with a warm-started re-solve.
OltcInitResult settle_oltc(const grid::GridModel& grid, const OltcInitOptions& options = {});

/// apply_study_case followed by settle_oltc.
OltcInitResult initialize_oltc(const grid::GridModel& grid, const grid::StudyCase& study,
                               const OltcInitOptions& options = {});

void write_solution_csv(const std::filesystem::path& path, const grid::GridModel& grid,
                        const PowerFlowSolution& solution);

} // namespace dersim::powerflow
