// dersim command line: run, validate, powerflow, scenarios.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include "dersim/batch.hpp"
#include "dersim/power_flow.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

using namespace dersim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct PlanFlags {
    std::string grid;
    std::vector<std::string> cases;
    std::vector<std::string> scenarios;
    std::string out = "dersim_out";
    double step = 0.01;
    double t_end = 300.0;
    unsigned jobs = 1;
    std::string integrator = "trapezoidal";
    std::string trace = "binary";
    std::string detail = "all";

    batch::RunPlan plan() const {
        batch::RunPlan p;
        p.grid = grid;
        p.cases = cases;
        p.scenarios = scenarios;
        p.out = out;
        p.step = step;
        p.t_end = t_end;
        p.jobs = jobs;
        p.integrator = dynamics::parse_integrator(integrator);
        p.trace_format = batch::parse_trace_format(trace);
        p.trace_detail = trace_io::parse_detail(detail);
        return p;
    }
};

void add_plan_flags(CLI::App* cmd, PlanFlags& f) {
    for (auto n : grid::study_case_names())
        f.cases.emplace_back(n);
    for (auto n : attack::builtin_scenario_names())
        f.scenarios.emplace_back(n);
    cmd->add_option("--grid", f.grid, "Grid directory")->required();
    cmd->add_option("--cases", f.cases, "Study cases (hL,hW,hPV,lW,lPV)")->delimiter(',')->capture_default_str();
    cmd->add_option("--scenarios", f.scenarios, "Built-in scenario names, 'none', or scenario files")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--out", f.out, "Output directory")->envname("DERSIM_OUT")->capture_default_str();
    cmd->add_option("--step", f.step, "Integration step (s)")->capture_default_str();
    cmd->add_option("--t-end", f.t_end, "Simulated time (s)")->capture_default_str();
    cmd->add_option("--jobs", f.jobs, "Parallel runs")->capture_default_str();
    cmd->add_option("--integrator", f.integrator, "trapezoidal or heun")->capture_default_str();
    cmd->add_option("--trace", f.trace, "Trace output: none, csv or binary")->capture_default_str();
    cmd->add_option("--trace-detail", f.detail, "Buses in traces: all or substations")->capture_default_str();
}

int cmd_run(const PlanFlags& f) {
    auto plan = f.plan();
    auto result = batch::run(plan);
    fmt::print("{:<6} {:<10} {:>3} {:>8} {:>6} {:>6} {:>10}\n", "case", "scenario", "sev", "d", "manip", "other",
               "lost_MW");
    for (const auto& r : result.reports) {
        const auto& m = r.metrics;
        fmt::print("{:<6} {:<10} {:>3} {:>8.3f} {:>6} {:>6} {:>10.2f}{}\n", r.study_case, r.scenario, r.severity,
                   m.d_max_during, m.trips_manipulated.count, m.trips_other.count, m.lost_p_total,
                   r.collapsed ? "  (voltage collapse)" : "");
    }
    for (const auto& fl : result.failures)
        fmt::print(stderr, "run {} / {} aborted: {}\n", fl.study_case, fl.scenario, fl.message);
    if (!result.reports.empty())
        fmt::print("reports written to {}\n", plan.out.string());
    return result.exit_code;
}

int cmd_validate(const PlanFlags& f) {
    auto diags = batch::validate(f.plan());
    for (const auto& d : diags)
        fmt::print("{}: {}\n", d.subject, d.message);
    if (diags.empty())
        fmt::print("ok\n");
    return diags.empty() ? 0 : kExitConfig;
}

int cmd_powerflow(const std::string& dir, const std::string& study, const std::string& csv) {
    auto base = grid::load_grid(dir);
    grid::GridModel g;
    powerflow::PowerFlowSolution sol;
    if (study.empty()) {
        g = base;
        sol = powerflow::solve_power_flow(g);
    } else {
        auto settled = powerflow::initialize_oltc(base, grid::study_case(study));
        g = std::move(settled.grid);
        sol = std::move(settled.solution);
    }
    fmt::print("converged in {} iterations, max mismatch {:.2e} pu\n", sol.iterations, sol.max_mismatch);
    fmt::print("slack P = {:.3f} MW, Q = {:.3f} MVAr\n", sol.slack_p_mw, sol.slack_q_mvar);
    for (const auto& t : g.transformers)
        if (t.oltc)
            fmt::print("tap {:<12} {:>4}\n", t.id, t.tap_pos);
    for (std::size_t b = 0; b < g.buses.size(); ++b)
        fmt::print("{:<10} {:>4} {:>9.5f} {:>9.3f}\n", g.buses[b].id, to_string(g.buses[b].level), sol.vm[b],
                   sol.va[b] * 180.0 / kPi);
    if (!csv.empty())
        powerflow::write_solution_csv(csv, g, sol);
    return 0;
}

int cmd_scenarios() {
    for (auto n : attack::builtin_scenario_names())
        fmt::print("{}\n", attack::format_scenario(attack::build_scenario(n)));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DER manipulation impact simulator"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML file; keys mirror the flags, in a [run] or [validate] table");

    PlanFlags run_flags, validate_flags;
    auto* run = app.add_subcommand("run", "Simulate study cases x scenarios and write reports");
    add_plan_flags(run, run_flags);
    auto* validate = app.add_subcommand("validate", "Check grid, scenarios and equilibrium without running");
    add_plan_flags(validate, validate_flags);

    std::string pf_grid, pf_case, pf_csv;
    auto* pf = app.add_subcommand("powerflow", "Solve the load flow (with OLTC settling for a study case)");
    pf->add_option("--grid", pf_grid, "Grid directory")->required();
    pf->add_option("--case", pf_case, "Study case; omit for the base data without tap settling");
    pf->add_option("--csv", pf_csv, "Write the bus solution to this file");

    auto* sc = app.add_subcommand("scenarios", "Print the built-in scenario definitions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*run)
            return cmd_run(run_flags);
        if (*validate)
            return cmd_validate(validate_flags);
        if (*pf)
            return cmd_powerflow(pf_grid, pf_case, pf_csv);
        if (*sc)
            return cmd_scenarios();
    } catch (const ConfigError& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return kExitConfig;
    } catch (const NumericalError& e) {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitConfig;
    }
    return 0;
}
