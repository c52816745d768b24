#include "dersim/batch.hpp"

#include "dersim/report.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

namespace dersim::batch {

TraceFormat parse_trace_format(const std::string& text) {
    if (text == "none")
        return TraceFormat::none;
    if (text == "csv")
        return TraceFormat::csv;
    if (text == "binary" || text == "dstr")
        return TraceFormat::binary;
    throw ConfigError("unknown trace format '" + text + "' (expected none, csv or binary)");
}

void RunPlan::check() const {
    if (grid.empty())
        throw ConfigError("run plan has no grid directory");
    if (cases.empty())
        throw ConfigError("run plan has no study cases");
    if (scenarios.empty())
        throw ConfigError("run plan has no scenarios");
    if (!(step > 0.0) || !(t_end >= step))
        throw ConfigError("run plan needs step > 0 and t_end >= step");
    if (jobs == 0)
        throw ConfigError("jobs must be at least 1");
    std::set<std::string> seen;
    for (const auto& c : cases)
        if (!seen.insert(c).second)
            throw ConfigError("study case '" + c + "' listed twice");
}

namespace {

dynamics::SimulationConfig sim_config(const RunPlan& plan) {
    dynamics::SimulationConfig cfg;
    cfg.step = plan.step;
    cfg.t_end = plan.t_end;
    cfg.integrator = plan.integrator;
    return cfg;
}

std::string dir_name(const std::string& s) {
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out;
}

void write_trip_log(const std::filesystem::path& path, const assessment::SeverityReport& r) {
    try {
        auto out = fmt::output_file(path.string());
        out.print("time,der,cause,manipulated,p_mw\n");
        for (const auto& e : r.trip_log)
            out.print("{:.4f},{},{},{},{:.6f}\n", e.time, e.der, e.cause, int(e.manipulated), e.p_mw);
    } catch (const std::system_error& e) {
        throw ConfigError("cannot write " + path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const std::string& text) {
    try {
        auto out = fmt::output_file(path.string());
        out.print("{}", text);
    } catch (const std::system_error& e) {
        throw ConfigError("cannot write " + path.string() + ": " + e.what());
    }
}

struct Resolved {
    grid::GridModel base;
    std::vector<grid::StudyCase> studies;
    std::vector<attack::ManipulationScenario> scenarios;
};

Resolved resolve(const RunPlan& plan) {
    plan.check();
    Resolved r{grid::load_grid(plan.grid), {}, {}};
    for (const auto& c : plan.cases)
        r.studies.push_back(grid::study_case(c));
    std::set<std::string> names;
    for (const auto& s : plan.scenarios) {
        r.scenarios.push_back(attack::resolve_scenario(s));
        if (!names.insert(r.scenarios.back().name).second)
            throw ConfigError("two scenarios share the name '" + r.scenarios.back().name + "'");
    }
    return r;
}

} // namespace

BatchResult run(const RunPlan& plan, bool write, const TraceHook& hook) {
    const Resolved res = resolve(plan);
    const auto cfg = sim_config(plan);

    // initialization per study case; failures abort that case's runs only
    std::vector<std::optional<dynamics::PreparedCase>> prepared(res.studies.size());
    std::vector<std::string> prepare_error(res.studies.size());
    for (std::size_t c = 0; c < res.studies.size(); ++c) {
        try {
            prepared[c] = dynamics::prepare_case(res.base, res.studies[c]);
        } catch (const NumericalError& e) {
            prepare_error[c] = e.what();
        }
    }

    const std::size_t n_sc = res.scenarios.size();
    const std::size_t n_runs = res.studies.size() * n_sc;
    std::vector<std::optional<assessment::SeverityReport>> reports(n_runs);
    std::vector<std::string> errors(n_runs);
    std::exception_ptr fatal;
    std::mutex fatal_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_runs)
                return;
            const std::size_t c = i / n_sc;
            const auto& sc = res.scenarios[i % n_sc];
            if (!prepared[c]) {
                errors[i] = prepare_error[c];
                continue;
            }
            const auto& prep = *prepared[c];
            try {
                auto trace = dynamics::simulate(prep.grid, prep.initial, sc, cfg);
                auto report = assessment::assess(trace, prep.grid, sc);
                if (hook)
                    hook(prep, sc, trace);
                if (write) {
                    const auto dir = plan.out / "runs" / (dir_name(res.studies[c].name) + "__" + dir_name(sc.name));
                    std::filesystem::create_directories(dir);
                    write_json(dir / "report.json", assessment::report_json(report));
                    write_trip_log(dir / "trips.csv", report);
                    if (plan.trace_format == TraceFormat::binary)
                        trace_io::write_trace_binary(dir / "trace.dstr", trace, prep.grid, plan.trace_detail);
                    else if (plan.trace_format == TraceFormat::csv)
                        trace_io::write_trace_csv(dir / "trace", trace, prep.grid, plan.trace_detail);
                }
                reports[i] = std::move(report);
            } catch (const NumericalError& e) {
                errors[i] = e.what();
            } catch (...) {
                std::lock_guard lock(fatal_mutex);
                if (!fatal)
                    fatal = std::current_exception();
                next = n_runs;
            }
        }
    };

    const unsigned n_threads = std::max(1u, std::min<unsigned>(plan.jobs, static_cast<unsigned>(n_runs)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (fatal)
        std::rethrow_exception(fatal);

    BatchResult result;
    for (std::size_t i = 0; i < n_runs; ++i) {
        if (reports[i])
            result.reports.push_back(std::move(*reports[i]));
        else
            result.failures.push_back({res.studies[i / n_sc].name, res.scenarios[i % n_sc].name, errors[i]});
    }
    result.exit_code = result.failures.empty() ? 0 : 3;
    if (write && !result.reports.empty())
        assessment::write_report_bundle(plan.out, result.reports);
    return result;
}

std::vector<Diagnostic> validate(const RunPlan& plan, Real dry_run, Real drift_tolerance) {
    std::vector<Diagnostic> out;
    try {
        plan.check();
    } catch (const ConfigError& e) {
        out.push_back({"plan", e.what()});
        return out;
    }
    grid::GridModel base;
    try {
        base = grid::load_grid(plan.grid);
    } catch (const Error& e) {
        out.push_back({plan.grid.string(), e.what()});
        return out;
    }
    for (const auto& s : plan.scenarios) {
        try {
            attack::resolve_scenario(s);
        } catch (const Error& e) {
            out.push_back({s, e.what()});
        }
    }
    auto cfg = sim_config(plan);
    cfg.t_end = std::max(dry_run, plan.step);
    for (const auto& name : plan.cases) {
        try {
            auto prep = dynamics::prepare_case(base, grid::study_case(name));
            auto tr = dynamics::simulate(prep.grid, prep.initial, attack::baseline_scenario(), cfg);
            if (tr.collapsed) {
                out.push_back({name, "voltage collapse in the dry run: " + tr.collapse_message});
                continue;
            }
            Real worst = 0.0;
            std::size_t worst_bus = 0;
            for (std::size_t k = 0; k < tr.steps(); ++k)
                for (std::size_t b = 0; b < tr.n_bus; ++b) {
                    const Real d = std::abs(tr.v(k, b) - tr.v(0, b));
                    if (d > worst) {
                        worst = d;
                        worst_bus = b;
                    }
                }
            if (worst >= drift_tolerance)
                out.push_back({name, fmt::format("equilibrium drift {:.3e} pu at bus {} within {} s", worst,
                                                 prep.grid.buses[worst_bus].id, cfg.t_end)});
            if (!tr.tap_events.empty())
                out.push_back({name, fmt::format("{} tap change(s) without a scenario", tr.tap_events.size())});
            if (!tr.trips.empty())
                out.push_back({name, fmt::format("{} protection trip(s) without a scenario", tr.trips.size())});
        } catch (const Error& e) {
            out.push_back({name, e.what()});
        }
    }
    return out;
}

} // namespace dersim::batch
