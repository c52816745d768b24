#include "support.hpp"

#include "dersim/power_flow.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace dersim;

namespace {

Real max_gap(const powerflow::PowerFlowSolution& s, const std::vector<Complex>& ref) {
    Real worst = 0.0;
    auto v = s.voltages();
    for (std::size_t b = 0; b < v.size(); ++b)
        worst = std::max(worst, std::abs(v[b] - ref[b]));
    return worst;
}

} // namespace

TEST_CASE("flat two-bus network solves without iterating") {
    auto g = grid::load_grid(testing::fixture_dir() / "two_bus");
    auto s = powerflow::solve_power_flow(g);
    CHECK(s.iterations == 0);
    CHECK(s.vm[1] == doctest::Approx(1.0));
    CHECK(s.slack_p_mw == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("three-bus solution matches Gauss-Seidel") {
    auto g = grid::load_grid(testing::fixture_dir() / "three_bus");
    auto s = powerflow::solve_power_flow(g);
    auto gs = oracle::gauss_seidel(g);
    REQUIRE(gs.converged);
    CHECK(max_gap(s, gs.v) < 1e-9);
    CHECK(s.max_mismatch < 1e-8);
}

TEST_CASE("desk fixture matches Gauss-Seidel in every study case") {
    auto base = grid::load_grid(testing::desk_grid());
    for (auto name : grid::study_case_names()) {
        CAPTURE(name);
        auto settled = powerflow::initialize_oltc(base, grid::study_case(name));
        auto gs = oracle::gauss_seidel(settled.grid);
        REQUIRE(gs.converged);
        CHECK(max_gap(settled.solution, gs.v) < 1e-8);
    }
}

TEST_CASE("active power balances with branch losses") {
    auto base = grid::load_grid(testing::desk_grid());
    auto settled = powerflow::initialize_oltc(base, grid::study_case("hPV"));
    const auto& g = settled.grid;
    const auto& s = settled.solution;
    Real gen = s.slack_p_mw, load = 0.0, losses = 0.0;
    for (const auto& d : g.ders)
        gen += d.p_mw;
    for (const auto& l : g.loads)
        load += l.p_mw;
    for (const auto& f : s.flows)
        losses += f.p_from_mw + f.p_to_mw;
    CHECK(losses > 0.0);
    CHECK(gen - load == doctest::Approx(losses).epsilon(1e-7));
    CHECK(s.flows.size() == g.branches.size() + g.transformers.size());
}

TEST_CASE("settled taps leave controlled buses in their deadband") {
    auto base = grid::load_grid(testing::desk_grid());
    for (auto name : grid::study_case_names()) {
        CAPTURE(name);
        auto r = powerflow::initialize_oltc(base, grid::study_case(name));
        if (r.hunting)
            continue;
        for (const auto& t : r.grid.transformers) {
            if (!t.oltc)
                continue;
            Real v = r.solution.vm[t.oltc->controlled_bus];
            bool at_limit = t.tap_pos == t.oltc->tap_min || t.tap_pos == t.oltc->tap_max;
            CHECK((at_limit || (v <= t.oltc->upper() + 1e-9 && v >= t.oltc->lower() - 1e-9)));
        }
    }
}

TEST_CASE("infeasible load fails with a numerical error") {
    auto g = grid::load_grid(testing::fixture_dir() / "two_bus");
    g.loads[0].p_mw = 50000.0;
    CHECK_THROWS_AS(powerflow::solve_power_flow(g), NumericalError);
}

TEST_CASE("warm start with the solution converges at once") {
    auto g = grid::load_grid(testing::fixture_dir() / "three_bus");
    auto s = powerflow::solve_power_flow(g);
    auto again = powerflow::solve_power_flow(g, {}, s.voltages());
    CHECK(again.iterations <= 1);
    CHECK_THROWS_AS(powerflow::solve_power_flow(g, {}, std::vector<Complex>(2)), ConfigError);
}

TEST_CASE("solution csv has one row per bus and branch") {
    testing::TempDir tmp("pf");
    auto g = grid::load_grid(testing::fixture_dir() / "three_bus");
    auto s = powerflow::solve_power_flow(g);
    powerflow::write_solution_csv(tmp / "pf.csv", g, s);
    auto t = CsvTable::read(tmp / "pf.csv");
    CHECK(t.rows() == 5);
}
