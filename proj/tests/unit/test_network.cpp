#include "support.hpp"

#include "dersim/network_solver.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace dersim;
using namespace dersim::dynamics;

namespace {

NetworkInjections loads_only(const grid::GridModel& g) {
    NetworkInjections inj;
    inj.load_power.assign(g.buses.size(), Complex{});
    for (const auto& l : g.loads)
        inj.load_power[l.bus] += Complex(l.p_mw, l.q_mvar) / g.s_base_mva;
    inj.fixed_voltage.push_back({g.slack.bus, Complex(g.slack.v_set, 0.0)});
    return inj;
}

} // namespace

TEST_CASE("constant-power network solve equals the Gauss-Seidel load flow") {
    auto g = grid::load_grid(testing::fixture_dir() / "three_bus");
    auto inj = loads_only(g);
    auto v = network_solve(grid::build_admittance(g), inj, std::vector<Complex>(3, Complex(1.0, 0.0)));
    auto gs = oracle::gauss_seidel(g);
    REQUIRE(gs.converged);
    for (std::size_t b = 0; b < 3; ++b)
        CHECK(std::abs(v[b] - gs.v[b]) < 1e-9);
    CHECK(oracle::kcl_residual(g, {}, inj, v) < 1e-9);
}

TEST_CASE("library residual agrees with element-wise KCL") {
    auto g = grid::load_grid(testing::desk_grid());
    auto y = grid::build_admittance(g);
    NetworkInjections inj;
    inj.load_power.assign(g.buses.size(), Complex(0.01, 0.004));
    inj.inverters.push_back({g.bus_index("MA3"), Complex(0.05, -0.01)});
    NortonPort port;
    port.y << 0.5, -3.0, 3.0, 0.5;
    port.i_src = Complex(1.0, -2.0);
    inj.norton.push_back({g.slack.bus, port});
    std::vector<Complex> v;
    for (std::size_t b = 0; b < g.buses.size(); ++b)
        v.push_back(std::polar(1.0 + 0.001 * b, -0.01 * b));
    auto r = network_residual(y, inj, v);
    Real worst = 0.0;
    for (auto x : r)
        worst = std::max(worst, std::abs(x));
    CHECK(worst == doctest::Approx(oracle::kcl_residual(g, {}, inj, v)).epsilon(1e-9));
}

TEST_CASE("network solver with Norton and inverter injections") {
    auto g = grid::load_grid(testing::desk_grid());
    NetworkInjections inj;
    inj.load_power.assign(g.buses.size(), Complex{});
    for (const auto& l : g.loads)
        inj.load_power[l.bus] += Complex(l.p_mw, l.q_mvar) / g.s_base_mva;
    NortonPort port;
    port.y(0, 1) = -1.0 / 0.01;
    port.y(1, 0) = 1.0 / 0.01;
    port.i_src = Complex(0.0, -1.0 / 0.01);
    inj.norton.push_back({g.slack.bus, port});
    inj.inverters.push_back({g.bus_index("H3"), Complex(0.3, 0.0)});
    NetworkSolver solver(grid::build_admittance(g));
    std::vector<Complex> v(g.buses.size(), Complex(1.0, 0.0));
    auto stats = solver.solve(inj, v);
    CHECK(stats.residual < 1e-10);
    CHECK(oracle::kcl_residual(g, {}, inj, v) < 1e-9);
    inj.inverters[0].c = Complex(0.31, 0.0);
    auto again = solver.solve(inj, v);
    CHECK(again.residual < 1e-10);
    CHECK(again.factorizations <= 1);
}

TEST_CASE("infeasible loading raises voltage collapse") {
    auto g = grid::load_grid(testing::fixture_dir() / "two_bus");
    auto inj = loads_only(g);
    inj.load_power[1] = Complex(400.0, 100.0);
    std::vector<Complex> v(2, Complex(1.0, 0.0));
    CHECK_THROWS_AS(network_solve(grid::build_admittance(g), inj, v), VoltageCollapse);
}
