#include "support.hpp"

#include "dersim/assessment.hpp"
#include "dersim/simulation.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace dersim;
using namespace dersim::dynamics;

namespace {

const PreparedCase& desk_case(const char* name) {
    static std::map<std::string, PreparedCase> cache;
    auto it = cache.find(name);
    if (it == cache.end())
        it = cache.emplace(name, prepare_case(grid::load_grid(testing::desk_grid()), grid::study_case(name))).first;
    return it->second;
}

SimulationConfig config(Real t_end) {
    SimulationConfig c;
    c.t_end = t_end;
    return c;
}

Real max_drift(const TraceSet& tr) {
    Real worst = 0.0;
    for (std::size_t k = 0; k < tr.steps(); ++k)
        for (std::size_t b = 0; b < tr.n_bus; ++b)
            worst = std::max(worst, std::abs(tr.v(k, b) - tr.v(0, b)));
    return worst;
}

} // namespace

TEST_CASE("three-bus network without devices holds the load flow") {
    auto prep = prepare_case(grid::load_grid(testing::fixture_dir() / "three_bus"), grid::study_case("hL"));
    auto tr = simulate(prep.grid, prep.initial, attack::baseline_scenario(), config(5.0));
    REQUIRE(tr.steps() == 501);
    CHECK(max_drift(tr) < 1e-9);
    for (std::size_t b = 0; b < 3; ++b)
        CHECK(tr.v(0, b) == doctest::Approx(prep.power_flow.vm[b]).epsilon(1e-9));
}

TEST_CASE("desk fixture stays at equilibrium without a scenario") {
    const auto& prep = desk_case("hW");
    auto tr = simulate(prep.grid, prep.initial, attack::baseline_scenario(), config(20.0));
    CHECK(max_drift(tr) < 1e-6);
    CHECK(tr.trips.empty());
    CHECK(tr.tap_events.empty());
    CHECK_FALSE(tr.collapsed);
    for (std::size_t i = 0; i < tr.n_der; ++i)
        CHECK(tr.p(0, i) == doctest::Approx(prep.grid.ders[i].p_mw).epsilon(1e-6));
}

TEST_CASE("disconnect command removes every wind plant and slows the bulk machine") {
    const auto& prep = desk_case("hW");
    auto tr = simulate(prep.grid, prep.initial, attack::build_scenario("disc"), config(3.0));
    CHECK(tr.disconnects.size() == 4);
    CHECK(tr.trips.empty());
    const std::size_t k = 150;
    for (const auto& d : tr.disconnects) {
        CHECK(d.time == doctest::Approx(1.0));
        CHECK_FALSE(tr.on(k, d.der));
        CHECK(tr.p(k, d.der) == 0.0);
    }
    CHECK(tr.slack_dw[k] < 0.0);
    CHECK(tr.frequency_hz[k] < 50.0);
}

TEST_CASE("undelivered signals leave the run at equilibrium") {
    const auto& prep = desk_case("hW");
    auto cfg = config(5.0);
    cfg.success = [](const attack::ScenarioEvent&, const grid::DerUnit&) { return false; };
    auto tr = simulate(prep.grid, prep.initial, attack::build_scenario("ov2"), cfg);
    CHECK(tr.deliveries.empty());
    CHECK(max_drift(tr) < 1e-6);
}

TEST_CASE("network stays consistent at every step") {
    const auto& prep = desk_case("hW");
    Real worst = 0.0;
    auto cfg = config(20.0);
    cfg.observer = [&](const StepView& s) {
        auto taps = oracle::taps_from_admittance(prep.grid, s.admittance);
        worst = std::max(worst, oracle::kcl_residual(prep.grid, taps, s.injections, s.voltages));
    };
    simulate(prep.grid, prep.initial, attack::build_scenario("ov2"), cfg);
    CHECK(worst < 1e-9);
}

TEST_CASE("integrators agree on the ov2 response") {
    const auto& prep = desk_case("hW");
    auto trap = simulate(prep.grid, prep.initial, attack::build_scenario("ov2"), config(15.0));
    auto cfg = config(15.0);
    cfg.integrator = Integrator::heun;
    auto heun = simulate(prep.grid, prep.initial, attack::build_scenario("ov2"), cfg);
    REQUIRE(trap.steps() == heun.steps());
    const auto last = trap.steps() - 1;
    Real gap = 0.0, rise = 0.0;
    for (std::size_t b = 0; b < trap.n_bus; ++b) {
        gap = std::max(gap, std::abs(trap.v(last, b) - heun.v(last, b)));
        rise = std::max(rise, trap.v(last, b) - trap.v(0, b));
    }
    CHECK(rise > 0.01);
    CHECK(gap < 1e-3);
}

TEST_CASE("P set value steps are slope limited") {
    const auto& prep = desk_case("hW");
    auto sc = attack::parse_scenario("name pdown\ntarget kind=WPP,PV\nat 1.0 p_set 0.2\n");
    auto tr = simulate(prep.grid, prep.initial, sc, config(10.0));
    const Real h = 0.01;
    bool moved = false;
    for (std::size_t i = 0; i < tr.n_der; ++i) {
        if (prep.grid.ders[i].machine != grid::MachineType::VSI)
            continue;
        for (std::size_t k = 1; k < tr.steps(); ++k) {
            Real d = std::abs(tr.p_ref(k, i) - tr.p_ref(k - 1, i));
            CHECK(d <= 0.0066 * h + 1e-12);
            moved = moved || d > 0.0;
        }
    }
    CHECK(moved);
}

TEST_CASE("simulation configuration is checked") {
    const auto& prep = desk_case("hW");
    auto cfg = config(1.0);
    cfg.step = 0.0;
    CHECK_THROWS_AS(simulate(prep.grid, prep.initial, attack::baseline_scenario(), cfg), ConfigError);
}

TEST_CASE("low-load ov2 run trips targeted and collateral units") {
    const auto& prep = desk_case("lW");
    auto sc = attack::build_scenario("ov2");
    auto tr = simulate(prep.grid, prep.initial, sc, config(90.0));
    auto a = assessment::attribute_trips(tr, prep.grid, sc);
    CHECK(a.manipulated_count() == 2);
    CHECK(a.other_count() == 3);
    for (const auto& t : a.trips)
        CHECK(t.trip.cause == protection::TripCause::ov);
}
