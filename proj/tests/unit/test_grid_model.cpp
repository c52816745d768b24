#include "support.hpp"

#include "dersim/grid_model.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace dersim;
using testing::fixture_dir;

namespace {

TableError::Kind load_error_kind(const std::filesystem::path& dir) {
    try {
        grid::load_grid(dir);
    } catch (const TableError& e) {
        return e.kind();
    }
    FAIL("grid loaded without error");
    return TableError::Kind::invariant;
}

} // namespace

TEST_CASE("three-bus fixture converts to per unit") {
    auto g = grid::load_grid(fixture_dir() / "three_bus");
    REQUIRE(g.buses.size() == 3);
    REQUIRE(g.branches.size() == 2);
    CHECK(g.buses[1].level == VoltageLevel::HV);
    CHECK(g.slack.bus == g.bus_index("S"));
    // Z_base = 110^2 / 100 = 121 ohm
    const auto& l = g.branches[0];
    CHECK(l.r == doctest::Approx(1.2 / 121.0).epsilon(1e-12));
    CHECK(l.x == doctest::Approx(3.9 / 121.0).epsilon(1e-12));
    CHECK(l.b_shunt == doctest::Approx(2.9e-5 * 121.0).epsilon(1e-12));
    CHECK(g.loads[0].p_mw == 1.0);
}

TEST_CASE("per-unit base round trips") {
    grid::PerUnitBase b{100.0, 20.0};
    CHECK(b.z_base_ohm() == doctest::Approx(4.0));
    CHECK(b.impedance_to_ohm(b.impedance_to_pu(3.7)) == doctest::Approx(3.7));
    CHECK(b.current_to_ka(b.current_to_pu(0.42)) == doctest::Approx(0.42));
    CHECK(b.i_base_ka() == doctest::Approx(100.0 / (std::sqrt(3.0) * 20.0)));
}

TEST_CASE("column map reads foreign column names") {
    auto a = grid::load_grid(fixture_dir() / "three_bus");
    auto b = grid::load_grid(fixture_dir() / "column_map");
    REQUIRE(a.branches.size() == b.branches.size());
    for (std::size_t i = 0; i < a.branches.size(); ++i) {
        CHECK(a.branches[i].r == b.branches[i].r);
        CHECK(a.branches[i].x == b.branches[i].x);
        CHECK(a.branches[i].b_shunt == b.branches[i].b_shunt);
    }
}

TEST_CASE("loader rejects broken tables") {
    testing::TempDir tmp("grid");
    auto dir = tmp / "g";

    SUBCASE("dangling reference") {
        testing::copy_grid(fixture_dir() / "three_bus", dir);
        testing::write_file(dir / "loads.csv", "id,bus,p_mw,q_mvar\nLD9,B9,1,0\n");
        CHECK(load_error_kind(dir) == TableError::Kind::dangling_reference);
    }
    SUBCASE("duplicate id") {
        testing::copy_grid(fixture_dir() / "three_bus", dir);
        testing::write_file(dir / "buses.csv", "id,vn_kv\nS,110\nB2,110\nB3,110\nB2,110\n");
        CHECK(load_error_kind(dir) == TableError::Kind::duplicate_id);
    }
    SUBCASE("missing column") {
        testing::copy_grid(fixture_dir() / "three_bus", dir);
        testing::write_file(dir / "lines.csv", "id,from_bus,to_bus,r_ohm_per_km,length_km\nL12,S,B2,0.1,1\n");
        CHECK(load_error_kind(dir) == TableError::Kind::missing_column);
    }
    SUBCASE("missing file") {
        testing::copy_grid(fixture_dir() / "three_bus", dir);
        std::filesystem::remove(dir / "slack.csv");
        CHECK(load_error_kind(dir) == TableError::Kind::missing_file);
    }
    SUBCASE("bad value") {
        testing::copy_grid(fixture_dir() / "three_bus", dir);
        testing::write_file(dir / "loads.csv", "id,bus,p_mw,q_mvar\nLD3,B3,one,0\n");
        CHECK(load_error_kind(dir) == TableError::Kind::bad_value);
    }
    SUBCASE("isolated bus") {
        testing::copy_grid(fixture_dir() / "three_bus", dir);
        testing::write_file(dir / "buses.csv", "id,vn_kv\nS,110\nB2,110\nB3,110\nB4,110\n");
        CHECK_THROWS_AS(grid::load_grid(dir), ConfigError);
    }
}

TEST_CASE("table errors carry file and line") {
    try {
        CsvTable::parse("id,x\na,1\nb,zz\n", "t.csv").real(1, "x");
        FAIL("no error");
    } catch (const TableError& e) {
        CHECK(e.line() == 3);
        CHECK(e.file() == "t.csv");
    }
}

TEST_CASE("csv reader accepts semicolons and comments") {
    auto t = CsvTable::parse("# note\na;b\n1;2\n\n3;4\n");
    REQUIRE(t.rows() == 2);
    CHECK(t.real(1, "b") == 4.0);
    CHECK_FALSE(t.optional_real(0, "c").has_value());
}

TEST_CASE("desk fixture matches its declared totals") {
    auto g = grid::load_grid(testing::desk_grid());
    auto manifest = read_key_values(testing::desk_grid() / "manifest.csv");
    Real wpp = 0.0;
    for (const auto& d : g.ders)
        if (d.kind == grid::DerKind::WPP)
            wpp += d.p_inst_mw;
    CHECK(wpp == doctest::Approx(std::stod(manifest.at("wpp_p_inst_total_mw"))));
    CHECK(g.ders.size() == 12);
    for (const auto& d : g.ders)
        CHECK(g.buses[d.bus].level != VoltageLevel::EHV);
    CHECK(g.buses[g.slack.bus].level == VoltageLevel::EHV);
}

TEST_CASE("study cases scale from the base values") {
    auto g = grid::load_grid(testing::desk_grid());
    CHECK_THROWS_AS(grid::study_case("peak"), ConfigError);
    CHECK(grid::study_case_names().size() == 5);
    auto once = grid::apply_study_case(g, grid::study_case("hW"));
    auto twice = grid::apply_study_case(grid::apply_study_case(g, grid::study_case("lPV")), grid::study_case("hW"));
    for (std::size_t i = 0; i < once.loads.size(); ++i)
        CHECK(once.loads[i].p_mw == twice.loads[i].p_mw);
    for (std::size_t i = 0; i < once.ders.size(); ++i) {
        CHECK(once.ders[i].p_mw == twice.ders[i].p_mw);
        CHECK(once.ders[i].p_mw <= once.ders[i].p_inst_mw + 1e-12);
    }
    CHECK(once.applied_case == "hW");
}

TEST_CASE("admittance matrix agrees with branch-by-branch stamping") {
    auto g = grid::load_grid(testing::desk_grid());
    g.transformers[1].tap_pos = 3;
    auto y = grid::build_admittance(g);
    auto dense = oracle::dense_admittance(g);
    auto shunts = grid::shunt_admittances(g);
    for (std::size_t i = 0; i < g.buses.size(); ++i) {
        Complex row{};
        for (std::size_t j = 0; j < g.buses.size(); ++j) {
            Complex a = y.coeff(static_cast<int>(i), static_cast<int>(j));
            CHECK(std::abs(a - dense[i][j]) < 1e-9 * (1.0 + std::abs(a)));
            row += a;
        }
        CHECK(std::abs(row - shunts[i]) < 1e-9);
    }
}

TEST_CASE("DER on an EHV bus is rejected") {
    testing::TempDir tmp("ehv");
    auto dir = tmp / "g";
    testing::copy_grid(testing::desk_grid(), dir);
    auto text = testing::slurp(dir / "ders.csv");
    text += "WPP_E1,E1,WPP,VSI,10,10,0\n";
    testing::write_file(dir / "ders.csv", text);
    CHECK_THROWS_AS(grid::load_grid(dir), ConfigError);
}
