#include "support.hpp"

#include "dersim/report.hpp"

#include <doctest.h>
#include <json.hpp>

using namespace dersim;
using namespace dersim::assessment;

namespace {

SeverityReport run(const std::string& c, const std::string& s, int sev, Real lost) {
    SeverityReport r;
    r.grid = "g";
    r.study_case = c;
    r.scenario = s;
    r.severity = sev;
    r.metrics.lost_p_total = lost;
    return r;
}

std::vector<SeverityReport> grid_of_runs() {
    std::vector<SeverityReport> out;
    int i = 0;
    for (const char* c : {"lPV", "hL", "hW", "lW", "hPV"})
        for (const char* s : {"disc", "uv1", "ov2", "uv2", "ov1"}) {
            out.push_back(run(c, s, i % 6, (i * 7) % 5));
            ++i;
        }
    return out;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_CASE("single run gives a one-cell table") {
    std::vector<SeverityReport> one{run("hW", "ov2", 3, 12.0)};
    auto csv = severity_table_csv(one);
    CHECK(count_lines(csv) == 2);
    CHECK(csv.find('3') != std::string::npos);
}

TEST_CASE("full batch gives a 5 x 5 severity grid in canonical order") {
    auto runs = grid_of_runs();
    auto t = CsvTable::parse(severity_table_csv(runs));
    CHECK(t.rows() == 5);
    CHECK(t.header().size() >= 5 + 1);
    CHECK(t.text(0, t.header()[1]) == "hL");
    auto s = t.header();
    CHECK(std::find(s.begin(), s.end(), "uv1") < std::find(s.begin(), s.end(), "disc"));
}

TEST_CASE("lost power order breaks ties by grid, case and scenario") {
    std::vector<SeverityReport> runs{run("hW", "ov2", 0, 5.0), run("hL", "uv1", 0, 5.0), run("hL", "disc", 0, 9.0),
                                     run("hL", "ov1", 0, 5.0)};
    auto order = lost_p_order(runs);
    CHECK(order == std::vector<std::size_t>{2, 3, 1, 0});
    auto lines = count_lines(lost_p_csv(runs));
    CHECK(lines == 5);
}

TEST_CASE("report outputs are deterministic and well formed") {
    auto runs = grid_of_runs();
    auto shuffled = runs;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(severity_table_csv(runs) == severity_table_csv(shuffled));
    CHECK(runs_csv(runs) == runs_csv(shuffled));
    CHECK(lost_p_csv(runs) == lost_p_csv(shuffled));

    auto j = nlohmann::json::parse(aggregate_json(runs));
    CHECK(j.dump().size() > 10);
    auto one = nlohmann::json::parse(report_json(runs[0]));
    CHECK(one["severity"] == runs[0].severity);
    CHECK(severity_svg(runs).rfind("<svg", 0) != std::string::npos);
    CHECK(lost_p_svg(runs).find("</svg>") != std::string::npos);
}

TEST_CASE("report bundle on disk") {
    testing::TempDir tmp("bundle");
    auto runs = grid_of_runs();
    write_report_bundle(tmp.path(), runs);
    for (const char* f : {"severity.csv", "lost_p.csv", "runs.csv", "severity.svg", "lost_p.svg", "report.json"})
        CHECK(std::filesystem::file_size(tmp / f) > 0);
    CHECK_THROWS_AS(write_report_bundle(tmp.path(), {}), ConfigError);
}
