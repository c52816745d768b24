#include "dersim/report.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>

namespace dersim::assessment {

namespace {

std::size_t case_rank(const std::string& name) {
    auto names = grid::study_case_names();
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? names.size() : static_cast<std::size_t>(it - names.begin());
}

std::size_t scenario_rank(const std::string& name) {
    if (name == "none")
        return 0;
    auto names = attack::builtin_scenario_names();
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? names.size() + 1 : static_cast<std::size_t>(it - names.begin()) + 1;
}

auto table_key(const SeverityReport& r) {
    return std::make_tuple(r.grid, case_rank(r.study_case), r.study_case, scenario_rank(r.scenario), r.scenario);
}

std::vector<std::size_t> table_order(std::span<const SeverityReport> runs) {
    std::vector<std::size_t> idx(runs.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return table_key(runs[a]) < table_key(runs[b]); });
    return idx;
}

// ordered distinct row keys (grid, case) and scenario columns
struct Layout {
    std::vector<std::pair<std::string, std::string>> rows;
    std::vector<std::string> columns;
    std::map<std::pair<std::size_t, std::size_t>, int> cells;
};

Layout layout(std::span<const SeverityReport> runs) {
    Layout l;
    auto order = table_order(runs);
    std::vector<std::string> cols;
    for (auto i : order)
        cols.push_back(runs[i].scenario);
    std::stable_sort(cols.begin(), cols.end(), [](const std::string& a, const std::string& b) {
        return std::make_tuple(scenario_rank(a), a) < std::make_tuple(scenario_rank(b), b);
    });
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    l.columns = cols;
    for (auto i : order) {
        std::pair<std::string, std::string> key{runs[i].grid, runs[i].study_case};
        if (l.rows.empty() || l.rows.back() != key)
            l.rows.push_back(key);
        auto c = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), runs[i].scenario) - cols.begin());
        l.cells[{l.rows.size() - 1, c}] = runs[i].severity;
    }
    return l;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

std::string join(const std::vector<std::string>& items, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i)
            out += sep;
        out += items[i];
    }
    return out;
}

constexpr const char* kSeverityColors[] = {"#f2f2f2", "#fde0a6", "#fbb36b", "#f07f4f", "#d7433b", "#8c1c24"};

nlohmann::ordered_json metrics_json(const RunMetrics& m) {
    nlohmann::ordered_json j;
    j["d_max_during"] = m.d_max_during;
    j["d_bus"] = m.d_bus;
    j["d_time"] = m.d_time;
    j["violation_during"] = m.violation_during;
    j["violation_after_tripping"] = m.violation_after_tripping;
    j["trips_manipulated"] = {{"count", m.trips_manipulated.count}, {"p_mw", m.trips_manipulated.p_mw}};
    j["trips_other"] = {{"count", m.trips_other.count}, {"p_mw", m.trips_other.p_mw}};
    j["commanded_disconnections"] = {{"count", m.commanded.count}, {"p_mw", m.commanded.p_mw}};
    j["lost_p_mw"] = m.lost_p_total;
    return j;
}

nlohmann::ordered_json run_json(const SeverityReport& r) {
    nlohmann::ordered_json j;
    j["grid"] = r.grid;
    j["study_case"] = r.study_case;
    j["scenario"] = r.scenario;
    j["severity"] = r.severity;
    j["metrics"] = metrics_json(r.metrics);
    j["annotations"] = r.annotations;
    j["collapsed"] = r.collapsed;
    if (r.collapsed)
        j["collapse_time"] = r.collapse_time;
    auto log = nlohmann::ordered_json::array();
    for (const auto& e : r.trip_log)
        log.push_back({{"time", e.time}, {"der", e.der}, {"cause", e.cause}, {"manipulated", e.manipulated},
                       {"p_mw", e.p_mw}});
    j["trip_log"] = log;
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out)
        throw ConfigError("write failed for " + path.string());
}

} // namespace

std::vector<std::size_t> lost_p_order(std::span<const SeverityReport> runs) {
    std::vector<std::size_t> idx = table_order(runs);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = runs[a];
        const auto& rb = runs[b];
        if (ra.metrics.lost_p_total != rb.metrics.lost_p_total)
            return ra.metrics.lost_p_total > rb.metrics.lost_p_total;
        return std::tie(ra.grid, ra.study_case, ra.scenario) < std::tie(rb.grid, rb.study_case, rb.scenario);
    });
    return idx;
}

std::string severity_table_csv(std::span<const SeverityReport> runs) {
    auto l = layout(runs);
    std::string out = "grid,case";
    for (const auto& c : l.columns)
        out += "," + csv_field(c);
    out += "\n";
    for (std::size_t r = 0; r < l.rows.size(); ++r) {
        out += csv_field(l.rows[r].first) + "," + csv_field(l.rows[r].second);
        for (std::size_t c = 0; c < l.columns.size(); ++c) {
            out += ",";
            if (auto it = l.cells.find({r, c}); it != l.cells.end())
                out += std::to_string(it->second);
        }
        out += "\n";
    }
    return out;
}

std::string lost_p_csv(std::span<const SeverityReport> runs) {
    std::string out = "grid,case,scenario,lost_p_mw,targeted_p_mw,other_p_mw,trips_manipulated,trips_other,"
                      "commanded_disconnections,severity\n";
    for (auto i : lost_p_order(runs)) {
        const auto& r = runs[i];
        const auto& m = r.metrics;
        out += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{},{},{},{}\n", csv_field(r.grid), csv_field(r.study_case),
                           csv_field(r.scenario), m.lost_p_total, m.trips_manipulated.p_mw + m.commanded.p_mw,
                           m.trips_other.p_mw, m.trips_manipulated.count, m.trips_other.count, m.commanded.count,
                           r.severity);
    }
    return out;
}

std::string runs_csv(std::span<const SeverityReport> runs) {
    std::string out = "grid,case,scenario,severity,d_max,d_bus,d_time,violation_during,violation_after_tripping,"
                      "trips_manipulated,trips_manipulated_mw,trips_other,trips_other_mw,commanded,commanded_mw,"
                      "lost_p_mw,collapsed,annotations\n";
    for (auto i : table_order(runs)) {
        const auto& r = runs[i];
        const auto& m = r.metrics;
        out += fmt::format("{},{},{},{},{:.6f},{},{:.2f},{},{},{},{:.6f},{},{:.6f},{},{:.6f},{:.6f},{},{}\n",
                           csv_field(r.grid), csv_field(r.study_case), csv_field(r.scenario), r.severity,
                           m.d_max_during, csv_field(m.d_bus), m.d_time, int(m.violation_during),
                           int(m.violation_after_tripping), m.trips_manipulated.count, m.trips_manipulated.p_mw,
                           m.trips_other.count, m.trips_other.p_mw, m.commanded.count, m.commanded.p_mw,
                           m.lost_p_total, int(r.collapsed), csv_field(join(r.annotations, "; ")));
    }
    return out;
}

std::string severity_svg(std::span<const SeverityReport> runs) {
    auto l = layout(runs);
    const int cell = 44, left = 170, top = 60;
    const int width = left + cell * static_cast<int>(l.columns.size()) + 20;
    const int height = top + cell * static_cast<int>(l.rows.size()) + 50;
    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n<text x=\"10\" y=\"20\" font-size=\"14\">Severity index</text>\n",
        width, height);
    for (std::size_t c = 0; c < l.columns.size(); ++c)
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                           left + cell * static_cast<int>(c) + cell / 2, top - 8, xml_escape(l.columns[c]));
    for (std::size_t r = 0; r < l.rows.size(); ++r) {
        const int y = top + cell * static_cast<int>(r);
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{} / {}</text>\n", left - 8, y + cell / 2 + 4,
                           xml_escape(l.rows[r].first), xml_escape(l.rows[r].second));
        for (std::size_t c = 0; c < l.columns.size(); ++c) {
            const int x = left + cell * static_cast<int>(c);
            auto it = l.cells.find({r, c});
            if (it == l.cells.end()) {
                out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\" "
                                   "stroke=\"#999\"/>\n",
                                   x, y, cell, cell);
                continue;
            }
            const int s = std::clamp(it->second, 0, 5);
            out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#999\"/>\n"
                               "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{}</text>\n",
                               x, y, cell, cell, kSeverityColors[s], x + cell / 2, y + cell / 2 + 4,
                               s >= 4 ? "white" : "black", s);
        }
    }
    out += "</svg>\n";
    return out;
}

std::string lost_p_svg(std::span<const SeverityReport> runs) {
    auto order = lost_p_order(runs);
    Real max_p = 0.0;
    for (const auto& r : runs)
        max_p = std::max(max_p, r.metrics.lost_p_total);
    const int bar = 18, gap = 4, left = 220, top = 40, plot_w = 400;
    const int height = top + (bar + gap) * static_cast<int>(order.size()) + 40;
    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"11\">\n<text x=\"10\" y=\"20\" font-size=\"14\">Lost P injection (MW); orange: targeted "
        "units, blue: other units</text>\n",
        left + plot_w + 90, height);
    const Real scale = max_p > 0.0 ? plot_w / max_p : 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& r = runs[order[k]];
        const auto& m = r.metrics;
        const int y = top + (bar + gap) * static_cast<int>(k);
        const Real targeted = m.trips_manipulated.p_mw + m.commanded.p_mw;
        const Real w1 = targeted * scale;
        const Real w2 = m.trips_other.p_mw * scale;
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{} / {} / {}</text>\n", left - 6,
                           y + bar - 5, xml_escape(r.grid), xml_escape(r.study_case), xml_escape(r.scenario));
        out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{:.2f}\" height=\"{}\" fill=\"#f28e2b\"/>\n", left, y,
                           w1, bar);
        out += fmt::format("<rect x=\"{:.2f}\" y=\"{}\" width=\"{:.2f}\" height=\"{}\" fill=\"#4e79a7\"/>\n",
                           left + w1, y, w2, bar);
        out += fmt::format("<text x=\"{:.2f}\" y=\"{}\">{:.1f}</text>\n", left + w1 + w2 + 4, y + bar - 5,
                           m.lost_p_total);
    }
    out += "</svg>\n";
    return out;
}

std::string report_json(const SeverityReport& run) { return run_json(run).dump(2) + "\n"; }

std::string aggregate_json(std::span<const SeverityReport> runs) {
    nlohmann::ordered_json j;
    auto arr = nlohmann::ordered_json::array();
    for (auto i : table_order(runs))
        arr.push_back(run_json(runs[i]));
    j["runs"] = arr;
    auto order = nlohmann::ordered_json::array();
    for (auto i : lost_p_order(runs))
        order.push_back(fmt::format("{}/{}/{}", runs[i].grid, runs[i].study_case, runs[i].scenario));
    j["lost_p_order"] = order;
    return j.dump(2) + "\n";
}

void write_report_bundle(const std::filesystem::path& dir, std::span<const SeverityReport> runs) {
    if (runs.empty())
        throw ConfigError("report needs at least one run");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "severity.csv", severity_table_csv(runs));
    write_text(dir / "lost_p.csv", lost_p_csv(runs));
    write_text(dir / "runs.csv", runs_csv(runs));
    write_text(dir / "severity.svg", severity_svg(runs));
    write_text(dir / "lost_p.svg", lost_p_svg(runs));
    write_text(dir / "report.json", aggregate_json(runs));
}

} // namespace dersim::assessment
