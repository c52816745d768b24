#include "dersim/attack.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace dersim::attack {

const char* to_string(SignalKind kind) {
    switch (kind) {
    case SignalKind::p_set: return "p_set";
    case SignalKind::q_set: return "q_set";
    case SignalKind::disconnect: return "disconnect";
    }
    return "?";
}

bool TargetSelector::matches(const grid::DerUnit& der) const {
    if (!kinds.empty() && std::find(kinds.begin(), kinds.end(), der.kind) == kinds.end())
        return false;
    if (!levels.empty() && std::find(levels.begin(), levels.end(), der.connection_level) == levels.end())
        return false;
    if (!ids.empty() && std::find(ids.begin(), ids.end(), der.id) == ids.end())
        return false;
    return true;
}

Real ManipulationScenario::start_time() const {
    return events.empty() ? std::numeric_limits<Real>::infinity() : events.front().time;
}

ScenarioError::ScenarioError(const std::string& origin, std::size_t line, const std::string& message)
    : ConfigError(fmt::format("{}:{}: {}", origin, line, message)), line_(line) {}

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find(sep, start);
        if (end == std::string_view::npos)
            end = s.size();
        if (end > start)
            out.emplace_back(s.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::vector<std::string> words(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    std::string w;
    while (in >> w)
        out.push_back(w);
    return out;
}

Real number(const std::string& text, const std::string& origin, std::size_t line) {
    Real v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
        throw ScenarioError(origin, line, "'" + text + "' is not a number");
    return v;
}

} // namespace

ManipulationScenario parse_scenario(std::string_view text, const std::string& origin) {
    ManipulationScenario sc;
    bool have_name = false, have_target = false;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        auto w = words(line);
        if (w.empty())
            continue;

        if (w[0] == "name") {
            if (w.size() != 2)
                throw ScenarioError(origin, lineno, "expected: name <identifier>");
            if (have_name)
                throw ScenarioError(origin, lineno, "duplicate name directive");
            sc.name = w[1];
            have_name = true;
        } else if (w[0] == "target") {
            if (have_target)
                throw ScenarioError(origin, lineno, "duplicate target directive");
            have_target = true;
            for (std::size_t i = 1; i < w.size(); ++i) {
                auto eq = w[i].find('=');
                if (eq == std::string::npos)
                    throw ScenarioError(origin, lineno, "target filters take the form key=value[,value]");
                auto key = w[i].substr(0, eq);
                auto values = split(std::string_view(w[i]).substr(eq + 1), ',');
                if (values.empty())
                    throw ScenarioError(origin, lineno, "empty value list for '" + key + "'");
                try {
                    for (const auto& v : values) {
                        if (key == "kind")
                            sc.target.kinds.push_back(grid::parse_der_kind(v));
                        else if (key == "level")
                            sc.target.levels.push_back(grid::parse_voltage_level(v));
                        else if (key == "id")
                            sc.target.ids.push_back(v);
                        else
                            throw ScenarioError(origin, lineno, "unknown target key '" + key + "'");
                    }
                } catch (const ScenarioError&) {
                    throw;
                } catch (const ConfigError& e) {
                    throw ScenarioError(origin, lineno, e.what());
                }
            }
        } else if (w[0] == "at") {
            if (w.size() < 3)
                throw ScenarioError(origin, lineno, "expected: at <time> <p_set|q_set> <value> | at <time> disconnect");
            ScenarioEvent ev;
            ev.time = number(w[1], origin, lineno);
            if (ev.time < 0.0)
                throw ScenarioError(origin, lineno, "event time must be non-negative");
            if (w[2] == "disconnect") {
                if (w.size() != 3)
                    throw ScenarioError(origin, lineno, "disconnect takes no value");
                ev.signal = {SignalKind::disconnect, 0.0};
            } else if (w[2] == "p_set" || w[2] == "q_set") {
                if (w.size() != 4)
                    throw ScenarioError(origin, lineno, w[2] + " takes exactly one value");
                ev.signal = {w[2] == "p_set" ? SignalKind::p_set : SignalKind::q_set, number(w[3], origin, lineno)};
            } else {
                throw ScenarioError(origin, lineno, "unknown signal '" + w[2] + "'");
            }
            if (!sc.events.empty() && ev.time < sc.events.back().time)
                throw ScenarioError(origin, lineno, "events must be ordered by time");
            sc.events.push_back(ev);
        } else {
            throw ScenarioError(origin, lineno, "unknown directive '" + w[0] + "'");
        }
    }
    if (!have_name)
        throw ScenarioError(origin, lineno, "missing name directive");
    return sc;
}

ManipulationScenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scenario file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

std::string format_scenario(const ManipulationScenario& sc) {
    std::string out = "name " + sc.name + "\n";
    std::vector<std::string> filters;
    auto join = [](const auto& items, auto&& fn) {
        std::string s;
        for (const auto& it : items) {
            if (!s.empty())
                s += ',';
            s += fn(it);
        }
        return s;
    };
    if (!sc.target.kinds.empty())
        filters.push_back("kind=" + join(sc.target.kinds, [](grid::DerKind k) { return std::string(grid::to_string(k)); }));
    if (!sc.target.levels.empty())
        filters.push_back("level=" + join(sc.target.levels, [](VoltageLevel l) { return std::string(to_string(l)); }));
    if (!sc.target.ids.empty())
        filters.push_back("id=" + join(sc.target.ids, [](const std::string& s) { return s; }));
    out += "target";
    for (const auto& f : filters)
        out += " " + f;
    out += "\n";
    for (const auto& ev : sc.events) {
        if (ev.signal.kind == SignalKind::disconnect)
            out += fmt::format("at {} disconnect\n", ev.time);
        else
            out += fmt::format("at {} {} {}\n", ev.time, to_string(ev.signal.kind), ev.signal.value);
    }
    return out;
}

namespace {

constexpr std::array<std::string_view, 5> kBuiltinNames{"uv1", "uv2", "ov1", "ov2", "disc"};

// Reference texts; data/scenarios/*.scn carry the same content.
constexpr std::string_view kUv1 = "name uv1\ntarget kind=WPP level=HV,MV\nat 0.5 p_set 0\nat 1.0 q_set -0.33\n";
constexpr std::string_view kUv2 = "name uv2\ntarget kind=WPP level=HV,MV\nat 0.5 p_set 0\nat 1.0 q_set -0.5\n";
constexpr std::string_view kOv1 = "name ov1\ntarget kind=WPP level=HV,MV\nat 1.0 q_set 0.33\n";
constexpr std::string_view kOv2 = "name ov2\ntarget kind=WPP level=HV,MV\nat 1.0 q_set 0.5\n";
constexpr std::string_view kDisc = "name disc\ntarget kind=WPP level=HV,MV\nat 1.0 disconnect\n";

} // namespace

std::span<const std::string_view> builtin_scenario_names() { return kBuiltinNames; }

ManipulationScenario build_scenario(std::string_view name) {
    if (name == "uv1")
        return parse_scenario(kUv1, "builtin:uv1");
    if (name == "uv2")
        return parse_scenario(kUv2, "builtin:uv2");
    if (name == "ov1")
        return parse_scenario(kOv1, "builtin:ov1");
    if (name == "ov2")
        return parse_scenario(kOv2, "builtin:ov2");
    if (name == "disc")
        return parse_scenario(kDisc, "builtin:disc");
    throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

ManipulationScenario baseline_scenario() { return {"none", {}, {}}; }

ManipulationScenario resolve_scenario(const std::string& name_or_path) {
    if (std::find(kBuiltinNames.begin(), kBuiltinNames.end(), name_or_path) != kBuiltinNames.end())
        return build_scenario(name_or_path);
    if (name_or_path == "none")
        return baseline_scenario();
    std::filesystem::path p(name_or_path);
    if (std::filesystem::exists(p))
        return load_scenario(p);
    throw ConfigError("unknown scenario '" + name_or_path + "' (neither built-in nor an existing file)");
}

ControlSignal clamp_signal(ControlSignal s, const grid::DerUnit&) {
    switch (s.kind) {
    case SignalKind::p_set: s.value = std::clamp(s.value, 0.0, 1.0); break;
    case SignalKind::q_set: s.value = std::clamp(s.value, -0.5, 0.5); break;
    case SignalKind::disconnect: s.value = 0.0; break;
    }
    return s;
}

std::vector<Delivery> dispatch(const ManipulationScenario& sc, const grid::GridModel& grid, Real t, Real h,
                               const SuccessHook& success) {
    std::vector<Delivery> out;
    const Real eps = 1e-6 * h;
    for (const auto& ev : sc.events) {
        if (!(ev.time > t - h + eps && ev.time <= t + eps))
            continue;
        for (std::size_t i = 0; i < grid.ders.size(); ++i) {
            const auto& der = grid.ders[i];
            if (!sc.target.matches(der))
                continue;
            if (success && !success(ev, der))
                continue;
            out.push_back({i, clamp_signal(ev.signal, der), ev.time});
        }
    }
    return out;
}

} // namespace dersim::attack
