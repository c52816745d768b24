#include "dersim/assessment.hpp"

#include <algorithm>
#include <cmath>

namespace dersim::assessment {

Real deviation(Real x_extreme, Real boundary, Real ref) {
    if (ref == boundary)
        throw ConfigError("deviation is undefined when the reference equals the boundary");
    return std::abs(boundary - x_extreme) / std::abs(ref - boundary);
}

std::optional<VoltageBand> band_for(VoltageLevel level) {
    switch (level) {
    case VoltageLevel::EHV: return std::nullopt;
    case VoltageLevel::HV: return VoltageBand{0.85, 1.15};
    case VoltageLevel::MV:
    case VoltageLevel::LV: return VoltageBand{0.9, 1.1};
    }
    return std::nullopt;
}

int classify_severity(const RunMetrics& m) {
    if (!m.violation_during)
        return 0;
    const bool manip = m.trips_manipulated.count > 0;
    const bool other = m.trips_other.count > 0;
    if (!manip && !other)
        return 1;
    if (!(manip && other) || !(m.d_max_during > 0.5))
        return 2;
    if (!(m.d_max_during > 1.0))
        return 3;
    return m.violation_after_tripping ? 5 : 4;
}

std::vector<std::string> severity_annotations(const RunMetrics& m) {
    std::vector<std::string> out;
    const bool manip = m.trips_manipulated.count > 0;
    const bool other = m.trips_other.count > 0;
    if (!m.violation_during && (manip || other))
        out.emplace_back("trips without band violation in the assessment window");
    if (m.violation_during && other && !manip)
        out.emplace_back("only non-targeted units tripped; rated 2");
    if (m.violation_during && manip && other && !(m.d_max_during > 0.5))
        out.emplace_back("both trip classes with d <= 0.5; rated 2");
    if (m.violation_after_tripping && !(manip && other && m.d_max_during > 1.0))
        out.emplace_back("band still violated after tripping");
    return out;
}

std::size_t TripAttribution::manipulated_count() const {
    return static_cast<std::size_t>(
        std::count_if(trips.begin(), trips.end(), [](const AttributedTrip& t) { return t.manipulated; }));
}

std::size_t TripAttribution::other_count() const { return trips.size() - manipulated_count(); }

TripAttribution attribute_trips(const dynamics::TraceSet& trace, const grid::GridModel& grid,
                                const attack::ManipulationScenario& scenario) {
    TripAttribution out;
    const bool active = !scenario.events.empty();
    for (const auto& t : trace.trips)
        out.trips.push_back({t, active && scenario.target.matches(grid.ders.at(t.der))});
    out.commanded = trace.disconnects;
    return out;
}

Real lost_p(std::span<const std::size_t> units, std::span<const Real> pre_event_p_mw) {
    Real sum = 0.0;
    for (auto i : units)
        sum += pre_event_p_mw[i];
    return sum;
}

std::vector<std::size_t> units_lost(const dynamics::TraceSet& trace) {
    std::vector<std::size_t> out;
    if (trace.steps() == 0)
        return out;
    const auto last = trace.steps() - 1;
    for (std::size_t i = 0; i < trace.n_der; ++i)
        if (!trace.on(last, i))
            out.push_back(i);
    return out;
}

namespace {

// largest deviation at one sample; negative when every monitored bus is in band
Real sample_deviation(const dynamics::TraceSet& trace, const std::vector<std::optional<VoltageBand>>& bands,
                      std::size_t k, std::size_t& bus) {
    Real worst = -1.0;
    for (std::size_t b = 0; b < trace.n_bus; ++b) {
        if (!bands[b])
            continue;
        const Real v = trace.v(k, b);
        Real d = -1.0;
        if (v > bands[b]->upper)
            d = deviation(v, bands[b]->upper);
        else if (v < bands[b]->lower)
            d = deviation(v, bands[b]->lower);
        if (d > worst) {
            worst = d;
            bus = b;
        }
    }
    return worst;
}

} // namespace

RunMetrics compute_metrics(const dynamics::TraceSet& trace, const grid::GridModel& grid,
                           const attack::ManipulationScenario& scenario, const MetricsOptions& options) {
    RunMetrics m;
    if (trace.n_bus != grid.buses.size() || trace.n_der != grid.ders.size())
        throw ConfigError("trace does not belong to this grid");
    std::vector<std::optional<VoltageBand>> bands;
    for (const auto& b : grid.buses)
        bands.push_back(band_for(b.level));

    const Real start = scenario.start_time();
    const Real t_end = trace.steps() ? trace.time.back() : 0.0;
    const Real eps = 1e-9;
    bool after_ok = !trace.trips.empty() && trace.steps() > 0;
    for (std::size_t k = 0; k < trace.steps(); ++k) {
        const Real t = trace.time[k];
        const bool in_window = t >= start - eps;
        const bool trailing = t >= t_end - options.trailing_window - eps;
        if (!in_window && !trailing)
            continue;
        std::size_t bus = 0;
        const Real d = sample_deviation(trace, bands, k, bus);
        if (in_window && d > 0.0) {
            m.violation_during = true;
            if (d > m.d_max_during) {
                m.d_max_during = d;
                m.d_bus = grid.buses[bus].id;
                m.d_time = t;
            }
        }
        if (trailing && !(d > 0.0))
            after_ok = false;
    }
    m.violation_after_tripping = after_ok || (trace.collapsed && !trace.trips.empty());

    const auto attribution = attribute_trips(trace, grid, scenario);
    for (const auto& t : attribution.trips) {
        auto& tally = t.manipulated ? m.trips_manipulated : m.trips_other;
        ++tally.count;
        tally.p_mw += trace.initial_der_p_mw[t.trip.der];
    }
    for (const auto& c : attribution.commanded) {
        ++m.commanded.count;
        m.commanded.p_mw += trace.initial_der_p_mw[c.der];
    }
    m.lost_p_total = lost_p(units_lost(trace), trace.initial_der_p_mw);
    return m;
}

SeverityReport assess(const dynamics::TraceSet& trace, const grid::GridModel& grid,
                      const attack::ManipulationScenario& scenario, const MetricsOptions& options) {
    SeverityReport r;
    r.grid = grid.name;
    r.study_case = grid.applied_case;
    r.scenario = scenario.name;
    r.metrics = compute_metrics(trace, grid, scenario, options);
    r.severity = classify_severity(r.metrics);
    r.annotations = severity_annotations(r.metrics);
    r.collapsed = trace.collapsed;
    r.collapse_time = trace.collapse_time;

    const auto attribution = attribute_trips(trace, grid, scenario);
    for (const auto& t : attribution.trips)
        r.trip_log.push_back({t.trip.time, grid.ders[t.trip.der].id, protection::to_string(t.trip.cause),
                              t.manipulated, trace.initial_der_p_mw[t.trip.der]});
    for (const auto& c : attribution.commanded)
        r.trip_log.push_back({c.time, grid.ders[c.der].id, "disconnect", true, trace.initial_der_p_mw[c.der]});
    std::stable_sort(r.trip_log.begin(), r.trip_log.end(),
                     [](const TripLogEntry& a, const TripLogEntry& b) { return a.time < b.time; });
    return r;
}

} // namespace dersim::assessment
