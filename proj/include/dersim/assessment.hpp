#pragma once

// Post-run assessment: voltage-band deviation, trip attribution, lost active
// power and the 0-5 severity index.

#include "dersim/attack.hpp"
#include "dersim/grid_model.hpp"
#include "dersim/simulation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dersim::assessment {

/// d = |boundary - extreme| / |ref - boundary|. Throws ConfigError when ref == boundary.
Real deviation(Real x_extreme, Real boundary, Real ref = 1.0);

struct VoltageBand {
    Real lower = 0.9;
    Real upper = 1.1;
};

/// Assessment band of a voltage level; EHV buses are not monitored (nullopt).
std::optional<VoltageBand> band_for(VoltageLevel level);

struct TripTally {
    std::size_t count = 0;
    Real p_mw = 0.0; ///< pre-event P of the units concerned
};

struct RunMetrics {
    Real d_max_during = 0.0;
    std::string d_bus;     ///< bus of the largest deviation, empty without violation
    Real d_time = 0.0;
    bool violation_during = false;
    bool violation_after_tripping = false;
    TripTally trips_manipulated;
    TripTally trips_other;
    TripTally commanded; ///< disconnect commands; not protection trips
    Real lost_p_total = 0.0;
};

/// Highest Table-style row whose criteria all hold:
///   0 nothing; 1 band violation; 2 + protection trips;
///   3 + trips of both classes and d > 0.5; 4 as 3 with d > 1; 5 as 4 with the
///   band still violated after tripping.
/// Row 2 accepts trips of either class: a run where only non-targeted units
/// trip (e.g. a disconnect scenario) has no better-fitting row.
int classify_severity(const RunMetrics& m);

/// Notes on runs that no row describes exactly (empty for a clean fit).
std::vector<std::string> severity_annotations(const RunMetrics& m);

struct AttributedTrip {
    dynamics::TripRecord trip;
    bool manipulated = false;
};

struct TripAttribution {
    std::vector<AttributedTrip> trips;
    std::vector<dynamics::DisconnectRecord> commanded;
    std::size_t manipulated_count() const;
    std::size_t other_count() const;
};

/// A trip is "manipulated" when its unit matches the scenario selector. A
/// scenario without events manipulates nothing.
TripAttribution attribute_trips(const dynamics::TraceSet& trace, const grid::GridModel& grid,
                                const attack::ManipulationScenario& scenario);

/// Sum of pre-event P (MW) over the listed units.
Real lost_p(std::span<const std::size_t> units, std::span<const Real> pre_event_p_mw);
/// Units not injecting at the end of the trace.
std::vector<std::size_t> units_lost(const dynamics::TraceSet& trace);

struct MetricsOptions {
    Real trailing_window = 30.0; ///< s, for the after-tripping check
};

RunMetrics compute_metrics(const dynamics::TraceSet& trace, const grid::GridModel& grid,
                           const attack::ManipulationScenario& scenario, const MetricsOptions& options = {});

struct TripLogEntry {
    Real time = 0.0;
    std::string der;
    std::string cause; ///< relay cause, or "disconnect" for a command
    bool manipulated = false;
    Real p_mw = 0.0;
};

struct SeverityReport {
    std::string grid;
    std::string study_case;
    std::string scenario;
    int severity = 0;
    RunMetrics metrics;
    std::vector<std::string> annotations;
    std::vector<TripLogEntry> trip_log;
    bool collapsed = false;
    Real collapse_time = 0.0;
};

SeverityReport assess(const dynamics::TraceSet& trace, const grid::GridModel& grid,
                      const attack::ManipulationScenario& scenario, const MetricsOptions& options = {});

} // namespace dersim::assessment
