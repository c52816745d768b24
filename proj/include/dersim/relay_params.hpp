#pragma once

#include "dersim/common.hpp"

#include <filesystem>
#include <vector>

namespace dersim::protection {

/// Ride-through characteristic: for each voltage level, the longest time a unit
/// has to stay connected while the voltage stays at or beyond that level.
/// Between points the duration is interpolated linearly.
struct FrtCurve {
    enum class Side { low, high };
    struct Point {
        Real voltage;
        Real duration;
    };

    Side side = Side::low;
    std::vector<Point> points;

    /// Levels at which the relay keeps a timer; sloped segments are sampled at `resolution` pu.
    std::vector<Point> sampled(Real resolution = 0.01) const;
    bool empty() const noexcept { return points.empty(); }
};

FrtCurve default_lvrt_curve();
FrtCurve default_hvrt_curve();
/// CSV with columns voltage_pu,duration_s.
FrtCurve load_frt_curve(const std::filesystem::path& path, FrtCurve::Side side);
/// Throws ConfigError unless the curve is monotone in the ride-through sense.
void validate(const FrtCurve& curve);

struct RelayParams {
    Real uv_threshold = 0.9;
    Real ov_threshold = 1.1;
    Real uv_delay = 60.0;
    Real ov_delay = 60.0;
    bool qv_enabled = true;
    Real qv_threshold = 0.85;
    Real qv_delay = 0.5;
    Real f_min = 47.5;
    Real f_max = 51.5;
    Real f_delay = 0.0;
    FrtCurve lvrt = default_lvrt_curve();
    FrtCurve hvrt = default_hvrt_curve();
};

/// Band-edge thresholds for a unit connected at `level` (MV 0.9/1.1, HV 0.85/1.15).
RelayParams default_relay_params(VoltageLevel level, bool qv_enabled);
void validate(const RelayParams& p);

} // namespace dersim::protection
