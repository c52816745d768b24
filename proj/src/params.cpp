#include "dersim/device_params.hpp"
#include "dersim/relay_params.hpp"
#include "dersim/csv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dersim {

const char* to_string(VoltageLevel level) {
    switch (level) {
    case VoltageLevel::EHV: return "EHV";
    case VoltageLevel::HV: return "HV";
    case VoltageLevel::MV: return "MV";
    case VoltageLevel::LV: return "LV";
    }
    return "?";
}

} // namespace dersim

namespace dersim::dynamics {

Real lag_from_rise_time_0_90(Real t_0_90) { return t_0_90 / std::log(10.0); }

void validate(const VsiParams& p, VoltageLevel level) {
    if (p.i_max < 1.0)
        throw ConfigError("VSI: i_max must be >= 1 pu");
    if (p.q_lag <= 0.0 || p.ki_p < 0.0 || p.ki_q < 0.0 || p.kp_p < 0.0 || p.kp_q < 0.0)
        throw ConfigError("VSI: gains and Q lag must be positive");
    // grid-code response bands for new set values
    if (level == VoltageLevel::HV || level == VoltageLevel::EHV) {
        Real rise = p.q_lag * std::log(10.0);
        if (rise < 1.0 - 1e-9 || rise > 60.0 + 1e-9)
            throw ConfigError("VSI: HV unit Q rise time 0-90% must lie in [1 s, 60 s]");
    } else {
        Real three_t = 3.0 * p.q_lag;
        if (three_t < 6.0 - 1e-9 || three_t > 60.0 + 1e-9)
            throw ConfigError("VSI: MV unit Q lag must satisfy 6 s <= 3T <= 60 s");
    }
    if (p.p_slope < 0.0033 - 1e-12 || p.p_slope > 0.0066 + 1e-12)
        throw ConfigError("VSI: P slope must lie in [0.0033, 0.0066] pu/s");
    if (p.control == VsiControl::dc_link && (p.c_dc <= 0.0 || p.v_dc_max <= 1.0))
        throw ConfigError("VSI: DC-link capacity must be positive and v_dc_max > 1");
}

void validate(const SgParams& p) {
    if (!(p.xd_st < p.xd_t && p.xd_t < p.xd))
        throw ConfigError("SG: d-axis reactances must satisfy x\" < x' < x");
    if (!(p.xq_st < p.xq_t && p.xq_t < p.xq))
        throw ConfigError("SG: q-axis reactances must satisfy x\" < x' < x");
    for (Real t : {p.td0_t, p.tq0_t, p.td0_st, p.tq0_st, p.h, p.gov_t3, p.turbine_t, p.exciter_t, p.q_lag})
        if (t <= 0.0)
            throw ConfigError("SG: time constants and inertia must be positive");
    if (p.vf_min >= p.vf_max || p.p_min >= p.p_max || p.gov_rate <= 0.0)
        throw ConfigError("SG: limits must be ordered and the P_m rate limit positive");
}

void validate(const EhvEquivalentParams& p) {
    if (p.h <= 0.0 || p.s_rated_mva <= 0.0 || p.xd_t <= 0.0 || p.damping < 0.0)
        throw ConfigError("EHV equivalent: H, rating and reactance must be positive");
}

} // namespace dersim::dynamics

namespace dersim::protection {

std::vector<FrtCurve::Point> FrtCurve::sampled(Real resolution) const {
    std::vector<Point> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        out.push_back(points[i]);
        if (i + 1 == points.size())
            break;
        const auto& a = points[i];
        const auto& b = points[i + 1];
        Real span = b.voltage - a.voltage;
        int n = static_cast<int>(std::floor(std::abs(span) / resolution));
        if (a.duration == b.duration)
            continue;
        for (int k = 1; k < n; ++k) {
            Real frac = static_cast<Real>(k) / n;
            out.push_back({a.voltage + frac * span, a.duration + frac * (b.duration - a.duration)});
        }
    }
    return out;
}

FrtCurve default_lvrt_curve() {
    // 150 ms at (near) zero voltage, then linear recovery to 0.85 pu at 3 s
    return {FrtCurve::Side::low, {{0.0, 0.15}, {0.30, 0.15}, {0.85, 3.0}}};
}

FrtCurve default_hvrt_curve() {
    return {FrtCurve::Side::high, {{1.20, 0.1}, {1.30, 0.0}}};
}

void validate(const FrtCurve& curve) {
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        if (curve.points[i].duration < 0.0)
            throw ConfigError("FRT curve: durations must be non-negative");
        if (i == 0)
            continue;
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        if (b.voltage <= a.voltage)
            throw ConfigError("FRT curve: voltages must be strictly increasing");
        // LVRT: deeper dips may be shorter; HVRT: higher swells may be shorter
        bool ok = curve.side == FrtCurve::Side::low ? b.duration >= a.duration : b.duration <= a.duration;
        if (!ok)
            throw ConfigError("FRT curve: durations not monotone in the ride-through sense");
    }
}

FrtCurve load_frt_curve(const std::filesystem::path& path, FrtCurve::Side side) {
    auto table = CsvTable::read(path);
    FrtCurve curve{side, {}};
    for (std::size_t r = 0; r < table.rows(); ++r)
        curve.points.push_back({table.real(r, "voltage_pu"), table.real(r, "duration_s")});
    try {
        validate(curve);
    } catch (const ConfigError& e) {
        throw TableError(TableError::Kind::invariant, path, 0, e.what());
    }
    return curve;
}

RelayParams default_relay_params(VoltageLevel level, bool qv_enabled) {
    RelayParams p;
    if (level == VoltageLevel::HV || level == VoltageLevel::EHV) {
        p.uv_threshold = 0.85;
        p.ov_threshold = 1.15;
    }
    p.qv_enabled = qv_enabled;
    return p;
}

void validate(const RelayParams& p) {
    if (!(p.uv_threshold < p.ov_threshold) || !(p.f_min < p.f_max))
        throw ConfigError("relay: thresholds must be ordered");
    if (p.qv_enabled && p.qv_threshold > p.uv_threshold + 1e-12)
        throw ConfigError("relay: Q(V) threshold must not exceed the undervoltage threshold");
    if (p.uv_delay < 0 || p.ov_delay < 0 || p.qv_delay < 0 || p.f_delay < 0)
        throw ConfigError("relay: delays must be non-negative");
    validate(p.lvrt);
    validate(p.hvrt);
    if (p.lvrt.side != FrtCurve::Side::low || p.hvrt.side != FrtCurve::Side::high)
        throw ConfigError("relay: LVRT/HVRT curve sides swapped");
}

} // namespace dersim::protection
