#include "dersim/protection.hpp"

#include <algorithm>
#include <cmath>

namespace dersim::protection {

namespace {
constexpr Real kTimeEps = 1e-9;
} // namespace

TimeCharacteristic constant_characteristic() {
    return [](Real stage_delay, Real) { return stage_delay; };
}

TimeCharacteristic inverse_characteristic(Real deadband, Real min_delay) {
    return [deadband, min_delay](Real stage_delay, Real deviation) {
        if (deviation <= 0.0)
            return stage_delay;
        return std::max(min_delay, stage_delay * deadband / (deadband + deviation));
    };
}

TapAction oltc_update(OltcController& ctrl, Real v_c, Real t, Real h) {
    const auto& d = ctrl.descriptor;
    const bool above = v_c > d.upper();
    const bool below = v_c < d.lower();
    if (!above && !below) {
        ctrl.timer = 0.0;
        ctrl.violating = false;
        ctrl.consecutive = false;
        return TapAction::none;
    }
    const int direction = above ? 1 : -1;
    if (!ctrl.violating || direction != ctrl.direction) {
        ctrl.violating = true;
        ctrl.direction = direction;
        ctrl.consecutive = false;
        ctrl.timer = 0.0;
    } else {
        ctrl.timer += h;
    }
    Real deviation = above ? v_c - d.upper() : d.lower() - v_c;
    Real delay = ctrl.characteristic(ctrl.consecutive ? d.next_delay : d.first_delay, deviation);
    if (ctrl.timer < delay - kTimeEps || t < ctrl.blocked_until - kTimeEps)
        return TapAction::none;
    if ((above && ctrl.tap >= d.tap_max) || (below && ctrl.tap <= d.tap_min))
        return TapAction::none;
    ctrl.tap += above ? 1 : -1;
    ctrl.timer = 0.0;
    ctrl.consecutive = true;
    ctrl.blocked_until = t + d.switch_time;
    return above ? TapAction::up : TapAction::down;
}

const char* to_string(TripCause cause) {
    switch (cause) {
    case TripCause::uv: return "uv";
    case TripCause::ov: return "ov";
    case TripCause::qv: return "qv";
    case TripCause::freq: return "freq";
    case TripCause::lvrt: return "lvrt";
    case TripCause::hvrt: return "hvrt";
    }
    return "?";
}

FrtTracker::FrtTracker(const FrtCurve& curve, Real resolution)
    : side_(curve.side), levels_(curve.sampled(resolution)), timers_(levels_.size(), 0.0),
      active_(levels_.size(), 0) {}

void FrtTracker::reset() {
    std::fill(timers_.begin(), timers_.end(), 0.0);
    std::fill(active_.begin(), active_.end(), 0);
}

bool FrtTracker::update(Real v, Real h) {
    bool expired = false;
    for (std::size_t i = 0; i < levels_.size(); ++i) {
        bool beyond = side_ == FrtCurve::Side::low ? v <= levels_[i].voltage : v >= levels_[i].voltage;
        if (!beyond) {
            active_[i] = 0;
            timers_[i] = 0.0;
            continue;
        }
        if (active_[i])
            timers_[i] += h;
        else
            active_[i] = 1;
        if (timers_[i] >= levels_[i].duration - kTimeEps)
            expired = true;
    }
    return expired;
}

ProtectionRelay::ProtectionRelay(const RelayParams& p) : params(p), lvrt(p.lvrt), hvrt(p.hvrt) {}

namespace {

bool timed(bool condition, bool& active, Real& timer, Real delay, Real h) {
    if (!condition) {
        active = false;
        timer = 0.0;
        return false;
    }
    if (active)
        timer += h;
    else
        active = true;
    return timer >= delay - kTimeEps;
}

} // namespace

std::optional<TripEvent> relay_update(ProtectionRelay& r, Real v, Real f, Real t, Real h) {
    if (r.trip)
        return std::nullopt;
    const auto& p = r.params;
    bool uv = timed(v < p.uv_threshold, r.uv_active, r.uv_timer, p.uv_delay, h);
    bool ov = timed(v > p.ov_threshold, r.ov_active, r.ov_timer, p.ov_delay, h);
    bool qv = timed(p.qv_enabled && v < p.qv_threshold, r.qv_active, r.qv_timer, p.qv_delay, h);
    bool fr = timed(f < p.f_min || f > p.f_max, r.f_active, r.f_timer, p.f_delay, h);
    bool hv = r.hvrt.update(v, h);
    bool lv = r.lvrt.update(v, h);

    // fastest functions first when several expire in the same sample
    std::optional<TripCause> cause;
    if (hv)
        cause = TripCause::hvrt;
    else if (lv)
        cause = TripCause::lvrt;
    else if (fr)
        cause = TripCause::freq;
    else if (qv)
        cause = TripCause::qv;
    else if (ov)
        cause = TripCause::ov;
    else if (uv)
        cause = TripCause::uv;
    if (!cause)
        return std::nullopt;
    r.trip = TripEvent{t, *cause};
    return r.trip;
}

FrtStatus frt_check(const FrtCurve& curve, std::span<const Real> v_history, Real h) {
    FrtTracker tracker(curve);
    for (std::size_t k = 0; k < v_history.size(); ++k)
        if (tracker.update(v_history[k], h))
            return {RideThrough::may_trip, static_cast<Real>(k) * h};
    return {};
}

} // namespace dersim::protection
