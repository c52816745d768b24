#pragma once

// Discrete automata evaluated once per simulation step: OLTC controllers and
// per-DER plant protection (under/overvoltage, reactive undervoltage,
// frequency, LVRT/HVRT ride-through curves). Trips latch.

#include "dersim/grid_model.hpp"
#include "dersim/relay_params.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dersim::protection {

// ---------------------------------------------------------------------------
// OLTC

/// Trigger-timer characteristic: the delay before a tap given the stage delay
/// from the descriptor and the present deviation beyond the deadband edge (pu).
using TimeCharacteristic = std::function<Real(Real stage_delay, Real deviation)>;

/// Constant delay, independent of the deviation.
TimeCharacteristic constant_characteristic();
/// Delay scaled by deadband/deviation (shorter for larger deviations), floored at `min_delay`.
TimeCharacteristic inverse_characteristic(Real deadband, Real min_delay = 1.0);

enum class TapAction { none, up, down };

struct OltcController {
    grid::OltcDescriptor descriptor;
    int tap = 0;
    Real timer = 0.0;         ///< time accumulated outside the deadband
    bool violating = false;   ///< previous sample was outside the deadband
    int direction = 0;        ///< +1 above, -1 below the deadband
    bool consecutive = false; ///< a tap has occurred in the present violation episode
    Real blocked_until = -1.0;
    TimeCharacteristic characteristic = constant_characteristic();

    OltcController() = default;
    OltcController(const grid::OltcDescriptor& d, int initial_tap) : descriptor(d), tap(initial_tap) {}
};

/// Advances the controller with the controlled-bus voltage sampled at time t.
/// "up" raises the HV-side ratio (lowers the controlled voltage).
TapAction oltc_update(OltcController& ctrl, Real v_c, Real t, Real h);

// ---------------------------------------------------------------------------
// relays

enum class TripCause { uv, ov, qv, freq, lvrt, hvrt };
const char* to_string(TripCause cause);

struct TripEvent {
    Real time = 0.0;
    TripCause cause = TripCause::uv;
};

/// Time a unit has spent at or beyond each ride-through level.
class FrtTracker {
public:
    FrtTracker() = default;
    explicit FrtTracker(const FrtCurve& curve, Real resolution = 0.01);

    /// Returns true when some level's allowed duration has elapsed.
    bool update(Real v, Real h);
    void reset();
    bool empty() const noexcept { return levels_.empty(); }

private:
    FrtCurve::Side side_ = FrtCurve::Side::low;
    std::vector<FrtCurve::Point> levels_;
    std::vector<Real> timers_;
    std::vector<char> active_;
};

struct ProtectionRelay {
    RelayParams params;
    Real uv_timer = 0.0, ov_timer = 0.0, qv_timer = 0.0, f_timer = 0.0;
    bool uv_active = false, ov_active = false, qv_active = false, f_active = false;
    FrtTracker lvrt, hvrt;
    std::optional<TripEvent> trip;

    ProtectionRelay() = default;
    explicit ProtectionRelay(const RelayParams& p);
};

/// Samples the relay inputs at time t. Returns the trip the first time one occurs;
/// afterwards the relay is latched and returns nothing.
std::optional<TripEvent> relay_update(ProtectionRelay& relay, Real v_term, Real freq_hz, Real t, Real h);

enum class RideThrough { must_stay_connected, may_trip };

struct FrtStatus {
    RideThrough status = RideThrough::must_stay_connected;
    Real since = 0.0; ///< time at which the unit became free to trip
};

/// Evaluates a voltage history sampled every h seconds (first sample at t = 0) against a curve.
FrtStatus frt_check(const FrtCurve& curve, std::span<const Real> v_history, Real h);

} // namespace dersim::protection
