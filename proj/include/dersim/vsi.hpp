#pragma once

// Voltage source inverter outer control at RMS time scale. The inner current
// loop is algebraic, so the converter injects the (limited) current set
// values directly. All quantities are on the unit's own base P_inst.

#include "dersim/device_params.hpp"
#include "dersim/integrator.hpp"

namespace dersim::dynamics {

struct CurrentPair {
    Real d = 0.0; ///< active component, along the terminal voltage
    Real q = 0.0; ///< reactive component, positive = injecting Q
};

/// Current limitation. With Q priority, I_q is kept (up to I_max) and I_d is
/// reduced to fit the circle; otherwise both are scaled down proportionally.
CurrentPair limit_current(Real i_d, Real i_q, Real i_max, bool q_priority = true);

struct VsiState {
    Real p_target = 0.0; ///< min(P set value, available power)
    Real q_target = 0.0;
    Real p_available = 0.0;
    Real p_ref = 0.0; ///< after the slope limiter
    Real q_ref = 0.0; ///< after the set-value lag
    Real x_d = 0.0;   ///< P-loop integrator (direct_pq)
    Real x_q = 0.0;   ///< Q-loop integrator (direct_pq)
    Real v_dc = 1.0;  ///< DC-link voltage (dc_link)
    Real x_dc = 0.0;  ///< DC-voltage loop integrator (dc_link)
    CurrentPair out;  ///< currents after limiting, valid for the last step's voltage
};

/// Equilibrium state injecting `s` (unit pu, generator convention) at voltage magnitude `vmag`.
VsiState vsi_init(const VsiParams& p, Complex s, Real vmag);

/// Output currents for the present state at voltage magnitude `vmag`.
CurrentPair vsi_output(const VsiState& x, const VsiParams& p, Real vmag);

/// Time derivatives of the continuous states, in the order used by vsi_step.
StateVec<4> vsi_derivatives(const VsiState& x, const VsiParams& p, Real vmag);

struct VsiStepResult {
    VsiState state;
    Complex current; ///< injected current, unit pu, network frame
};

/// Advances references and PI states over one step with `v_term` frozen.
/// `p_set`/`q_set` are in unit pu; p_set is capped by the available power.
VsiStepResult vsi_step(const VsiState& x, const VsiParams& p, Complex v_term, Real p_set, Real q_set, Real h,
                       Integrator method = Integrator::trapezoidal);

/// Injected current for the stored outputs at terminal voltage `v` (follows the voltage angle).
inline Complex vsi_current(const CurrentPair& c, Complex v) {
    Real m = std::abs(v);
    if (m < 1e-9)
        return {};
    return Complex(c.d, -c.q) * v / m;
}

} // namespace dersim::dynamics
