#include "dersim/vsi.hpp"

#include "dersim/controls.hpp"

#include <algorithm>
#include <cmath>

namespace dersim::dynamics {

CurrentPair limit_current(Real i_d, Real i_q, Real i_max, bool q_priority) {
    if (i_d * i_d + i_q * i_q <= i_max * i_max)
        return {i_d, i_q};
    if (!q_priority) {
        Real s = i_max / std::hypot(i_d, i_q);
        return {i_d * s, i_q * s};
    }
    Real q = std::clamp(i_q, -i_max, i_max);
    Real d_max = std::sqrt(std::max(0.0, i_max * i_max - q * q));
    return {std::clamp(i_d, -d_max, d_max), q};
}

namespace {

Real frt_current(const VsiParams& p, Real vmag) {
    if (!p.frt_support)
        return 0.0;
    if (vmag < 1.0 - p.frt_deadband)
        return p.frt_gain * (1.0 - p.frt_deadband - vmag);
    if (vmag > 1.0 + p.frt_deadband)
        return -p.frt_gain * (vmag - 1.0 - p.frt_deadband);
    return 0.0;
}

StateVec<4> pack(const VsiState& x) {
    StateVec<4> v;
    v << x.x_d, x.x_q, x.v_dc, x.x_dc;
    return v;
}

void unpack(const StateVec<4>& v, VsiState& x) {
    x.x_d = v[0];
    x.x_q = v[1];
    x.v_dc = v[2];
    x.x_dc = v[3];
}

void project(StateVec<4>& v, const VsiParams& p, Real vmag, Real q_ref) {
    if (p.control == VsiControl::direct_pq) {
        auto c = limit_current(v[0], v[1], p.i_max, p.q_priority);
        v[0] = c.d;
        v[1] = c.q;
    } else {
        v[2] = std::clamp(v[2], 0.1, p.v_dc_max);
        Real iq = vmag > 1e-6 ? q_ref / vmag + frt_current(p, vmag) : 0.0;
        iq = std::clamp(iq, -p.i_max, p.i_max);
        Real d_max = std::sqrt(std::max(0.0, p.i_max * p.i_max - iq * iq));
        v[3] = std::clamp(v[3], -d_max, d_max);
    }
}

} // namespace

CurrentPair vsi_output(const VsiState& x, const VsiParams& p, Real vmag) {
    if (p.control == VsiControl::direct_pq) {
        auto meas = limit_current(x.x_d, x.x_q, p.i_max, p.q_priority);
        Real e_p = x.p_ref - vmag * meas.d;
        Real e_q = x.q_ref - vmag * meas.q;
        return limit_current(x.x_d + p.kp_p * e_p, x.x_q + p.kp_q * e_q + frt_current(p, vmag), p.i_max,
                             p.q_priority);
    }
    Real e = x.v_dc - 1.0;
    Real iq = vmag > 1e-6 ? x.q_ref / vmag : 0.0;
    return limit_current(x.x_dc + p.kp_dc * e, iq + frt_current(p, vmag), p.i_max, p.q_priority);
}

StateVec<4> vsi_derivatives(const VsiState& x, const VsiParams& p, Real vmag) {
    StateVec<4> dx = StateVec<4>::Zero();
    if (p.control == VsiControl::direct_pq) {
        auto meas = limit_current(x.x_d, x.x_q, p.i_max, p.q_priority);
        dx[0] = p.ki_p * (x.p_ref - vmag * meas.d);
        dx[1] = p.ki_q * (x.q_ref - vmag * meas.q);
        return dx;
    }
    auto out = vsi_output(x, p, vmag);
    Real dv = (x.p_ref - vmag * out.d) / (p.c_dc * x.v_dc);
    if (x.v_dc >= p.v_dc_max && dv > 0.0)
        dv = 0.0; // surplus power is curtailed at the DC side
    dx[2] = dv;
    dx[3] = p.ki_dc * (x.v_dc - 1.0);
    return dx;
}

VsiState vsi_init(const VsiParams& p, Complex s, Real vmag) {
    if (vmag <= 0.0)
        throw NumericalError("VSI initialization at zero terminal voltage");
    VsiState x;
    x.p_available = std::max(0.0, s.real());
    x.p_target = x.p_ref = s.real();
    x.q_target = x.q_ref = s.imag();
    Real id = s.real() / vmag;
    Real iq = s.imag() / vmag;
    if (std::hypot(id, iq) > p.i_max + 1e-12)
        throw NumericalError("VSI initialization needs a current above I_max");
    if (p.control == VsiControl::direct_pq) {
        x.x_d = id;
        x.x_q = iq;
    } else {
        x.v_dc = 1.0;
        x.x_dc = id;
    }
    x.out = {id, iq};
    return x;
}

VsiStepResult vsi_step(const VsiState& x0, const VsiParams& p, Complex v_term, Real p_set, Real q_set, Real h,
                       Integrator method) {
    VsiState x = x0;
    const Real vmag = std::abs(v_term);
    x.p_target = std::min(p_set, x.p_available);
    x.q_target = q_set;
    x.p_ref = slope_limit(x.p_ref, x.p_target, p.p_slope, h);
    x.q_ref = q_lag(x.q_ref, x.q_target, p.q_lag, h);

    auto f = [&](const StateVec<4>& v) {
        VsiState tmp = x;
        unpack(v, tmp);
        return vsi_derivatives(tmp, p, vmag);
    };
    auto proj = [&](StateVec<4>& v) { project(v, p, vmag, x.q_ref); };
    StateVec<4> v0 = pack(x);
    if (p.control == VsiControl::direct_pq) {
        // only the two PI states move; integrate the reduced system
        StateVec<2> r0(v0[0], v0[1]);
        auto f2 = [&](const StateVec<2>& r) {
            StateVec<4> full = v0;
            full[0] = r[0];
            full[1] = r[1];
            StateVec<4> d = f(full);
            return StateVec<2>(d[0], d[1]);
        };
        auto proj2 = [&](StateVec<2>& r) {
            auto c = limit_current(r[0], r[1], p.i_max, p.q_priority);
            r[0] = c.d;
            r[1] = c.q;
        };
        StateVec<2> r1 = integrate_step<2>(method, r0, h, f2, proj2);
        x.x_d = r1[0];
        x.x_q = r1[1];
    } else {
        unpack(integrate_step<4>(method, v0, h, f, proj), x);
    }
    x.out = vsi_output(x, p, vmag);
    return {x, vsi_current(x.out, v_term)};
}

} // namespace dersim::dynamics
