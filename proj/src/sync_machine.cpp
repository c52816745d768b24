#include "dersim/sync_machine.hpp"

#include "dersim/controls.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace dersim::dynamics {

namespace {

// network frame -> machine dq frame: (v_d + j v_q) = V e^{-j(delta - pi/2)}
Complex to_dq(Complex v, Real delta) { return v * std::polar(1.0, -(delta - kPi / 2.0)); }

Eigen::Matrix2d stator_inverse(const SgParams& p) {
    Eigen::Matrix2d a;
    a << p.ra, -p.xq_st, p.xd_st, p.ra;
    return a.inverse();
}

Eigen::Matrix2d rotation(Real phi) {
    Eigen::Matrix2d r;
    r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    return r;
}

struct Stator {
    Real id, iq, vd, vq;
};

Stator stator(const SgState& x, const SgParams& p, Complex v) {
    Complex vdq = to_dq(v, x.delta);
    Eigen::Vector2d rhs(x.ed_st - vdq.real(), x.eq_st - vdq.imag());
    Eigen::Vector2d i = stator_inverse(p) * rhs;
    return {i[0], i[1], vdq.real(), vdq.imag()};
}

StateVec<10> pack(const SgState& x) {
    StateVec<10> v;
    v << x.delta, x.dw, x.eq_t, x.ed_t, x.eq_st, x.ed_st, x.gov, x.pm, x.x_avr, x.vf;
    return v;
}

void unpack(const StateVec<10>& v, SgState& x) {
    x.delta = v[0];
    x.dw = v[1];
    x.eq_t = v[2];
    x.ed_t = v[3];
    x.eq_st = v[4];
    x.ed_st = v[5];
    x.gov = v[6];
    x.pm = v[7];
    x.x_avr = v[8];
    x.vf = v[9];
}

Real avr_error(const SgState& x, const SgParams& p, Complex v, const Stator& s) {
    if (p.avr_mode == AvrMode::voltage)
        return x.v_ref - std::abs(v);
    Real q = s.vq * s.id - s.vd * s.iq;
    return x.q_ref - q;
}

} // namespace

SgState sg_init(const SgParams& p, Complex v, Complex s) {
    if (std::abs(v) <= 0.0)
        throw NumericalError("SG initialization at zero terminal voltage");
    Complex i = std::conj(s / v);
    SgState x;
    x.delta = std::arg(v + Complex(p.ra, p.xq) * i);
    Complex vdq = to_dq(v, x.delta);
    Complex idq = to_dq(i, x.delta);
    Real vd = vdq.real(), vq = vdq.imag(), id = idq.real(), iq = idq.imag();
    x.dw = 0.0;
    x.ed_t = (p.xq - p.xq_t) * iq;
    x.ed_st = x.ed_t + (p.xq_t - p.xq_st) * iq;
    x.eq_st = vq + p.ra * iq + p.xd_st * id;
    x.eq_t = x.eq_st + (p.xd_t - p.xd_st) * id;
    x.vf = x.eq_t + (p.xd - p.xd_t) * id;
    if (x.vf < p.vf_min || x.vf > p.vf_max)
        throw NumericalError(fmt::format("SG initialization infeasible: field voltage {:.3f} pu outside [{}, {}]",
                                         x.vf, p.vf_min, p.vf_max));
    x.x_avr = x.vf;
    Real pe = vd * id + vq * iq + p.ra * (id * id + iq * iq);
    if (pe < p.p_min - 1e-9 || pe > p.p_max + 1e-9)
        throw NumericalError(fmt::format("SG initialization infeasible: P_m {:.3f} pu outside governor limits", pe));
    x.pm = x.gov = x.p_ref = pe;
    x.q_target = x.q_ref = s.imag();
    x.v_ref = std::abs(v);
    return x;
}

NortonPort sg_norton(const SgState& x, const SgParams& p) {
    Eigen::Matrix2d ainv = stator_inverse(p);
    Real phi = x.delta - kPi / 2.0;
    Eigen::Matrix2d r = rotation(phi);
    NortonPort port;
    port.y = r * ainv * r.transpose();
    Eigen::Vector2d src = r * (ainv * Eigen::Vector2d(x.ed_st, x.eq_st));
    port.i_src = Complex(src[0], src[1]);
    return port;
}

StateVec<10> sg_derivatives(const SgState& x, const SgParams& p, Complex v, Real omega_base) {
    const Stator s = stator(x, p, v);
    StateVec<10> d;
    Real pe = s.vd * s.id + s.vq * s.iq + p.ra * (s.id * s.id + s.iq * s.iq);
    d[0] = omega_base * x.dw;
    d[1] = (x.pm - pe - p.damping * x.dw) / (2.0 * p.h);
    d[2] = (x.vf - x.eq_t - (p.xd - p.xd_t) * s.id) / p.td0_t;
    d[3] = (-x.ed_t + (p.xq - p.xq_t) * s.iq) / p.tq0_t;
    d[4] = (x.eq_t - x.eq_st - (p.xd_t - p.xd_st) * s.id) / p.td0_st;
    d[5] = (x.ed_t - x.ed_st + (p.xq_t - p.xq_st) * s.iq) / p.tq0_st;

    // governor servo with rate and range limits, then turbine lag
    Real dg = std::clamp((x.p_ref - p.gov_gain * x.dw - x.gov) / p.gov_t3, -p.gov_rate, p.gov_rate);
    if ((x.gov >= p.p_max && dg > 0.0) || (x.gov <= p.p_min && dg < 0.0))
        dg = 0.0;
    d[6] = dg;
    d[7] = (x.gov - x.pm) / p.turbine_t;

    Real e = avr_error(x, p, v, s);
    Real di = p.avr_ki * e;
    if ((x.x_avr >= p.vf_max && di > 0.0) || (x.x_avr <= p.vf_min && di < 0.0))
        di = 0.0;
    d[8] = di;
    Real u = x.x_avr + p.avr_kp * e;
    Real dvf = (u - x.vf) / p.exciter_t;
    if ((x.vf >= p.vf_max && dvf > 0.0) || (x.vf <= p.vf_min && dvf < 0.0))
        dvf = 0.0;
    d[9] = dvf;
    return d;
}

SgStepResult sg_step(const SgState& x0, const SgParams& p, Complex v_term, Real p_set, Real q_or_v_set, Real h,
                     Real omega_base, Integrator method) {
    SgState x = x0;
    x.p_ref = std::clamp(p_set, p.p_min, p.p_max);
    if (p.avr_mode == AvrMode::voltage) {
        x.v_ref = q_or_v_set;
    } else {
        x.q_target = q_or_v_set;
        x.q_ref = q_lag(x.q_ref, x.q_target, p.q_lag, h);
    }
    auto f = [&](const StateVec<10>& v) {
        SgState tmp = x;
        unpack(v, tmp);
        return sg_derivatives(tmp, p, v_term, omega_base);
    };
    auto proj = [&](StateVec<10>& v) {
        v[6] = std::clamp(v[6], p.p_min, p.p_max);
        v[8] = std::clamp(v[8], p.vf_min, p.vf_max);
        v[9] = std::clamp(v[9], p.vf_min, p.vf_max);
    };
    unpack(integrate_step<10>(method, pack(x), h, f, proj), x);
    if (!pack(x).allFinite() || std::abs(x.dw) > 0.1)
        throw NumericalError(fmt::format("SG state diverged (speed deviation {:.3g} pu)", x.dw));
    return {x, sg_norton(x, p).current(v_term)};
}

// ---------------------------------------------------------------------------
// classical equivalent

EhvState ehv_init(const EhvEquivalentParams& p, Complex v, Complex s) {
    Complex i = std::conj(s / v);
    Complex e = v + Complex(0.0, p.xd_t) * i;
    EhvState x;
    x.delta = std::arg(e);
    x.e_mag = std::abs(e);
    x.dw = 0.0;
    x.pm = (e * std::conj(i)).real();
    return x;
}

NortonPort ehv_norton(const EhvState& x, const EhvEquivalentParams& p) {
    NortonPort port;
    // V / (j x) acting on (Re, Im)
    Real b = 1.0 / p.xd_t;
    port.y << 0.0, b, -b, 0.0;
    port.i_src = std::polar(x.e_mag, x.delta) / Complex(0.0, p.xd_t);
    return port;
}

StateVec<2> ehv_derivatives(const EhvState& x, const EhvEquivalentParams& p, Complex v, Real omega_base) {
    Complex e = std::polar(x.e_mag, x.delta);
    Complex i = (e - v) / Complex(0.0, p.xd_t);
    Real pe = (e * std::conj(i)).real();
    return {omega_base * x.dw, (x.pm - pe - p.damping * x.dw) / (2.0 * p.h)};
}

EhvState ehv_step(const EhvState& x0, const EhvEquivalentParams& p, Complex v_term, Real h, Real omega_base,
                  Integrator method) {
    EhvState x = x0;
    auto f = [&](const StateVec<2>& s) {
        EhvState tmp = x;
        tmp.delta = s[0];
        tmp.dw = s[1];
        return ehv_derivatives(tmp, p, v_term, omega_base);
    };
    auto proj = [](StateVec<2>&) {};
    StateVec<2> s = integrate_step<2>(method, StateVec<2>(x.delta, x.dw), h, f, proj);
    x.delta = s[0];
    x.dw = s[1];
    if (!s.allFinite() || std::abs(x.dw) > 0.1)
        throw NumericalError("EHV equivalent diverged");
    return x;
}

} // namespace dersim::dynamics
