#pragma once

// Sixth-order synchronous machine (two-axis, transient and subtransient
// circuits, saturation neglected) with governor and PI excitation control,
// and the classical machine used as the bulk-system equivalent behind the
// slack bus. Machine quantities are on the machine's own MVA base.

#include "dersim/device_params.hpp"
#include "dersim/integrator.hpp"

#include <Eigen/Dense>

#include <array>

namespace dersim::dynamics {

/// Linear Norton port I = i_src - y * V in (Re, Im) coordinates.
struct NortonPort {
    Eigen::Matrix2d y = Eigen::Matrix2d::Zero();
    Complex i_src{};

    Complex current(Complex v) const {
        return i_src - Complex(y(0, 0) * v.real() + y(0, 1) * v.imag(), y(1, 0) * v.real() + y(1, 1) * v.imag());
    }
};

struct SgState {
    Real delta = 0.0; ///< rotor angle, rad, relative to the synchronous frame
    Real dw = 0.0;    ///< speed deviation, pu
    Real eq_t = 0.0;
    Real ed_t = 0.0;
    Real eq_st = 0.0;
    Real ed_st = 0.0;
    Real gov = 0.0;   ///< governor servo output
    Real pm = 0.0;    ///< mechanical power
    Real x_avr = 0.0; ///< AVR integrator
    Real vf = 0.0;    ///< exciter output

    Real p_ref = 0.0;
    Real q_target = 0.0;
    Real q_ref = 0.0; ///< lagged reactive power set value
    Real v_ref = 1.0;

    static constexpr int kStates = 10;
};

/// Equilibrium for terminal voltage `v` and injection `s` (machine pu). Throws
/// NumericalError when the required field voltage lies outside the exciter limits.
SgState sg_init(const SgParams& p, Complex v, Complex s);

NortonPort sg_norton(const SgState& x, const SgParams& p);

/// d/dt of the ten continuous states with the terminal voltage `v` held fixed.
StateVec<10> sg_derivatives(const SgState& x, const SgParams& p, Complex v, Real omega_base);

struct SgStepResult {
    SgState state;
    Complex current; ///< machine pu, at the frozen terminal voltage
};

/// `q_or_v_set` is the reactive power set value, or the voltage set value when the AVR runs in voltage mode.
SgStepResult sg_step(const SgState& x, const SgParams& p, Complex v_term, Real p_set, Real q_or_v_set, Real h,
                     Real omega_base, Integrator method = Integrator::trapezoidal);

struct EhvState {
    Real delta = 0.0;
    Real dw = 0.0;
    Real e_mag = 1.0; ///< constant internal EMF
    Real pm = 0.0;
};

/// `s` in machine pu (own base), `v` the slack terminal voltage.
EhvState ehv_init(const EhvEquivalentParams& p, Complex v, Complex s);
NortonPort ehv_norton(const EhvState& x, const EhvEquivalentParams& p);
EhvState ehv_step(const EhvState& x, const EhvEquivalentParams& p, Complex v_term, Real h, Real omega_base,
                  Integrator method = Integrator::trapezoidal);
StateVec<2> ehv_derivatives(const EhvState& x, const EhvEquivalentParams& p, Complex v, Real omega_base);

} // namespace dersim::dynamics
