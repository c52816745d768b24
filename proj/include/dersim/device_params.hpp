#pragma once

#include "dersim/common.hpp"

namespace dersim::dynamics {

enum class VsiControl {
    direct_pq, ///< P and Q each tracked by a PI loop (WPP, aggregated LV generation)
    dc_link,   ///< P follows from a DC-link voltage loop feeding I_d (PV)
};

/// Outer-control parameters of a voltage source inverter, on the unit's own base (P_inst).
struct VsiParams {
    VsiControl control = VsiControl::direct_pq;
    /// T_d = T_q. Kept for reference only: the inner current loop is algebraic at RMS time scale.
    Real current_delay = 10e-6;
    Real i_max = 1.1;
    Real ki_p = 50.0;
    Real kp_p = 0.001;
    Real ki_q = 50.0;
    Real kp_q = 0.001;
    /// T_1 of the first-order lag applied to new Q set values (s).
    Real q_lag = 10.0 / 3.0;
    /// Ramp limit for the P reference, pu/s.
    Real p_slope = 0.0066;
    bool q_priority = true;

    Real kp_dc = 5.0;
    Real ki_dc = 166.67;
    /// DC-link capacitor energy time constant (s).
    Real c_dc = 0.172;
    Real v_dc_max = 1.2;

    // Optional voltage-dependent reactive current support during ride-through.
    bool frt_support = false;
    Real frt_gain = 2.0;
    Real frt_deadband = 0.1;
};

enum class AvrMode { reactive_power, voltage };

/// Sixth-order synchronous machine with governor and excitation system, on machine base.
struct SgParams {
    Real xd = 1.8;
    Real xq = 1.7;
    Real xd_t = 0.3;
    Real xq_t = 0.55;
    Real xd_st = 0.2;
    Real xq_st = 0.2;
    Real td0_t = 5.0;
    Real tq0_t = 0.5;
    Real td0_st = 0.03;
    Real tq0_st = 0.05;
    Real ra = 0.005;
    Real h = 1.5;
    Real damping = 2.0;

    // governor: droop gain (0 = grid-parallel P control), servo lag T_3 with rate and range limits, turbine lag
    Real gov_gain = 0.0;
    Real gov_t3 = 0.5;
    Real gov_rate = 0.0066;
    Real p_min = 0.0;
    Real p_max = 1.1;
    Real turbine_t = 0.5;

    // excitation: PI regulator + first-order exciter with output limits
    AvrMode avr_mode = AvrMode::reactive_power;
    Real avr_kp = 0.5;
    Real avr_ki = 2.0;
    Real exciter_t = 0.1;
    Real vf_min = 0.0;
    Real vf_max = 5.0;

    Real q_lag = 10.0 / 3.0;
};

/// Bulk-system equivalent behind the slack bus: classical machine, no governor, no AVR.
struct EhvEquivalentParams {
    Real h = 6.0;
    Real damping = 10.0;
    Real s_rated_mva = 5000.0;
    Real xd_t = 0.3;
};

/// Lag time constant giving a 0-90 % rise time of `t_0_90` seconds.
Real lag_from_rise_time_0_90(Real t_0_90);

/// Throws ConfigError if the parameters break the model invariants or the grid-code
/// response bands for a unit connected at `level`.
void validate(const VsiParams& p, VoltageLevel level);
void validate(const SgParams& p);
void validate(const EhvEquivalentParams& p);

} // namespace dersim::dynamics
