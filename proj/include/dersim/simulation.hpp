#pragma once

// Fixed-step RMS simulation. Per step: device ODEs advance with the network
// voltage frozen, the network is solved, OLTC and protection automata sample
// the new voltages, taps and trips are applied with a re-solve, and finally
// scenario signals due at this step boundary are applied.

#include "dersim/attack.hpp"
#include "dersim/grid_model.hpp"
#include "dersim/integrator.hpp"
#include "dersim/network_solver.hpp"
#include "dersim/power_flow.hpp"
#include "dersim/protection.hpp"
#include "dersim/sync_machine.hpp"
#include "dersim/vsi.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dersim::dynamics {

/// Continuous and setpoint state of one DER.
struct DeviceState {
    std::variant<VsiState, SgState> model;
    bool connected = true;
    Real p_set = 0.0;       ///< unit pu of P_inst; for SG the mechanical power reference
    Real q_set = 0.0;       ///< unit pu of P_inst
    Real p_available = 0.0; ///< cap on p_set (primary resource at t = 0)
};

struct InitialState {
    std::vector<DeviceState> ders;
    EhvState slack;
    std::vector<Complex> voltages;
};

/// Equilibrium states consistent with a converged power flow (terminal P/Q
/// equal the power-flow injections). Throws NumericalError when a machine
/// cannot be initialized within its limits.
InitialState init_dynamic_states(const grid::GridModel& grid, const powerflow::PowerFlowSolution& pf);

struct StepView {
    Real t;
    std::size_t step;
    const std::vector<Complex>& voltages;
    const NetworkInjections& injections;
    const grid::AdmittanceMatrix& admittance;
};

struct SimulationConfig {
    Real step = 0.01;
    Real t_end = 300.0;
    Integrator integrator = Integrator::trapezoidal;
    NetworkSolveOptions network;
    bool oltc_enabled = true;
    bool protection_enabled = true;
    protection::TimeCharacteristic oltc_characteristic; ///< empty: constant delay
    attack::SuccessHook success;                        ///< empty: every signal delivered
    std::function<void(const StepView&)> observer;      ///< called once per recorded sample

    void validate() const;
};

struct TripRecord {
    Real time = 0.0;
    std::size_t der = 0;
    protection::TripCause cause = protection::TripCause::uv;
};

struct DisconnectRecord {
    Real time = 0.0;
    std::size_t der = 0;
};

struct TapRecord {
    Real time = 0.0;
    std::size_t transformer = 0;
    int tap = 0;
};

struct DeliveryRecord {
    Real time = 0.0;
    std::size_t der = 0;
    attack::ControlSignal signal;
};

/// Per-step results of one run. Sampled arrays are row-major: [step][item].
struct TraceSet {
    std::vector<Real> time;
    std::size_t n_bus = 0;
    std::size_t n_der = 0;
    std::vector<std::size_t> oltc_transformers;

    std::vector<Real> vm;               ///< pu
    std::vector<Real> va;               ///< rad
    std::vector<Real> der_p;            ///< MW
    std::vector<Real> der_q;            ///< MVAr
    std::vector<Real> der_p_ref;        ///< unit pu, slope-limited P reference (VSI) or P_ref (SG)
    std::vector<std::uint8_t> der_on;   ///< 1 while injecting
    std::vector<int> taps;              ///< per OLTC transformer
    std::vector<Real> slack_dw;         ///< slack machine speed deviation, pu
    std::vector<Real> frequency_hz;

    std::vector<TripRecord> trips;
    std::vector<DisconnectRecord> disconnects;
    std::vector<TapRecord> tap_events;
    std::vector<DeliveryRecord> deliveries;

    std::vector<Real> initial_der_p_mw;
    bool collapsed = false;
    Real collapse_time = 0.0;
    std::string collapse_message;

    std::size_t steps() const noexcept { return time.size(); }
    Real v(std::size_t step, std::size_t bus) const { return vm[step * n_bus + bus]; }
    Real p(std::size_t step, std::size_t der) const { return der_p[step * n_der + der]; }
    Real q(std::size_t step, std::size_t der) const { return der_q[step * n_der + der]; }
    Real p_ref(std::size_t step, std::size_t der) const { return der_p_ref[step * n_der + der]; }
    bool on(std::size_t step, std::size_t der) const { return der_on[step * n_der + der] != 0; }
    int tap(std::size_t step, std::size_t k) const { return taps[step * oltc_transformers.size() + k]; }
};

/// Runs one scenario from the given equilibrium. `grid` must carry the settled
/// tap positions the initial state was computed for. Voltage collapse ends the
/// trace at the last valid sample and sets `collapsed`.
TraceSet simulate(const grid::GridModel& grid, const InitialState& initial, const attack::ManipulationScenario& scenario,
                  const SimulationConfig& config);

/// Power flow, OLTC settling and equilibrium initialization for a scaled grid.
struct PreparedCase {
    grid::GridModel grid;
    powerflow::PowerFlowSolution power_flow;
    InitialState initial;
};
PreparedCase prepare_case(const grid::GridModel& base, const grid::StudyCase& study,
                          const powerflow::OltcInitOptions& options = {});

} // namespace dersim::dynamics
