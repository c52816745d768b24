#include "dersim/simulation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace dersim::dynamics {

using grid::GridModel;

void SimulationConfig::validate() const {
    if (!(step > 0.0))
        throw ConfigError("simulation step must be positive");
    if (!(t_end >= step))
        throw ConfigError("simulation end time must be at least one step");
}

InitialState init_dynamic_states(const GridModel& grid, const powerflow::PowerFlowSolution& pf) {
    InitialState init;
    init.voltages = pf.voltages();
    for (const auto& der : grid.ders) {
        Complex v = init.voltages[der.bus];
        Complex s_unit = Complex(der.p_mw, der.q_mvar) / der.p_inst_mw;
        DeviceState ds;
        ds.p_set = s_unit.real();
        ds.q_set = s_unit.imag();
        try {
            if (const auto* vp = std::get_if<VsiParams>(&der.controller)) {
                auto x = vsi_init(*vp, s_unit, std::abs(v));
                ds.p_available = x.p_available;
                ds.model = x;
            } else {
                // the governor reference is the air-gap power, stator losses included
                auto x = sg_init(std::get<SgParams>(der.controller), v, s_unit);
                ds.p_set = ds.p_available = x.p_ref;
                ds.model = x;
            }
        } catch (const NumericalError& e) {
            throw NumericalError("DER '" + der.id + "': " + e.what());
        }
        init.ders.push_back(ds);
    }
    const auto& sl = grid.slack;
    Complex s_slack = Complex(pf.slack_p_mw, pf.slack_q_mvar) / sl.machine.s_rated_mva;
    init.slack = ehv_init(sl.machine, init.voltages[sl.bus], s_slack);
    return init;
}

PreparedCase prepare_case(const GridModel& base, const grid::StudyCase& study, const powerflow::OltcInitOptions& options) {
    auto settled = powerflow::initialize_oltc(base, study, options);
    PreparedCase out{std::move(settled.grid), std::move(settled.solution), {}};
    out.initial = init_dynamic_states(out.grid, out.power_flow);
    return out;
}

namespace {

class Run {
public:
    Run(const GridModel& grid, const InitialState& init, const attack::ManipulationScenario& scenario,
        const SimulationConfig& cfg)
        : grid_(grid), scenario_(scenario), cfg_(cfg), ders_(init.ders), slack_(init.slack), v_(init.voltages),
          taps_(grid.tap_ratios()), solver_(grid::build_admittance(grid, taps_), cfg.network),
          omega_base_(2.0 * kPi * grid.frequency_hz) {
        if (ders_.size() != grid.ders.size())
            throw ConfigError("initial state does not match the grid's DER list");
        load_power_.assign(grid.buses.size(), Complex{});
        for (const auto& l : grid.loads)
            load_power_[l.bus] += Complex(l.p_mw, l.q_mvar) / grid.s_base_mva;
        for (std::size_t k = 0; k < grid.transformers.size(); ++k) {
            const auto& tr = grid.transformers[k];
            if (!tr.oltc)
                continue;
            protection::OltcController c(*tr.oltc, tr.tap_pos);
            if (cfg.oltc_characteristic)
                c.characteristic = cfg.oltc_characteristic;
            oltcs_.push_back(std::move(c));
            trace_.oltc_transformers.push_back(k);
        }
        for (const auto& der : grid.ders)
            relays_.emplace_back(der.relay);

        trace_.n_bus = grid.buses.size();
        trace_.n_der = grid.ders.size();
        for (const auto& der : grid.ders)
            trace_.initial_der_p_mw.push_back(der.p_mw);
        const auto steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.step)) + 1;
        trace_.time.reserve(steps);
        trace_.vm.reserve(steps * trace_.n_bus);
        trace_.va.reserve(steps * trace_.n_bus);
        trace_.der_p.reserve(steps * trace_.n_der);
        trace_.der_q.reserve(steps * trace_.n_der);
        trace_.der_p_ref.reserve(steps * trace_.n_der);
        trace_.der_on.reserve(steps * trace_.n_der);
        trace_.taps.reserve(steps * oltcs_.size());
    }

    TraceSet run() {
        const Real h = cfg_.step;
        const auto steps = static_cast<std::size_t>(std::llround(cfg_.t_end / h));
        try {
            build_injections();
            solver_.solve(inj_, v_);
            apply_signals(0.0, h);
        } catch (const VoltageCollapse& e) {
            return collapse(0.0, e.what());
        }
        record(0, 0.0);

        for (std::size_t k = 1; k <= steps; ++k) {
            const Real t = static_cast<Real>(k) * h;
            try {
                advance_devices(h);
                build_injections();
                solver_.solve(inj_, v_);
                if (update_automata(t, h)) {
                    build_injections();
                    solver_.solve(inj_, v_);
                }
                apply_signals(t, h);
            } catch (const VoltageCollapse& e) {
                return collapse(t, e.what());
            }
            record(k, t);
        }
        return std::move(trace_);
    }

private:
    Real unit_scale(std::size_t i) const { return grid_.ders[i].p_inst_mw / grid_.s_base_mva; }

    void advance_devices(Real h) {
        for (std::size_t i = 0; i < ders_.size(); ++i) {
            auto& ds = ders_[i];
            if (!ds.connected)
                continue;
            const auto& der = grid_.ders[i];
            Complex v = v_[der.bus];
            if (auto* vs = std::get_if<VsiState>(&ds.model)) {
                auto r = vsi_step(*vs, std::get<VsiParams>(der.controller), v, ds.p_set, ds.q_set, h, cfg_.integrator);
                *vs = r.state;
            } else {
                auto& ss = std::get<SgState>(ds.model);
                const auto& sp = std::get<SgParams>(der.controller);
                Real p_target = std::min(ds.p_set, ds.p_available);
                Real qv = sp.avr_mode == AvrMode::voltage ? ss.v_ref : ds.q_set;
                ss = sg_step(ss, sp, v, p_target, qv, h, omega_base_, cfg_.integrator).state;
            }
        }
        slack_ = ehv_step(slack_, grid_.slack.machine, v_[grid_.slack.bus], h, omega_base_, cfg_.integrator);
    }

    void build_injections() {
        inj_.norton.clear();
        inj_.inverters.clear();
        inj_.load_power = load_power_;
        const Real ks = grid_.slack.machine.s_rated_mva / grid_.s_base_mva;
        NortonPort sp = ehv_norton(slack_, grid_.slack.machine);
        sp.y *= ks;
        sp.i_src *= ks;
        inj_.norton.push_back({grid_.slack.bus, sp});
        for (std::size_t i = 0; i < ders_.size(); ++i) {
            const auto& ds = ders_[i];
            if (!ds.connected)
                continue;
            const auto& der = grid_.ders[i];
            const Real k = unit_scale(i);
            if (const auto* vs = std::get_if<VsiState>(&ds.model)) {
                inj_.inverters.push_back({der.bus, k * Complex(vs->out.d, -vs->out.q)});
            } else {
                NortonPort p = sg_norton(std::get<SgState>(ds.model), std::get<SgParams>(der.controller));
                p.y *= k;
                p.i_src *= k;
                inj_.norton.push_back({der.bus, p});
            }
        }
    }

    Real frequency() const { return grid_.frequency_hz * (1.0 + slack_.dw); }

    bool update_automata(Real t, Real h) {
        bool changed = false;
        if (cfg_.oltc_enabled) {
            bool tapped = false;
            for (std::size_t j = 0; j < oltcs_.size(); ++j) {
                auto& c = oltcs_[j];
                auto action = protection::oltc_update(c, std::abs(v_[c.descriptor.controlled_bus]), t, h);
                if (action == protection::TapAction::none)
                    continue;
                auto k = trace_.oltc_transformers[j];
                taps_[k] = grid_.transformers[k].ratio_at(c.tap);
                trace_.tap_events.push_back({t, k, c.tap});
                tapped = true;
            }
            if (tapped) {
                solver_.set_admittance(grid::build_admittance(grid_, taps_));
                changed = true;
            }
        }
        if (cfg_.protection_enabled) {
            const Real f = frequency();
            for (std::size_t i = 0; i < ders_.size(); ++i) {
                if (!ders_[i].connected)
                    continue;
                auto trip = protection::relay_update(relays_[i], std::abs(v_[grid_.ders[i].bus]), f, t, h);
                if (!trip)
                    continue;
                ders_[i].connected = false;
                trace_.trips.push_back({t, i, trip->cause});
                changed = true;
            }
        }
        if (changed)
            solver_.invalidate();
        return changed;
    }

    void apply_signals(Real t, Real h) {
        auto deliveries = attack::dispatch(scenario_, grid_, t, h, cfg_.success);
        bool disconnected = false;
        for (const auto& d : deliveries) {
            auto& ds = ders_[d.der];
            trace_.deliveries.push_back({t, d.der, d.signal});
            switch (d.signal.kind) {
            case attack::SignalKind::p_set: ds.p_set = d.signal.value; break;
            case attack::SignalKind::q_set: ds.q_set = d.signal.value; break;
            case attack::SignalKind::disconnect:
                if (ds.connected) {
                    ds.connected = false;
                    trace_.disconnects.push_back({t, d.der});
                    disconnected = true;
                }
                break;
            }
        }
        if (disconnected) {
            solver_.invalidate();
            build_injections();
            solver_.solve(inj_, v_);
        }
    }

    void record(std::size_t k, Real t) {
        trace_.time.push_back(t);
        for (const auto& v : v_) {
            trace_.vm.push_back(std::abs(v));
            trace_.va.push_back(std::arg(v));
        }
        for (std::size_t i = 0; i < ders_.size(); ++i) {
            const auto& ds = ders_[i];
            const auto& der = grid_.ders[i];
            Complex s{};
            Real pref = 0.0;
            if (ds.connected) {
                Complex v = v_[der.bus];
                Complex cur;
                if (const auto* vs = std::get_if<VsiState>(&ds.model)) {
                    cur = vsi_current(vs->out, v);
                    pref = vs->p_ref;
                } else {
                    const auto& ss = std::get<SgState>(ds.model);
                    cur = sg_norton(ss, std::get<SgParams>(der.controller)).current(v);
                    pref = ss.p_ref;
                }
                s = v * std::conj(cur) * der.p_inst_mw;
            } else if (const auto* vs = std::get_if<VsiState>(&ds.model)) {
                pref = vs->p_ref;
            }
            trace_.der_p.push_back(s.real());
            trace_.der_q.push_back(s.imag());
            trace_.der_p_ref.push_back(pref);
            trace_.der_on.push_back(ds.connected ? 1 : 0);
        }
        for (const auto& c : oltcs_)
            trace_.taps.push_back(c.tap);
        trace_.slack_dw.push_back(slack_.dw);
        trace_.frequency_hz.push_back(frequency());
        if (cfg_.observer)
            cfg_.observer(StepView{t, k, v_, inj_, solver_.admittance()});
    }

    TraceSet collapse(Real t, const std::string& message) {
        trace_.collapsed = true;
        trace_.collapse_time = t;
        trace_.collapse_message = message;
        return std::move(trace_);
    }

    const GridModel& grid_;
    const attack::ManipulationScenario& scenario_;
    const SimulationConfig& cfg_;
    std::vector<DeviceState> ders_;
    EhvState slack_;
    std::vector<Complex> v_;
    std::vector<Real> taps_;
    NetworkSolver solver_;
    Real omega_base_;
    std::vector<Complex> load_power_;
    std::vector<protection::OltcController> oltcs_;
    std::vector<protection::ProtectionRelay> relays_;
    NetworkInjections inj_;
    TraceSet trace_;
};

} // namespace

TraceSet simulate(const GridModel& grid, const InitialState& initial, const attack::ManipulationScenario& scenario,
                  const SimulationConfig& config) {
    config.validate();
    Run run(grid, initial, scenario, config);
    return run.run();
}

} // namespace dersim::dynamics
