#include "dersim/grid_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <queue>
#include <set>

namespace dersim::grid {

namespace fs = std::filesystem;

Real PerUnitBase::i_base_ka() const { return s_base_mva / (std::sqrt(3.0) * v_base_kv); }

Real Transformer::ratio_at(int pos) const {
    if (oltc)
        return 1.0 + pos * oltc->tap_step;
    return tap_ratio;
}

// --------------------------------------------------------------------------
// study cases

namespace {

constexpr std::array<std::string_view, 5> kCaseNames{"hL", "hW", "hPV", "lW", "lPV"};

} // namespace

std::span<const std::string_view> study_case_names() { return kCaseNames; }

StudyCase study_case(std::string_view name) {
    if (name == "hL")
        return {"hL", 1.0, 1.0, 0.93, 0.0, 0.0, 0.0, false};
    if (name == "hW")
        return {"hW", 1.0, 1.0, 0.93, 1.0, 0.8, 1.0, false};
    if (name == "hPV")
        return {"hPV", 1.0, 1.0, 0.93, 0.85, 0.95, 1.0, false};
    if (name == "lW")
        return {"lW", 0.25, 0.1, 0.9, 1.0, 0.8, 1.0, true};
    if (name == "lPV")
        return {"lPV", 0.25, 0.1, 0.9, 0.85, 0.95, 1.0, true};
    throw ConfigError("unknown study case '" + std::string(name) + "'");
}

GridModel apply_study_case(const GridModel& grid, const StudyCase& study) {
    for (Real s : {study.load_p_scale_hv, study.load_p_scale_mv, study.wind, study.pv, study.other})
        if (s < 0.0 || s > 1.0)
            throw ConfigError("study case " + study.name + ": scaling factors must lie in [0, 1]");

    GridModel out = grid;
    out.applied_case = study.name;
    const Real tan_phi = std::tan(std::acos(study.load_cos_phi));
    for (auto& load : out.loads) {
        auto level = out.buses[load.bus].level;
        Real scale = (level == VoltageLevel::HV || level == VoltageLevel::EHV) ? study.load_p_scale_hv
                                                                               : study.load_p_scale_mv;
        load.p_mw = scale * load.p_base_mw;
        // inductive consumption
        load.q_mvar = load.p_mw * tan_phi;
    }
    for (auto& der : out.ders) {
        Real scale = study.other;
        switch (der.kind) {
        case DerKind::WPP: scale = study.wind; break;
        case DerKind::PV:
        case DerKind::ResLv: scale = study.pv; break;
        case DerKind::Hydro:
        case DerKind::Biomass: scale = study.other; break;
        }
        der.p_mw = scale * der.p_base_mw;
        der.q_mvar = scale * der.q_base_mvar;
    }
    for (auto& tr : out.transformers)
        if (tr.oltc)
            tr.oltc->v_ref = study.low_load ? tr.oltc->v_ref_low_load : tr.oltc->v_ref_high_load;
    if (auto it = out.slack.v_set_by_case.find(study.name); it != out.slack.v_set_by_case.end())
        out.slack.v_set = it->second;
    for (auto& s : out.storage)
        s.active = false;
    return out;
}

// --------------------------------------------------------------------------
// GridModel

std::optional<std::size_t> GridModel::find_bus(std::string_view id) const {
    if (auto it = bus_lookup_.find(id); it != bus_lookup_.end())
        return it->second;
    return std::nullopt;
}

std::size_t GridModel::bus_index(std::string_view id) const {
    if (auto idx = find_bus(id))
        return *idx;
    throw ConfigError("unknown bus '" + std::string(id) + "'");
}

std::optional<std::size_t> GridModel::find_der(std::string_view id) const {
    for (std::size_t i = 0; i < ders.size(); ++i)
        if (ders[i].id == id)
            return i;
    return std::nullopt;
}

void GridModel::rebuild_index() {
    bus_lookup_.clear();
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (!bus_lookup_.emplace(buses[i].id, i).second)
            throw ConfigError("duplicate bus id '" + buses[i].id + "'");
}

std::vector<Real> GridModel::tap_ratios() const {
    std::vector<Real> out;
    out.reserve(transformers.size());
    for (const auto& t : transformers)
        out.push_back(t.ratio_at(t.tap_pos));
    return out;
}

void GridModel::validate() const {
    const std::size_t n = buses.size();
    if (n == 0)
        throw ConfigError("grid '" + name + "' has no buses");
    if (s_base_mva <= 0.0 || frequency_hz <= 0.0)
        throw ConfigError("grid '" + name + "': MVA base and frequency must be positive");
    auto check_bus = [&](std::size_t b, const std::string& what) {
        if (b >= n)
            throw ConfigError(what + " references a bus outside the grid");
    };
    for (const auto& bus : buses)
        if (bus.nominal_kv <= 0.0)
            throw ConfigError("bus '" + bus.id + "': nominal voltage must be positive");
    for (const auto& br : branches) {
        check_bus(br.from, "branch " + br.id);
        check_bus(br.to, "branch " + br.id);
        if (br.from == br.to)
            throw ConfigError("branch '" + br.id + "' connects a bus to itself");
        if (br.x == 0.0 && br.r == 0.0 && !br.is_switch)
            throw ConfigError("branch '" + br.id + "' has zero impedance but is not a switch");
    }
    for (const auto& tr : transformers) {
        check_bus(tr.from, "transformer " + tr.id);
        check_bus(tr.to, "transformer " + tr.id);
        if (tr.from == tr.to)
            throw ConfigError("transformer '" + tr.id + "' connects a bus to itself");
        if (tr.x == 0.0 && tr.r == 0.0)
            throw ConfigError("transformer '" + tr.id + "' has zero impedance");
        if (tr.oltc) {
            const auto& o = *tr.oltc;
            check_bus(o.controlled_bus, "OLTC of " + tr.id);
            if (o.deadband <= 0.0 || o.tap_step <= 0.0 || !(o.tau_min() < o.tau_max()) || o.switch_time <= 0.0 ||
                o.first_delay <= 0.0 || o.next_delay <= 0.0)
                throw ConfigError("OLTC of transformer '" + tr.id + "': invalid parameters");
            if (tr.tap_pos < o.tap_min || tr.tap_pos > o.tap_max)
                throw ConfigError("OLTC of transformer '" + tr.id + "': tap position outside limits");
        }
    }
    for (const auto& load : loads)
        check_bus(load.bus, "load " + load.id);
    for (const auto& der : ders) {
        check_bus(der.bus, "DER " + der.id);
        if (der.p_inst_mw <= 0.0)
            throw ConfigError("DER '" + der.id + "': installed power must be positive");
        if (der.p_mw < -1e-9 || der.p_mw > 1.2 * der.p_inst_mw + 1e-9)
            throw ConfigError("DER '" + der.id + "': P outside [0, 1.2 P_inst]");
        if (std::abs(der.q_mvar) > 0.5 * der.p_inst_mw + 1e-9)
            throw ConfigError("DER '" + der.id + "': |Q| exceeds 0.5 P_inst");
        if (const auto* vsi = std::get_if<dynamics::VsiParams>(&der.controller))
            dynamics::validate(*vsi, der.connection_level);
        else
            dynamics::validate(std::get<dynamics::SgParams>(der.controller));
        protection::validate(der.relay);
    }
    check_bus(slack.bus, "slack");
    dynamics::validate(slack.machine);

    // connectivity from the slack bus
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& br : branches) {
        adj[br.from].push_back(br.to);
        adj[br.to].push_back(br.from);
    }
    for (const auto& tr : transformers) {
        adj[tr.from].push_back(tr.to);
        adj[tr.to].push_back(tr.from);
    }
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> todo;
    todo.push(slack.bus);
    seen[slack.bus] = true;
    while (!todo.empty()) {
        auto b = todo.front();
        todo.pop();
        for (auto nb : adj[b])
            if (!seen[nb]) {
                seen[nb] = true;
                todo.push(nb);
            }
    }
    for (std::size_t b = 0; b < n; ++b)
        if (!seen[b])
            throw ConfigError("bus '" + buses[b].id + "' is not connected to the slack bus");
}

// --------------------------------------------------------------------------
// names

const char* to_string(DerKind kind) {
    switch (kind) {
    case DerKind::WPP: return "WPP";
    case DerKind::PV: return "PV";
    case DerKind::Hydro: return "Hydro";
    case DerKind::Biomass: return "Biomass";
    case DerKind::ResLv: return "RES";
    }
    return "?";
}

const char* to_string(MachineType type) { return type == MachineType::VSI ? "VSI" : "SG"; }

DerKind parse_der_kind(std::string_view text) {
    if (text == "WPP" || text == "Wind")
        return DerKind::WPP;
    if (text == "PV")
        return DerKind::PV;
    if (text == "Hydro")
        return DerKind::Hydro;
    if (text == "Biomass")
        return DerKind::Biomass;
    if (text == "RES" || text == "RES-LV" || text == "ResLv")
        return DerKind::ResLv;
    throw ConfigError("unknown DER kind '" + std::string(text) + "'");
}

VoltageLevel parse_voltage_level(std::string_view text) {
    if (text == "EHV")
        return VoltageLevel::EHV;
    if (text == "HV")
        return VoltageLevel::HV;
    if (text == "MV")
        return VoltageLevel::MV;
    if (text == "LV" || text == "LV-aggregate")
        return VoltageLevel::LV;
    throw ConfigError("unknown voltage level '" + std::string(text) + "'");
}

// --------------------------------------------------------------------------
// admittance

namespace {

constexpr Real kSwitchReactance = 1e-4;

Complex series_admittance(Real r, Real x, bool is_switch) {
    if (r == 0.0 && x == 0.0) {
        if (!is_switch)
            throw ConfigError("zero-impedance branch that is not flagged as a switch");
        x = kSwitchReactance;
    }
    return 1.0 / Complex(r, x);
}

template <class Add>
void stamp_network(const GridModel& grid, std::span<const Real> taps, Add&& add) {
    if (!taps.empty() && taps.size() != grid.transformers.size())
        throw ConfigError("tap ratio vector does not match transformer count");
    for (const auto& br : grid.branches) {
        Complex y = series_admittance(br.r, br.x, br.is_switch);
        Complex ysh(0.0, br.b_shunt / 2.0);
        add(br.from, br.from, y + ysh);
        add(br.to, br.to, y + ysh);
        add(br.from, br.to, -y);
        add(br.to, br.from, -y);
    }
    for (std::size_t k = 0; k < grid.transformers.size(); ++k) {
        const auto& tr = grid.transformers[k];
        Real tau = taps.empty() ? tr.ratio_at(tr.tap_pos) : taps[k];
        Complex y = series_admittance(tr.r, tr.x, false);
        add(tr.from, tr.from, y / (tau * tau));
        add(tr.to, tr.to, y);
        add(tr.from, tr.to, -y / tau);
        add(tr.to, tr.from, -y / tau);
    }
}

} // namespace

AdmittanceMatrix build_admittance(const GridModel& grid, std::span<const Real> tap_ratios) {
    const auto n = static_cast<int>(grid.buses.size());
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(4 * (grid.branches.size() + grid.transformers.size()));
    stamp_network(grid, tap_ratios, [&](std::size_t i, std::size_t j, Complex v) {
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    });
    AdmittanceMatrix y(n, n);
    y.setFromTriplets(triplets.begin(), triplets.end());
    y.makeCompressed();
    return y;
}

std::vector<Complex> shunt_admittances(const GridModel& grid, std::span<const Real> tap_ratios) {
    std::vector<Complex> out(grid.buses.size(), Complex{});
    stamp_network(grid, tap_ratios, [&](std::size_t i, std::size_t, Complex v) { out[i] += v; });
    return out;
}

// --------------------------------------------------------------------------
// loading

namespace {

struct LevelMap {
    Real ehv_min_kv = 220.0;
    Real hv_min_kv = 60.0;
    Real mv_min_kv = 1.0;

    VoltageLevel classify(Real kv) const {
        if (kv >= ehv_min_kv)
            return VoltageLevel::EHV;
        if (kv >= hv_min_kv)
            return VoltageLevel::HV;
        if (kv >= mv_min_kv)
            return VoltageLevel::MV;
        return VoltageLevel::LV;
    }
};

using AliasTable = std::map<std::string, ColumnAliases, std::less<>>;

AliasTable read_column_map(const fs::path& file) {
    AliasTable out;
    auto table = CsvTable::read(file);
    for (std::size_t r = 0; r < table.rows(); ++r)
        out[table.text(r, "table")][table.text(r, "canonical")] = table.text(r, "source");
    return out;
}

CsvTable read_table(const fs::path& dir, const std::string& stem, const AliasTable& aliases) {
    auto it = aliases.find(stem);
    return CsvTable::read(dir / (stem + ".csv"), it == aliases.end() ? ColumnAliases{} : it->second);
}

bool truthy(const std::string& s) { return s == "1" || s == "true" || s == "yes"; }

std::size_t bus_ref(const GridModel& g, const CsvTable& t, std::size_t row, std::string_view column) {
    const auto& id = t.text(row, column);
    if (auto idx = g.find_bus(id))
        return *idx;
    t.fail(TableError::Kind::dangling_reference, row, "column '" + std::string(column) + "' references unknown bus '" + id + "'");
}

template <class T>
void check_unique(const CsvTable& t, std::set<std::string, std::less<>>& seen, std::size_t row, const T& id) {
    if (!seen.insert(id).second)
        t.fail(TableError::Kind::duplicate_id, row, "id '" + id + "' appears more than once");
}

// parameter class registries ------------------------------------------------

std::map<std::string, dynamics::VsiParams, std::less<>> builtin_vsi_classes() {
    using dynamics::VsiControl;
    dynamics::VsiParams wpp_mv;
    dynamics::VsiParams wpp_hv;
    wpp_hv.q_lag = dynamics::lag_from_rise_time_0_90(5.0);
    dynamics::VsiParams pv_mv;
    pv_mv.control = VsiControl::dc_link;
    dynamics::VsiParams pv_hv = pv_mv;
    pv_hv.q_lag = wpp_hv.q_lag;
    dynamics::VsiParams res_lv;
    return {{"wpp_mv", wpp_mv}, {"wpp_hv", wpp_hv}, {"pv_mv", pv_mv}, {"pv_hv", pv_hv}, {"res_lv", res_lv}};
}

std::map<std::string, dynamics::SgParams, std::less<>> builtin_sg_classes() { return {{"sg_small", {}}}; }

std::map<std::string, protection::RelayParams, std::less<>> builtin_relay_classes() {
    return {{"mv", protection::default_relay_params(VoltageLevel::MV, true)},
            {"hv", protection::default_relay_params(VoltageLevel::HV, true)},
            {"lv_agg", protection::default_relay_params(VoltageLevel::MV, false)},
            {"sg_mv", protection::default_relay_params(VoltageLevel::MV, false)},
            {"sg_hv", protection::default_relay_params(VoltageLevel::HV, false)}};
}

std::map<std::string, OltcDescriptor, std::less<>> builtin_oltc_classes() {
    OltcDescriptor ehv_hv;
    ehv_hv.v_ref = ehv_hv.v_ref_high_load = ehv_hv.v_ref_low_load = 1.025;
    ehv_hv.deadband = 0.015;
    ehv_hv.tap_step = 0.01;
    ehv_hv.tap_min = -16;
    ehv_hv.tap_max = 16;
    ehv_hv.switch_time = 5.0;
    ehv_hv.first_delay = 25.0;
    ehv_hv.next_delay = 5.0;
    OltcDescriptor hv_mv = ehv_hv;
    hv_mv.v_ref = hv_mv.v_ref_high_load = 1.035;
    hv_mv.v_ref_low_load = 1.015;
    hv_mv.deadband = 0.02;
    hv_mv.tap_min = -9;
    hv_mv.tap_max = 9;
    hv_mv.first_delay = 55.0;
    return {{"ehv_hv", ehv_hv}, {"hv_mv", hv_mv}};
}

void set_if(const CsvTable& t, std::size_t r, std::string_view col, Real& field) {
    if (auto v = t.optional_real(r, col))
        field = *v;
}

void set_if(const CsvTable& t, std::size_t r, std::string_view col, bool& field) {
    if (auto v = t.optional_text(r, col))
        field = truthy(*v);
}

void read_vsi_classes(const fs::path& file, std::map<std::string, dynamics::VsiParams, std::less<>>& classes) {
    auto t = CsvTable::read(file);
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const auto& name = t.text(r, "class");
        auto p = classes.count(name) ? classes.at(name) : dynamics::VsiParams{};
        if (auto c = t.optional_text(r, "control")) {
            if (*c == "direct_pq")
                p.control = dynamics::VsiControl::direct_pq;
            else if (*c == "dc_link")
                p.control = dynamics::VsiControl::dc_link;
            else
                t.fail(TableError::Kind::bad_value, r, "unknown VSI control '" + *c + "'");
        }
        set_if(t, r, "current_delay", p.current_delay);
        set_if(t, r, "i_max", p.i_max);
        set_if(t, r, "ki_p", p.ki_p);
        set_if(t, r, "kp_p", p.kp_p);
        set_if(t, r, "ki_q", p.ki_q);
        set_if(t, r, "kp_q", p.kp_q);
        set_if(t, r, "q_lag", p.q_lag);
        if (auto rise = t.optional_real(r, "q_rise_0_90"))
            p.q_lag = dynamics::lag_from_rise_time_0_90(*rise);
        set_if(t, r, "p_slope", p.p_slope);
        set_if(t, r, "q_priority", p.q_priority);
        set_if(t, r, "kp_dc", p.kp_dc);
        set_if(t, r, "ki_dc", p.ki_dc);
        set_if(t, r, "c_dc", p.c_dc);
        set_if(t, r, "v_dc_max", p.v_dc_max);
        set_if(t, r, "frt_support", p.frt_support);
        set_if(t, r, "frt_gain", p.frt_gain);
        set_if(t, r, "frt_deadband", p.frt_deadband);
        classes[name] = p;
    }
}

void read_sg_classes(const fs::path& file, std::map<std::string, dynamics::SgParams, std::less<>>& classes) {
    auto t = CsvTable::read(file);
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const auto& name = t.text(r, "class");
        auto p = classes.count(name) ? classes.at(name) : dynamics::SgParams{};
        set_if(t, r, "xd", p.xd);
        set_if(t, r, "xq", p.xq);
        set_if(t, r, "xd_t", p.xd_t);
        set_if(t, r, "xq_t", p.xq_t);
        set_if(t, r, "xd_st", p.xd_st);
        set_if(t, r, "xq_st", p.xq_st);
        set_if(t, r, "td0_t", p.td0_t);
        set_if(t, r, "tq0_t", p.tq0_t);
        set_if(t, r, "td0_st", p.td0_st);
        set_if(t, r, "tq0_st", p.tq0_st);
        set_if(t, r, "ra", p.ra);
        set_if(t, r, "h", p.h);
        set_if(t, r, "damping", p.damping);
        set_if(t, r, "gov_gain", p.gov_gain);
        set_if(t, r, "gov_t3", p.gov_t3);
        set_if(t, r, "gov_rate", p.gov_rate);
        set_if(t, r, "p_min", p.p_min);
        set_if(t, r, "p_max", p.p_max);
        set_if(t, r, "turbine_t", p.turbine_t);
        if (auto m = t.optional_text(r, "avr_mode")) {
            if (*m == "reactive_power")
                p.avr_mode = dynamics::AvrMode::reactive_power;
            else if (*m == "voltage")
                p.avr_mode = dynamics::AvrMode::voltage;
            else
                t.fail(TableError::Kind::bad_value, r, "unknown AVR mode '" + *m + "'");
        }
        set_if(t, r, "avr_kp", p.avr_kp);
        set_if(t, r, "avr_ki", p.avr_ki);
        set_if(t, r, "exciter_t", p.exciter_t);
        set_if(t, r, "vf_min", p.vf_min);
        set_if(t, r, "vf_max", p.vf_max);
        set_if(t, r, "q_lag", p.q_lag);
        classes[name] = p;
    }
}

void read_relay_classes(const fs::path& dir, const fs::path& file,
                        std::map<std::string, protection::RelayParams, std::less<>>& classes) {
    auto t = CsvTable::read(file);
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const auto& name = t.text(r, "class");
        auto p = classes.count(name) ? classes.at(name) : protection::RelayParams{};
        set_if(t, r, "uv_threshold", p.uv_threshold);
        set_if(t, r, "ov_threshold", p.ov_threshold);
        set_if(t, r, "uv_delay", p.uv_delay);
        set_if(t, r, "ov_delay", p.ov_delay);
        set_if(t, r, "qv_enabled", p.qv_enabled);
        set_if(t, r, "qv_threshold", p.qv_threshold);
        set_if(t, r, "qv_delay", p.qv_delay);
        set_if(t, r, "f_min", p.f_min);
        set_if(t, r, "f_max", p.f_max);
        set_if(t, r, "f_delay", p.f_delay);
        if (auto c = t.optional_text(r, "lvrt_curve"))
            p.lvrt = protection::load_frt_curve(dir / *c, protection::FrtCurve::Side::low);
        if (auto c = t.optional_text(r, "hvrt_curve"))
            p.hvrt = protection::load_frt_curve(dir / *c, protection::FrtCurve::Side::high);
        try {
            protection::validate(p);
        } catch (const ConfigError& e) {
            t.fail(TableError::Kind::invariant, r, e.what());
        }
        classes[name] = p;
    }
}

void read_oltc_classes(const fs::path& file, std::map<std::string, OltcDescriptor, std::less<>>& classes) {
    auto t = CsvTable::read(file);
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const auto& name = t.text(r, "class");
        auto o = classes.count(name) ? classes.at(name) : OltcDescriptor{};
        set_if(t, r, "v_ref_high_load", o.v_ref_high_load);
        set_if(t, r, "v_ref_low_load", o.v_ref_low_load);
        set_if(t, r, "half_deadband", o.deadband);
        set_if(t, r, "tap_step", o.tap_step);
        if (auto v = t.optional_real(r, "tap_min"))
            o.tap_min = static_cast<int>(std::lround(*v));
        if (auto v = t.optional_real(r, "tap_max"))
            o.tap_max = static_cast<int>(std::lround(*v));
        set_if(t, r, "switch_time", o.switch_time);
        set_if(t, r, "first_delay", o.first_delay);
        set_if(t, r, "next_delay", o.next_delay);
        o.v_ref = o.v_ref_high_load;
        classes[name] = o;
    }
}

std::string default_control_class(DerKind kind, MachineType machine, VoltageLevel level) {
    if (machine == MachineType::SG)
        return "sg_small";
    bool hv = level == VoltageLevel::HV;
    switch (kind) {
    case DerKind::WPP: return hv ? "wpp_hv" : "wpp_mv";
    case DerKind::PV: return hv ? "pv_hv" : "pv_mv";
    default: return "res_lv";
    }
}

std::string default_relay_class(DerKind kind, MachineType machine, VoltageLevel level) {
    bool hv = level == VoltageLevel::HV;
    if (machine == MachineType::SG)
        return hv ? "sg_hv" : "sg_mv";
    if (kind == DerKind::ResLv)
        return "lv_agg";
    return hv ? "hv" : "mv";
}

} // namespace

GridModel load_grid(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw TableError(TableError::Kind::missing_file, dir, 0, "grid directory not found");

    GridModel g;
    auto manifest = read_key_values(dir / "manifest.csv");
    auto get = [&](std::string_view key, std::string fallback) {
        auto it = manifest.find(key);
        return it == manifest.end() ? fallback : it->second;
    };
    auto get_real = [&](std::string_view key, Real fallback) {
        auto it = manifest.find(key);
        if (it == manifest.end())
            return fallback;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw TableError(TableError::Kind::bad_value, dir / "manifest.csv", 0,
                             "key '" + std::string(key) + "' is not a number");
        }
    };
    g.name = get("name", dir.filename().string());
    g.s_base_mva = get_real("s_base_mva", 100.0);
    g.frequency_hz = get_real("frequency_hz", 50.0);
    LevelMap levels{get_real("ehv_min_kv", 220.0), get_real("hv_min_kv", 60.0), get_real("mv_min_kv", 1.0)};

    AliasTable aliases;
    if (auto cm = get("column_map", ""); !cm.empty())
        aliases = read_column_map(dir / cm);

    auto vsi_classes = builtin_vsi_classes();
    auto sg_classes = builtin_sg_classes();
    auto relay_classes = builtin_relay_classes();
    auto oltc_classes = builtin_oltc_classes();
    if (fs::exists(dir / "vsi_params.csv"))
        read_vsi_classes(dir / "vsi_params.csv", vsi_classes);
    if (fs::exists(dir / "sg_params.csv"))
        read_sg_classes(dir / "sg_params.csv", sg_classes);
    if (fs::exists(dir / "relay_params.csv"))
        read_relay_classes(dir, dir / "relay_params.csv", relay_classes);
    if (fs::exists(dir / "oltc_params.csv"))
        read_oltc_classes(dir / "oltc_params.csv", oltc_classes);

    // buses
    {
        auto t = read_table(dir, "buses", aliases);
        std::set<std::string, std::less<>> seen;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            Bus b;
            b.id = t.text(r, "id");
            check_unique(t, seen, r, b.id);
            b.nominal_kv = t.real(r, "vn_kv");
            if (b.nominal_kv <= 0.0)
                t.fail(TableError::Kind::invariant, r, "nominal voltage must be positive");
            try {
                b.level = t.has_column("level") ? parse_voltage_level(t.text(r, "level")) : levels.classify(b.nominal_kv);
            } catch (const ConfigError& e) {
                t.fail(TableError::Kind::bad_value, r, e.what());
            }
            if (b.level != levels.classify(b.nominal_kv))
                t.fail(TableError::Kind::invariant, r,
                       std::string("level ") + to_string(b.level) + " inconsistent with " + std::to_string(b.nominal_kv) +
                           " kV under the manifest level mapping");
            b.initial_v = t.optional_real(r, "v_init").value_or(1.0);
            b.initial_angle = t.optional_real(r, "va_init_rad").value_or(0.0);
            g.buses.push_back(b);
        }
        g.rebuild_index();
    }

    // lines
    {
        auto t = read_table(dir, "lines", aliases);
        std::set<std::string, std::less<>> seen;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            Branch br;
            br.id = t.text(r, "id");
            check_unique(t, seen, r, br.id);
            br.from = bus_ref(g, t, r, "from_bus");
            br.to = bus_ref(g, t, r, "to_bus");
            if (br.from == br.to)
                t.fail(TableError::Kind::invariant, r, "line connects a bus to itself");
            if (g.buses[br.from].nominal_kv != g.buses[br.to].nominal_kv)
                t.fail(TableError::Kind::invariant, r, "line joins buses of different nominal voltage");
            Real len = t.real(r, "length_km");
            auto base = g.base_at(br.from);
            br.r = base.impedance_to_pu(t.real(r, "r_ohm_per_km") * len);
            br.x = base.impedance_to_pu(t.real(r, "x_ohm_per_km") * len);
            br.b_shunt = base.admittance_to_pu(t.optional_real(r, "b_us_per_km").value_or(0.0) * len * 1e-6);
            br.rating_mva = t.optional_real(r, "rating_mva").value_or(0.0);
            br.is_switch = truthy(t.optional_text(r, "is_switch").value_or("0"));
            if (br.x == 0.0 && !br.is_switch)
                t.fail(TableError::Kind::invariant, r, "zero reactance on a line that is not a switch");
            g.branches.push_back(br);
        }
    }

    // transformers
    {
        auto t = read_table(dir, "transformers", aliases);
        std::set<std::string, std::less<>> seen;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            Transformer tr;
            tr.id = t.text(r, "id");
            check_unique(t, seen, r, tr.id);
            tr.from = bus_ref(g, t, r, "hv_bus");
            tr.to = bus_ref(g, t, r, "lv_bus");
            if (g.buses[tr.from].nominal_kv <= g.buses[tr.to].nominal_kv)
                t.fail(TableError::Kind::invariant, r, "hv_bus must have the higher nominal voltage");
            tr.s_rated_mva = t.real(r, "s_rated_mva");
            Real vk = t.real(r, "vk_percent") / 100.0;
            Real vkr = t.optional_real(r, "vkr_percent").value_or(0.0) / 100.0;
            if (tr.s_rated_mva <= 0.0 || vk <= 0.0 || vkr > vk)
                t.fail(TableError::Kind::invariant, r, "rating and short-circuit voltage must be positive, vkr <= vk");
            Real scale = g.s_base_mva / tr.s_rated_mva;
            tr.r = vkr * scale;
            tr.x = std::sqrt(vk * vk - vkr * vkr) * scale;
            tr.tap_pos = t.optional_real(r, "tap_pos").has_value() ? t.integer(r, "tap_pos") : 0;
            Real step_percent = t.optional_real(r, "tap_step_percent").value_or(0.0);
            tr.tap_ratio = 1.0 + tr.tap_pos * step_percent / 100.0;
            if (auto cls = t.optional_text(r, "oltc_class")) {
                auto it = oltc_classes.find(*cls);
                if (it == oltc_classes.end())
                    t.fail(TableError::Kind::dangling_reference, r, "unknown OLTC class '" + *cls + "'");
                OltcDescriptor o = it->second;
                o.controlled_bus = t.optional_text(r, "controlled_bus") ? bus_ref(g, t, r, "controlled_bus") : tr.to;
                o.stage = g.buses[tr.from].level == VoltageLevel::EHV ? 1 : 2;
                if (tr.tap_pos < o.tap_min || tr.tap_pos > o.tap_max)
                    t.fail(TableError::Kind::invariant, r, "tap position outside the OLTC range");
                tr.oltc = o;
                tr.tap_ratio = tr.ratio_at(tr.tap_pos);
            }
            g.transformers.push_back(tr);
        }
    }

    // loads
    {
        auto t = read_table(dir, "loads", aliases);
        std::set<std::string, std::less<>> seen;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            Load l;
            l.id = t.text(r, "id");
            check_unique(t, seen, r, l.id);
            l.bus = bus_ref(g, t, r, "bus");
            l.p_base_mw = l.p_mw = t.real(r, "p_mw");
            l.q_base_mvar = l.q_mvar = t.optional_real(r, "q_mvar").value_or(0.0);
            g.loads.push_back(l);
        }
    }

    // DERs
    {
        auto t = read_table(dir, "ders", aliases);
        std::set<std::string, std::less<>> seen;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            DerUnit d;
            d.id = t.text(r, "id");
            check_unique(t, seen, r, d.id);
            d.bus = bus_ref(g, t, r, "bus");
            try {
                d.kind = parse_der_kind(t.text(r, "kind"));
            } catch (const ConfigError& e) {
                t.fail(TableError::Kind::bad_value, r, e.what());
            }
            const auto& machine = t.text(r, "machine");
            if (machine == "VSI")
                d.machine = MachineType::VSI;
            else if (machine == "SG")
                d.machine = MachineType::SG;
            else
                t.fail(TableError::Kind::bad_value, r, "machine must be VSI or SG");
            auto level = g.buses[d.bus].level;
            if (level == VoltageLevel::EHV)
                t.fail(TableError::Kind::invariant, r, "DERs cannot connect at EHV level");
            d.connection_level = level == VoltageLevel::HV ? VoltageLevel::HV : VoltageLevel::MV;
            d.p_inst_mw = t.real(r, "p_inst_mw");
            d.p_base_mw = d.p_mw = t.optional_real(r, "p_mw").value_or(d.p_inst_mw);
            d.q_base_mvar = d.q_mvar = t.optional_real(r, "q_mvar").value_or(0.0);
            if (d.p_inst_mw <= 0.0)
                t.fail(TableError::Kind::invariant, r, "installed power must be positive");
            if (d.p_base_mw < 0.0 || d.p_base_mw > 1.2 * d.p_inst_mw)
                t.fail(TableError::Kind::invariant, r, "P outside [0, 1.2 P_inst]");
            if (std::abs(d.q_base_mvar) > 0.5 * d.p_inst_mw)
                t.fail(TableError::Kind::invariant, r, "|Q| exceeds 0.5 P_inst");

            d.control_class = t.optional_text(r, "control_class")
                                  .value_or(default_control_class(d.kind, d.machine, d.connection_level));
            d.relay_class =
                t.optional_text(r, "relay_class").value_or(default_relay_class(d.kind, d.machine, d.connection_level));
            if (d.machine == MachineType::VSI) {
                auto it = vsi_classes.find(d.control_class);
                if (it == vsi_classes.end())
                    t.fail(TableError::Kind::dangling_reference, r, "unknown VSI class '" + d.control_class + "'");
                d.controller = it->second;
            } else {
                auto it = sg_classes.find(d.control_class);
                if (it == sg_classes.end())
                    t.fail(TableError::Kind::dangling_reference, r, "unknown SG class '" + d.control_class + "'");
                d.controller = it->second;
            }
            auto rel = relay_classes.find(d.relay_class);
            if (rel == relay_classes.end())
                t.fail(TableError::Kind::dangling_reference, r, "unknown relay class '" + d.relay_class + "'");
            d.relay = rel->second;
            try {
                if (auto* vsi = std::get_if<dynamics::VsiParams>(&d.controller))
                    dynamics::validate(*vsi, d.connection_level);
                else
                    dynamics::validate(std::get<dynamics::SgParams>(d.controller));
            } catch (const ConfigError& e) {
                t.fail(TableError::Kind::invariant, r, e.what());
            }
            g.ders.push_back(std::move(d));
        }
    }

    // storage: parsed, kept inactive
    if (fs::exists(dir / "storage.csv")) {
        auto t = read_table(dir, "storage", aliases);
        std::set<std::string, std::less<>> seen;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            Storage s;
            s.id = t.text(r, "id");
            check_unique(t, seen, r, s.id);
            s.bus = bus_ref(g, t, r, "bus");
            s.p_mw = t.optional_real(r, "p_mw").value_or(0.0);
            s.active = false;
            g.storage.push_back(s);
        }
    }

    // slack
    {
        auto t = read_table(dir, "slack", aliases);
        if (t.rows() != 1)
            throw TableError(TableError::Kind::invariant, t.path(), 0, "exactly one slack row required");
        g.slack.id = t.text(0, "id");
        g.slack.bus = bus_ref(g, t, 0, "bus");
        g.slack.v_set = t.real(0, "v_set");
        set_if(t, 0, "h_s", g.slack.machine.h);
        set_if(t, 0, "damping", g.slack.machine.damping);
        set_if(t, 0, "s_rated_mva", g.slack.machine.s_rated_mva);
        set_if(t, 0, "xd_t", g.slack.machine.xd_t);
        for (auto name : study_case_names())
            if (auto v = t.optional_real(0, "v_set_" + std::string(name)))
                g.slack.v_set_by_case[std::string(name)] = *v;
    }

    try {
        g.validate();
    } catch (const TableError&) {
        throw;
    } catch (const ConfigError& e) {
        throw TableError(TableError::Kind::invariant, dir, 0, e.what());
    }
    return g;
}

} // namespace dersim::grid
