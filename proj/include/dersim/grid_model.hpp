#pragma once

// Static network description: buses, branches, transformers with optional
// on-load tap changers, constant-power loads and DER units, all converted to
// per unit on the system MVA base declared in the grid manifest.

#include "dersim/common.hpp"
#include "dersim/csv.hpp"
#include "dersim/device_params.hpp"
#include "dersim/relay_params.hpp"

#include <Eigen/SparseCore>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dersim::grid {

/// Conversion between physical units and per unit for one voltage zone.
struct PerUnitBase {
    Real s_base_mva;
    Real v_base_kv;

    Real z_base_ohm() const { return v_base_kv * v_base_kv / s_base_mva; }
    Real i_base_ka() const;
    Real impedance_to_pu(Real ohm) const { return ohm / z_base_ohm(); }
    Real impedance_to_ohm(Real pu) const { return pu * z_base_ohm(); }
    Real admittance_to_pu(Real siemens) const { return siemens * z_base_ohm(); }
    Real admittance_to_siemens(Real pu) const { return pu / z_base_ohm(); }
    Real power_to_pu(Real mw) const { return mw / s_base_mva; }
    Real power_to_mw(Real pu) const { return pu * s_base_mva; }
    Real current_to_pu(Real ka) const { return ka / i_base_ka(); }
    Real current_to_ka(Real pu) const { return pu * i_base_ka(); }
};

struct Bus {
    std::string id;
    VoltageLevel level = VoltageLevel::MV;
    Real nominal_kv = 20.0;
    Real initial_v = 1.0;
    Real initial_angle = 0.0;
};

struct Branch {
    std::string id;
    std::size_t from = 0;
    std::size_t to = 0;
    Real r = 0.0;
    Real x = 0.0;
    Real b_shunt = 0.0;
    Real rating_mva = 0.0;
    bool is_switch = false;
};

struct OltcDescriptor {
    std::size_t controlled_bus = 0;
    Real v_ref = 1.0;
    Real v_ref_high_load = 1.0;
    Real v_ref_low_load = 1.0;
    Real deadband = 0.015; ///< half width, pu
    Real tap_step = 0.01;  ///< Δτ per tap position
    int tap_min = -16;
    int tap_max = 16;
    Real switch_time = 5.0;
    Real first_delay = 25.0;
    Real next_delay = 5.0;
    /// 1 = EHV/HV (settled first during initialization), 2 = HV/MV.
    int stage = 1;

    Real tau_min() const { return 1.0 + tap_min * tap_step; }
    Real tau_max() const { return 1.0 + tap_max * tap_step; }
    Real upper() const { return v_ref + deadband; }
    Real lower() const { return v_ref - deadband; }
};

struct Transformer {
    std::string id;
    std::size_t from = 0; ///< HV side; the tap sits on this winding
    std::size_t to = 0;
    Real r = 0.0;
    Real x = 0.0;
    Real s_rated_mva = 0.0;
    int tap_pos = 0;
    Real tap_ratio = 1.0;
    std::optional<OltcDescriptor> oltc;

    /// τ for a tap position, using the OLTC step when present.
    Real ratio_at(int pos) const;
};

struct Load {
    std::string id;
    std::size_t bus = 0;
    Real p_base_mw = 0.0;
    Real q_base_mvar = 0.0;
    Real p_mw = 0.0;
    Real q_mvar = 0.0;
};

enum class DerKind { WPP, PV, Hydro, Biomass, ResLv };
enum class MachineType { VSI, SG };

struct DerUnit {
    std::string id;
    std::size_t bus = 0;
    DerKind kind = DerKind::WPP;
    MachineType machine = MachineType::VSI;
    VoltageLevel connection_level = VoltageLevel::MV;
    Real p_inst_mw = 0.0;
    Real p_base_mw = 0.0;
    Real q_base_mvar = 0.0;
    Real p_mw = 0.0;
    Real q_mvar = 0.0;
    std::string control_class;
    std::string relay_class;
    std::variant<dynamics::VsiParams, dynamics::SgParams> controller;
    protection::RelayParams relay;
};

struct Storage {
    std::string id;
    std::size_t bus = 0;
    Real p_mw = 0.0;
    bool active = false;
};

struct SlackDescriptor {
    std::string id;
    std::size_t bus = 0;
    Real v_set = 1.0;
    std::map<std::string, Real, std::less<>> v_set_by_case;
    dynamics::EhvEquivalentParams machine;
};

struct StudyCase {
    std::string name;
    Real load_p_scale_hv = 1.0;
    Real load_p_scale_mv = 1.0;
    Real load_cos_phi = 0.93;
    Real wind = 0.0;
    Real pv = 0.0;
    Real other = 0.0;
    bool low_load = false;
};

/// The five named operating points; throws ConfigError for unknown names.
StudyCase study_case(std::string_view name);
std::span<const std::string_view> study_case_names();

class GridModel {
public:
    std::string name;
    Real s_base_mva = 100.0;
    Real frequency_hz = 50.0;
    std::string applied_case;

    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Transformer> transformers;
    std::vector<Load> loads;
    std::vector<DerUnit> ders;
    std::vector<Storage> storage;
    SlackDescriptor slack;

    std::size_t bus_index(std::string_view id) const;
    std::optional<std::size_t> find_bus(std::string_view id) const;
    std::optional<std::size_t> find_der(std::string_view id) const;

    PerUnitBase base_at(std::size_t bus) const { return {s_base_mva, buses.at(bus).nominal_kv}; }
    /// Tap ratio of every transformer at its current position.
    std::vector<Real> tap_ratios() const;

    /// Checks connectivity, references, parameter invariants. Throws ConfigError.
    void validate() const;
    void rebuild_index();

private:
    std::map<std::string, std::size_t, std::less<>> bus_lookup_;
};

/// Reads a grid directory (manifest.csv, buses.csv, lines.csv, transformers.csv,
/// loads.csv, ders.csv, slack.csv, optional storage.csv and parameter tables).
GridModel load_grid(const std::filesystem::path& dir);

/// Returns a copy with loads, DER injections, OLTC references and slack voltage
/// set for the study case. Scaling always starts from the base values.
GridModel apply_study_case(const GridModel& grid, const StudyCase& study);

using AdmittanceMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;

/// Nodal admittance matrix in system per unit. `tap_ratios` overrides the
/// transformer positions stored in the grid when non-empty.
AdmittanceMatrix build_admittance(const GridModel& grid, std::span<const Real> tap_ratios = {});

/// Per-bus shunt admittance implied by the branch model (line charging plus the
/// off-nominal tap equivalent), i.e. the row sums of the admittance matrix.
std::vector<Complex> shunt_admittances(const GridModel& grid, std::span<const Real> tap_ratios = {});

const char* to_string(DerKind kind);
const char* to_string(MachineType type);
DerKind parse_der_kind(std::string_view text);
VoltageLevel parse_voltage_level(std::string_view text);

} // namespace dersim::grid
