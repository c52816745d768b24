#pragma once

// Manipulation scenarios: a target selector over DER units and a timed list of
// control signals, dispatched open loop (time is the only input).
//
// Text format, one directive per line, '#' starts a comment:
//
//   name ov2
//   target kind=WPP level=HV,MV      # also: id=A,B ; omitted keys match any
//   at 1.0 q_set 0.5                 # p_set / q_set in unit pu of P_inst
//   at 1.0 disconnect
//
// Event times must be non-decreasing.

#include "dersim/grid_model.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dersim::attack {

enum class SignalKind { p_set, q_set, disconnect };
const char* to_string(SignalKind kind);

struct ControlSignal {
    SignalKind kind = SignalKind::p_set;
    Real value = 0.0;
};

struct TargetSelector {
    std::vector<grid::DerKind> kinds;  ///< empty: any kind
    std::vector<VoltageLevel> levels;  ///< empty: any connection level
    std::vector<std::string> ids;      ///< empty: any unit

    bool matches(const grid::DerUnit& der) const;
};

struct ScenarioEvent {
    Real time = 0.0;
    ControlSignal signal;
};

struct ManipulationScenario {
    std::string name;
    TargetSelector target;
    std::vector<ScenarioEvent> events;

    /// Time of the first event, or +inf for an empty scenario.
    Real start_time() const;
};

/// Scenario file problem, with the 1-based line.
class ScenarioError : public ConfigError {
public:
    ScenarioError(const std::string& origin, std::size_t line, const std::string& message);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

ManipulationScenario parse_scenario(std::string_view text, const std::string& origin = "<memory>");
ManipulationScenario load_scenario(const std::filesystem::path& path);
std::string format_scenario(const ManipulationScenario& scenario);

/// Built-in scenarios uv1, uv2, ov1, ov2, disc. Throws ConfigError for other names.
ManipulationScenario build_scenario(std::string_view name);
std::span<const std::string_view> builtin_scenario_names();
/// Scenario without events (reference run).
ManipulationScenario baseline_scenario();
/// Built-in name, or path to a scenario file.
ManipulationScenario resolve_scenario(const std::string& name_or_path);

/// Clips a signal into the protocol range: p_set to [0, 1], q_set to [-0.5, 0.5] (unit pu).
ControlSignal clamp_signal(ControlSignal signal, const grid::DerUnit& der);

struct Delivery {
    std::size_t der = 0;
    ControlSignal signal;
    Real event_time = 0.0;
};

/// Decides whether a delivery reaches the unit; the default delivers everything.
using SuccessHook = std::function<bool(const ScenarioEvent&, const grid::DerUnit&)>;

/// Signals due in the step ending at t, i.e. events with time in (t - h, t],
/// for every unit matching the selector, already clamped.
std::vector<Delivery> dispatch(const ManipulationScenario& scenario, const grid::GridModel& grid, Real t, Real h,
                               const SuccessHook& success = {});

} // namespace dersim::attack
