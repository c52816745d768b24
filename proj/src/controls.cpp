#include "dersim/controls.hpp"
#include "dersim/integrator.hpp"

#include <algorithm>
#include <cmath>

namespace dersim::dynamics {

Real slope_limit(Real prev_ref, Real target, Real rate, Real h) {
    if (rate <= 0.0)
        throw ConfigError("slope limit rate must be positive");
    const Real max_step = rate * h;
    return prev_ref + std::clamp(target - prev_ref, -max_step, max_step);
}

Real q_lag(Real state, Real target, Real t1, Real h) {
    if (t1 <= 0.0)
        throw ConfigError("lag time constant must be positive");
    if (state == target)
        return state;
    return target + (state - target) * std::exp(-h / t1);
}

const char* to_string(Integrator method) {
    return method == Integrator::heun ? "heun" : "trapezoidal";
}

Integrator parse_integrator(const std::string& text) {
    if (text == "trapezoidal" || text == "trap")
        return Integrator::trapezoidal;
    if (text == "heun")
        return Integrator::heun;
    throw ConfigError("unknown integrator '" + text + "' (expected trapezoidal or heun)");
}

} // namespace dersim::dynamics
