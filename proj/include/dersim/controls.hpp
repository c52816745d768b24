#pragma once

#include "dersim/common.hpp"

namespace dersim::dynamics {

/// Moves `prev_ref` toward `target` by at most rate*h; lands on the target when within reach.
Real slope_limit(Real prev_ref, Real target, Real rate, Real h);

/// One step of a first-order lag with time constant `t1`, integrated exactly for a
/// target held constant over the step.
Real q_lag(Real state, Real target, Real t1, Real h);

} // namespace dersim::dynamics
