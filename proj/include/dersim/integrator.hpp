#pragma once

// Fixed-step one-step methods for small device ODE systems x' = f(x) with the
// network voltage frozen over the step. `project` re-imposes hard limits
// (anti-windup clamps) after each stage.

#include "dersim/common.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace dersim::dynamics {

enum class Integrator { trapezoidal, heun };

const char* to_string(Integrator method);
Integrator parse_integrator(const std::string& text);

template <int N>
using StateVec = Eigen::Matrix<Real, N, 1>;

template <int N, class F, class P>
StateVec<N> heun_step(const StateVec<N>& x0, Real h, F&& f, P&& project) {
    StateVec<N> f0 = f(x0);
    StateVec<N> xp = x0 + h * f0;
    project(xp);
    StateVec<N> x1 = x0 + 0.5 * h * (f0 + f(xp));
    project(x1);
    return x1;
}

/// Implicit trapezoidal rule solved by Newton with a forward-difference Jacobian.
/// Falls back to the last iterate if Newton stalls (limits make f non-smooth).
template <int N, class F, class P>
StateVec<N> trapezoidal_step(const StateVec<N>& x0, Real h, F&& f, P&& project) {
    using Mat = Eigen::Matrix<Real, N, N>;
    const StateVec<N> f0 = f(x0);
    StateVec<N> x = x0 + h * f0;
    project(x);
    StateVec<N> fx = f(x);
    StateVec<N> g = x - x0 - 0.5 * h * (f0 + fx);
    if (g.template lpNorm<Eigen::Infinity>() < 1e-14)
        return x;

    Mat jac;
    for (int k = 0; k < N; ++k) {
        StateVec<N> xk = x;
        Real dx = 1e-7 * std::max<Real>(1.0, std::abs(x[k]));
        xk[k] += dx;
        jac.col(k) = (f(xk) - fx) / dx;
    }
    Mat m = Mat::Identity() - 0.5 * h * jac;
    Eigen::PartialPivLU<Mat> lu(m);
    for (int it = 0; it < 8; ++it) {
        x -= lu.solve(g);
        project(x);
        fx = f(x);
        g = x - x0 - 0.5 * h * (f0 + fx);
        if (g.template lpNorm<Eigen::Infinity>() < 1e-13)
            break;
    }
    return x;
}

template <int N, class F, class P>
StateVec<N> integrate_step(Integrator method, const StateVec<N>& x0, Real h, F&& f, P&& project) {
    if (method == Integrator::heun)
        return heun_step<N>(x0, h, f, project);
    return trapezoidal_step<N>(x0, h, f, project);
}

} // namespace dersim::dynamics
