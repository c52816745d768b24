#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

using namespace dersim;

namespace {

Complex series(Real r, Real x, bool is_switch) {
    if (r == 0.0 && x == 0.0 && is_switch)
        x = 1e-4;
    return 1.0 / Complex(r, x);
}

Real tap_of(const grid::GridModel& g, std::span<const Real> taps, std::size_t k) {
    if (!taps.empty())
        return taps[k];
    const auto& t = g.transformers[k];
    return t.oltc ? 1.0 + t.tap_pos * t.oltc->tap_step : t.tap_ratio;
}

} // namespace

DenseY dense_admittance(const grid::GridModel& g, std::span<const Real> taps) {
    const auto n = g.buses.size();
    DenseY y(n, std::vector<Complex>(n));
    for (const auto& br : g.branches) {
        Complex ys = series(br.r, br.x, br.is_switch);
        Complex half(0.0, br.b_shunt / 2.0);
        y[br.from][br.from] += ys + half;
        y[br.to][br.to] += ys + half;
        y[br.from][br.to] -= ys;
        y[br.to][br.from] -= ys;
    }
    for (std::size_t k = 0; k < g.transformers.size(); ++k) {
        const auto& t = g.transformers[k];
        const Real a = tap_of(g, taps, k);
        Complex ys = series(t.r, t.x, false);
        y[t.from][t.from] += ys / (a * a);
        y[t.to][t.to] += ys;
        y[t.from][t.to] -= ys / a;
        y[t.to][t.from] -= ys / a;
    }
    return y;
}

GaussSeidelResult gauss_seidel(const grid::GridModel& g, Real tol, int max_sweeps) {
    const auto n = g.buses.size();
    const DenseY y = dense_admittance(g);
    std::vector<Complex> s(n);
    for (const auto& l : g.loads)
        s[l.bus] -= Complex(l.p_mw, l.q_mvar) / g.s_base_mva;
    for (const auto& d : g.ders)
        s[d.bus] += Complex(d.p_mw, d.q_mvar) / g.s_base_mva;

    GaussSeidelResult out;
    out.v.assign(n, Complex(1.0, 0.0));
    out.v[g.slack.bus] = Complex(g.slack.v_set, 0.0);
    for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
        Real change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == g.slack.bus)
                continue;
            Complex acc = std::conj(s[i] / out.v[i]);
            for (std::size_t j = 0; j < n; ++j)
                if (j != i)
                    acc -= y[i][j] * out.v[j];
            Complex next = acc / y[i][i];
            change = std::max(change, std::abs(next - out.v[i]));
            out.v[i] = next;
        }
        if (change < tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

std::vector<Real> taps_from_admittance(const grid::GridModel& g, const grid::AdmittanceMatrix& y) {
    std::vector<Real> out;
    for (const auto& t : g.transformers) {
        Complex ys = series(t.r, t.x, false);
        Complex off = y.coeff(static_cast<int>(t.to), static_cast<int>(t.from));
        out.push_back(std::abs(ys / off));
    }
    return out;
}

Real kcl_residual(const grid::GridModel& g, std::span<const Real> taps, const dynamics::NetworkInjections& inj,
                  std::span<const Complex> v) {
    const auto n = g.buses.size();
    std::vector<Complex> leaving(n);
    for (const auto& br : g.branches) {
        Complex ys = series(br.r, br.x, br.is_switch);
        Complex half(0.0, br.b_shunt / 2.0);
        leaving[br.from] += (v[br.from] - v[br.to]) * ys + v[br.from] * half;
        leaving[br.to] += (v[br.to] - v[br.from]) * ys + v[br.to] * half;
    }
    for (std::size_t k = 0; k < g.transformers.size(); ++k) {
        const auto& t = g.transformers[k];
        const Real a = tap_of(g, taps, k);
        Complex ys = series(t.r, t.x, false);
        // ideal a:1 transformer on the HV side, series admittance on the LV side
        Complex i_lv = (v[t.from] / a - v[t.to]) * ys;
        leaving[t.from] += i_lv / a;
        leaving[t.to] -= i_lv;
    }
    for (std::size_t b = 0; b < inj.load_power.size(); ++b)
        if (std::abs(v[b]) > 0.0)
            leaving[b] += std::conj(inj.load_power[b] / v[b]);
    for (const auto& nt : inj.norton) {
        const auto& m = nt.port.y;
        const Complex u = v[nt.bus];
        Complex yv(m(0, 0) * u.real() + m(0, 1) * u.imag(), m(1, 0) * u.real() + m(1, 1) * u.imag());
        leaving[nt.bus] -= nt.port.i_src - yv;
    }
    for (const auto& iv : inj.inverters)
        leaving[iv.bus] -= iv.c * v[iv.bus] / std::abs(v[iv.bus]);

    std::vector<char> fixed(n, 0);
    for (const auto& [bus, value] : inj.fixed_voltage)
        fixed[bus] = 1;
    Real worst = 0.0;
    for (std::size_t b = 0; b < n; ++b)
        if (!fixed[b])
            worst = std::max(worst, std::abs(leaving[b]));
    return worst;
}

} // namespace oracle
