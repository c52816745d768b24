#include "dersim/network_solver.hpp"

#include <fmt/format.h>

#include <cmath>

namespace dersim::dynamics {

std::vector<Complex> device_currents(const NetworkInjections& inj, std::span<const Complex> v) {
    std::vector<Complex> i(v.size(), Complex{});
    for (const auto& n : inj.norton)
        i[n.bus] += n.port.current(v[n.bus]);
    for (const auto& c : inj.inverters) {
        Real m = std::abs(v[c.bus]);
        if (m > 1e-9)
            i[c.bus] += c.c * v[c.bus] / m;
    }
    return i;
}

std::vector<Complex> network_residual(const grid::AdmittanceMatrix& y, const NetworkInjections& inj,
                                      std::span<const Complex> v) {
    const auto n = v.size();
    std::vector<Complex> r(n, Complex{});
    for (int col = 0; col < y.outerSize(); ++col)
        for (grid::AdmittanceMatrix::InnerIterator it(y, col); it; ++it)
            r[it.row()] += it.value() * v[col];
    if (!inj.load_power.empty())
        for (std::size_t b = 0; b < n; ++b)
            if (inj.load_power[b] != Complex{})
                r[b] += std::conj(inj.load_power[b] / v[b]);
    auto idev = device_currents(inj, v);
    for (std::size_t b = 0; b < n; ++b)
        r[b] -= idev[b];
    for (const auto& [bus, vset] : inj.fixed_voltage)
        r[bus] = v[bus] - vset;
    return r;
}

NetworkSolver::NetworkSolver(grid::AdmittanceMatrix y, NetworkSolveOptions options)
    : y_(std::move(y)), options_(options) {}

void NetworkSolver::set_admittance(grid::AdmittanceMatrix y) {
    y_ = std::move(y);
    valid_ = false;
}

void NetworkSolver::assemble(const NetworkInjections& inj, std::span<const Complex> v) {
    const auto n = static_cast<int>(v.size());
    std::vector<char> fixed(n, 0);
    for (const auto& fv : inj.fixed_voltage)
        fixed[fv.first] = 1;

    std::vector<Eigen::Triplet<Real>> t;
    t.reserve(4 * y_.nonZeros() + 8 * n);
    auto block = [&](int i, int j, Real a, Real b, Real c, Real d) {
        t.emplace_back(2 * i, 2 * j, a);
        t.emplace_back(2 * i, 2 * j + 1, b);
        t.emplace_back(2 * i + 1, 2 * j, c);
        t.emplace_back(2 * i + 1, 2 * j + 1, d);
    };
    // complex partials g_e = dR/de, g_f = dR/df as a real 2x2 block
    auto cblock = [&](int i, Complex ge, Complex gf) { block(i, i, ge.real(), gf.real(), ge.imag(), gf.imag()); };

    for (int col = 0; col < y_.outerSize(); ++col)
        for (grid::AdmittanceMatrix::InnerIterator it(y_, col); it; ++it) {
            int row = static_cast<int>(it.row());
            if (fixed[row])
                continue;
            Complex yy = it.value();
            block(row, col, yy.real(), -yy.imag(), yy.imag(), yy.real());
        }
    for (int b = 0; b < n; ++b) {
        if (fixed[b]) {
            block(b, b, 1.0, 0.0, 0.0, 1.0);
            continue;
        }
        block(b, b, 0.0, 0.0, 0.0, 0.0); // keep the diagonal pattern fixed
        if (!inj.load_power.empty() && inj.load_power[b] != Complex{}) {
            Complex sbar = std::conj(inj.load_power[b]);
            Complex vbar2 = std::conj(v[b]) * std::conj(v[b]);
            cblock(b, -sbar / vbar2, Complex(0.0, 1.0) * sbar / vbar2);
        }
    }
    for (const auto& nrt : inj.norton) {
        int b = static_cast<int>(nrt.bus);
        if (fixed[b])
            continue;
        block(b, b, nrt.port.y(0, 0), nrt.port.y(0, 1), nrt.port.y(1, 0), nrt.port.y(1, 1));
    }
    for (const auto& c : inj.inverters) {
        int b = static_cast<int>(c.bus);
        if (fixed[b])
            continue;
        Complex vb = v[b];
        Real m = std::abs(vb);
        if (m < 1e-9)
            continue;
        Real m3 = m * m * m;
        Complex du_de = 1.0 / m - vb * vb.real() / m3;
        Complex du_df = Complex(0.0, 1.0) / m - vb * vb.imag() / m3;
        cblock(b, -c.c * du_de, -c.c * du_df);
    }
    jac_.resize(2 * n, 2 * n);
    jac_.setFromTriplets(t.begin(), t.end());
    jac_.makeCompressed();
    if (!analyzed_ || fixed != pattern_fixed_ || jac_.nonZeros() != pattern_nnz_) {
        lu_.analyzePattern(jac_);
        analyzed_ = true;
        pattern_fixed_ = fixed;
        pattern_nnz_ = jac_.nonZeros();
    }
    lu_.factorize(jac_);
    if (lu_.info() != Eigen::Success)
        throw VoltageCollapse("network Jacobian is singular");
    valid_ = true;
}

NetworkSolveStats NetworkSolver::solve(const NetworkInjections& inj, std::vector<Complex>& v) {
    const auto n = v.size();
    NetworkSolveStats stats;
    Eigen::VectorXd rhs(2 * n);
    Real prev = INFINITY;
    for (int it = 0; it <= options_.max_iterations; ++it) {
        auto r = network_residual(y_, inj, v);
        Real norm = 0.0;
        for (std::size_t b = 0; b < n; ++b)
            norm = std::max(norm, std::abs(r[b]));
        stats.residual = norm;
        if (!std::isfinite(norm))
            break;
        if (norm < options_.tolerance) {
            stats.iterations = it;
            return stats;
        }
        if (it == options_.max_iterations)
            break;
        if (!valid_ || norm > 0.25 * prev) {
            assemble(inj, v);
            ++stats.factorizations;
        }
        prev = norm;
        for (std::size_t b = 0; b < n; ++b) {
            rhs[2 * b] = -r[b].real();
            rhs[2 * b + 1] = -r[b].imag();
        }
        Eigen::VectorXd dz = lu_.solve(rhs);
        if (!dz.allFinite())
            break;
        bool collapsed = false;
        for (std::size_t b = 0; b < n; ++b) {
            v[b] += Complex(dz[2 * b], dz[2 * b + 1]);
            if (!(std::abs(v[b]) > 0.05))
                collapsed = true;
        }
        if (collapsed)
            throw VoltageCollapse("network solution left the physical voltage range");
    }
    valid_ = false;
    throw VoltageCollapse(fmt::format("network iteration did not converge (residual {:.3e} pu)", stats.residual));
}

std::vector<Complex> network_solve(const grid::AdmittanceMatrix& y, const NetworkInjections& inj,
                                   std::span<const Complex> guess, NetworkSolveOptions options) {
    NetworkSolver solver(y, options);
    std::vector<Complex> v(guess.begin(), guess.end());
    solver.solve(inj, v);
    return v;
}

} // namespace dersim::dynamics
