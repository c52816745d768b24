#include "dersim/power_flow.hpp"

#include <Eigen/SparseLU>
#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace dersim::powerflow {

using grid::GridModel;

std::vector<Complex> PowerFlowSolution::voltages() const {
    std::vector<Complex> v(vm.size());
    for (std::size_t i = 0; i < vm.size(); ++i)
        v[i] = std::polar(vm[i], va[i]);
    return v;
}

std::vector<Complex> specified_injections(const GridModel& grid) {
    std::vector<Complex> s(grid.buses.size(), Complex{});
    for (const auto& d : grid.ders)
        s[d.bus] += Complex(d.p_mw, d.q_mvar) / grid.s_base_mva;
    for (const auto& l : grid.loads)
        s[l.bus] -= Complex(l.p_mw, l.q_mvar) / grid.s_base_mva;
    return s;
}

namespace {

using SparseReal = Eigen::SparseMatrix<Real, Eigen::ColMajor, int>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

struct Mismatch {
    Vec f;
    Real max_abs = 0.0;
    std::size_t worst_bus = 0;
};

Mismatch mismatch(const grid::AdmittanceMatrix& y, const CVec& v, const std::vector<Complex>& s_spec,
                  const std::vector<int>& pq) {
    CVec i = y * v;
    const auto m = static_cast<int>(pq.size());
    Mismatch out;
    out.f.resize(2 * m);
    for (int k = 0; k < m; ++k) {
        int b = pq[k];
        Complex mis = v[b] * std::conj(i[b]) - s_spec[b];
        out.f[k] = mis.real();
        out.f[m + k] = mis.imag();
        Real a = std::max(std::abs(mis.real()), std::abs(mis.imag()));
        if (a > out.max_abs || std::isnan(a)) {
            out.max_abs = std::isnan(a) ? INFINITY : a;
            out.worst_bus = b;
        }
    }
    return out;
}

SparseReal jacobian(const grid::AdmittanceMatrix& y, const CVec& v, const std::vector<int>& pq,
                    const std::vector<int>& pos) {
    const auto n = static_cast<int>(v.size());
    const auto m = static_cast<int>(pq.size());
    CVec i = y * v;
    CVec vnorm(n);
    for (int k = 0; k < n; ++k)
        vnorm[k] = v[k] / std::abs(v[k]);

    std::vector<Eigen::Triplet<Real>> trip;
    trip.reserve(4 * y.nonZeros() + 4 * n);
    // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(Vn)) + conj(diag(I)) diag(Vn)
    auto emit = [&](int row_bus, int col_bus, Complex ds_dva, Complex ds_dvm) {
        int r = pos[row_bus];
        int c = pos[col_bus];
        if (r < 0 || c < 0)
            return;
        trip.emplace_back(r, c, ds_dva.real());
        trip.emplace_back(r, m + c, ds_dvm.real());
        trip.emplace_back(m + r, c, ds_dva.imag());
        trip.emplace_back(m + r, m + c, ds_dvm.imag());
    };
    for (int col = 0; col < y.outerSize(); ++col)
        for (grid::AdmittanceMatrix::InnerIterator it(y, col); it; ++it) {
            int row = it.row();
            Complex yij = it.value();
            Complex dva = Complex(0, 1) * v[row] * std::conj(-yij * v[col]);
            Complex dvm = v[row] * std::conj(yij * vnorm[col]);
            emit(row, col, dva, dvm);
        }
    for (int b = 0; b < n; ++b) {
        Complex dva = Complex(0, 1) * v[b] * std::conj(i[b]);
        Complex dvm = std::conj(i[b]) * vnorm[b];
        emit(b, b, dva, dvm);
    }
    SparseReal j(2 * m, 2 * m);
    j.setFromTriplets(trip.begin(), trip.end());
    j.makeCompressed();
    return j;
}

void compute_flows(const GridModel& grid, const std::vector<Real>& taps, const std::vector<Complex>& v,
                   PowerFlowSolution& sol) {
    const Real sb = grid.s_base_mva;
    for (const auto& br : grid.branches) {
        Complex y = (br.r == 0.0 && br.x == 0.0) ? 1.0 / Complex(0.0, 1e-4) : 1.0 / Complex(br.r, br.x);
        Complex ysh(0.0, br.b_shunt / 2.0);
        Complex vf = v[br.from], vt = v[br.to];
        Complex sf = vf * std::conj(y * (vf - vt) + ysh * vf) * sb;
        Complex st = vt * std::conj(y * (vt - vf) + ysh * vt) * sb;
        sol.flows.push_back({br.id, false, sf.real(), sf.imag(), st.real(), st.imag()});
    }
    for (std::size_t k = 0; k < grid.transformers.size(); ++k) {
        const auto& tr = grid.transformers[k];
        Complex y = 1.0 / Complex(tr.r, tr.x);
        Real tau = taps[k];
        Complex vf = v[tr.from], vt = v[tr.to];
        Complex sf = vf * std::conj(y / (tau * tau) * vf - y / tau * vt) * sb;
        Complex st = vt * std::conj(y * vt - y / tau * vf) * sb;
        sol.flows.push_back({tr.id, true, sf.real(), sf.imag(), st.real(), st.imag()});
    }
}

} // namespace

PowerFlowSolution solve_power_flow(const GridModel& grid, const PowerFlowOptions& options,
                                   std::span<const Complex> start) {
    const auto n = static_cast<int>(grid.buses.size());
    const auto taps = grid.tap_ratios();
    auto y = grid::build_admittance(grid, taps);
    auto s_spec = specified_injections(grid);
    const auto slack = static_cast<int>(grid.slack.bus);

    std::vector<int> pq;
    std::vector<int> pos(n, -1);
    for (int b = 0; b < n; ++b)
        if (b != slack) {
            pos[b] = static_cast<int>(pq.size());
            pq.push_back(b);
        }
    const auto m = static_cast<int>(pq.size());

    CVec v(n);
    if (!start.empty()) {
        if (start.size() != static_cast<std::size_t>(n))
            throw ConfigError("power flow start vector has wrong size");
        for (int b = 0; b < n; ++b)
            v[b] = start[b];
    } else {
        v.setConstant(Complex(1.0, 0.0));
    }
    v[slack] = Complex(grid.slack.v_set, 0.0);

    PowerFlowSolution sol;
    Eigen::SparseLU<SparseReal> lu;
    int iter = 0;
    auto mis = mismatch(y, v, s_spec, pq);
    while (mis.max_abs > options.tolerance) {
        if (iter >= options.max_iterations || !std::isfinite(mis.max_abs))
            throw NumericalError(fmt::format("power flow did not converge after {} iterations; worst bus '{}' "
                                             "with mismatch {:.3e} pu",
                                             iter, grid.buses[mis.worst_bus].id, mis.max_abs));
        auto j = jacobian(y, v, pq, pos);
        lu.compute(j);
        if (lu.info() != Eigen::Success)
            throw NumericalError("power flow Jacobian is singular");
        Vec dx = lu.solve(-mis.f);
        if (lu.info() != Eigen::Success || !dx.allFinite())
            throw NumericalError("power flow Jacobian is singular");
        for (int k = 0; k < m; ++k) {
            int b = pq[k];
            Real va = std::arg(v[b]) + dx[k];
            Real vm = std::abs(v[b]) + dx[m + k];
            if (vm <= 0.05)
                vm = 0.05; // keep the iterate on the physical branch
            v[b] = std::polar(vm, va);
        }
        ++iter;
        mis = mismatch(y, v, s_spec, pq);
    }

    sol.iterations = iter;
    sol.max_mismatch = mis.max_abs;
    sol.vm.resize(n);
    sol.va.resize(n);
    std::vector<Complex> vv(n);
    for (int b = 0; b < n; ++b) {
        vv[b] = v[b];
        sol.vm[b] = std::abs(v[b]);
        sol.va[b] = std::arg(v[b]);
        if (sol.vm[b] < 0.5)
            throw NumericalError(fmt::format("power flow converged to a low-voltage solution at bus '{}' ({:.3f} pu)",
                                             grid.buses[b].id, sol.vm[b]));
    }
    CVec i = y * v;
    Complex s_slack = (v[slack] * std::conj(i[slack]) - s_spec[slack]) * grid.s_base_mva;
    sol.slack_p_mw = s_slack.real();
    sol.slack_q_mvar = s_slack.imag();
    compute_flows(grid, taps, vv, sol);
    return sol;
}

// ---------------------------------------------------------------------------
// OLTC settling

namespace {

Real violation(const grid::OltcDescriptor& o, Real v) {
    return std::max({0.0, v - o.upper(), o.lower() - v});
}

int settle_stage(GridModel& g, PowerFlowSolution& sol, int stage, const OltcInitOptions& options, bool& hunting) {
    std::vector<std::size_t> members;
    for (std::size_t k = 0; k < g.transformers.size(); ++k)
        if (g.transformers[k].oltc && g.transformers[k].oltc->stage == stage)
            members.push_back(k);
    if (members.empty())
        return 0;

    auto tap_vector = [&] {
        std::vector<int> t;
        for (auto k : members)
            t.push_back(g.transformers[k].tap_pos);
        return t;
    };
    auto total_violation = [&] {
        Real s = 0.0;
        for (auto k : members) {
            const auto& o = *g.transformers[k].oltc;
            s += violation(o, sol.vm[o.controlled_bus]);
        }
        return s;
    };

    std::map<std::vector<int>, Real> visited;
    int rounds = 0;
    for (;;) {
        auto taps = tap_vector();
        Real viol = total_violation();
        if (visited.count(taps)) {
            hunting = true;
            if (options.hunt_policy == HuntPolicy::abort)
                throw NumericalError(fmt::format("OLTC tap hunting during stage {} initialization", stage));
            // lowest violation, ties toward the lexicographically lower tap vector (map order)
            auto best = visited.begin();
            for (auto it = visited.begin(); it != visited.end(); ++it)
                if (it->second < best->second - 1e-12)
                    best = it;
            for (std::size_t i = 0; i < members.size(); ++i) {
                auto& tr = g.transformers[members[i]];
                tr.tap_pos = best->first[i];
                tr.tap_ratio = tr.ratio_at(tr.tap_pos);
            }
            sol = solve_power_flow(g, options.power_flow, sol.voltages());
            return rounds;
        }
        visited.emplace(taps, viol);

        bool moved = false;
        for (auto k : members) {
            auto& tr = g.transformers[k];
            const auto& o = *tr.oltc;
            Real v = sol.vm[o.controlled_bus];
            // a higher ratio on the HV winding lowers the LV side voltage
            if (v > o.upper() && tr.tap_pos < o.tap_max) {
                ++tr.tap_pos;
                moved = true;
            } else if (v < o.lower() && tr.tap_pos > o.tap_min) {
                --tr.tap_pos;
                moved = true;
            }
            tr.tap_ratio = tr.ratio_at(tr.tap_pos);
        }
        if (!moved)
            return rounds;
        if (++rounds > options.max_rounds)
            throw NumericalError(fmt::format("OLTC stage {} initialization exceeded {} rounds", stage, options.max_rounds));
        sol = solve_power_flow(g, options.power_flow, sol.voltages());
    }
}

} // namespace

OltcInitResult settle_oltc(const GridModel& grid, const OltcInitOptions& options) {
    OltcInitResult out{grid, {}, 0, 0, false};
    out.solution = solve_power_flow(out.grid, options.power_flow);
    out.rounds_stage1 = settle_stage(out.grid, out.solution, 1, options, out.hunting);
    out.rounds_stage2 = settle_stage(out.grid, out.solution, 2, options, out.hunting);
    return out;
}

OltcInitResult initialize_oltc(const GridModel& grid, const grid::StudyCase& study, const OltcInitOptions& options) {
    return settle_oltc(grid::apply_study_case(grid, study), options);
}

void write_solution_csv(const std::filesystem::path& path, const GridModel& grid, const PowerFlowSolution& sol) {
    auto out = fmt::output_file(path.string());
    out.print("# iterations={} max_mismatch={:.3e} slack_p_mw={:.6f} slack_q_mvar={:.6f}\n", sol.iterations,
              sol.max_mismatch, sol.slack_p_mw, sol.slack_q_mvar);
    out.print("kind,id,level,vm_pu,va_rad,p_from_mw,q_from_mvar,p_to_mw,q_to_mvar\n");
    for (std::size_t b = 0; b < grid.buses.size(); ++b)
        out.print("bus,{},{},{:.10f},{:.10f},,,,\n", grid.buses[b].id, to_string(grid.buses[b].level), sol.vm[b],
                  sol.va[b]);
    for (const auto& f : sol.flows)
        out.print("{},{},,,,{:.6f},{:.6f},{:.6f},{:.6f}\n", f.transformer ? "transformer" : "line", f.id, f.p_from_mw,
                  f.q_from_mvar, f.p_to_mw, f.q_to_mvar);
}

} // namespace dersim::powerflow
