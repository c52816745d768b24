#pragma once

// Algebraic network of the RMS simulation. Solves
//   Y V + conj(S_load / V) - I_dev(V) = 0
// for all bus voltages by Newton iteration on rectangular coordinates, where
// device injections are linear Norton ports (machines) or constant-magnitude
// currents that follow the terminal voltage angle (inverters).

#include "dersim/grid_model.hpp"
#include "dersim/sync_machine.hpp"

#include <Eigen/SparseLU>

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace dersim::dynamics {

/// The inner load-flow iteration diverged: the simulation treats this as voltage collapse.
class VoltageCollapse : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct NortonInjection {
    std::size_t bus = 0;
    NortonPort port; ///< system pu
};

struct InverterInjection {
    std::size_t bus = 0;
    Complex c{}; ///< I = c * V/|V|, system pu
};

struct NetworkInjections {
    std::vector<NortonInjection> norton;
    std::vector<InverterInjection> inverters;
    std::vector<Complex> load_power; ///< per bus constant-power consumption, system pu (may be empty)
    std::vector<std::pair<std::size_t, Complex>> fixed_voltage; ///< ideal sources (test networks)
};

/// Sum of device currents injected at every bus for voltages `v`.
std::vector<Complex> device_currents(const NetworkInjections& inj, std::span<const Complex> v);

/// Complex nodal residual Y V + I_load - I_dev at every bus.
std::vector<Complex> network_residual(const grid::AdmittanceMatrix& y, const NetworkInjections& inj,
                                      std::span<const Complex> v);

struct NetworkSolveOptions {
    Real tolerance = 1e-10; ///< max |residual| per bus, system pu current
    int max_iterations = 30;
};

struct NetworkSolveStats {
    int iterations = 0;
    int factorizations = 0;
    Real residual = 0.0;
};

/// Keeps the factorization between calls and reuses it while Newton converges well.
class NetworkSolver {
public:
    explicit NetworkSolver(grid::AdmittanceMatrix y, NetworkSolveOptions options = {});

    /// Replaces the admittance matrix (tap change); same sparsity pattern expected.
    void set_admittance(grid::AdmittanceMatrix y);
    const grid::AdmittanceMatrix& admittance() const noexcept { return y_; }
    /// Forces a fresh Jacobian on the next solve (device set changed).
    void invalidate() noexcept { valid_ = false; }

    /// Solves in place, `v` holding the initial guess. Throws VoltageCollapse.
    NetworkSolveStats solve(const NetworkInjections& inj, std::vector<Complex>& v);

private:
    using SparseReal = Eigen::SparseMatrix<Real, Eigen::ColMajor, int>;

    void assemble(const NetworkInjections& inj, std::span<const Complex> v);

    grid::AdmittanceMatrix y_;
    NetworkSolveOptions options_;
    SparseReal jac_;
    Eigen::SparseLU<SparseReal> lu_;
    bool analyzed_ = false;
    bool valid_ = false;
    std::vector<char> pattern_fixed_;
    Eigen::Index pattern_nnz_ = 0;
};

/// One-shot convenience wrapper.
std::vector<Complex> network_solve(const grid::AdmittanceMatrix& y, const NetworkInjections& inj,
                                   std::span<const Complex> guess, NetworkSolveOptions options = {});

} // namespace dersim::dynamics
