#pragma once

// Scaled implicit-Euler time stepping of the partitioned system. One step
// solves
//     A_step xi(t+dt) = B_prev xi(t) + a (.) r(t+dt)
// where A_step/B_prev are the scaled matrices built with 1/dt substituted
// for j*omega (all arithmetic real) and the row multipliers a carry the
// scaling of the right-hand side. The boundary excitation enters as
// amplitude vectors times a scalar waveform w(t); its time derivative is
// discretized as the backward difference of w, matching the Euler scheme.

#include "eqstab/condest.hpp"
#include "eqstab/sparse_lu.hpp"
#include "eqstab/stabilize.hpp"
#include "eqstab/two_block.hpp"
#include "eqstab/types.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace eqstab {

struct EulerSystem {
    ComplexSparseMatrix A_step;   // left matrix (real values)
    ComplexSparseMatrix B_prev;   // previous-state multiplier
    std::vector<Cplx> a1_row;     // rhs row multipliers, block 1
    std::vector<Cplx> a2_row;     // rhs row multipliers, block 2
    Recovery recovery;            // phi = b (.) xi at this step size
    double dt = 0.0;
};

/// Build the scaled one-step system for a variant at step size dt. Passing
/// dt = infinity yields the static (omega = 0) coefficient table; only the
/// matrix is meaningful there.
inline EulerSystem euler_system(const TwoBlockSystem& sys, const ScalingVariant& var, double dt) {
    const auto m = detail::time_mode(dt);
    auto build = detail::build_scaled_matrices(sys, var, m, true);
    const auto& p = build.plan;

    EulerSystem out;
    out.A_step = std::move(build.A);
    out.B_prev = std::move(build.B_prev);
    out.recovery = p.recovery;
    out.dt = dt;

    const Index n1 = sys.n1(), n2 = sys.n2();
    out.a1_row.assign(static_cast<std::size_t>(n1), Cplx(1.0, 0.0));
    out.a2_row.assign(static_cast<std::size_t>(n2), Cplx(1.0, 0.0));
    for (Index i = 0; i < n1; ++i) {
        if (p.mode == detail::ScaleMode::row_divide)
            out.a1_row[static_cast<std::size_t>(i)] = Cplx(1.0, 0.0) / p.denom1[static_cast<std::size_t>(i)];
        else if (p.mode == detail::ScaleMode::sym_divide)
            out.a1_row[static_cast<std::size_t>(i)] = Cplx(1.0, 0.0) / p.sqrt1[static_cast<std::size_t>(i)];
    }
    for (Index j = 0; j < n2; ++j) {
        Cplx v = p.rs2_finite ? p.c_rs2 : Cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
        if (p.mode == detail::ScaleMode::row_divide) v /= p.denom2[static_cast<std::size_t>(j)];
        else if (p.mode == detail::ScaleMode::sym_divide) v /= p.sqrt2[static_cast<std::size_t>(j)];
        out.a2_row[static_cast<std::size_t>(j)] = v;
    }
    return out;
}

/// State of a transient run: time and the scaled block unknowns
/// [phi_1; xi_2] (xi_2 = phi_2 / b_2 at the run's step size).
struct TransientState {
    double t = 0.0;
    std::vector<Cplx> xi;
};

struct TransientConfig {
    double dt = 1e-3;
    double t_end = 0.1;
    ScalingVariant variant;
    std::function<double(double)> waveform;  // scales sources and BC amplitudes
    int sample_stride = 1;
};

/// Charge-neutral static solve used as the default initial condition:
/// conduction equilibrium in block 1, zero net insulator charge in block 2.
inline std::vector<Cplx> static_equilibrium(const TwoBlockSystem& sys, double w0) {
    ScalingVariant nonsym;
    nonsym.tag = ScalingTag::nonsym_omega;
    auto build = detail::build_scaled_matrices(sys, nonsym,
                                               detail::time_mode(std::numeric_limits<double>::infinity()),
                                               false);
    const Index n1 = sys.n1(), n2 = sys.n2();
    std::vector<Cplx> rhs(static_cast<std::size_t>(n1 + n2));
    for (Index i = 0; i < n1; ++i)
        rhs[static_cast<std::size_t>(i)] = sys.r1_static[static_cast<std::size_t>(i)] * w0;
    for (Index j = 0; j < n2; ++j) {
        if (sys.r2_static[static_cast<std::size_t>(j)] != Cplx(0.0, 0.0))
            throw IncompatibleSourceError("static equilibrium requires a divergence-free insulator source");
        rhs[static_cast<std::size_t>(n1 + j)] = sys.r2_dynamic[static_cast<std::size_t>(j)] * w0;
    }
    auto lu = lu_factor(build.A);
    return solve_refined(build.A, lu, rhs);
}

/// One-step solver with the factorization of A_step reused across steps
/// (dt is constant per run).
class TransientSolver {
public:
    TransientSolver(const TwoBlockSystem& sys, const ScalingVariant& var, double dt)
        : sys_(&sys), euler_(euler_system(sys, var, dt)), lu_(lu_factor(euler_.A_step)) {
        if (lu_.singular())
            throw SingularMatrixError("transient step matrix is singular for variant '" + var.label() + "'");
    }

    [[nodiscard]] const EulerSystem& system() const { return euler_; }

    /// Initial state from the charge-neutral static solve at waveform value
    /// w0, converted to the scaled unknowns.
    [[nodiscard]] TransientState initial_state(double t0, double w0) const {
        TransientState s;
        s.t = t0;
        std::vector<Cplx> phi = static_equilibrium(*sys_, w0);
        s.xi = phi;
        const Index n1 = sys_->n1();
        for (std::size_t i = 0; i < static_cast<std::size_t>(n1); ++i)
            s.xi[i] = phi[i] / euler_.recovery.b1[i];
        for (std::size_t j = 0; j < sys_->r2_static.size(); ++j)
            s.xi[static_cast<std::size_t>(n1) + j] =
                phi[static_cast<std::size_t>(n1) + j] / euler_.recovery.b2[j];
        return s;
    }

    /// Advance one step: waveform values at the old and new time level drive
    /// the sources and the Dirichlet lifting.
    [[nodiscard]] TransientState step(const TransientState& state, double w_prev, double w_next) const {
        const Index n1 = sys_->n1(), n2 = sys_->n2();
        std::vector<Cplx> rhs = euler_.B_prev.multiply(state.xi);
        const double dw = (w_next - w_prev) / euler_.dt;
        for (Index i = 0; i < n1; ++i)
            rhs[static_cast<std::size_t>(i)] +=
                euler_.a1_row[static_cast<std::size_t>(i)] *
                (sys_->r1_static[static_cast<std::size_t>(i)] * w_next +
                 sys_->r1_dynamic[static_cast<std::size_t>(i)] * dw);
        for (Index j = 0; j < n2; ++j)
            rhs[static_cast<std::size_t>(n1 + j)] +=
                euler_.a2_row[static_cast<std::size_t>(j)] *
                (sys_->r2_static[static_cast<std::size_t>(j)] * w_next +
                 sys_->r2_dynamic[static_cast<std::size_t>(j)] * dw);
        TransientState next;
        next.t = state.t + euler_.dt;
        next.xi = lu_.solve(rhs);
        return next;
    }

    /// Unscale the state to potentials in free-dof ordering.
    [[nodiscard]] std::vector<Cplx> recover(const TransientState& state) const {
        std::vector<Cplx> block(state.xi.size());
        for (std::size_t i = 0; i < static_cast<std::size_t>(sys_->n1()); ++i)
            block[i] = euler_.recovery.b1[i] * state.xi[i];
        for (std::size_t j = 0; j < static_cast<std::size_t>(sys_->n2()); ++j)
            block[static_cast<std::size_t>(sys_->n1()) + j] = euler_.recovery.b2[j] * state.xi[static_cast<std::size_t>(sys_->n1()) + j];
        return sys_->scatter(block);
    }

private:
    const TwoBlockSystem* sys_;
    EulerSystem euler_;
    LuFactorization lu_;
};

// =============================================================================
// conditioning across step sizes
// =============================================================================

struct DtConditionRow {
    double dt = 0.0;                    // +inf encodes the static point
    std::vector<double> kappa;          // one entry per variant; +inf sentinel
    std::vector<std::string> status;    // "ok", "singular", or an error note
};

/// Infinity-norm condition estimate of the (preconditioned) one-step matrix
/// for every variant and step size. Per-point failures become sentinel rows;
/// the sweep never aborts.
inline std::vector<DtConditionRow> condition_vs_dt(const TwoBlockSystem& sys,
                                                   std::span<const ScalingVariant> variants,
                                                   std::span<const double> dt_grid) {
    std::vector<DtConditionRow> rows;
    for (double dt : dt_grid) {
        DtConditionRow row;
        row.dt = dt;
        for (const auto& var : variants) {
            double kappa = std::numeric_limits<double>::infinity();
            std::string status = "ok";
            try {
                auto es = euler_system(sys, var, dt);
                if (var.tag == ScalingTag::block_freq || var.tag == ScalingTag::block_fixed) {
                    auto pre = detail::build_block_precond(sys, var, detail::time_mode(dt));
                    auto lu = lu_factor(es.A_step);
                    if (lu.singular()) throw SingularMatrixError("step matrix singular");
                    auto at = es.A_step.transpose();
                    const auto* a_ptr = &es.A_step;
                    OperatorProducts op;
                    op.n = es.A_step.nrows();
                    op.apply = [pre, a_ptr](std::span<const Cplx> x) { return pre->apply(a_ptr->multiply(x)); };
                    op.apply_transpose = [pre, at](std::span<const Cplx> x) {
                        return at.multiply(pre->apply_transpose(x));
                    };
                    op.solve = [pre, &lu](std::span<const Cplx> x) { return lu.solve(pre->multiply(x)); };
                    op.solve_transpose = [pre, &lu](std::span<const Cplx> x) {
                        return pre->multiply_transpose(lu.solve_transpose(x));
                    };
                    kappa = condest_inf_operator(op);
                } else {
                    auto lu = lu_factor(es.A_step);
                    kappa = condest_inf(es.A_step, lu);
                    if (std::isinf(kappa)) status = "singular";
                }
            } catch (const SingularMatrixError&) {
                status = "singular";
            } catch (const std::exception& e) {
                status = e.what();
            }
            row.kappa.push_back(kappa);
            row.status.push_back(std::move(status));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace eqstab
