#pragma once

// Low-frequency stabilization of the two-block system: scalar scalings by
// powers of the frequency, material-weighted scalings, Jacobi-type diagonal
// scalings, and block preconditioners. All powers of the frequency are
// cancelled analytically before any matrix entry is formed, so every
// coefficient below is finite at omega = 0; the only quantity allowed to
// blow up is the multiplier of the omega-free insulator source, and that
// case is rejected as an incompatible source instead of producing inf/NaN.
//
// Every scaled matrix has the shape
//     A = D_row * [[K11 + x M11, c12 M12], [c21 M12^T, c22 M22]] * D_col
// with x = j*omega (frequency domain) or x = 1/dt (time domain), scalar
// block coefficients c12/c21/c22, and diagonal row/column weights. The
// differences between the variants are entirely in those factors.

#include "eqstab/ilu0.hpp"
#include "eqstab/sparse.hpp"
#include "eqstab/sparse_lu.hpp"
#include "eqstab/two_block.hpp"
#include "eqstab/types.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eqstab {

enum class ScalingTag {
    original,
    sym_omega,         // (i)   a2 = b2 = omega^(-1/2)
    nonsym_omega,      // (ii)  a2 = omega^(-1)
    sym_material,      // (iii) a = b = (sigma + x eps)^(-1/2) per block
    nonsym_material,   // (iv)  a1 = (sigma1 + x eps1)^(-1), a2 = (eps2 x)^(-1)
    block_freq,        // (v)   block-diagonal preconditioner at the run frequency
    block_fixed,       // (vi)  block-diagonal preconditioner at a fixed omega0
    jacobi_left,       // left diagonal scaling from the operator diagonal
    jacobi_sym,        // two-sided diagonal scaling (square roots)
};

struct ScalingVariant {
    ScalingTag tag = ScalingTag::original;
    double omega0 = 0.0;         // block_fixed only
    bool exact_block_lu = false; // block preconditioners: exact LU instead of ILU(0)
    // optional scalar overrides for the material scalings; by default the
    // per-dof values recorded in the TwoBlockSystem are used
    std::optional<double> sigma1, eps1, eps2;

    [[nodiscard]] std::string label() const {
        switch (tag) {
            case ScalingTag::original: return "orig";
            case ScalingTag::sym_omega: return "i";
            case ScalingTag::nonsym_omega: return "ii";
            case ScalingTag::sym_material: return "iii";
            case ScalingTag::nonsym_material: return "iv";
            case ScalingTag::block_freq: return "v";
            case ScalingTag::block_fixed: return "vi";
            case ScalingTag::jacobi_left: return "jacobi-l";
            case ScalingTag::jacobi_sym: return "jacobi-s";
        }
        return "?";
    }

    static ScalingVariant from_cli(const std::string& name, double omega0 = 0.0) {
        ScalingVariant v;
        if (name == "orig") v.tag = ScalingTag::original;
        else if (name == "i") v.tag = ScalingTag::sym_omega;
        else if (name == "ii") v.tag = ScalingTag::nonsym_omega;
        else if (name == "iii") v.tag = ScalingTag::sym_material;
        else if (name == "iv") v.tag = ScalingTag::nonsym_material;
        else if (name == "v") v.tag = ScalingTag::block_freq;
        else if (name == "vi") v.tag = ScalingTag::block_fixed;
        else if (name == "jacobi-l") v.tag = ScalingTag::jacobi_left;
        else if (name == "jacobi-s") v.tag = ScalingTag::jacobi_sym;
        else throw std::invalid_argument("unknown variant '" + name +
                                         "' (expected orig,i,ii,iii,iv,v,vi,jacobi-l,jacobi-s)");
        v.omega0 = omega0;
        return v;
    }

    /// The unknowns of block 2 can be mapped back to potentials at omega = 0
    /// only when b2 carries no negative power of the frequency. Metadata from
    /// the exponent table, not a numeric test.
    [[nodiscard]] bool recoverable_at_zero() const {
        switch (tag) {
            case ScalingTag::sym_omega:
            case ScalingTag::sym_material:
            case ScalingTag::jacobi_sym:
                return false;
            default:
                return true;
        }
    }
};

/// Block-diagonal preconditioner blkdiag(S, M22)^-1 with S = K11 + x~ M11,
/// applied after the analytic x-cancellation has been folded into the scaled
/// matrix. Exact LU or ILU(0) per configuration.
class BlockPreconditioner {
public:
    static BlockPreconditioner build(const ComplexSparseMatrix& s, const ComplexSparseMatrix& m22,
                                     bool exact_lu) {
        BlockPreconditioner p;
        p.n1_ = s.nrows();
        p.n2_ = m22.nrows();
        p.s_ = s;
        p.m22_ = m22;
        p.exact_ = exact_lu;
        if (exact_lu) {
            p.s_lu_ = lu_factor(s);
            p.m_lu_ = lu_factor(m22);
            if ((p.n1_ > 0 && p.s_lu_->singular()) || (p.n2_ > 0 && p.m_lu_->singular()))
                throw SingularBlockError("block preconditioner: singular diagonal block "
                                         "(a conducting part may lack Dirichlet contact)");
        } else {
            try {
                if (p.n1_ > 0) p.s_ilu_ = ilu0(s);
                if (p.n2_ > 0) p.m_ilu_ = ilu0(m22);
            } catch (const ZeroDiagonalError& e) {
                throw SingularBlockError(std::string("block preconditioner: ") + e.what());
            }
        }
        return p;
    }

    [[nodiscard]] Index n() const { return n1_ + n2_; }
    [[nodiscard]] bool exact() const { return exact_; }

    [[nodiscard]] std::vector<Cplx> apply(std::span<const Cplx> x) const {
        return blockwise(x, [this](std::span<const Cplx> v) { return exact_ ? s_lu_->solve(v) : s_ilu_->solve(v); },
                         [this](std::span<const Cplx> v) { return exact_ ? m_lu_->solve(v) : m_ilu_->solve(v); });
    }

    [[nodiscard]] std::vector<Cplx> apply_transpose(std::span<const Cplx> x) const {
        return blockwise(x,
                         [this](std::span<const Cplx> v) { return exact_ ? s_lu_->solve_transpose(v) : s_ilu_->solve_transpose(v); },
                         [this](std::span<const Cplx> v) { return exact_ ? m_lu_->solve_transpose(v) : m_ilu_->solve_transpose(v); });
    }

    /// Product with the preconditioner itself (exact: the blocks, ILU: the
    /// incomplete factors); needed to realize B^-1 = A^-1 P for condition
    /// estimates of the preconditioned operator.
    [[nodiscard]] std::vector<Cplx> multiply(std::span<const Cplx> x) const {
        return blockwise(x,
                         [this](std::span<const Cplx> v) { return exact_ ? s_.multiply(v) : s_ilu_->multiply(v); },
                         [this](std::span<const Cplx> v) { return exact_ ? m22_.multiply(v) : m_ilu_->multiply(v); });
    }

    [[nodiscard]] std::vector<Cplx> multiply_transpose(std::span<const Cplx> x) const {
        // S and M22 are complex symmetric, so the exact path is its own
        // transpose; the incomplete factors are not
        if (exact_) return multiply(x);
        return blockwise(x,
                         [this](std::span<const Cplx> v) { return s_ilu_->multiply_transpose(v); },
                         [this](std::span<const Cplx> v) { return m_ilu_->multiply_transpose(v); });
    }

private:
    template <typename F1, typename F2>
    std::vector<Cplx> blockwise(std::span<const Cplx> x, F1&& top, F2&& bottom) const {
        std::vector<Cplx> out(static_cast<std::size_t>(n()));
        if (n1_ > 0) {
            std::vector<Cplx> x1(x.begin(), x.begin() + n1_);
            auto y1 = top(std::span<const Cplx>(x1));
            std::copy(y1.begin(), y1.end(), out.begin());
        }
        if (n2_ > 0) {
            std::vector<Cplx> x2(x.begin() + n1_, x.end());
            auto y2 = bottom(std::span<const Cplx>(x2));
            std::copy(y2.begin(), y2.end(), out.begin() + n1_);
        }
        return out;
    }

    Index n1_ = 0, n2_ = 0;
    bool exact_ = true;
    ComplexSparseMatrix s_, m22_;
    std::optional<LuFactorization> s_lu_, m_lu_;
    std::optional<Ilu0Preconditioner> s_ilu_, m_ilu_;
};

/// Scalar block-coefficient table of a scaling at a given frequency, with
/// every power of omega cancelled analytically. Only defined for the scalar
/// and scalar-material variants; the Jacobi and block variants are
/// matrix-valued.
struct BlockCoefficients {
    Cplx c_K11, c_M11, c_M12, c_M21, c_M22;
    Cplx c_r1 = Cplx(1.0, 0.0);     // multiplier of r1
    bool c_r2_finite = true;        // a2 stays finite at this frequency
    Cplx c_r2 = Cplx(1.0, 0.0);     // multiplier of the omega-free part of r2
    Cplx c_r2_dynamic{};            // multiplier of the j*omega part of r2 (always finite)
};

namespace detail {

struct ModeContext {
    Cplx x;       // j*omega or 1/dt
    double f;     // omega or 1/dt (real magnitude of the frequency variable)
    Cplx mu;      // j (frequency domain) or 1 (time domain)
    Cplx sqrt_x;  // principal branch
    double sqrt_f;
};

inline ModeContext frequency_mode(double omega) {
    if (omega < 0.0) throw std::invalid_argument("omega must be >= 0");
    ModeContext m;
    m.x = Cplx(0.0, omega);
    m.f = omega;
    m.mu = Cplx(0.0, 1.0);
    m.sqrt_x = std::sqrt(m.x);  // sqrt(omega) * exp(j pi/4)
    m.sqrt_f = std::sqrt(omega);
    return m;
}

inline ModeContext time_mode(double dt) {
    if (!(dt > 0.0) && !std::isinf(dt)) throw std::invalid_argument("dt must be > 0");
    ModeContext m;
    const double f = std::isinf(dt) ? 0.0 : 1.0 / dt;
    m.x = Cplx(f, 0.0);
    m.f = f;
    m.mu = Cplx(1.0, 0.0);
    m.sqrt_x = Cplx(std::sqrt(f), 0.0);
    m.sqrt_f = std::sqrt(f);
    return m;
}

}  // namespace detail

/// Scalar coefficient table (spec'd for the scalar variants; material
/// variants use the ScalingVariant's scalar parameters, which must be set).
inline BlockCoefficients effective_coefficients(const ScalingVariant& var, double omega) {
    const auto m = detail::frequency_mode(omega);
    const Cplx one(1.0, 0.0);
    BlockCoefficients c;
    switch (var.tag) {
        case ScalingTag::original:
            c.c_K11 = one;
            c.c_M11 = c.c_M12 = c.c_M21 = c.c_M22 = m.x;
            c.c_r2 = one;
            c.c_r2_dynamic = m.x;
            return c;
        case ScalingTag::sym_omega:
            c.c_K11 = one;
            c.c_M11 = m.x;
            c.c_M12 = c.c_M21 = m.mu * m.sqrt_f;
            c.c_M22 = m.mu;
            c.c_r2_finite = m.f > 0.0;
            c.c_r2 = c.c_r2_finite ? Cplx(1.0 / m.sqrt_f, 0.0) : Cplx(0.0, 0.0);
            c.c_r2_dynamic = m.mu * m.sqrt_f;
            return c;
        case ScalingTag::nonsym_omega:
            c.c_K11 = one;
            c.c_M11 = c.c_M12 = m.x;
            c.c_M21 = c.c_M22 = m.mu;
            c.c_r2_finite = m.f > 0.0;
            c.c_r2 = c.c_r2_finite ? Cplx(1.0 / m.f, 0.0) : Cplx(0.0, 0.0);
            c.c_r2_dynamic = m.mu;
            return c;
        case ScalingTag::sym_material: {
            if (!var.sigma1 || !var.eps1 || !var.eps2)
                throw std::invalid_argument("material coefficients require sigma1/eps1/eps2");
            const Cplx z1 = Cplx(*var.sigma1, 0.0) + m.x * Cplx(*var.eps1, 0.0);
            const Cplx s1 = std::sqrt(z1);
            const double s2 = std::sqrt(*var.eps2);
            c.c_K11 = one / z1;
            c.c_M11 = m.x / z1;
            c.c_M12 = c.c_M21 = m.sqrt_x / (s1 * s2);
            c.c_M22 = one / *var.eps2;
            c.c_r1 = one / s1;
            c.c_r2_finite = m.f > 0.0;
            c.c_r2 = c.c_r2_finite ? one / (m.sqrt_x * s2) : Cplx(0.0, 0.0);
            c.c_r2_dynamic = m.sqrt_x / s2;
            return c;
        }
        case ScalingTag::nonsym_material: {
            if (!var.sigma1 || !var.eps1 || !var.eps2)
                throw std::invalid_argument("material coefficients require sigma1/eps1/eps2");
            const Cplx z1 = Cplx(*var.sigma1, 0.0) + m.x * Cplx(*var.eps1, 0.0);
            c.c_K11 = one / z1;
            c.c_M11 = m.x / z1;
            c.c_M12 = m.x / z1;
            c.c_M21 = c.c_M22 = one / *var.eps2;
            c.c_r1 = one / z1;
            c.c_r2_finite = m.f > 0.0;
            c.c_r2 = c.c_r2_finite ? one / (m.x * *var.eps2) : Cplx(0.0, 0.0);
            c.c_r2_dynamic = one / *var.eps2;
            return c;
        }
        default:
            throw std::invalid_argument("variant '" + var.label() +
                                        "' is matrix-valued and has no scalar coefficient table");
    }
}

struct Recovery {
    std::vector<Cplx> b1, b2;  // phi = b (elementwise) * xi, per block
    bool block2_defined = true;
};

struct ScaledSystem {
    ComplexSparseMatrix A;   // block ordering [I1; I2]
    std::vector<Cplx> rhs;   // frequency-domain right-hand side
    Recovery recovery;
    std::vector<Index> I1, I2;
    std::shared_ptr<BlockPreconditioner> precond;  // block variants only

    [[nodiscard]] Index n1() const { return static_cast<Index>(I1.size()); }
    [[nodiscard]] Index n2() const { return static_cast<Index>(I2.size()); }
};

namespace detail {

enum class ScaleMode { none, row_divide, sym_divide };

struct VariantPlan {
    ScaleMode mode = ScaleMode::none;
    Cplx c12, c21, c22;
    std::vector<Cplx> denom1, denom2;  // divide modes; sized n1/n2
    std::vector<Cplx> sqrt1, sqrt2;    // sym mode
    bool rs2_finite = true;            // multiplier of r2_static finite
    Cplx c_rs2;                        // (beyond the row weight)
    Cplx c_rd2;                        // multiplier of r2_dynamic, always finite
    Recovery recovery;
};

inline VariantPlan make_plan(const TwoBlockSystem& sys, const ScalingVariant& var,
                             const ModeContext& m) {
    const Cplx one(1.0, 0.0);
    const Index n1 = sys.n1(), n2 = sys.n2();
    VariantPlan p;
    p.recovery.b1.assign(static_cast<std::size_t>(n1), one);
    p.recovery.b2.assign(static_cast<std::size_t>(n2), one);

    auto material1 = [&](Index i) {
        const double sg = var.sigma1 ? *var.sigma1 : sys.sigma1[static_cast<std::size_t>(i)];
        const double ep = var.eps1 ? *var.eps1 : sys.eps1[static_cast<std::size_t>(i)];
        return Cplx(sg, 0.0) + m.x * Cplx(ep, 0.0);
    };
    auto material2 = [&](Index j) {
        return Cplx(var.eps2 ? *var.eps2 : sys.eps2[static_cast<std::size_t>(j)], 0.0);
    };
    auto operator_diag1 = [&](Index i) { return sys.K11.at(i, i) + m.x * sys.M11.at(i, i); };
    auto operator_diag2 = [&](Index j) { return sys.M22.at(j, j); };

    auto fill_denoms = [&](auto&& d1, auto&& d2) {
        p.denom1.resize(static_cast<std::size_t>(n1));
        p.denom2.resize(static_cast<std::size_t>(n2));
        for (Index i = 0; i < n1; ++i) {
            p.denom1[static_cast<std::size_t>(i)] = d1(i);
            if (p.denom1[static_cast<std::size_t>(i)] == Cplx(0.0, 0.0)) throw ZeroDiagonalError(i);
        }
        for (Index j = 0; j < n2; ++j) {
            p.denom2[static_cast<std::size_t>(j)] = d2(j);
            if (p.denom2[static_cast<std::size_t>(j)] == Cplx(0.0, 0.0)) throw ZeroDiagonalError(n1 + j);
        }
    };
    auto fill_sqrts = [&] {
        p.sqrt1.resize(p.denom1.size());
        p.sqrt2.resize(p.denom2.size());
        for (std::size_t i = 0; i < p.denom1.size(); ++i) p.sqrt1[i] = std::sqrt(p.denom1[i]);
        for (std::size_t j = 0; j < p.denom2.size(); ++j) p.sqrt2[j] = std::sqrt(p.denom2[j]);
    };

    switch (var.tag) {
        case ScalingTag::original:
            p.c12 = p.c21 = p.c22 = m.x;
            p.c_rs2 = one;
            p.c_rd2 = m.x;
            break;
        case ScalingTag::sym_omega:
            p.c12 = p.c21 = m.mu * m.sqrt_f;
            p.c22 = m.mu;
            p.rs2_finite = m.f > 0.0;
            p.c_rs2 = p.rs2_finite ? Cplx(1.0 / m.sqrt_f, 0.0) : Cplx(0.0, 0.0);
            p.c_rd2 = m.mu * m.sqrt_f;
            if (p.rs2_finite)
                p.recovery.b2.assign(static_cast<std::size_t>(n2), Cplx(1.0 / m.sqrt_f, 0.0));
            else
                p.recovery.block2_defined = false;
            break;
        case ScalingTag::nonsym_omega:
            p.c12 = m.x;
            p.c21 = p.c22 = m.mu;
            p.rs2_finite = m.f > 0.0;
            p.c_rs2 = p.rs2_finite ? Cplx(1.0 / m.f, 0.0) : Cplx(0.0, 0.0);
            p.c_rd2 = m.mu;
            break;
        case ScalingTag::sym_material: {
            p.mode = ScaleMode::sym_divide;
            p.c12 = p.c21 = m.sqrt_x;
            p.c22 = one;
            fill_denoms(material1, material2);
            fill_sqrts();
            p.rs2_finite = m.f > 0.0;
            p.c_rs2 = p.rs2_finite ? one / m.sqrt_x : Cplx(0.0, 0.0);
            p.c_rd2 = m.sqrt_x;
            for (Index i = 0; i < n1; ++i)
                p.recovery.b1[static_cast<std::size_t>(i)] = one / p.sqrt1[static_cast<std::size_t>(i)];
            if (p.rs2_finite)
                for (Index j = 0; j < n2; ++j)
                    p.recovery.b2[static_cast<std::size_t>(j)] =
                        one / (m.sqrt_x * p.sqrt2[static_cast<std::size_t>(j)]);
            else
                p.recovery.block2_defined = false;
            break;
        }
        case ScalingTag::nonsym_material:
            p.mode = ScaleMode::row_divide;
            p.c12 = m.x;
            p.c21 = p.c22 = one;
            fill_denoms(material1, material2);
            p.rs2_finite = m.f > 0.0;
            p.c_rs2 = p.rs2_finite ? one / m.x : Cplx(0.0, 0.0);
            p.c_rd2 = one;
            break;
        case ScalingTag::block_freq:
        case ScalingTag::block_fixed:
            p.c12 = m.x;
            p.c21 = p.c22 = one;
            p.rs2_finite = m.f > 0.0;
            p.c_rs2 = p.rs2_finite ? one / m.x : Cplx(0.0, 0.0);
            p.c_rd2 = one;
            break;
        case ScalingTag::jacobi_left:
            p.mode = ScaleMode::row_divide;
            p.c12 = m.x;
            p.c21 = p.c22 = one;
            fill_denoms(operator_diag1, operator_diag2);
            p.rs2_finite = m.f > 0.0;
            p.c_rs2 = p.rs2_finite ? one / m.x : Cplx(0.0, 0.0);
            p.c_rd2 = one;
            break;
        case ScalingTag::jacobi_sym: {
            p.mode = ScaleMode::sym_divide;
            p.c12 = p.c21 = m.sqrt_x;
            p.c22 = one;
            fill_denoms(operator_diag1, operator_diag2);
            fill_sqrts();
            p.rs2_finite = m.f > 0.0;
            p.c_rs2 = p.rs2_finite ? one / m.sqrt_x : Cplx(0.0, 0.0);
            p.c_rd2 = m.sqrt_x;
            for (Index i = 0; i < n1; ++i)
                p.recovery.b1[static_cast<std::size_t>(i)] = one / p.sqrt1[static_cast<std::size_t>(i)];
            if (p.rs2_finite)
                for (Index j = 0; j < n2; ++j)
                    p.recovery.b2[static_cast<std::size_t>(j)] =
                        one / (m.sqrt_x * p.sqrt2[static_cast<std::size_t>(j)]);
            else
                p.recovery.block2_defined = false;
            break;
        }
    }
    if (!p.recovery.block2_defined)
        p.recovery.b2.assign(static_cast<std::size_t>(n2),
                             Cplx(std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::quiet_NaN()));
    return p;
}

/// Assemble the scaled matrix (and, if requested, the previous-state matrix
/// for time stepping, which is the same scaling applied to the M-part only).
struct ScaledBuild {
    ComplexSparseMatrix A;
    ComplexSparseMatrix B_prev;
    VariantPlan plan;
};

inline ScaledBuild build_scaled_matrices(const TwoBlockSystem& sys, const ScalingVariant& var,
                                         const ModeContext& m, bool want_prev) {
    const Index n1 = sys.n1(), n2 = sys.n2(), n = n1 + n2;
    ScaledBuild out;
    out.plan = make_plan(sys, var, m);
    const VariantPlan& p = out.plan;

    // diagonal entries whose raw value equals the divisor are emitted as an
    // exact 1; z/z is mathematically 1 and this is its correctly rounded value
    auto scale_entry = [&](Index bi, Index bj, bool same_block_diag, Cplx raw) -> Cplx {
        switch (p.mode) {
            case ScaleMode::none:
                return raw;
            case ScaleMode::row_divide: {
                const Cplx d = bi < n1 ? p.denom1[static_cast<std::size_t>(bi)]
                                       : p.denom2[static_cast<std::size_t>(bi - n1)];
                if (same_block_diag && raw == d) return Cplx(1.0, 0.0);
                return raw / d;
            }
            case ScaleMode::sym_divide: {
                if (same_block_diag) {
                    const Cplx d = bi < n1 ? p.denom1[static_cast<std::size_t>(bi)]
                                           : p.denom2[static_cast<std::size_t>(bi - n1)];
                    if (raw == d) return Cplx(1.0, 0.0);
                    return raw / d;
                }
                const Cplx si = bi < n1 ? p.sqrt1[static_cast<std::size_t>(bi)]
                                        : p.sqrt2[static_cast<std::size_t>(bi - n1)];
                const Cplx sj = bj < n1 ? p.sqrt1[static_cast<std::size_t>(bj)]
                                        : p.sqrt2[static_cast<std::size_t>(bj - n1)];
                return raw / (si * sj);
            }
        }
        return raw;
    };

    std::vector<Triplet> at, bt;
    auto push_block = [&](const ComplexSparseMatrix& block, Index row0, Index col0, Cplx coeff,
                          std::vector<Triplet>& dst) {
        if (coeff == Cplx(0.0, 0.0)) return;
        for (Index r = 0; r < block.nrows(); ++r)
            for (Index k = block.row_offsets()[static_cast<std::size_t>(r)];
                 k < block.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k) {
                const Index c = block.col_indices()[static_cast<std::size_t>(k)];
                const Index bi = row0 + r, bj = col0 + c;
                const bool diag = (row0 == col0) && (r == c);
                const Cplx v =
                    scale_entry(bi, bj, diag, block.values()[static_cast<std::size_t>(k)] * coeff);
                dst.push_back({bi, bj, v});
            }
    };

    // merge the conduction block with x * M11 before any scaling, so the
    // divisor of a diagonal entry is bitwise comparable to the entry itself
    ComplexSparseMatrix z11;
    {
        std::vector<Triplet> zt;
        for (Index r = 0; r < n1; ++r) {
            for (Index k = sys.K11.row_offsets()[static_cast<std::size_t>(r)];
                 k < sys.K11.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
                zt.push_back({r, sys.K11.col_indices()[static_cast<std::size_t>(k)],
                              sys.K11.values()[static_cast<std::size_t>(k)]});
            if (m.x != Cplx(0.0, 0.0))
                for (Index k = sys.M11.row_offsets()[static_cast<std::size_t>(r)];
                     k < sys.M11.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
                    zt.push_back({r, sys.M11.col_indices()[static_cast<std::size_t>(k)],
                                  m.x * sys.M11.values()[static_cast<std::size_t>(k)]});
        }
        z11 = ComplexSparseMatrix::from_triplets(n1, n1, std::move(zt));
    }

    const auto m12t = sys.M12.transpose();
    // A = Dr [[K11 + x M11, c12 M12], [c21 M12^T, c22 M22]] Dc
    push_block(z11, 0, 0, Cplx(1.0, 0.0), at);
    push_block(sys.M12, 0, n1, p.c12, at);
    push_block(m12t, n1, 0, p.c21, at);
    push_block(sys.M22, n1, n1, p.c22, at);
    out.A = ComplexSparseMatrix::from_triplets(n, n, std::move(at));
    if (want_prev) {
        push_block(sys.M11, 0, 0, m.x, bt);
        push_block(sys.M12, 0, n1, p.c12, bt);
        push_block(m12t, n1, 0, p.c21, bt);
        push_block(sys.M22, n1, n1, p.c22, bt);
        out.B_prev = ComplexSparseMatrix::from_triplets(n, n, std::move(bt));
    }
    return out;
}

inline std::shared_ptr<BlockPreconditioner> build_block_precond(const TwoBlockSystem& sys,
                                                                const ScalingVariant& var,
                                                                const ModeContext& m) {
    // S = K11 + x~ M11 with x~ the run frequency (v) or the fixed omega0 (vi)
    const Cplx xt = (var.tag == ScalingTag::block_fixed) ? m.mu * var.omega0 : m.x;
    std::vector<Triplet> st;
    for (Index r = 0; r < sys.K11.nrows(); ++r) {
        for (Index k = sys.K11.row_offsets()[static_cast<std::size_t>(r)];
             k < sys.K11.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
            st.push_back({r, sys.K11.col_indices()[static_cast<std::size_t>(k)],
                          sys.K11.values()[static_cast<std::size_t>(k)]});
        if (xt != Cplx(0.0, 0.0))
            for (Index k = sys.M11.row_offsets()[static_cast<std::size_t>(r)];
                 k < sys.M11.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
                st.push_back({r, sys.M11.col_indices()[static_cast<std::size_t>(k)],
                              xt * sys.M11.values()[static_cast<std::size_t>(k)]});
    }
    auto s = ComplexSparseMatrix::from_triplets(sys.n1(), sys.n1(), std::move(st));
    return std::make_shared<BlockPreconditioner>(
        BlockPreconditioner::build(s, sys.M22, var.exact_block_lu));
}

}  // namespace detail

/// Scaled frequency-domain system for a variant at omega >= 0. Throws
/// IncompatibleSourceError when the variant divides the omega-free part of
/// the insulator source by a positive power of omega at omega = 0.
inline ScaledSystem scale_system(const TwoBlockSystem& sys, const ScalingVariant& var,
                                 double omega) {
    const auto m = detail::frequency_mode(omega);
    auto build = detail::build_scaled_matrices(sys, var, m, false);
    const auto& p = build.plan;

    ScaledSystem out;
    out.A = std::move(build.A);
    out.I1 = sys.I1;
    out.I2 = sys.I2;
    out.recovery = p.recovery;
    // rhs1 = Dr1 (r1s + x r1d); rhs2 = Dr2 (c_rs2 r2s + c_rd2 r2d)
    const Index n1 = sys.n1(), n2 = sys.n2();
    out.rhs.assign(static_cast<std::size_t>(n1 + n2), Cplx(0.0, 0.0));
    for (Index i = 0; i < n1; ++i) {
        Cplx v = sys.r1_static[static_cast<std::size_t>(i)] + m.x * sys.r1_dynamic[static_cast<std::size_t>(i)];
        if (p.mode == detail::ScaleMode::row_divide) v /= p.denom1[static_cast<std::size_t>(i)];
        if (p.mode == detail::ScaleMode::sym_divide) v /= p.sqrt1[static_cast<std::size_t>(i)];
        out.rhs[static_cast<std::size_t>(i)] = v;
    }
    for (Index j = 0; j < n2; ++j) {
        const Cplx rs = sys.r2_static[static_cast<std::size_t>(j)];
        if (!p.rs2_finite && rs != Cplx(0.0, 0.0))
            throw IncompatibleSourceError(
                "insulator source is not divergence-free in the stationary limit: variant '" +
                var.label() + "' cannot scale a nonzero static r2 at omega = 0");
        Cplx v = p.c_rs2 * rs + p.c_rd2 * sys.r2_dynamic[static_cast<std::size_t>(j)];
        if (p.mode == detail::ScaleMode::row_divide) v /= p.denom2[static_cast<std::size_t>(j)];
        if (p.mode == detail::ScaleMode::sym_divide) v /= p.sqrt2[static_cast<std::size_t>(j)];
        out.rhs[static_cast<std::size_t>(n1 + j)] = v;
    }

    if (var.tag == ScalingTag::block_freq || var.tag == ScalingTag::block_fixed)
        out.precond = detail::build_block_precond(sys, var, m);
    return out;
}

/// Solution recovered from the scaled unknowns. Where the scaling makes the
/// block-2 potentials unrecoverable (omega = 0 with b2 ~ omega^-p) the
/// entries are NaN and the flag is false; never a numeric guess.
struct RecoveredSolution {
    std::vector<Cplx> phi;      // free-dof ordering
    bool block2_defined = true;
};

inline RecoveredSolution recover_solution(const ScaledSystem& scaled, std::span<const Cplx> xi) {
    if (static_cast<Index>(xi.size()) != scaled.n1() + scaled.n2())
        throw std::invalid_argument("recover_solution: size mismatch");
    RecoveredSolution out;
    out.block2_defined = scaled.recovery.block2_defined;
    out.phi.assign(xi.size(), Cplx(0.0, 0.0));
    for (std::size_t i = 0; i < scaled.I1.size(); ++i)
        out.phi[static_cast<std::size_t>(scaled.I1[i])] = scaled.recovery.b1[i] * xi[i];
    for (std::size_t j = 0; j < scaled.I2.size(); ++j)
        out.phi[static_cast<std::size_t>(scaled.I2[j])] =
            scaled.recovery.b2[j] * xi[scaled.I1.size() + j];
    return out;
}

/// Block preconditioner for the block variants at a given frequency;
/// exposed on its own for iterative-solver callers.
inline std::shared_ptr<BlockPreconditioner> build_block_preconditioner(const TwoBlockSystem& sys,
                                                                       const ScalingVariant& var,
                                                                       double omega) {
    if (var.tag != ScalingTag::block_freq && var.tag != ScalingTag::block_fixed)
        throw std::invalid_argument("build_block_preconditioner: variant must be v or vi");
    return detail::build_block_precond(sys, var, detail::frequency_mode(omega));
}

}  // namespace eqstab
