#pragma once

// Condition-number estimation in the style of Hager/Higham: the 1-norm of an
// operator is lower-bounded from a handful of products with the operator and
// its conjugate transpose. The infinity norm of A^-1 is obtained by running
// the estimator on (A^T)^-1, since ||A||_inf = ||A^T||_1.

#include "eqstab/sparse.hpp"
#include "eqstab/sparse_lu.hpp"
#include "eqstab/types.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace eqstab {

using VectorFn = std::function<std::vector<Cplx>(std::span<const Cplx>)>;

/// Estimate ||C||_1 where the operator C is available only through products
/// x -> C x and x -> C^H x. Returns a lower bound that is in practice within
/// a small factor of the true norm. Runs the classic iteration (at most
/// max_iter steps) from the uniform vector plus `restarts` random sign
/// starts, and folds in Higham's alternating-parity probe.
inline double hager_norm1_estimate(Index n, const VectorFn& apply, const VectorFn& apply_adjoint,
                                   int max_iter = 5, int restarts = 2, unsigned seed = 0x5eedu) {
    if (n == 0) return 0.0;
    double est = 0.0;

    auto run = [&](std::vector<Cplx> x) {
        for (int iter = 0; iter < max_iter; ++iter) {
            std::vector<Cplx> y = apply(x);
            est = std::max(est, norm1(y));
            std::vector<Cplx> xi(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) {
                double m = std::abs(y[i]);
                xi[i] = (m > 0.0) ? y[i] / m : Cplx(1.0, 0.0);
            }
            std::vector<Cplx> z = apply_adjoint(xi);
            Index j = 0;
            double zmax = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) {
                double m = std::abs(z[i]);
                if (m > zmax) { zmax = m; j = static_cast<Index>(i); }
            }
            if (iter > 0 && zmax <= std::real(dot(z, x))) break;
            x.assign(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
            x[static_cast<std::size_t>(j)] = Cplx(1.0, 0.0);
        }
    };

    run(std::vector<Cplx>(static_cast<std::size_t>(n), Cplx(1.0 / n, 0.0)));

    std::mt19937 rng(seed);
    for (int r = 0; r < restarts; ++r) {
        std::vector<Cplx> x(static_cast<std::size_t>(n));
        for (auto& v : x) v = Cplx((rng() & 1u ? 1.0 : -1.0) / n, 0.0);
        run(std::move(x));
    }

    // parity probe: x_i = (-1)^i (1 + i/(n-1))
    std::vector<Cplx> probe(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        double v = 1.0 + (n > 1 ? static_cast<double>(i) / (n - 1) : 0.0);
        probe[static_cast<std::size_t>(i)] = Cplx((i % 2 == 0) ? v : -v, 0.0);
    }
    est = std::max(est, 2.0 * norm1(apply(probe)) / (3.0 * n));
    return est;
}

/// kappa_inf(A) = ||A||_inf (exact) * estimate of ||A^-1||_inf.
/// A singular factorization yields the +infinity sentinel.
inline double condest_inf(const ComplexSparseMatrix& a, const LuFactorization& lu) {
    if (lu.singular()) return std::numeric_limits<double>::infinity();
    const Index n = a.nrows();
    // C = (A^T)^-1, so C^H = (conj A)^-1
    VectorFn apply = [&](std::span<const Cplx> x) { return lu.solve_transpose(x); };
    VectorFn adj = [&](std::span<const Cplx> x) {
        std::vector<Cplx> xc(x.begin(), x.end());
        for (auto& v : xc) v = std::conj(v);
        std::vector<Cplx> y = lu.solve(xc);
        for (auto& v : y) v = std::conj(v);
        return y;
    };
    return a.norm_inf() * hager_norm1_estimate(n, apply, adj);
}

/// kappa_1(A) = ||A||_1 (exact) * estimate of ||A^-1||_1.
inline double condest_one(const ComplexSparseMatrix& a, const LuFactorization& lu) {
    if (lu.singular()) return std::numeric_limits<double>::infinity();
    const Index n = a.nrows();
    // C = A^-1, so C^H = (A^H)^-1 = (conj(A^T))^-1
    VectorFn apply = [&](std::span<const Cplx> x) { return lu.solve(x); };
    VectorFn adj = [&](std::span<const Cplx> x) {
        std::vector<Cplx> xc(x.begin(), x.end());
        for (auto& v : xc) v = std::conj(v);
        std::vector<Cplx> y = lu.solve_transpose(xc);
        for (auto& v : y) v = std::conj(v);
        return y;
    };
    return a.norm_one() * hager_norm1_estimate(n, apply, adj);
}

inline double condest(const ComplexSparseMatrix& a, const LuFactorization& lu, Norm norm) {
    return norm == Norm::Inf ? condest_inf(a, lu) : condest_one(a, lu);
}

/// Operator form for preconditioned systems: kappa_inf of B given B, B^T,
/// B^-1 and B^-T as black-box products. Both norm factors are estimated.
struct OperatorProducts {
    Index n = 0;
    VectorFn apply;            // B x
    VectorFn apply_transpose;  // B^T x
    VectorFn solve;            // B^-1 x
    VectorFn solve_transpose;  // B^-T x
};

inline double condest_inf_operator(const OperatorProducts& op) {
    auto conj_wrap = [](const VectorFn& f) {
        return [f](std::span<const Cplx> x) {
            std::vector<Cplx> xc(x.begin(), x.end());
            for (auto& v : xc) v = std::conj(v);
            std::vector<Cplx> y = f(xc);
            for (auto& v : y) v = std::conj(v);
            return y;
        };
    };
    // ||B||_inf = ||B^T||_1 with (B^T)^H = conj(B)
    double nb = hager_norm1_estimate(op.n, op.apply_transpose, conj_wrap(op.apply));
    // ||B^-1||_inf = ||B^-T||_1 with (B^-T)^H = conj(B^-1)
    double nbi = hager_norm1_estimate(op.n, op.solve_transpose, conj_wrap(op.solve));
    return nb * nbi;
}

}  // namespace eqstab
