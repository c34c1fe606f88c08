#pragma once

// Right-preconditioned BiCGStab. Right preconditioning keeps the recurrence
// residual equal to the residual of the original system, so the stopping test
// acts on the quantity the caller cares about. Convergence is only declared
// after an explicit true-residual check (computed with compensated sums);
// if the recurrence was optimistic the iteration continues from the refreshed
// residual. The iteration count is a first-class output.

#include "eqstab/sparse.hpp"
#include "eqstab/types.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace eqstab {

struct BicgstabResult {
    std::vector<Cplx> x;
    int iterations = 0;
    double residual = 0.0;  // relative, re-verified against the true residual
};

namespace detail {

/// b - A x with Neumaier-compensated accumulation per row.
inline std::vector<Cplx> compensated_residual(const ComplexSparseMatrix& a,
                                              std::span<const Cplx> x, std::span<const Cplx> b) {
    std::vector<Cplx> r(b.begin(), b.end());
    for (Index row = 0; row < a.nrows(); ++row) {
        double sr = b[static_cast<std::size_t>(row)].real(), cr = 0.0;
        double si = b[static_cast<std::size_t>(row)].imag(), ci = 0.0;
        auto add = [](double& s, double& c, double v) {
            double t = s + v;
            c += (std::abs(s) >= std::abs(v)) ? (s - t) + v : (v - t) + s;
            s = t;
        };
        for (Index k = a.row_offsets()[static_cast<std::size_t>(row)];
             k < a.row_offsets()[static_cast<std::size_t>(row) + 1]; ++k) {
            const Cplx av = a.values()[static_cast<std::size_t>(k)];
            const Cplx xv = x[static_cast<std::size_t>(a.col_indices()[static_cast<std::size_t>(k)])];
            add(sr, cr, -(av.real() * xv.real()));
            add(sr, cr, av.imag() * xv.imag());
            add(si, ci, -(av.real() * xv.imag()));
            add(si, ci, -(av.imag() * xv.real()));
        }
        r[static_cast<std::size_t>(row)] = Cplx(sr + cr, si + ci);
    }
    return r;
}

}  // namespace detail

/// Solve A x = b to relative residual <= tol. `precond` applies an
/// approximate inverse (right preconditioning); pass nullptr for none.
/// Throws NoConvergenceError carrying the best iterate after maxit sweeps.
inline BicgstabResult bicgstab(const ComplexSparseMatrix& a, std::span<const Cplx> b,
                               double tol, int maxit,
                               const std::function<std::vector<Cplx>(std::span<const Cplx>)>& precond = {}) {
    const Index n = a.nrows();
    if (a.ncols() != n || static_cast<Index>(b.size()) != n)
        throw std::invalid_argument("bicgstab dimension mismatch");

    auto apply_m = [&](std::span<const Cplx> v) {
        return precond ? precond(v) : std::vector<Cplx>(v.begin(), v.end());
    };

    const double bnorm = norm2(b);
    BicgstabResult res;
    res.x.assign(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
    if (bnorm == 0.0) return res;

    std::vector<Cplx> r(b.begin(), b.end());
    std::vector<Cplx> rhat = r;
    std::vector<Cplx> p(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
    std::vector<Cplx> v(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
    Cplx rho(1.0, 0.0), alpha(1.0, 0.0), omega(1.0, 0.0);

    std::vector<Cplx> best_x = res.x;
    double best_res = 1.0;

    auto verify = [&](std::vector<Cplx>& x) {
        std::vector<Cplx> rt = detail::compensated_residual(a, x, b);
        double rel = norm2(rt) / bnorm;
        if (rel < best_res) { best_res = rel; best_x = x; }
        return std::pair<double, std::vector<Cplx>>(rel, std::move(rt));
    };

    for (int it = 1; it <= maxit; ++it) {
        res.iterations = it;
        Cplx rho_new = dot(rhat, r);
        if (rho_new == Cplx(0.0, 0.0)) {  // recurrence breakdown: restart from the true residual
            r = detail::compensated_residual(a, res.x, b);
            rhat = r;
            rho = alpha = omega = Cplx(1.0, 0.0);
            p.assign(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
            v.assign(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
            rho_new = dot(rhat, r);
            if (rho_new == Cplx(0.0, 0.0)) break;
        }
        const Cplx beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        std::vector<Cplx> phat = apply_m(p);
        v = a.multiply(phat);
        const Cplx rv = dot(rhat, v);
        if (rv == Cplx(0.0, 0.0)) break;
        alpha = rho / rv;

        std::vector<Cplx> s(r.size());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = r[i] - alpha * v[i];
        if (norm2(s) / bnorm <= tol) {
            for (std::size_t i = 0; i < res.x.size(); ++i) res.x[i] += alpha * phat[i];
            auto [rel, rt] = verify(res.x);
            if (rel <= tol) {
                res.residual = rel;
                return res;
            }
            r = std::move(rt);
            rhat = r;
            rho = alpha = omega = Cplx(1.0, 0.0);
            p.assign(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
            v.assign(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
            continue;
        }

        std::vector<Cplx> shat = apply_m(s);
        std::vector<Cplx> t = a.multiply(shat);
        const Cplx tt = dot(t, t);
        if (tt == Cplx(0.0, 0.0)) break;
        omega = dot(t, s) / tt;
        for (std::size_t i = 0; i < res.x.size(); ++i)
            res.x[i] += alpha * phat[i] + omega * shat[i];
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = s[i] - omega * t[i];

        if (norm2(r) / bnorm <= tol) {
            auto [rel, rt] = verify(res.x);
            if (rel <= tol) {
                res.residual = rel;
                return res;
            }
            r = std::move(rt);
            rhat = r;
            rho = alpha = omega = Cplx(1.0, 0.0);
            p.assign(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
            v.assign(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
        }
        if (omega == Cplx(0.0, 0.0)) break;
    }

    verify(res.x);
    throw NoConvergenceError(maxit, best_res, std::move(best_x));
}

}  // namespace eqstab
