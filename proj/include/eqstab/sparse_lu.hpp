#pragma once

// Sparse LU factorization with row equilibration and threshold partial
// pivoting, left-looking over columns. Row scaling keeps the elimination
// accurate when equation blocks differ by many orders of magnitude, which is
// exactly the regime this toolkit probes; the pivot tolerance then classifies
// numerical singularity relative to the equilibrated rows.

#include "eqstab/sparse.hpp"
#include "eqstab/types.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace eqstab {

class LuFactorization {
public:
    /// Factor A (square). pivot_tol is the singularity threshold for pivots
    /// of the row-equilibrated matrix (rows scaled to unit max magnitude).
    static LuFactorization factor(const ComplexSparseMatrix& a, double pivot_tol = 1e-13) {
        if (a.nrows() != a.ncols()) throw std::invalid_argument("LU of non-square matrix");
        const Index n = a.nrows();
        LuFactorization f;
        f.n_ = n;
        f.pinv_.assign(static_cast<std::size_t>(n), -1);
        f.row_scale_.assign(static_cast<std::size_t>(n), 1.0);
        if (n == 0) return f;

        // row equilibration; an exactly empty or zero row is singular outright
        for (Index r = 0; r < n; ++r) {
            double m = 0.0;
            for (Index k = a.row_offsets()[static_cast<std::size_t>(r)];
                 k < a.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
                m = std::max(m, std::abs(a.values()[static_cast<std::size_t>(k)]));
            if (m == 0.0) {
                f.singular_ = true;
                f.bad_index_ = r;
                return f;
            }
            f.row_scale_[static_cast<std::size_t>(r)] = 1.0 / m;
        }

        // columns of the scaled matrix (CSC via transpose)
        std::vector<Index> cp(static_cast<std::size_t>(n) + 1, 0);
        std::vector<Index> ci(static_cast<std::size_t>(a.nnz()));
        std::vector<Cplx> cx(static_cast<std::size_t>(a.nnz()));
        for (Index c : a.col_indices()) ++cp[static_cast<std::size_t>(c) + 1];
        for (std::size_t i = 1; i < cp.size(); ++i) cp[i] += cp[i - 1];
        {
            std::vector<Index> next(cp.begin(), cp.end() - 1);
            for (Index r = 0; r < n; ++r)
                for (Index k = a.row_offsets()[static_cast<std::size_t>(r)];
                     k < a.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k) {
                    Index c = a.col_indices()[static_cast<std::size_t>(k)];
                    Index pos = next[static_cast<std::size_t>(c)]++;
                    ci[static_cast<std::size_t>(pos)] = r;
                    cx[static_cast<std::size_t>(pos)] = a.values()[static_cast<std::size_t>(k)] *
                                                        f.row_scale_[static_cast<std::size_t>(r)];
                }
        }

        f.lp_.reserve(static_cast<std::size_t>(n) + 1);
        f.up_.reserve(static_cast<std::size_t>(n) + 1);
        f.lp_.push_back(0);
        f.up_.push_back(0);

        std::vector<Cplx> x(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
        std::vector<Index> visited(static_cast<std::size_t>(n), -1);
        std::vector<Index> pattern;            // reach of the current column, topological order
        std::vector<Index> stack, child_pos;   // iterative DFS state
        pattern.reserve(static_cast<std::size_t>(n));

        for (Index k = 0; k < n; ++k) {
            // symbolic: reach of A(:,k) over the graph of L
            pattern.clear();
            for (Index p = cp[static_cast<std::size_t>(k)]; p < cp[static_cast<std::size_t>(k) + 1]; ++p) {
                Index start = ci[static_cast<std::size_t>(p)];
                if (visited[static_cast<std::size_t>(start)] == k) continue;
                stack.assign(1, start);
                child_pos.assign(1, -1);
                visited[static_cast<std::size_t>(start)] = k;
                while (!stack.empty()) {
                    Index i = stack.back();
                    Index col = f.pinv_[static_cast<std::size_t>(i)];
                    Index& pos = child_pos.back();
                    if (pos < 0) pos = (col < 0) ? 0 : f.lp_[static_cast<std::size_t>(col)];
                    bool descended = false;
                    if (col >= 0) {
                        while (pos < f.lp_[static_cast<std::size_t>(col) + 1]) {
                            Index child = f.li_[static_cast<std::size_t>(pos)];
                            ++pos;
                            if (visited[static_cast<std::size_t>(child)] != k) {
                                visited[static_cast<std::size_t>(child)] = k;
                                stack.push_back(child);
                                child_pos.push_back(-1);
                                descended = true;
                                break;
                            }
                        }
                    }
                    if (!descended && (col < 0 || pos >= f.lp_[static_cast<std::size_t>(col) + 1])) {
                        pattern.push_back(i);  // postorder
                        stack.pop_back();
                        child_pos.pop_back();
                    }
                }
            }

            // numeric: x = L \ A(:,k) over the pattern (reverse postorder)
            for (Index p = cp[static_cast<std::size_t>(k)]; p < cp[static_cast<std::size_t>(k) + 1]; ++p)
                x[static_cast<std::size_t>(ci[static_cast<std::size_t>(p)])] = cx[static_cast<std::size_t>(p)];
            for (auto it = pattern.rbegin(); it != pattern.rend(); ++it) {
                Index i = *it;
                Index col = f.pinv_[static_cast<std::size_t>(i)];
                if (col < 0) continue;
                const Cplx xi = x[static_cast<std::size_t>(i)];  // unit diagonal of L
                if (xi != Cplx(0.0, 0.0))
                    for (Index p = f.lp_[static_cast<std::size_t>(col)] + 1;
                         p < f.lp_[static_cast<std::size_t>(col) + 1]; ++p)
                        x[static_cast<std::size_t>(f.li_[static_cast<std::size_t>(p)])] -=
                            f.lx_[static_cast<std::size_t>(p)] * xi;
            }

            // pivot: largest candidate among not-yet-pivotal rows, with a mild
            // preference for the diagonal to limit fill on near-symmetric input
            Index ipiv = -1;
            double best = -1.0;
            for (Index i : pattern) {
                if (f.pinv_[static_cast<std::size_t>(i)] < 0) {
                    double m = std::abs(x[static_cast<std::size_t>(i)]);
                    if (m > best) { best = m; ipiv = i; }
                } else {
                    f.ui_.push_back(f.pinv_[static_cast<std::size_t>(i)]);
                    f.ux_.push_back(x[static_cast<std::size_t>(i)]);
                }
            }
            constexpr double diag_preference = 0.1;
            if (f.pinv_[static_cast<std::size_t>(k)] < 0 &&
                std::abs(x[static_cast<std::size_t>(k)]) >= diag_preference * best)
                ipiv = k;
            const Cplx pivot = (ipiv >= 0) ? x[static_cast<std::size_t>(ipiv)] : Cplx(0.0, 0.0);
            if (ipiv < 0 || std::abs(pivot) <= pivot_tol) {
                f.singular_ = true;
                f.bad_index_ = k;
                for (Index i : pattern) x[static_cast<std::size_t>(i)] = Cplx(0.0, 0.0);
                return f;
            }
            f.pinv_[static_cast<std::size_t>(ipiv)] = k;

            f.li_.push_back(ipiv);
            f.lx_.push_back(Cplx(1.0, 0.0));
            for (Index i : pattern) {
                if (f.pinv_[static_cast<std::size_t>(i)] < 0) {
                    f.li_.push_back(i);
                    f.lx_.push_back(x[static_cast<std::size_t>(i)] / pivot);
                }
                x[static_cast<std::size_t>(i)] = Cplx(0.0, 0.0);
            }
            f.ui_.push_back(k);
            f.ux_.push_back(pivot);
            f.lp_.push_back(static_cast<Index>(f.li_.size()));
            f.up_.push_back(static_cast<Index>(f.ui_.size()));
        }

        // map L's row indices into pivot coordinates
        for (Index& i : f.li_) i = f.pinv_[static_cast<std::size_t>(i)];
        return f;
    }

    [[nodiscard]] bool singular() const { return singular_; }
    /// Column (or zero row) at which the factorization broke down.
    [[nodiscard]] Index breakdown_index() const { return bad_index_; }
    [[nodiscard]] Index n() const { return n_; }
    [[nodiscard]] Index nnz() const { return static_cast<Index>(lx_.size() + ux_.size()); }

    [[nodiscard]] std::vector<Cplx> solve(std::span<const Cplx> b) const {
        require_regular();
        std::vector<Cplx> y(static_cast<std::size_t>(n_));
        for (Index i = 0; i < n_; ++i)
            y[static_cast<std::size_t>(pinv_[static_cast<std::size_t>(i)])] =
                b[static_cast<std::size_t>(i)] * row_scale_[static_cast<std::size_t>(i)];
        for (Index j = 0; j < n_; ++j) {      // L is unit lower in pivot order
            const Cplx yj = y[static_cast<std::size_t>(j)];
            if (yj != Cplx(0.0, 0.0))
                for (Index p = lp_[static_cast<std::size_t>(j)] + 1; p < lp_[static_cast<std::size_t>(j) + 1]; ++p)
                    y[static_cast<std::size_t>(li_[static_cast<std::size_t>(p)])] -=
                        lx_[static_cast<std::size_t>(p)] * yj;
        }
        for (Index k = n_ - 1; k >= 0; --k) {  // U diag stored last in each column
            const Index last = up_[static_cast<std::size_t>(k) + 1] - 1;
            const Cplx xk = y[static_cast<std::size_t>(k)] / ux_[static_cast<std::size_t>(last)];
            y[static_cast<std::size_t>(k)] = xk;
            if (xk != Cplx(0.0, 0.0))
                for (Index p = up_[static_cast<std::size_t>(k)]; p < last; ++p)
                    y[static_cast<std::size_t>(ui_[static_cast<std::size_t>(p)])] -=
                        ux_[static_cast<std::size_t>(p)] * xk;
        }
        return y;
    }

    /// Solve A^T z = c (plain transpose, no conjugation).
    [[nodiscard]] std::vector<Cplx> solve_transpose(std::span<const Cplx> c) const {
        require_regular();
        std::vector<Cplx> w(c.begin(), c.end());
        for (Index k = 0; k < n_; ++k) {       // U^T is lower triangular, gather
            const Index last = up_[static_cast<std::size_t>(k) + 1] - 1;
            Cplx acc = w[static_cast<std::size_t>(k)];
            for (Index p = up_[static_cast<std::size_t>(k)]; p < last; ++p)
                acc -= ux_[static_cast<std::size_t>(p)] *
                       w[static_cast<std::size_t>(ui_[static_cast<std::size_t>(p)])];
            w[static_cast<std::size_t>(k)] = acc / ux_[static_cast<std::size_t>(last)];
        }
        for (Index j = n_ - 1; j >= 0; --j) {  // L^T is unit upper, gather
            Cplx acc = w[static_cast<std::size_t>(j)];
            for (Index p = lp_[static_cast<std::size_t>(j)] + 1; p < lp_[static_cast<std::size_t>(j) + 1]; ++p)
                acc -= lx_[static_cast<std::size_t>(p)] *
                       w[static_cast<std::size_t>(li_[static_cast<std::size_t>(p)])];
            w[static_cast<std::size_t>(j)] = acc;
        }
        std::vector<Cplx> z(static_cast<std::size_t>(n_));
        for (Index i = 0; i < n_; ++i)
            z[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(pinv_[static_cast<std::size_t>(i)])] *
                                             row_scale_[static_cast<std::size_t>(i)];
        return z;
    }

private:
    void require_regular() const {
        if (singular_)
            throw SingularMatrixError("matrix is singular (breakdown at index " +
                                      std::to_string(bad_index_) + ")");
    }

    Index n_ = 0;
    bool singular_ = false;
    Index bad_index_ = -1;
    std::vector<Index> pinv_;        // original row -> pivot position
    std::vector<double> row_scale_;  // equilibration factors
    std::vector<Index> lp_, li_, up_, ui_;
    std::vector<Cplx> lx_, ux_;
};

inline LuFactorization lu_factor(const ComplexSparseMatrix& a, double pivot_tol = 1e-13) {
    return LuFactorization::factor(a, pivot_tol);
}

/// LU solve followed by `steps` rounds of iterative refinement with the
/// original matrix; the default single step restores componentwise accuracy
/// on badly scaled systems.
inline std::vector<Cplx> solve_refined(const ComplexSparseMatrix& a, const LuFactorization& lu,
                                       std::span<const Cplx> b, int steps = 1) {
    std::vector<Cplx> x = lu.solve(b);
    for (int s = 0; s < steps; ++s) {
        std::vector<Cplx> r = a.multiply(x);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
        std::vector<Cplx> d = lu.solve(r);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += d[i];
    }
    return x;
}

}  // namespace eqstab
