#pragma once

// ILU(0): incomplete LU restricted to the sparsity pattern of the input.
// Factors are held in a single value array over A's CSR pattern (strict lower
// part = L without its unit diagonal, upper part including diagonal = U).

#include "eqstab/sparse.hpp"
#include "eqstab/types.hpp"

#include <span>
#include <vector>

namespace eqstab {

class Ilu0Preconditioner {
public:
    static Ilu0Preconditioner build(const ComplexSparseMatrix& a) {
        if (a.nrows() != a.ncols()) throw std::invalid_argument("ILU(0) of non-square matrix");
        Ilu0Preconditioner p;
        p.n_ = a.nrows();
        p.row_ptr_ = a.row_offsets();
        p.col_idx_ = a.col_indices();
        p.val_ = a.values();

        const Index sentinel = static_cast<Index>(p.val_.size());
        p.diag_pos_.assign(static_cast<std::size_t>(p.n_), sentinel);
        for (Index i = 0; i < p.n_; ++i) {
            for (Index k = p.row_ptr_[static_cast<std::size_t>(i)]; k < p.row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
                if (p.col_idx_[static_cast<std::size_t>(k)] == i) {
                    p.diag_pos_[static_cast<std::size_t>(i)] = k;
                    break;
                }
            if (p.diag_pos_[static_cast<std::size_t>(i)] == sentinel ||
                p.val_[static_cast<std::size_t>(p.diag_pos_[static_cast<std::size_t>(i)])] == Cplx(0.0, 0.0))
                throw ZeroDiagonalError(i);
        }

        for (Index i = 0; i < p.n_; ++i) {
            for (Index ki = p.row_ptr_[static_cast<std::size_t>(i)]; ki < p.row_ptr_[static_cast<std::size_t>(i) + 1]; ++ki) {
                const Index j = p.col_idx_[static_cast<std::size_t>(ki)];
                if (j >= i) continue;
                const Cplx piv = p.val_[static_cast<std::size_t>(p.diag_pos_[static_cast<std::size_t>(j)])];
                if (piv == Cplx(0.0, 0.0)) throw ZeroDiagonalError(j);
                p.val_[static_cast<std::size_t>(ki)] /= piv;
                const Cplx lij = p.val_[static_cast<std::size_t>(ki)];
                // merge row i (cols > j) against row j's upper part, updating
                // only positions that already exist (fill-in is dropped)
                Index pi = ki + 1;
                Index pj = p.diag_pos_[static_cast<std::size_t>(j)] + 1;
                while (pi < p.row_ptr_[static_cast<std::size_t>(i) + 1] && pj < p.row_ptr_[static_cast<std::size_t>(j) + 1]) {
                    const Index ci = p.col_idx_[static_cast<std::size_t>(pi)];
                    const Index cj = p.col_idx_[static_cast<std::size_t>(pj)];
                    if (ci == cj) {
                        p.val_[static_cast<std::size_t>(pi)] -= lij * p.val_[static_cast<std::size_t>(pj)];
                        ++pi;
                        ++pj;
                    } else if (ci < cj) {
                        ++pi;
                    } else {
                        ++pj;
                    }
                }
            }
            if (p.val_[static_cast<std::size_t>(p.diag_pos_[static_cast<std::size_t>(i)])] == Cplx(0.0, 0.0))
                throw ZeroDiagonalError(i);
        }
        return p;
    }

    [[nodiscard]] Index n() const { return n_; }

    /// z = U^-1 L^-1 x.
    [[nodiscard]] std::vector<Cplx> solve(std::span<const Cplx> x) const {
        std::vector<Cplx> z(x.begin(), x.end());
        for (Index i = 0; i < n_; ++i) {
            Cplx acc = z[static_cast<std::size_t>(i)];
            for (Index k = row_ptr_[static_cast<std::size_t>(i)]; k < diag_pos_[static_cast<std::size_t>(i)]; ++k)
                acc -= val_[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])];
            z[static_cast<std::size_t>(i)] = acc;
        }
        for (Index i = n_ - 1; i >= 0; --i) {
            Cplx acc = z[static_cast<std::size_t>(i)];
            for (Index k = diag_pos_[static_cast<std::size_t>(i)] + 1; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
                acc -= val_[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])];
            z[static_cast<std::size_t>(i)] = acc / val_[static_cast<std::size_t>(diag_pos_[static_cast<std::size_t>(i)])];
        }
        return z;
    }

    /// z = L^-T U^-T x (transpose solve, scatter form over the CSR pattern).
    [[nodiscard]] std::vector<Cplx> solve_transpose(std::span<const Cplx> x) const {
        std::vector<Cplx> z(x.begin(), x.end());
        for (Index i = 0; i < n_; ++i) {  // U^T is lower triangular
            const Cplx zi = z[static_cast<std::size_t>(i)] / val_[static_cast<std::size_t>(diag_pos_[static_cast<std::size_t>(i)])];
            z[static_cast<std::size_t>(i)] = zi;
            for (Index k = diag_pos_[static_cast<std::size_t>(i)] + 1; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
                z[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])] -= val_[static_cast<std::size_t>(k)] * zi;
        }
        for (Index i = n_ - 1; i >= 0; --i) {  // L^T is unit upper triangular
            const Cplx zi = z[static_cast<std::size_t>(i)];
            for (Index k = row_ptr_[static_cast<std::size_t>(i)]; k < diag_pos_[static_cast<std::size_t>(i)]; ++k)
                z[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])] -= val_[static_cast<std::size_t>(k)] * zi;
        }
        return z;
    }

    /// y = L U x (product with the incomplete factors).
    [[nodiscard]] std::vector<Cplx> multiply(std::span<const Cplx> x) const {
        std::vector<Cplx> y(static_cast<std::size_t>(n_), Cplx(0.0, 0.0));
        std::vector<Cplx> ux(static_cast<std::size_t>(n_), Cplx(0.0, 0.0));
        for (Index i = 0; i < n_; ++i) {
            Cplx acc(0.0, 0.0);
            for (Index k = diag_pos_[static_cast<std::size_t>(i)]; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
                acc += val_[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])];
            ux[static_cast<std::size_t>(i)] = acc;
        }
        for (Index i = n_ - 1; i >= 0; --i) {
            Cplx acc = ux[static_cast<std::size_t>(i)];
            for (Index k = row_ptr_[static_cast<std::size_t>(i)]; k < diag_pos_[static_cast<std::size_t>(i)]; ++k)
                acc += val_[static_cast<std::size_t>(k)] * ux[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])];
            y[static_cast<std::size_t>(i)] = acc;
        }
        return y;
    }

    /// y = (L U)^T x = U^T L^T x (scatter form over the CSR pattern).
    [[nodiscard]] std::vector<Cplx> multiply_transpose(std::span<const Cplx> x) const {
        std::vector<Cplx> lt(x.begin(), x.end());  // L^T x, unit diagonal
        for (Index i = 0; i < n_; ++i) {
            const Cplx xi = x[static_cast<std::size_t>(i)];
            for (Index k = row_ptr_[static_cast<std::size_t>(i)]; k < diag_pos_[static_cast<std::size_t>(i)]; ++k)
                lt[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])] += val_[static_cast<std::size_t>(k)] * xi;
        }
        std::vector<Cplx> y(static_cast<std::size_t>(n_), Cplx(0.0, 0.0));
        for (Index i = 0; i < n_; ++i) {
            const Cplx li = lt[static_cast<std::size_t>(i)];
            for (Index k = diag_pos_[static_cast<std::size_t>(i)]; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
                y[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)])] += val_[static_cast<std::size_t>(k)] * li;
        }
        return y;
    }

    /// Factor value at a pattern position (L below diagonal, U from diagonal up).
    [[nodiscard]] Cplx factor_at(Index r, Index c) const {
        for (Index k = row_ptr_[static_cast<std::size_t>(r)]; k < row_ptr_[static_cast<std::size_t>(r) + 1]; ++k)
            if (col_idx_[static_cast<std::size_t>(k)] == c) return val_[static_cast<std::size_t>(k)];
        return Cplx(0.0, 0.0);
    }

private:
    Index n_ = 0;
    std::vector<Index> row_ptr_, col_idx_, diag_pos_;
    std::vector<Cplx> val_;
};

inline Ilu0Preconditioner ilu0(const ComplexSparseMatrix& a) { return Ilu0Preconditioner::build(a); }

}  // namespace eqstab
