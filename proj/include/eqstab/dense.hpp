#pragma once

// Small dense complex matrices. This is the oracle layer: dense Gaussian
// elimination and exact condition numbers that the sparse kernels are tested
// against. Capped at n = 2000 to keep oracle runs fast.

#include "eqstab/sparse.hpp"
#include "eqstab/types.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace eqstab {

class DenseMatrix {
public:
    DenseMatrix() : nrows_(0), ncols_(0) {}
    DenseMatrix(Index nrows, Index ncols)
        : nrows_(nrows), ncols_(ncols),
          a_(static_cast<std::size_t>(nrows) * static_cast<std::size_t>(ncols), Cplx(0.0, 0.0)) {}

    static DenseMatrix from_sparse(const ComplexSparseMatrix& s) {
        DenseMatrix d(s.nrows(), s.ncols());
        for (Index r = 0; r < s.nrows(); ++r)
            for (Index k = s.row_offsets()[static_cast<std::size_t>(r)];
                 k < s.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k)
                d(r, s.col_indices()[static_cast<std::size_t>(k)]) = s.values()[static_cast<std::size_t>(k)];
        return d;
    }

    static DenseMatrix identity(Index n) {
        DenseMatrix d(n, n);
        for (Index i = 0; i < n; ++i) d(i, i) = Cplx(1.0, 0.0);
        return d;
    }

    [[nodiscard]] Index nrows() const { return nrows_; }
    [[nodiscard]] Index ncols() const { return ncols_; }

    Cplx& operator()(Index r, Index c) {
        return a_[static_cast<std::size_t>(r) * static_cast<std::size_t>(ncols_) + static_cast<std::size_t>(c)];
    }
    const Cplx& operator()(Index r, Index c) const {
        return a_[static_cast<std::size_t>(r) * static_cast<std::size_t>(ncols_) + static_cast<std::size_t>(c)];
    }

    [[nodiscard]] std::vector<Cplx> multiply(std::span<const Cplx> x) const {
        std::vector<Cplx> y(static_cast<std::size_t>(nrows_), Cplx(0.0, 0.0));
        for (Index r = 0; r < nrows_; ++r) {
            Cplx acc(0.0, 0.0);
            for (Index c = 0; c < ncols_; ++c) acc += (*this)(r, c) * x[static_cast<std::size_t>(c)];
            y[static_cast<std::size_t>(r)] = acc;
        }
        return y;
    }

    [[nodiscard]] double norm_inf() const {
        double n = 0.0;
        for (Index r = 0; r < nrows_; ++r) {
            double s = 0.0;
            for (Index c = 0; c < ncols_; ++c) s += std::abs((*this)(r, c));
            n = std::max(n, s);
        }
        return n;
    }

    [[nodiscard]] double norm_one() const {
        double n = 0.0;
        for (Index c = 0; c < ncols_; ++c) {
            double s = 0.0;
            for (Index r = 0; r < nrows_; ++r) s += std::abs((*this)(r, c));
            n = std::max(n, s);
        }
        return n;
    }

private:
    Index nrows_;
    Index ncols_;
    std::vector<Cplx> a_;
};

/// Dense LU with partial pivoting (rows).
class DenseLu {
public:
    static DenseLu factor(DenseMatrix a) {
        if (a.nrows() != a.ncols()) throw std::invalid_argument("dense LU of non-square matrix");
        const Index n = a.nrows();
        DenseLu f;
        f.perm_.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) f.perm_[static_cast<std::size_t>(i)] = i;
        for (Index k = 0; k < n; ++k) {
            Index piv = k;
            double best = std::abs(a(k, k));
            for (Index r = k + 1; r < n; ++r) {
                double m = std::abs(a(r, k));
                if (m > best) { best = m; piv = r; }
            }
            if (best == 0.0) { f.singular_ = true; f.lu_ = std::move(a); return f; }
            if (piv != k) {
                for (Index c = 0; c < n; ++c) std::swap(a(k, c), a(piv, c));
                std::swap(f.perm_[static_cast<std::size_t>(k)], f.perm_[static_cast<std::size_t>(piv)]);
            }
            const Cplx pivot = a(k, k);
            for (Index r = k + 1; r < n; ++r) {
                Cplx m = a(r, k) / pivot;
                a(r, k) = m;
                if (m != Cplx(0.0, 0.0))
                    for (Index c = k + 1; c < n; ++c) a(r, c) -= m * a(k, c);
            }
        }
        f.lu_ = std::move(a);
        return f;
    }

    [[nodiscard]] bool singular() const { return singular_; }

    [[nodiscard]] std::vector<Cplx> solve(std::span<const Cplx> b) const {
        if (singular_) throw SingularMatrixError("dense LU is singular");
        const Index n = lu_.nrows();
        std::vector<Cplx> x(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(perm_[static_cast<std::size_t>(i)])];
        for (Index r = 1; r < n; ++r) {
            Cplx acc = x[static_cast<std::size_t>(r)];
            for (Index c = 0; c < r; ++c) acc -= lu_(r, c) * x[static_cast<std::size_t>(c)];
            x[static_cast<std::size_t>(r)] = acc;
        }
        for (Index r = n - 1; r >= 0; --r) {
            Cplx acc = x[static_cast<std::size_t>(r)];
            for (Index c = r + 1; c < n; ++c) acc -= lu_(r, c) * x[static_cast<std::size_t>(c)];
            x[static_cast<std::size_t>(r)] = acc / lu_(r, r);
        }
        return x;
    }

private:
    DenseMatrix lu_;
    std::vector<Index> perm_;
    bool singular_ = false;
};

inline DenseMatrix dense_inverse(const DenseMatrix& a) {
    const Index n = a.nrows();
    DenseLu f = DenseLu::factor(a);
    if (f.singular()) throw SingularMatrixError("matrix is singular, no inverse");
    DenseMatrix inv(n, n);
    std::vector<Cplx> e(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
    for (Index c = 0; c < n; ++c) {
        e[static_cast<std::size_t>(c)] = Cplx(1.0, 0.0);
        std::vector<Cplx> col = f.solve(e);
        e[static_cast<std::size_t>(c)] = Cplx(0.0, 0.0);
        for (Index r = 0; r < n; ++r) inv(r, c) = col[static_cast<std::size_t>(r)];
    }
    return inv;
}

/// Exact condition number by dense inversion. Throws SingularMatrixError for
/// singular input, std::invalid_argument above the n = 2000 oracle cap.
inline double dense_cond_exact(const DenseMatrix& a, Norm norm = Norm::Inf) {
    if (a.nrows() != a.ncols()) throw std::invalid_argument("condition number of non-square matrix");
    if (a.nrows() > 2000) throw std::invalid_argument("dense oracle capped at n = 2000");
    if (a.nrows() == 0) return 1.0;
    DenseMatrix inv = dense_inverse(a);
    return norm == Norm::Inf ? a.norm_inf() * inv.norm_inf() : a.norm_one() * inv.norm_one();
}

/// Cholesky-based SPD test on the Hermitian part of a matrix; used as the
/// dense oracle for positive-definiteness checks on small systems.
inline bool dense_is_spd(const DenseMatrix& a, double tol = 0.0) {
    const Index n = a.nrows();
    DenseMatrix h(n, n);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) h(r, c) = 0.5 * (a(r, c) + std::conj(a(c, r)));
    for (Index k = 0; k < n; ++k) {
        Cplx d = h(k, k);
        for (Index j = 0; j < k; ++j) d -= h(k, j) * std::conj(h(k, j));
        if (d.real() <= tol) return false;
        const double l = std::sqrt(d.real());
        h(k, k) = Cplx(l, 0.0);
        for (Index r = k + 1; r < n; ++r) {
            Cplx s = h(r, k);
            for (Index j = 0; j < k; ++j) s -= h(r, j) * std::conj(h(k, j));
            h(r, k) = s / l;
        }
    }
    return true;
}

}  // namespace eqstab
