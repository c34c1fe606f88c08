#pragma once

// Compressed-sparse-row storage for complex matrices. This is the one matrix
// format used throughout the toolkit; transposes are materialized explicitly
// where an algorithm needs column access.

#include "eqstab/types.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace eqstab {

struct Triplet {
    Index row = 0;
    Index col = 0;
    Cplx value{};
};

class ComplexSparseMatrix {
public:
    ComplexSparseMatrix() : nrows_(0), ncols_(0), row_offsets_(1, 0) {}

    ComplexSparseMatrix(Index nrows, Index ncols,
                        std::vector<Index> row_offsets,
                        std::vector<Index> col_indices,
                        std::vector<Cplx> values)
        : nrows_(nrows), ncols_(ncols),
          row_offsets_(std::move(row_offsets)),
          col_indices_(std::move(col_indices)),
          values_(std::move(values)) {}

    /// Build from (row, col, value) entries. Duplicates are summed in input
    /// order; entries must be finite and in range.
    static ComplexSparseMatrix from_triplets(Index nrows, Index ncols,
                                             std::vector<Triplet> entries) {
        if (nrows < 0 || ncols < 0) throw std::invalid_argument("negative matrix dimension");
        for (const auto& t : entries) {
            if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols)
                throw std::invalid_argument("triplet index out of range: (" +
                                            std::to_string(t.row) + ", " + std::to_string(t.col) + ")");
            if (!std::isfinite(t.value.real()) || !std::isfinite(t.value.imag()))
                throw std::invalid_argument("non-finite triplet value at (" +
                                            std::to_string(t.row) + ", " + std::to_string(t.col) + ")");
        }
        // stable sort keeps duplicate contributions in insertion order, so
        // symmetric assembly yields bitwise-symmetric sums
        std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });

        ComplexSparseMatrix m;
        m.nrows_ = nrows;
        m.ncols_ = ncols;
        m.row_offsets_.assign(static_cast<std::size_t>(nrows) + 1, 0);
        m.col_indices_.reserve(entries.size());
        m.values_.reserve(entries.size());

        std::size_t k = 0;
        for (Index r = 0; r < nrows; ++r) {
            while (k < entries.size() && entries[k].row == r) {
                Index c = entries[k].col;
                Cplx v = entries[k].value;
                ++k;
                while (k < entries.size() && entries[k].row == r && entries[k].col == c) {
                    v += entries[k].value;
                    ++k;
                }
                m.col_indices_.push_back(c);
                m.values_.push_back(v);
            }
            m.row_offsets_[static_cast<std::size_t>(r) + 1] = static_cast<Index>(m.col_indices_.size());
        }
        return m;
    }

    static ComplexSparseMatrix identity(Index n) {
        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) t.push_back({i, i, Cplx(1.0, 0.0)});
        return from_triplets(n, n, std::move(t));
    }

    [[nodiscard]] Index nrows() const { return nrows_; }
    [[nodiscard]] Index ncols() const { return ncols_; }
    [[nodiscard]] Index nnz() const { return static_cast<Index>(values_.size()); }

    [[nodiscard]] const std::vector<Index>& row_offsets() const { return row_offsets_; }
    [[nodiscard]] const std::vector<Index>& col_indices() const { return col_indices_; }
    [[nodiscard]] const std::vector<Cplx>& values() const { return values_; }
    [[nodiscard]] std::vector<Cplx>& values() { return values_; }

    /// Entry lookup; returns 0 for positions outside the pattern.
    [[nodiscard]] Cplx at(Index r, Index c) const {
        auto b = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(r)];
        auto e = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(r) + 1];
        auto it = std::lower_bound(b, e, c);
        if (it != e && *it == c) return values_[static_cast<std::size_t>(it - col_indices_.begin())];
        return Cplx(0.0, 0.0);
    }

    [[nodiscard]] std::vector<Cplx> multiply(std::span<const Cplx> x) const {
        if (static_cast<Index>(x.size()) != ncols_) throw std::invalid_argument("matvec dimension mismatch");
        std::vector<Cplx> y(static_cast<std::size_t>(nrows_), Cplx(0.0, 0.0));
        for (Index r = 0; r < nrows_; ++r) {
            Cplx acc(0.0, 0.0);
            for (Index k = row_offsets_[static_cast<std::size_t>(r)];
                 k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
                acc += values_[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(k)])];
            }
            y[static_cast<std::size_t>(r)] = acc;
        }
        return y;
    }

    [[nodiscard]] std::vector<Cplx> multiply_transpose(std::span<const Cplx> x) const {
        if (static_cast<Index>(x.size()) != nrows_) throw std::invalid_argument("matvec dimension mismatch");
        std::vector<Cplx> y(static_cast<std::size_t>(ncols_), Cplx(0.0, 0.0));
        for (Index r = 0; r < nrows_; ++r) {
            const Cplx xr = x[static_cast<std::size_t>(r)];
            for (Index k = row_offsets_[static_cast<std::size_t>(r)];
                 k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
                y[static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(k)])] +=
                    values_[static_cast<std::size_t>(k)] * xr;
            }
        }
        return y;
    }

    /// Explicit transpose (counting sort; values are copied bit-exactly).
    [[nodiscard]] ComplexSparseMatrix transpose() const {
        ComplexSparseMatrix t;
        t.nrows_ = ncols_;
        t.ncols_ = nrows_;
        t.row_offsets_.assign(static_cast<std::size_t>(ncols_) + 1, 0);
        t.col_indices_.resize(values_.size());
        t.values_.resize(values_.size());
        for (Index c : col_indices_) ++t.row_offsets_[static_cast<std::size_t>(c) + 1];
        for (std::size_t i = 1; i < t.row_offsets_.size(); ++i) t.row_offsets_[i] += t.row_offsets_[i - 1];
        std::vector<Index> next(t.row_offsets_.begin(), t.row_offsets_.end() - 1);
        for (Index r = 0; r < nrows_; ++r) {
            for (Index k = row_offsets_[static_cast<std::size_t>(r)];
                 k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
                Index c = col_indices_[static_cast<std::size_t>(k)];
                Index pos = next[static_cast<std::size_t>(c)]++;
                t.col_indices_[static_cast<std::size_t>(pos)] = r;
                t.values_[static_cast<std::size_t>(pos)] = values_[static_cast<std::size_t>(k)];
            }
        }
        return t;
    }

    /// Max absolute row sum.
    [[nodiscard]] double norm_inf() const {
        double n = 0.0;
        for (Index r = 0; r < nrows_; ++r) {
            double s = 0.0;
            for (Index k = row_offsets_[static_cast<std::size_t>(r)];
                 k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k)
                s += std::abs(values_[static_cast<std::size_t>(k)]);
            n = std::max(n, s);
        }
        return n;
    }

    /// Max absolute column sum.
    [[nodiscard]] double norm_one() const {
        std::vector<double> col_sum(static_cast<std::size_t>(ncols_), 0.0);
        for (std::size_t k = 0; k < values_.size(); ++k)
            col_sum[static_cast<std::size_t>(col_indices_[k])] += std::abs(values_[k]);
        double n = 0.0;
        for (double s : col_sum) n = std::max(n, s);
        return n;
    }

    /// Max |row i abs sum| of the difference against zero, per row; used for
    /// the no-vanishing-row checks.
    [[nodiscard]] double row_abs_sum(Index r) const {
        double s = 0.0;
        for (Index k = row_offsets_[static_cast<std::size_t>(r)];
             k < row_offsets_[static_cast<std::size_t>(r) + 1]; ++k)
            s += std::abs(values_[static_cast<std::size_t>(k)]);
        return s;
    }

private:
    Index nrows_;
    Index ncols_;
    std::vector<Index> row_offsets_;
    std::vector<Index> col_indices_;
    std::vector<Cplx> values_;
};

/// max_{ij} |A_ij - A_ji|; exactly 0 for a structurally symmetric matrix with
/// bitwise-equal mirrored values.
inline double asymmetry_inf(const ComplexSparseMatrix& a) {
    if (a.nrows() != a.ncols()) throw std::invalid_argument("asymmetry of non-square matrix");
    double m = 0.0;
    for (Index r = 0; r < a.nrows(); ++r) {
        for (Index k = a.row_offsets()[static_cast<std::size_t>(r)];
             k < a.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k) {
            Index c = a.col_indices()[static_cast<std::size_t>(k)];
            m = std::max(m, std::abs(a.values()[static_cast<std::size_t>(k)] - a.at(c, r)));
        }
    }
    return m;
}

inline std::vector<Cplx> operator-(std::span<const Cplx> a, std::span<const Cplx> b) {
    std::vector<Cplx> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline double norm2(std::span<const Cplx> v) {
    double s = 0.0;
    for (const Cplx& x : v) s += std::norm(x);
    return std::sqrt(s);
}

inline double norm_inf(std::span<const Cplx> v) {
    double m = 0.0;
    for (const Cplx& x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double norm1(std::span<const Cplx> v) {
    double s = 0.0;
    for (const Cplx& x : v) s += std::abs(x);
    return s;
}

/// Conjugated dot product <a, b> = sum conj(a_i) b_i.
inline Cplx dot(std::span<const Cplx> a, std::span<const Cplx> b) {
    Cplx s(0.0, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

}  // namespace eqstab
