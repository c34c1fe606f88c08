#pragma once

// Partitioned two-block form of a conduction/displacement system: index set
// I1 holds the unknowns whose conduction rows are live, I2 the unknowns whose
// equations carry only the displacement operator (and therefore vanish with
// it in the static limit). The right-hand side is kept split as
// r(omega) = r_static + j*omega*r_dynamic so scalings can cancel powers of
// omega analytically on the rhs as well as the matrix.

#include "eqstab/sparse.hpp"
#include "eqstab/types.hpp"

#include <span>
#include <vector>

namespace eqstab {

/// Extract the (rows, cols) submatrix. Entries with value exactly zero are
/// dropped from the pattern.
inline ComplexSparseMatrix extract_block(const ComplexSparseMatrix& a,
                                         std::span<const Index> rows,
                                         std::span<const Index> cols) {
    std::vector<Index> col_pos(static_cast<std::size_t>(a.ncols()), -1);
    for (std::size_t j = 0; j < cols.size(); ++j) col_pos[static_cast<std::size_t>(cols[j])] = static_cast<Index>(j);
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Index r = rows[i];
        for (Index k = a.row_offsets()[static_cast<std::size_t>(r)];
             k < a.row_offsets()[static_cast<std::size_t>(r) + 1]; ++k) {
            const Index cp = col_pos[static_cast<std::size_t>(a.col_indices()[static_cast<std::size_t>(k)])];
            const Cplx v = a.values()[static_cast<std::size_t>(k)];
            if (cp >= 0 && v != Cplx(0.0, 0.0)) t.push_back({static_cast<Index>(i), cp, v});
        }
    }
    return ComplexSparseMatrix::from_triplets(static_cast<Index>(rows.size()),
                                              static_cast<Index>(cols.size()), std::move(t));
}

struct TwoBlockSystem {
    ComplexSparseMatrix K11;        // conduction block (real-valued entries)
    ComplexSparseMatrix M11;        // displacement blocks
    ComplexSparseMatrix M12;
    ComplexSparseMatrix M22;
    std::vector<Cplx> r1_static, r2_static;    // omega-free rhs parts
    std::vector<Cplx> r1_dynamic, r2_dynamic;  // parts carrying a factor j*omega
    std::vector<Index> I1, I2;                 // block position -> free-dof index

    // representative material values per dof, used by the material scalings
    std::vector<double> sigma1, eps1;  // over I1
    std::vector<double> eps2;          // over I2

    [[nodiscard]] Index n1() const { return static_cast<Index>(I1.size()); }
    [[nodiscard]] Index n2() const { return static_cast<Index>(I2.size()); }
    [[nodiscard]] Index n() const { return n1() + n2(); }

    [[nodiscard]] std::vector<Cplx> r1(double omega) const {
        std::vector<Cplx> r(r1_static);
        const Cplx jw(0.0, omega);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += jw * r1_dynamic[i];
        return r;
    }
    [[nodiscard]] std::vector<Cplx> r2(double omega) const {
        std::vector<Cplx> r(r2_static);
        const Cplx jw(0.0, omega);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += jw * r2_dynamic[i];
        return r;
    }

    /// Scatter a block-ordered vector [x1; x2] back to free-dof numbering.
    [[nodiscard]] std::vector<Cplx> scatter(std::span<const Cplx> block_vec) const {
        std::vector<Cplx> out(static_cast<std::size_t>(n()), Cplx(0.0, 0.0));
        for (std::size_t i = 0; i < I1.size(); ++i) out[static_cast<std::size_t>(I1[i])] = block_vec[i];
        for (std::size_t i = 0; i < I2.size(); ++i)
            out[static_cast<std::size_t>(I2[i])] = block_vec[I1.size() + i];
        return out;
    }

    /// Gather a free-dof vector into block order [x1; x2].
    [[nodiscard]] std::vector<Cplx> gather(std::span<const Cplx> dof_vec) const {
        std::vector<Cplx> out(static_cast<std::size_t>(n()));
        for (std::size_t i = 0; i < I1.size(); ++i) out[i] = dof_vec[static_cast<std::size_t>(I1[i])];
        for (std::size_t i = 0; i < I2.size(); ++i)
            out[I1.size() + i] = dof_vec[static_cast<std::size_t>(I2[i])];
        return out;
    }
};

}  // namespace eqstab
