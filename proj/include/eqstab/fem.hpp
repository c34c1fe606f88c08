#pragma once

// Lowest-order (trilinear) finite elements on axis-aligned bricks: element
// integrals by 2x2x2 Gauss quadrature (exact for these integrands), assembly
// of the conduction and displacement operators, Dirichlet elimination with
// lifting, floating-potential gluing, the conductor/insulator two-block
// partition, and the displacement-field evaluation.

#include "eqstab/mesh.hpp"
#include "eqstab/sparse.hpp"
#include "eqstab/two_block.hpp"
#include "eqstab/types.hpp"

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace eqstab {

// =============================================================================
// element integrals
// =============================================================================

/// Reference corner signs, VTK hexahedron ordering.
inline constexpr std::array<std::array<double, 3>, 8> hex_corner_signs = {{
    {-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
    {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1},
}};

struct HexElementIntegrals {
    std::array<std::array<double, 8>, 8> gradgrad{};   // \int grad v_a . grad v_b
    std::array<std::array<double, 3>, 8> grad_total{}; // \int grad v_a
};

/// 2x2x2 Gauss quadrature on a brick of size hx*hy*hz. The integrands are
/// polynomials of degree <= 2 per direction, so this rule integrates them
/// exactly.
inline HexElementIntegrals hex_element_integrals(double hx, double hy, double hz) {
    HexElementIntegrals out;
    const double g = 1.0 / std::sqrt(3.0);
    const double detj = hx * hy * hz / 8.0;
    const std::array<double, 3> inv_h = {2.0 / hx, 2.0 / hy, 2.0 / hz};
    for (int qx = 0; qx < 2; ++qx)
        for (int qy = 0; qy < 2; ++qy)
            for (int qz = 0; qz < 2; ++qz) {
                const std::array<double, 3> q = {qx ? g : -g, qy ? g : -g, qz ? g : -g};
                std::array<std::array<double, 3>, 8> grad;
                for (int a = 0; a < 8; ++a) {
                    const auto& s = hex_corner_signs[static_cast<std::size_t>(a)];
                    grad[static_cast<std::size_t>(a)] = {
                        s[0] * (1 + s[1] * q[1]) * (1 + s[2] * q[2]) / 8.0 * inv_h[0],
                        (1 + s[0] * q[0]) * s[1] * (1 + s[2] * q[2]) / 8.0 * inv_h[1],
                        (1 + s[0] * q[0]) * (1 + s[1] * q[1]) * s[2] / 8.0 * inv_h[2],
                    };
                }
                for (int a = 0; a < 8; ++a) {
                    for (int b = 0; b < 8; ++b) {
                        double d = 0.0;
                        for (int c = 0; c < 3; ++c)
                            d += grad[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)] *
                                 grad[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
                        out.gradgrad[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += d * detj;
                    }
                    for (int c = 0; c < 3; ++c)
                        out.grad_total[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)] +=
                            grad[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)] * detj;
                }
            }
    return out;
}

// =============================================================================
// assembly over the full node space
// =============================================================================

/// K_mn = \int grad v_m . sigma grad v_n, M_mn = \int grad v_m . eps grad v_n.
/// Both are assembled over all nodes; boundary conditions are applied later
/// by elimination. Row sums of both are zero (gradient of the constant).
inline std::pair<ComplexSparseMatrix, ComplexSparseMatrix> assemble_KM(const HexMesh& mesh,
                                                                       const MaterialMap& materials) {
    materials.validate();
    const auto h = mesh.spacing();
    const auto ints = hex_element_integrals(h[0], h[1], h[2]);
    std::vector<Triplet> kt, mt;
    kt.reserve(static_cast<std::size_t>(mesh.num_elements()) * 64);
    mt.reserve(static_cast<std::size_t>(mesh.num_elements()) * 64);
    for (Index e = 0; e < mesh.num_elements(); ++e) {
        const double sig = materials.sigma_of(mesh.region(e));
        const double eps = materials.eps_of(mesh.region(e));
        const auto nodes = mesh.element_nodes(e);
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b) {
                const double gg = ints.gradgrad[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                if (sig != 0.0)
                    kt.push_back({nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)],
                                  Cplx(sig * gg, 0.0)});
                mt.push_back({nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)],
                              Cplx(eps * gg, 0.0)});
            }
    }
    const Index n = mesh.num_nodes();
    return {ComplexSparseMatrix::from_triplets(n, n, std::move(kt)),
            ComplexSparseMatrix::from_triplets(n, n, std::move(mt))};
}

/// Volume source term over all nodes: r_m = -\int grad v_m . J_src with an
/// element-wise constant source field. Empty input means no impressed source.
inline std::vector<Cplx> assemble_source(const HexMesh& mesh,
                                         std::span<const std::array<double, 3>> j_src) {
    std::vector<Cplx> r(static_cast<std::size_t>(mesh.num_nodes()), Cplx(0.0, 0.0));
    if (j_src.empty()) return r;
    if (static_cast<Index>(j_src.size()) != mesh.num_elements())
        throw std::invalid_argument("source field must have one vector per element");
    const auto h = mesh.spacing();
    const auto ints = hex_element_integrals(h[0], h[1], h[2]);
    for (Index e = 0; e < mesh.num_elements(); ++e) {
        const auto nodes = mesh.element_nodes(e);
        const auto& j = j_src[static_cast<std::size_t>(e)];
        for (int a = 0; a < 8; ++a) {
            double dotv = 0.0;
            for (int c = 0; c < 3; ++c)
                dotv += ints.grad_total[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)] * j[static_cast<std::size_t>(c)];
            r[static_cast<std::size_t>(nodes[static_cast<std::size_t>(a)])] -= Cplx(dotv, 0.0);
        }
    }
    return r;
}

// =============================================================================
// boundary conditions, gluing, reduction
// =============================================================================

struct BoundaryConditions {
    std::vector<Index> dirichlet_nodes;
    std::vector<Cplx> dirichlet_values;               // amplitudes
    std::vector<std::vector<Index>> floating_groups;  // disjoint electrode node sets
};

struct GluedSystem {
    ComplexSparseMatrix K, M;
    std::vector<Cplx> r;
    std::vector<Index> old_to_new;  // old dof -> glued dof
    Index num_dofs = 0;

    [[nodiscard]] std::vector<Cplx> expand(std::span<const Cplx> x) const {
        std::vector<Cplx> out(old_to_new.size());
        for (std::size_t i = 0; i < old_to_new.size(); ++i)
            out[i] = x[static_cast<std::size_t>(old_to_new[i])];
        return out;
    }
};

/// Glue each floating-potential group into one master unknown by summing
/// rows and columns; the recovery map copies the master value back to every
/// group member. Dof count drops by sum(|group| - 1).
inline GluedSystem apply_floating_potentials(const ComplexSparseMatrix& k,
                                             const ComplexSparseMatrix& m,
                                             std::span<const Cplx> r,
                                             const std::vector<std::vector<Index>>& groups) {
    const Index n = k.nrows();
    std::vector<Index> group_of(static_cast<std::size_t>(n), -1);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw std::invalid_argument("empty floating-potential group");
        for (Index node : groups[g]) {
            if (node < 0 || node >= n) throw std::invalid_argument("floating group node out of range");
            if (group_of[static_cast<std::size_t>(node)] >= 0)
                throw std::invalid_argument("overlapping floating-potential groups");
            group_of[static_cast<std::size_t>(node)] = static_cast<Index>(g);
        }
    }

    GluedSystem out;
    out.old_to_new.assign(static_cast<std::size_t>(n), -1);
    std::vector<Index> master(groups.size(), -1);
    Index next = 0;
    for (Index i = 0; i < n; ++i) {
        const Index g = group_of[static_cast<std::size_t>(i)];
        if (g < 0) {
            out.old_to_new[static_cast<std::size_t>(i)] = next++;
        } else if (master[static_cast<std::size_t>(g)] < 0) {
            master[static_cast<std::size_t>(g)] = next;
            out.old_to_new[static_cast<std::size_t>(i)] = next++;
        } else {
            out.old_to_new[static_cast<std::size_t>(i)] = master[static_cast<std::size_t>(g)];
        }
    }
    out.num_dofs = next;

    auto remap = [&](const ComplexSparseMatrix& a) {
        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(a.nnz()));
        for (Index row = 0; row < n; ++row)
            for (Index p = a.row_offsets()[static_cast<std::size_t>(row)];
                 p < a.row_offsets()[static_cast<std::size_t>(row) + 1]; ++p)
                t.push_back({out.old_to_new[static_cast<std::size_t>(row)],
                             out.old_to_new[static_cast<std::size_t>(a.col_indices()[static_cast<std::size_t>(p)])],
                             a.values()[static_cast<std::size_t>(p)]});
        return ComplexSparseMatrix::from_triplets(next, next, std::move(t));
    };
    out.K = remap(k);
    out.M = remap(m);
    out.r.assign(static_cast<std::size_t>(next), Cplx(0.0, 0.0));
    for (Index i = 0; i < n; ++i)
        out.r[static_cast<std::size_t>(out.old_to_new[static_cast<std::size_t>(i)])] += r[static_cast<std::size_t>(i)];
    return out;
}

/// Boundary-reduced system over free dofs: Dirichlet rows/cols eliminated
/// with their lifting folded into the split right-hand side, floating groups
/// glued, per-dof material values recorded for the material scalings.
struct ReducedSystem {
    ComplexSparseMatrix K, M;                 // free dofs
    std::vector<Cplx> r_static, r_dynamic;    // r(omega) = r_static + j*omega*r_dynamic
    std::vector<Index> node_to_dof;           // -1 where Dirichlet
    std::vector<Cplx> node_bc_value;          // amplitude per node (0 where free)
    Index num_dofs = 0;
    std::vector<double> sigma_dof, eps_dof;   // representative materials per dof

    /// Expand a free-dof vector to the full node field; Dirichlet nodes get
    /// their amplitude scaled by bc_scale.
    [[nodiscard]] std::vector<Cplx> expand(std::span<const Cplx> x, double bc_scale = 1.0) const {
        std::vector<Cplx> out(node_to_dof.size());
        for (std::size_t v = 0; v < node_to_dof.size(); ++v) {
            const Index d = node_to_dof[v];
            out[v] = (d >= 0) ? x[static_cast<std::size_t>(d)] : node_bc_value[v] * bc_scale;
        }
        return out;
    }
};

inline ReducedSystem reduce_system(const HexMesh& mesh, const MaterialMap& materials,
                                   const BoundaryConditions& bc,
                                   std::span<const std::array<double, 3>> j_src = {}) {
    const Index n = mesh.num_nodes();
    auto [k_full, m_full] = assemble_KM(mesh, materials);
    auto r_src = assemble_source(mesh, j_src);

    ReducedSystem sys;
    sys.node_to_dof.assign(static_cast<std::size_t>(n), -2);  // -2 = unassigned free
    sys.node_bc_value.assign(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
    if (bc.dirichlet_nodes.size() != bc.dirichlet_values.size())
        throw std::invalid_argument("Dirichlet node/value size mismatch");
    for (std::size_t i = 0; i < bc.dirichlet_nodes.size(); ++i) {
        const Index v = bc.dirichlet_nodes[i];
        if (v < 0 || v >= n) throw std::invalid_argument("Dirichlet node out of range");
        sys.node_to_dof[static_cast<std::size_t>(v)] = -1;
        sys.node_bc_value[static_cast<std::size_t>(v)] = bc.dirichlet_values[i];
    }

    // floating groups share one dof; groups must avoid Dirichlet nodes
    std::vector<Index> group_master(bc.floating_groups.size(), -1);
    std::vector<Index> group_of(static_cast<std::size_t>(n), -1);
    for (std::size_t g = 0; g < bc.floating_groups.size(); ++g) {
        if (bc.floating_groups[g].empty()) throw std::invalid_argument("empty floating-potential group");
        for (Index v : bc.floating_groups[g]) {
            if (v < 0 || v >= n) throw std::invalid_argument("floating group node out of range");
            if (sys.node_to_dof[static_cast<std::size_t>(v)] == -1)
                throw std::invalid_argument("floating group overlaps a Dirichlet node");
            if (group_of[static_cast<std::size_t>(v)] >= 0)
                throw std::invalid_argument("overlapping floating-potential groups");
            group_of[static_cast<std::size_t>(v)] = static_cast<Index>(g);
        }
    }
    Index next = 0;
    for (Index v = 0; v < n; ++v) {
        if (sys.node_to_dof[static_cast<std::size_t>(v)] == -1) continue;
        const Index g = group_of[static_cast<std::size_t>(v)];
        if (g < 0) {
            sys.node_to_dof[static_cast<std::size_t>(v)] = next++;
        } else if (group_master[static_cast<std::size_t>(g)] < 0) {
            group_master[static_cast<std::size_t>(g)] = next;
            sys.node_to_dof[static_cast<std::size_t>(v)] = next++;
        } else {
            sys.node_to_dof[static_cast<std::size_t>(v)] = group_master[static_cast<std::size_t>(g)];
        }
    }
    sys.num_dofs = next;

    // scatter into free rows/cols, accumulating the Dirichlet lifting columns
    std::vector<Triplet> kt, mt;
    std::vector<Cplx> lift_k(static_cast<std::size_t>(next), Cplx(0.0, 0.0));
    std::vector<Cplx> lift_m(static_cast<std::size_t>(next), Cplx(0.0, 0.0));
    auto scatter = [&](const ComplexSparseMatrix& a, std::vector<Triplet>& t, std::vector<Cplx>& lift) {
        for (Index row = 0; row < n; ++row) {
            const Index dr = sys.node_to_dof[static_cast<std::size_t>(row)];
            if (dr < 0) continue;
            for (Index p = a.row_offsets()[static_cast<std::size_t>(row)];
                 p < a.row_offsets()[static_cast<std::size_t>(row) + 1]; ++p) {
                const Index col = a.col_indices()[static_cast<std::size_t>(p)];
                const Cplx v = a.values()[static_cast<std::size_t>(p)];
                const Index dc = sys.node_to_dof[static_cast<std::size_t>(col)];
                if (dc >= 0)
                    t.push_back({dr, dc, v});
                else
                    lift[static_cast<std::size_t>(dr)] += v * sys.node_bc_value[static_cast<std::size_t>(col)];
            }
        }
    };
    scatter(k_full, kt, lift_k);
    scatter(m_full, mt, lift_m);
    sys.K = ComplexSparseMatrix::from_triplets(next, next, std::move(kt));
    sys.M = ComplexSparseMatrix::from_triplets(next, next, std::move(mt));

    sys.r_static.assign(static_cast<std::size_t>(next), Cplx(0.0, 0.0));
    sys.r_dynamic.assign(static_cast<std::size_t>(next), Cplx(0.0, 0.0));
    for (Index v = 0; v < n; ++v) {
        const Index d = sys.node_to_dof[static_cast<std::size_t>(v)];
        if (d >= 0) sys.r_static[static_cast<std::size_t>(d)] += r_src[static_cast<std::size_t>(v)];
    }
    for (Index d = 0; d < next; ++d) {
        sys.r_static[static_cast<std::size_t>(d)] -= lift_k[static_cast<std::size_t>(d)];
        sys.r_dynamic[static_cast<std::size_t>(d)] -= lift_m[static_cast<std::size_t>(d)];
    }

    // representative materials: max over all elements adjacent to the dof
    sys.sigma_dof.assign(static_cast<std::size_t>(next), 0.0);
    sys.eps_dof.assign(static_cast<std::size_t>(next), 0.0);
    for (Index v = 0; v < n; ++v) {
        const Index d = sys.node_to_dof[static_cast<std::size_t>(v)];
        if (d < 0) continue;
        for (Index e : mesh.node_elements(v)) {
            sys.sigma_dof[static_cast<std::size_t>(d)] =
                std::max(sys.sigma_dof[static_cast<std::size_t>(d)], materials.sigma_of(mesh.region(e)));
            sys.eps_dof[static_cast<std::size_t>(d)] =
                std::max(sys.eps_dof[static_cast<std::size_t>(d)], materials.eps_of(mesh.region(e)));
        }
    }
    return sys;
}

/// Combined right-hand side at a given frequency.
inline std::vector<Cplx> assemble_rhs(const ReducedSystem& sys, double omega) {
    std::vector<Cplx> r(sys.r_static);
    const Cplx jw(0.0, omega);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += jw * sys.r_dynamic[i];
    return r;
}

// =============================================================================
// conductor/insulator partition
// =============================================================================

/// Split the free dofs into I2 (basis support entirely inside sigma = 0
/// regions) and I1 (everything else, including the interface). The
/// conduction operator restricted to I2 rows/columns must be exactly zero;
/// that property is verified, not assumed.
inline TwoBlockSystem partition(const ReducedSystem& sys, const HexMesh& mesh,
                                const MaterialMap& materials) {
    const Index n = sys.num_dofs;
    std::vector<char> conducting(static_cast<std::size_t>(n), 0);
    for (Index v = 0; v < mesh.num_nodes(); ++v) {
        const Index d = sys.node_to_dof[static_cast<std::size_t>(v)];
        if (d < 0) continue;
        for (Index e : mesh.node_elements(v))
            if (materials.sigma_of(mesh.region(e)) != 0.0) {
                conducting[static_cast<std::size_t>(d)] = 1;
                break;
            }
    }

    TwoBlockSystem out;
    for (Index d = 0; d < n; ++d) (conducting[static_cast<std::size_t>(d)] ? out.I1 : out.I2).push_back(d);

    // exact zero-block verification on the conduction operator
    std::vector<char> in_i2(static_cast<std::size_t>(n), 0);
    for (Index d : out.I2) in_i2[static_cast<std::size_t>(d)] = 1;
    for (Index row = 0; row < n; ++row)
        for (Index p = sys.K.row_offsets()[static_cast<std::size_t>(row)];
             p < sys.K.row_offsets()[static_cast<std::size_t>(row) + 1]; ++p) {
            const Index col = sys.K.col_indices()[static_cast<std::size_t>(p)];
            if ((in_i2[static_cast<std::size_t>(row)] || in_i2[static_cast<std::size_t>(col)]) &&
                sys.K.values()[static_cast<std::size_t>(p)] != Cplx(0.0, 0.0))
                throw std::logic_error("conduction operator has a nonzero entry on an insulator dof");
        }

    out.K11 = extract_block(sys.K, out.I1, out.I1);
    out.M11 = extract_block(sys.M, out.I1, out.I1);
    out.M12 = extract_block(sys.M, out.I1, out.I2);
    out.M22 = extract_block(sys.M, out.I2, out.I2);
    for (Index d : out.I1) {
        out.r1_static.push_back(sys.r_static[static_cast<std::size_t>(d)]);
        out.r1_dynamic.push_back(sys.r_dynamic[static_cast<std::size_t>(d)]);
        out.sigma1.push_back(sys.sigma_dof[static_cast<std::size_t>(d)]);
        out.eps1.push_back(sys.eps_dof[static_cast<std::size_t>(d)]);
    }
    for (Index d : out.I2) {
        out.r2_static.push_back(sys.r_static[static_cast<std::size_t>(d)]);
        out.r2_dynamic.push_back(sys.r_dynamic[static_cast<std::size_t>(d)]);
        out.eps2.push_back(sys.eps_dof[static_cast<std::size_t>(d)]);
    }
    return out;
}

// =============================================================================
// fields
// =============================================================================

/// |D| = |eps grad phi| per element, evaluated at the centroid of the
/// trilinear interpolant. phi is the real node field (e.g. the solution at
/// peak excitation).
inline std::vector<double> displacement_field(const HexMesh& mesh, const MaterialMap& materials,
                                              std::span<const double> phi) {
    if (static_cast<Index>(phi.size()) != mesh.num_nodes())
        throw std::invalid_argument("displacement_field: phi must be a node field");
    const auto h = mesh.spacing();
    std::vector<double> out(static_cast<std::size_t>(mesh.num_elements()), 0.0);
    for (Index e = 0; e < mesh.num_elements(); ++e) {
        const auto nodes = mesh.element_nodes(e);
        double gx = 0.0, gy = 0.0, gz = 0.0;
        for (int a = 0; a < 8; ++a) {
            const auto& s = hex_corner_signs[static_cast<std::size_t>(a)];
            const double p = phi[static_cast<std::size_t>(nodes[static_cast<std::size_t>(a)])];
            gx += s[0] * p;
            gy += s[1] * p;
            gz += s[2] * p;
        }
        gx /= 4.0 * h[0];
        gy /= 4.0 * h[1];
        gz /= 4.0 * h[2];
        const double eps = materials.eps_of(mesh.region(e));
        out[static_cast<std::size_t>(e)] = eps * std::sqrt(gx * gx + gy * gy + gz * gz);
    }
    return out;
}

/// Real part of a complex node field; the instantaneous field at the peak of
/// a sin(omega t) excitation driven with real amplitudes.
inline std::vector<double> peak_field(std::span<const Cplx> phi) {
    std::vector<double> out(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) out[i] = phi[i].real();
    return out;
}

}  // namespace eqstab
