#pragma once

// Structured axis-aligned hexahedral grids with per-element region tags, and
// the per-region material table.

#include "eqstab/types.hpp"

#include <array>
#include <functional>
#include <vector>

namespace eqstab {

class HexMesh {
public:
    HexMesh() = default;
    HexMesh(std::array<double, 3> lengths, std::array<Index, 3> divisions)
        : lengths_(lengths), div_(divisions) {
        for (int d = 0; d < 3; ++d) {
            if (!(lengths_[static_cast<std::size_t>(d)] > 0.0) || div_[static_cast<std::size_t>(d)] < 1)
                throw std::invalid_argument("mesh needs positive lengths and divisions >= 1");
        }
        element_region_.assign(static_cast<std::size_t>(num_elements()), 0);
    }

    [[nodiscard]] Index nx() const { return div_[0]; }
    [[nodiscard]] Index ny() const { return div_[1]; }
    [[nodiscard]] Index nz() const { return div_[2]; }
    [[nodiscard]] std::array<double, 3> lengths() const { return lengths_; }

    [[nodiscard]] Index num_nodes() const { return (div_[0] + 1) * (div_[1] + 1) * (div_[2] + 1); }
    [[nodiscard]] Index num_elements() const { return div_[0] * div_[1] * div_[2]; }

    [[nodiscard]] std::array<double, 3> spacing() const {
        return {lengths_[0] / div_[0], lengths_[1] / div_[1], lengths_[2] / div_[2]};
    }

    [[nodiscard]] Index node_index(Index i, Index j, Index k) const {
        return i + (div_[0] + 1) * (j + (div_[1] + 1) * k);
    }
    [[nodiscard]] std::array<Index, 3> node_ijk(Index n) const {
        const Index sx = div_[0] + 1, sy = div_[1] + 1;
        return {n % sx, (n / sx) % sy, n / (sx * sy)};
    }
    [[nodiscard]] std::array<double, 3> node_position(Index n) const {
        auto [i, j, k] = node_ijk(n);
        return {lengths_[0] * i / div_[0], lengths_[1] * j / div_[1], lengths_[2] * k / div_[2]};
    }

    [[nodiscard]] Index element_index(Index i, Index j, Index k) const {
        return i + div_[0] * (j + div_[1] * k);
    }
    [[nodiscard]] std::array<Index, 3> element_ijk(Index e) const {
        return {e % div_[0], (e / div_[0]) % div_[1], e / (div_[0] * div_[1])};
    }
    [[nodiscard]] std::array<double, 3> element_centroid(Index e) const {
        auto [i, j, k] = element_ijk(e);
        auto h = spacing();
        return {(i + 0.5) * h[0], (j + 0.5) * h[1], (k + 0.5) * h[2]};
    }

    /// Corner nodes in VTK hexahedron order.
    [[nodiscard]] std::array<Index, 8> element_nodes(Index e) const {
        auto [i, j, k] = element_ijk(e);
        return {node_index(i, j, k),         node_index(i + 1, j, k),
                node_index(i + 1, j + 1, k), node_index(i, j + 1, k),
                node_index(i, j, k + 1),     node_index(i + 1, j, k + 1),
                node_index(i + 1, j + 1, k + 1), node_index(i, j + 1, k + 1)};
    }

    /// Elements sharing a node (1 to 8 of them).
    [[nodiscard]] std::vector<Index> node_elements(Index n) const {
        auto [i, j, k] = node_ijk(n);
        std::vector<Index> out;
        for (Index ek = std::max<Index>(k - 1, 0); ek <= std::min(k, div_[2] - 1); ++ek)
            for (Index ej = std::max<Index>(j - 1, 0); ej <= std::min(j, div_[1] - 1); ++ej)
                for (Index ei = std::max<Index>(i - 1, 0); ei <= std::min(i, div_[0] - 1); ++ei)
                    out.push_back(element_index(ei, ej, ek));
        return out;
    }

    [[nodiscard]] int region(Index e) const { return element_region_[static_cast<std::size_t>(e)]; }
    void set_region(Index e, int tag) { element_region_[static_cast<std::size_t>(e)] = tag; }

private:
    std::array<double, 3> lengths_{};
    std::array<Index, 3> div_{};
    std::vector<int> element_region_;
};

/// Axis-aligned box grid; region tags assigned by element-centroid lookup.
inline HexMesh build_box_mesh(std::array<double, 3> lengths, std::array<Index, 3> divisions,
                              const std::function<int(double, double, double)>& region_rule = {}) {
    HexMesh mesh(lengths, divisions);
    if (region_rule) {
        for (Index e = 0; e < mesh.num_elements(); ++e) {
            auto c = mesh.element_centroid(e);
            mesh.set_region(e, region_rule(c[0], c[1], c[2]));
        }
    }
    return mesh;
}

/// Per-region conductivity (S/m, >= 0) and permittivity (F/m, > 0).
/// Insulators carry sigma exactly 0 so that zero conduction blocks arise
/// structurally, never by cancellation.
struct MaterialMap {
    std::vector<double> sigma;
    std::vector<double> eps;

    [[nodiscard]] double sigma_of(int region) const { return sigma.at(static_cast<std::size_t>(region)); }
    [[nodiscard]] double eps_of(int region) const { return eps.at(static_cast<std::size_t>(region)); }

    void validate() const {
        if (sigma.size() != eps.size()) throw std::invalid_argument("material table size mismatch");
        for (std::size_t i = 0; i < sigma.size(); ++i) {
            if (!(eps[i] > 0.0)) throw std::invalid_argument("permittivity must be > 0 in every region");
            if (sigma[i] < 0.0) throw std::invalid_argument("conductivity must be >= 0");
        }
    }
};

}  // namespace eqstab
