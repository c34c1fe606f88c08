#pragma once

// The layered-capacitor benchmark: a cube with a dielectric slab across the
// middle and a square conductor bar along x connecting the two Dirichlet
// plates. Conductivities and permittivities are chosen in a 2:1 ratio so the
// resistive and capacitive voltage dividers coincide and the displacement
// field is spatially constant: |D| = V / (d_i/eps_i + 2 d_o/eps_o).

#include "eqstab/fem.hpp"
#include "eqstab/mesh.hpp"
#include "eqstab/types.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <sstream>
#include <string>

namespace eqstab {

struct BenchmarkConfig {
    std::array<double, 3> lengths = {0.22, 0.22, 0.22};  // m
    std::array<Index, 3> divisions = {11, 11, 11};
    double slab_lo = 0.10, slab_hi = 0.12;  // inner dielectric layer, x-range (m)
    double rod_lo = 0.10, rod_hi = 0.12;    // conductor bar, y- and z-range (m)
    double eps_inner = vacuum_permittivity;         // F/m
    double eps_outer = 2.0 * vacuum_permittivity;
    double sigma_inner = 2.98e7;                    // S/m
    double sigma_outer = 5.96e7;
    double frequency_hz = 50.0;
    double v_peak = 1.0;  // V

    /// Coarse preset: 2 cm elements, 1440 free dofs.
    static BenchmarkConfig toy_capacitor() { return BenchmarkConfig{}; }

    /// Production-scale preset: 1 cm elements, 11109 free dofs.
    static BenchmarkConfig toy_capacitor_fine() {
        BenchmarkConfig c;
        c.divisions = {22, 22, 22};
        return c;
    }

    static BenchmarkConfig preset(const std::string& name) {
        if (name == "toy-capacitor") return toy_capacitor();
        if (name == "toy-capacitor-fine") return toy_capacitor_fine();
        throw std::invalid_argument("unknown preset '" + name + "'");
    }

    [[nodiscard]] double omega() const { return 2.0 * std::numbers::pi * frequency_hz; }

    /// Analytic displacement magnitude of the series divider at peak voltage.
    [[nodiscard]] double analytic_displacement() const {
        const double d_i = slab_hi - slab_lo;
        const double d_o_total = lengths[0] - d_i;
        return v_peak / (d_i / eps_inner + d_o_total / eps_outer);
    }
};

/// Flat key=value text, '#' comments. Unknown keys are rejected.
inline BenchmarkConfig parse_config(std::istream& in) {
    BenchmarkConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::istringstream probe(line);
            std::string tok;
            if (probe >> tok)
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        double x = 0.0;
        try {
            x = std::stod(val);
        } catch (const std::exception&) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad value '" + val + "'");
        }
        if (key == "length_x") c.lengths[0] = x;
        else if (key == "length_y") c.lengths[1] = x;
        else if (key == "length_z") c.lengths[2] = x;
        else if (key == "nx") c.divisions[0] = static_cast<Index>(x);
        else if (key == "ny") c.divisions[1] = static_cast<Index>(x);
        else if (key == "nz") c.divisions[2] = static_cast<Index>(x);
        else if (key == "slab_lo") c.slab_lo = x;
        else if (key == "slab_hi") c.slab_hi = x;
        else if (key == "rod_lo") c.rod_lo = x;
        else if (key == "rod_hi") c.rod_hi = x;
        else if (key == "eps_inner") c.eps_inner = x;
        else if (key == "eps_outer") c.eps_outer = x;
        else if (key == "sigma_inner") c.sigma_inner = x;
        else if (key == "sigma_outer") c.sigma_outer = x;
        else if (key == "frequency_hz") c.frequency_hz = x;
        else if (key == "v_peak") c.v_peak = x;
        else throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return c;
}

struct FieldProblem {
    HexMesh mesh;
    MaterialMap materials;
    BoundaryConditions bc;
};

namespace benchmark_region {
inline constexpr int insulator_outer = 0;
inline constexpr int insulator_inner = 1;
inline constexpr int conductor_outer = 2;
inline constexpr int conductor_inner = 3;
}  // namespace benchmark_region

/// Build mesh, materials and boundary conditions for a benchmark config.
/// Material interfaces must coincide with element faces; misaligned
/// configurations are rejected.
inline FieldProblem build_problem(const BenchmarkConfig& c) {
    auto check_aligned = [&](double bound, int axis) {
        const double steps = bound / c.lengths[static_cast<std::size_t>(axis)] * c.divisions[static_cast<std::size_t>(axis)];
        if (std::abs(steps - std::round(steps)) > 1e-9)
            throw std::invalid_argument("material interface at " + std::to_string(bound) +
                                        " m does not align with the grid");
    };
    check_aligned(c.slab_lo, 0);
    check_aligned(c.slab_hi, 0);
    check_aligned(c.rod_lo, 1);
    check_aligned(c.rod_hi, 1);
    check_aligned(c.rod_lo, 2);
    check_aligned(c.rod_hi, 2);

    FieldProblem p;
    p.mesh = build_box_mesh(c.lengths, c.divisions, [&c](double x, double y, double z) {
        const bool in_slab = x > c.slab_lo && x < c.slab_hi;
        const bool in_rod = y > c.rod_lo && y < c.rod_hi && z > c.rod_lo && z < c.rod_hi;
        if (in_rod) return in_slab ? benchmark_region::conductor_inner : benchmark_region::conductor_outer;
        return in_slab ? benchmark_region::insulator_inner : benchmark_region::insulator_outer;
    });
    p.materials.sigma = {0.0, 0.0, c.sigma_outer, c.sigma_inner};
    p.materials.eps = {c.eps_outer, c.eps_inner, c.eps_outer, c.eps_inner};

    // Dirichlet plates: x = 0 grounded, x = length_x driven
    const Index nx = c.divisions[0], ny = c.divisions[1], nz = c.divisions[2];
    for (Index k = 0; k <= nz; ++k)
        for (Index j = 0; j <= ny; ++j) {
            p.bc.dirichlet_nodes.push_back(p.mesh.node_index(0, j, k));
            p.bc.dirichlet_values.push_back(Cplx(0.0, 0.0));
            p.bc.dirichlet_nodes.push_back(p.mesh.node_index(nx, j, k));
            p.bc.dirichlet_values.push_back(Cplx(c.v_peak, 0.0));
        }
    return p;
}

}  // namespace eqstab
