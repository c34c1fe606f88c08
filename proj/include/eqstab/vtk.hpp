#pragma once

// Legacy VTK ASCII writer (STRUCTURED_GRID) for node scalars and element
// scalars, enough to look at phi and |D| in ParaView.

#include "eqstab/mesh.hpp"
#include "eqstab/types.hpp"

#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace eqstab {

struct VtkScalarField {
    std::string name;
    std::vector<double> values;
};

inline void write_vtk_structured(std::ostream& os, const HexMesh& mesh,
                                 std::span<const VtkScalarField> point_fields,
                                 std::span<const VtkScalarField> cell_fields,
                                 const std::string& title = "eqstab field output") {
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
    os << "DATASET STRUCTURED_GRID\n";
    os << "DIMENSIONS " << mesh.nx() + 1 << " " << mesh.ny() + 1 << " " << mesh.nz() + 1 << "\n";
    os << "POINTS " << mesh.num_nodes() << " double\n";
    os << std::setprecision(12) << std::scientific;
    for (Index n = 0; n < mesh.num_nodes(); ++n) {
        auto p = mesh.node_position(n);
        os << p[0] << " " << p[1] << " " << p[2] << "\n";
    }
    if (!point_fields.empty()) {
        os << "POINT_DATA " << mesh.num_nodes() << "\n";
        for (const auto& f : point_fields) {
            if (static_cast<Index>(f.values.size()) != mesh.num_nodes())
                throw std::invalid_argument("point field '" + f.name + "' has wrong size");
            os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : f.values) os << v << "\n";
        }
    }
    if (!cell_fields.empty()) {
        os << "CELL_DATA " << mesh.num_elements() << "\n";
        for (const auto& f : cell_fields) {
            if (static_cast<Index>(f.values.size()) != mesh.num_elements())
                throw std::invalid_argument("cell field '" + f.name + "' has wrong size");
            os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : f.values) os << v << "\n";
        }
    }
}

}  // namespace eqstab
