#pragma once

// Modified nodal analysis for RC circuits in frequency domain: netlist
// storage, the line-oriented text format, assembly, static-limit
// diagnostics, the two-node reference benchmark and its closed-form
// condition numbers.

#include "eqstab/dense.hpp"
#include "eqstab/sparse.hpp"
#include "eqstab/two_block.hpp"
#include "eqstab/types.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace eqstab {

/// Two-terminal branch; node index -1 is the (eliminated) ground row.
struct Branch {
    Index pos = -1;
    Index neg = -1;
    double value = 0.0;  // Ohm for resistors, Farad for capacitors
    std::string name;
};

struct SourceBranch {
    Index pos = -1;
    Index neg = -1;
    Cplx amplitude{};  // A (current) or V (voltage)
    std::string name;
};

struct CircuitNetlist {
    Index num_nodes = 0;  // non-ground nodes
    std::vector<Branch> resistors;
    std::vector<Branch> capacitors;
    std::vector<SourceBranch> current_sources;
    std::vector<SourceBranch> voltage_sources;

    void validate() const {
        auto check_nodes = [this](Index p, Index n, const std::string& name) {
            if (p < -1 || p >= num_nodes || n < -1 || n >= num_nodes)
                throw std::invalid_argument("branch " + name + ": node index out of range");
            if (p == n) throw std::invalid_argument("branch " + name + ": both terminals on one node");
        };
        for (const auto& b : resistors) {
            check_nodes(b.pos, b.neg, b.name);
            if (!(b.value > 0.0)) throw std::invalid_argument("resistor " + b.name + ": value must be > 0");
        }
        for (const auto& b : capacitors) {
            check_nodes(b.pos, b.neg, b.name);
            if (!(b.value > 0.0)) throw std::invalid_argument("capacitor " + b.name + ": value must be > 0");
        }
        for (const auto& b : current_sources) check_nodes(b.pos, b.neg, b.name);
        for (const auto& b : voltage_sources) check_nodes(b.pos, b.neg, b.name);
    }
};

struct MnaSystem {
    ComplexSparseMatrix matrix;  // (N_phi + N_V) square
    std::vector<Cplx> rhs;
    Index num_potentials = 0;
    Index num_branch_currents = 0;
};

/// Assemble the frequency-domain MNA system: conductance and j*omega
/// capacitance stamps over nodal potentials, plus voltage-source coupling
/// rows/columns and their branch currents.
inline MnaSystem assemble_mna(const CircuitNetlist& nl, double omega) {
    if (omega < 0.0) throw std::invalid_argument("assemble_mna: omega must be >= 0");
    nl.validate();
    const Index nphi = nl.num_nodes;
    const Index nv = static_cast<Index>(nl.voltage_sources.size());
    const Index n = nphi + nv;
    const Cplx jw(0.0, omega);

    std::vector<Triplet> t;
    auto stamp = [&t](Index p, Index q, Cplx v) {
        if (p >= 0) t.push_back({p, p, v});
        if (q >= 0) t.push_back({q, q, v});
        if (p >= 0 && q >= 0) {
            t.push_back({p, q, -v});
            t.push_back({q, p, -v});
        }
    };
    for (const auto& b : nl.resistors) stamp(b.pos, b.neg, Cplx(1.0 / b.value, 0.0));
    for (const auto& b : nl.capacitors) stamp(b.pos, b.neg, jw * b.value);

    std::vector<Cplx> rhs(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
    for (const auto& b : nl.current_sources) {
        if (b.pos >= 0) rhs[static_cast<std::size_t>(b.pos)] -= b.amplitude;
        if (b.neg >= 0) rhs[static_cast<std::size_t>(b.neg)] += b.amplitude;
    }
    for (Index s = 0; s < nv; ++s) {
        const auto& b = nl.voltage_sources[static_cast<std::size_t>(s)];
        const Index row = nphi + s;
        if (b.pos >= 0) {
            t.push_back({b.pos, row, Cplx(1.0, 0.0)});
            t.push_back({row, b.pos, Cplx(1.0, 0.0)});
        }
        if (b.neg >= 0) {
            t.push_back({b.neg, row, Cplx(-1.0, 0.0)});
            t.push_back({row, b.neg, Cplx(-1.0, 0.0)});
        }
        rhs[static_cast<std::size_t>(row)] = b.amplitude;
    }

    MnaSystem sys;
    sys.matrix = ComplexSparseMatrix::from_triplets(n, n, std::move(t));
    sys.rhs = std::move(rhs);
    sys.num_potentials = nphi;
    sys.num_branch_currents = nv;
    return sys;
}

struct NetlistWarning {
    Index node = 0;  // external node id (ground is 0)
    std::string message;
};

/// Static-limit compatibility diagnostics. At omega = 0 every node whose
/// incident branches are exclusively capacitors and/or current sources has no
/// controlling equation; these are reported, never rejected.
inline std::vector<NetlistWarning> validate_netlist(const CircuitNetlist& nl, double omega) {
    std::vector<NetlistWarning> warnings;
    if (omega > 0.0) return warnings;
    std::vector<int> has_rv(static_cast<std::size_t>(nl.num_nodes), 0);
    std::vector<int> has_c(static_cast<std::size_t>(nl.num_nodes), 0);
    std::vector<int> has_i(static_cast<std::size_t>(nl.num_nodes), 0);
    auto mark = [](std::vector<int>& f, Index p, Index q) {
        if (p >= 0) f[static_cast<std::size_t>(p)] = 1;
        if (q >= 0) f[static_cast<std::size_t>(q)] = 1;
    };
    for (const auto& b : nl.resistors) mark(has_rv, b.pos, b.neg);
    for (const auto& b : nl.voltage_sources) mark(has_rv, b.pos, b.neg);
    for (const auto& b : nl.capacitors) mark(has_c, b.pos, b.neg);
    for (const auto& b : nl.current_sources) mark(has_i, b.pos, b.neg);
    for (Index v = 0; v < nl.num_nodes; ++v) {
        if (has_rv[static_cast<std::size_t>(v)]) continue;
        NetlistWarning w;
        w.node = v + 1;
        if (has_i[static_cast<std::size_t>(v)] && has_c[static_cast<std::size_t>(v)])
            w.message = "node " + std::to_string(v + 1) +
                        ": currents may not be prescribed on capacitive branches in the static limit";
        else
            w.message = "node " + std::to_string(v + 1) +
                        ": potential is uncontrolled in the static limit (no resistive or "
                        "voltage-source path)";
        warnings.push_back(std::move(w));
    }
    return warnings;
}

/// Netlist text format: one element per line,
///   R <name> <n+> <n-> <value>
///   C <name> <n+> <n-> <value>
///   I <name> <n+> <n-> <value>
///   V <name> <n+> <n-> <value>
/// node 0 is ground, '#' starts a comment.
inline CircuitNetlist parse_netlist(std::istream& in) {
    CircuitNetlist nl;
    std::string line;
    int lineno = 0;
    auto node = [&](const std::string& tok) -> Index {
        std::size_t used = 0;
        long v = std::stol(tok, &used);
        if (used != tok.size() || v < 0)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": bad node '" + tok + "'");
        nl.num_nodes = std::max(nl.num_nodes, static_cast<Index>(v));
        return static_cast<Index>(v) - 1;  // 0 becomes -1 (ground)
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kind, name, np, nn;
        double value = 0.0;
        if (!(ls >> kind)) continue;
        if (!(ls >> name >> np >> nn >> value))
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected '<kind> <name> <n+> <n-> <value>'");
        const Index p = node(np), q = node(nn);
        if (kind == "R" || kind == "r") nl.resistors.push_back({p, q, value, name});
        else if (kind == "C" || kind == "c") nl.capacitors.push_back({p, q, value, name});
        else if (kind == "I" || kind == "i") nl.current_sources.push_back({p, q, Cplx(value, 0.0), name});
        else if (kind == "V" || kind == "v") nl.voltage_sources.push_back({p, q, Cplx(value, 0.0), name});
        else throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown element '" + kind + "'");
    }
    nl.validate();
    return nl;
}

/// The reference benchmark: current source into node 1, resistor node 1 to
/// ground, capacitor node 1 - node 2, capacitor node 2 to ground, I = 1 A.
/// Node 2 has no conductive path, which is the whole point.
inline CircuitNetlist rc_benchmark(double resistance, double capacitance) {
    if (!(resistance > 0.0) || !(capacitance > 0.0))
        throw std::invalid_argument("rc_benchmark: R and C must be > 0");
    CircuitNetlist nl;
    nl.num_nodes = 2;
    nl.resistors.push_back({0, -1, resistance, "R3"});
    nl.capacitors.push_back({0, 1, capacitance, "C1"});
    nl.capacitors.push_back({1, -1, capacitance, "C2"});
    nl.current_sources.push_back({0, -1, Cplx(1.0, 0.0), "I"});
    return nl;
}

/// Two-block partition of a current-driven netlist (no voltage sources):
/// K = conductance matrix, M = capacitance matrix, I2 = nodes without any
/// resistive branch. Material values for the scalings are the operator
/// diagonals, i.e. the summed element values at each node.
inline TwoBlockSystem partition_circuit(const CircuitNetlist& nl) {
    nl.validate();
    if (!nl.voltage_sources.empty())
        throw std::invalid_argument("partition_circuit: voltage sources are not supported in the two-block form");
    const Index n = nl.num_nodes;
    std::vector<Triplet> kt, mt;
    auto stamp = [](std::vector<Triplet>& t, Index p, Index q, double v) {
        if (p >= 0) t.push_back({p, p, Cplx(v, 0.0)});
        if (q >= 0) t.push_back({q, q, Cplx(v, 0.0)});
        if (p >= 0 && q >= 0) {
            t.push_back({p, q, Cplx(-v, 0.0)});
            t.push_back({q, p, Cplx(-v, 0.0)});
        }
    };
    std::vector<int> has_r(static_cast<std::size_t>(n), 0);
    for (const auto& b : nl.resistors) {
        stamp(kt, b.pos, b.neg, 1.0 / b.value);
        if (b.pos >= 0) has_r[static_cast<std::size_t>(b.pos)] = 1;
        if (b.neg >= 0) has_r[static_cast<std::size_t>(b.neg)] = 1;
    }
    for (const auto& b : nl.capacitors) stamp(mt, b.pos, b.neg, b.value);
    auto k = ComplexSparseMatrix::from_triplets(n, n, std::move(kt));
    auto m = ComplexSparseMatrix::from_triplets(n, n, std::move(mt));

    std::vector<Cplx> r(static_cast<std::size_t>(n), Cplx(0.0, 0.0));
    for (const auto& b : nl.current_sources) {
        if (b.pos >= 0) r[static_cast<std::size_t>(b.pos)] -= b.amplitude;
        if (b.neg >= 0) r[static_cast<std::size_t>(b.neg)] += b.amplitude;
    }

    TwoBlockSystem sys;
    for (Index v = 0; v < n; ++v)
        (has_r[static_cast<std::size_t>(v)] ? sys.I1 : sys.I2).push_back(v);
    sys.K11 = extract_block(k, sys.I1, sys.I1);
    sys.M11 = extract_block(m, sys.I1, sys.I1);
    sys.M12 = extract_block(m, sys.I1, sys.I2);
    sys.M22 = extract_block(m, sys.I2, sys.I2);
    for (Index i : sys.I1) {
        sys.r1_static.push_back(r[static_cast<std::size_t>(i)]);
        sys.sigma1.push_back(k.at(i, i).real());
        sys.eps1.push_back(m.at(i, i).real());
    }
    for (Index i : sys.I2) {
        sys.r2_static.push_back(r[static_cast<std::size_t>(i)]);
        sys.eps2.push_back(m.at(i, i).real());
    }
    sys.r1_dynamic.assign(sys.I1.size(), Cplx(0.0, 0.0));
    sys.r2_dynamic.assign(sys.I2.size(), Cplx(0.0, 0.0));
    return sys;
}

// ---------------------------------------------------------------------------
// closed-form condition numbers for the benchmark
// ---------------------------------------------------------------------------

enum class RcFormulation { Original, SymOmega, SymMaterial };

struct RcCondition {
    double kappa = 0.0;      // exact, via symbolic 2x2 inversion
    double asymptote = 0.0;  // leading-order low-frequency limit
    bool asymptotic_regime = false;  // 1/R > 2*omega*C
};

/// Exact 2x2 condition number of the benchmark system under the requested
/// formulation, plus its low-frequency asymptote for cross-checking.
/// At omega = 0 the original formulation returns the +infinity sentinel.
inline RcCondition rc_condition_closed_form(double resistance, double capacitance, double omega,
                                            RcFormulation formulation, Norm norm = Norm::One) {
    const double rinv = 1.0 / resistance;
    const double c = capacitance;
    const Cplx j = imag_unit();
    Cplx a11, a12, a22;
    switch (formulation) {
        case RcFormulation::Original:
            a11 = Cplx(rinv, omega * c);
            a12 = -j * omega * c;
            a22 = j * (2.0 * omega * c);
            break;
        case RcFormulation::SymOmega:
            a11 = Cplx(rinv, omega * c);
            a12 = -j * std::sqrt(omega) * c;
            a22 = j * (2.0 * c);
            break;
        case RcFormulation::SymMaterial:
            a11 = Cplx(1.0, 0.0);
            a12 = (Cplx(1.0, 1.0) / Cplx(-2.0, 0.0)) *
                  std::sqrt(Cplx(omega * c, 0.0) / Cplx(rinv, omega * c));
            a22 = Cplx(1.0, 0.0);
            break;
    }

    RcCondition out;
    out.asymptotic_regime = rinv > 2.0 * omega * c;
    switch (formulation) {
        case RcFormulation::Original:
            out.asymptote = (omega > 0.0) ? 1.0 + 1.0 / (2.0 * omega * resistance * c)
                                          : std::numeric_limits<double>::infinity();
            break;
        case RcFormulation::SymOmega:
            out.asymptote = 1.0 / (2.0 * resistance * c);
            break;
        case RcFormulation::SymMaterial:
            out.asymptote = 1.0;
            break;
    }

    const Cplx det = a11 * a22 - a12 * a12;
    if (det == Cplx(0.0, 0.0)) {
        out.kappa = std::numeric_limits<double>::infinity();
        return out;
    }
    const Cplx i11 = a22 / det, i12 = -a12 / det, i22 = a11 / det;
    // all three formulations are complex symmetric, so the 1-norm and the
    // inf-norm coincide; the flag is accepted for interface uniformity
    (void)norm;
    auto colnorm = [](Cplx x, Cplx y) { return std::abs(x) + std::abs(y); };
    const double na = std::max(colnorm(a11, a12), colnorm(a12, a22));
    const double ni = std::max(colnorm(i11, i12), colnorm(i12, i22));
    out.kappa = na * ni;
    return out;
}

}  // namespace eqstab
