// Acceptance suite: end-to-end checks of the toolkit's headline behaviors,
// one pass/fail line per criterion. Exit status is the number of failures.

#include "eqstab/benchmark.hpp"
#include "eqstab/bicgstab.hpp"
#include "eqstab/circuit.hpp"
#include "eqstab/condest.hpp"
#include "eqstab/dense.hpp"
#include "eqstab/fem.hpp"
#include "eqstab/sparse_lu.hpp"
#include "eqstab/stabilize.hpp"
#include "eqstab/sweep.hpp"
#include "eqstab/timestep.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace eqstab;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct ToySetup {
    FieldProblem problem;
    ReducedSystem reduced;
    TwoBlockSystem blocks;
};

ToySetup toy_setup() {
    ToySetup s;
    s.problem = build_problem(BenchmarkConfig::toy_capacitor());
    s.reduced = reduce_system(s.problem.mesh, s.problem.materials, s.problem.bc);
    s.blocks = partition(s.reduced, s.problem.mesh, s.problem.materials);
    return s;
}

const std::vector<std::string> stabilized_names = {"i", "ii", "iii", "iv", "v", "vi", "jacobi-l", "jacobi-s"};

// the reference benchmark values; the capacitance is 1 pF, which is the value
// consistent with the published corner frequency and condition quotients
constexpr double bench_r = 1.0;
constexpr double bench_c = 1e-12;

// --------------------------------------------------------------------------
// criterion 1: closed-form conditioning asymptotics of the RC benchmark
// --------------------------------------------------------------------------
void criterion_rc_asymptotics() {
    const double f = 1e-16;
    const double omega = 2.0 * std::numbers::pi * f;

    auto orig = rc_condition_closed_form(bench_r, bench_c, omega, RcFormulation::Original);
    const double want_orig = 1.0 + 1.0 / (2.0 * omega * bench_r * bench_c);
    expect(std::abs(orig.kappa / want_orig - 1.0) <= 0.01,
           "original kappa " + fmt(orig.kappa) + " vs asymptote " + fmt(want_orig));

    auto sym = rc_condition_closed_form(bench_r, bench_c, omega, RcFormulation::SymOmega);
    const double want_sym = 1.0 / (2.0 * bench_r * bench_c);
    expect(std::abs(sym.kappa / want_sym - 1.0) <= 0.01,
           "omega-scaled kappa " + fmt(sym.kappa) + " vs asymptote " + fmt(want_sym));

    auto mat = rc_condition_closed_form(bench_r, bench_c, omega, RcFormulation::SymMaterial);
    expect(mat.kappa >= 1.0 && mat.kappa <= 1.01,
           "material-scaled kappa " + fmt(mat.kappa) + " outside [1, 1.01]");
}

// --------------------------------------------------------------------------
// criterion 2: static-limit breakdown is detected, not silently mis-solved
// --------------------------------------------------------------------------
void criterion_breakdown_detection() {
    auto circuit = assemble_mna(rc_benchmark(bench_r, bench_c), 0.0);
    auto lu_c = lu_factor(circuit.matrix);
    expect(lu_c.singular(), "static RC system not reported singular");
    expect(std::isinf(condest_inf(circuit.matrix, lu_c)), "static RC condest not the sentinel");

    auto toy = toy_setup();
    auto orig = scale_system(toy.blocks, ScalingVariant{}, 0.0);
    auto lu_f = lu_factor(orig.A);
    expect(lu_f.singular(), "static field system not reported singular");
    expect(std::isinf(condest_inf(orig.A, lu_f)), "static field condest not the sentinel");
}

// --------------------------------------------------------------------------
// criterion 3: constant displacement field of the layered-capacitor benchmark
// --------------------------------------------------------------------------
void criterion_constant_displacement() {
    auto toy = toy_setup();
    const double omega = 2.0 * std::numbers::pi * 50.0;
    auto sc = scale_system(toy.blocks, ScalingVariant::from_cli("iv"), omega);
    auto lu = lu_factor(sc.A);
    expect(!lu.singular(), "scaled system unexpectedly singular");
    auto xi = solve_refined(sc.A, lu, sc.rhs);
    auto rec = recover_solution(sc, xi);
    auto phi_nodes = toy.reduced.expand(rec.phi);
    auto d = displacement_field(toy.problem.mesh, toy.problem.materials, peak_field(phi_nodes));

    double dmin = d[0], dmax = d[0];
    for (double v : d) {
        dmin = std::min(dmin, v);
        dmax = std::max(dmax, v);
    }
    const double analytic = BenchmarkConfig::toy_capacitor().analytic_displacement();
    const double frozen = 7.3784898440e-11;
    expect(std::abs(analytic / frozen - 1.0) < 1e-9,
           "analytic series value drifted from the frozen constant");
    expect((dmax - dmin) / analytic <= 1e-6,
           "relative spread " + fmt((dmax - dmin) / analytic) + " exceeds 1e-6");
    expect(std::abs(dmax / analytic - 1.0) <= 1e-3 && std::abs(dmin / analytic - 1.0) <= 1e-3,
           "|D| " + fmt(dmax) + " deviates from " + fmt(analytic) + " by more than 0.1%");
}

// --------------------------------------------------------------------------
// criterion 4: every scaling has the same solutions as the original system
// --------------------------------------------------------------------------
void criterion_solution_equivalence() {
    auto circuit = partition_circuit(rc_benchmark(bench_r, bench_c));
    auto toy = toy_setup();
    std::vector<double> omegas;
    for (int i = 0; i < 20; ++i)
        omegas.push_back(std::pow(10.0, -12.0 + 18.0 * i / 19.0));  // [1e-12, 1e6] rad/s

    for (const auto* sys : {&circuit, &toy.blocks}) {
        for (double omega : omegas) {
            auto orig = scale_system(*sys, ScalingVariant{}, omega);
            auto lu_orig = lu_factor(orig.A);
            expect(!lu_orig.singular(), "original system singular at omega " + fmt(omega));
            auto phi_orig = recover_solution(orig, solve_refined(orig.A, lu_orig, orig.rhs)).phi;
            double scale = 0.0;
            for (const Cplx& v : phi_orig) scale = std::max(scale, std::abs(v));

            for (const auto& name : stabilized_names) {
                auto var = ScalingVariant::from_cli(name);
                auto sc = scale_system(*sys, var, omega);
                auto lu = lu_factor(sc.A);
                expect(!lu.singular(), "variant " + name + " singular at omega " + fmt(omega));
                auto rec = recover_solution(sc, solve_refined(sc.A, lu, sc.rhs));
                expect(rec.block2_defined, "variant " + name + " lost block 2 at omega " + fmt(omega));
                double diff = 0.0;
                for (std::size_t i = 0; i < rec.phi.size(); ++i)
                    diff = std::max(diff, std::abs(rec.phi[i] - phi_orig[i]));
                expect(diff / scale <= 1e-10, "variant " + name + " at omega " + fmt(omega) +
                                               ": relative deviation " + fmt(diff / scale));
            }
        }
    }
}

// --------------------------------------------------------------------------
// criterion 5: conditioning curves across step sizes
// --------------------------------------------------------------------------
void criterion_conditioning_curves() {
    auto toy = toy_setup();
    std::vector<double> grid;
    for (int i = 0; i < 41; ++i) grid.push_back(std::pow(10.0, -10.0 + 0.5 * i));  // [1e-10, 1e10]

    auto v5 = ScalingVariant::from_cli("v");
    v5.exact_block_lu = true;
    auto v6 = ScalingVariant::from_cli("vi");  // omega0 = 0
    v6.exact_block_lu = true;
    std::vector<ScalingVariant> vars = {ScalingVariant{}, ScalingVariant::from_cli("iii"),
                                        ScalingVariant::from_cli("iv"), v5, v6};
    auto rows = condition_vs_dt(toy.blocks, vars, grid);

    // (a) original grows with unit log-log slope in the large-step regime
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& row : rows) {
        if (row.dt < 1.0 || !std::isfinite(row.kappa[0])) continue;
        const double x = std::log10(row.dt), y = std::log10(row.kappa[0]);
        sx += x; sy += y; sxx += x * x; sxy += x * y; ++n;
    }
    expect(n >= 4, "too few finite original points for the slope fit");
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    expect(std::abs(slope - 1.0) <= 0.2, "original slope " + fmt(slope) + " outside 1 +- 0.2");

    // (b) material scalings stay flat across twenty decades
    for (std::size_t v : {std::size_t{1}, std::size_t{2}}) {
        double kmin = std::numeric_limits<double>::infinity(), kmax = 0.0;
        for (const auto& row : rows) {
            expect(std::isfinite(row.kappa[v]), "variant " + vars[v].label() + " hit a sentinel");
            kmin = std::min(kmin, row.kappa[v]);
            kmax = std::max(kmax, row.kappa[v]);
        }
        expect(kmax / kmin < 100.0, "variant " + vars[v].label() + " max/min kappa " + fmt(kmax / kmin));
    }

    // (c) exact block preconditioning keeps kappa below 50 everywhere
    for (std::size_t v : {std::size_t{3}, std::size_t{4}}) {
        for (const auto& row : rows)
            expect(row.kappa[v] < 50.0, "variant " + vars[v].label() + " kappa " + fmt(row.kappa[v]) +
                                            " at dt " + fmt(row.dt));
    }
}

// --------------------------------------------------------------------------
// criterion 6: unpreconditioned BiCGStab iteration ordering at dt = 1 ms
// --------------------------------------------------------------------------
void criterion_iteration_ordering() {
    auto toy = toy_setup();
    const double dt = 1e-3, tol = 1e-15;
    const int maxit = 20000;

    auto one_step_iterations = [&](const ScalingVariant& var) {
        auto es = euler_system(toy.blocks, var, dt);
        // first implicit-Euler step of the 50 Hz run from the zero state
        const double omega = 2.0 * std::numbers::pi * 50.0;
        const double w_next = std::sin(omega * dt);
        const double dw = w_next / dt;
        std::vector<Cplx> rhs(static_cast<std::size_t>(toy.blocks.n()), Cplx(0, 0));
        for (Index i = 0; i < toy.blocks.n1(); ++i)
            rhs[static_cast<std::size_t>(i)] =
                es.a1_row[static_cast<std::size_t>(i)] *
                (toy.blocks.r1_static[static_cast<std::size_t>(i)] * w_next +
                 toy.blocks.r1_dynamic[static_cast<std::size_t>(i)] * dw);
        for (Index j = 0; j < toy.blocks.n2(); ++j)
            rhs[static_cast<std::size_t>(toy.blocks.n1() + j)] =
                es.a2_row[static_cast<std::size_t>(j)] *
                (toy.blocks.r2_static[static_cast<std::size_t>(j)] * w_next +
                 toy.blocks.r2_dynamic[static_cast<std::size_t>(j)] * dw);
        try {
            return bicgstab(es.A_step, rhs, tol, maxit).iterations;
        } catch (const NoConvergenceError& e) {
            return e.iterations();
        }
    };

    const int it_orig = one_step_iterations(ScalingVariant{});
    const int it_stab = one_step_iterations(ScalingVariant::from_cli("iv"));
    expect(it_stab < it_orig, "stabilized step took " + std::to_string(it_stab) +
                                  " iterations vs original " + std::to_string(it_orig));
    expect(it_stab < maxit, "stabilized step did not converge within the cap");
    std::ostringstream note;
    note << " [iterations: original " << it_orig << ", stabilized " << it_stab << "]";
    std::cout << note.str();
}

// --------------------------------------------------------------------------
// criterion 7: structural invariants
// --------------------------------------------------------------------------
void criterion_structural_invariants() {
    auto circuit = partition_circuit(rc_benchmark(bench_r, bench_c));
    auto toy = toy_setup();
    const double omega50 = 2.0 * std::numbers::pi * 50.0;

    // exact symmetry of the symmetric scalings
    for (const auto& name : {"i", "iii", "jacobi-s"}) {
        for (double omega : {0.0, omega50}) {
            expect(asymmetry_inf(scale_system(circuit, ScalingVariant::from_cli(name), omega).A) == 0.0,
                   std::string("circuit asymmetry for variant ") + name);
            expect(asymmetry_inf(scale_system(toy.blocks, ScalingVariant::from_cli(name), omega).A) == 0.0,
                   std::string("field asymmetry for variant ") + name);
        }
    }

    // no equation vanishes for the stabilized variants at the static point
    for (const auto& name : stabilized_names) {
        auto sc = scale_system(toy.blocks, ScalingVariant::from_cli(name), 0.0);
        for (Index r = 0; r < sc.A.nrows(); ++r)
            expect(sc.A.row_abs_sum(r) > 0.0,
                   "variant " + name + " lost row " + std::to_string(r) + " at omega = 0");
    }

    // the partition produces exact zero conduction blocks
    auto full = reduce_system(toy.problem.mesh, toy.problem.materials, toy.problem.bc);
    for (Index d : toy.blocks.I2)
        expect(full.K.row_abs_sum(d) == 0.0, "conduction row of an insulator dof is not exactly zero");
    expect(toy.blocks.n1() + toy.blocks.n2() == full.num_dofs, "partition does not cover all dofs");

    // assembly invariants on a small mesh, against the dense oracle
    BenchmarkConfig small;
    small.lengths = {1, 1, 1};
    small.divisions = {3, 3, 3};
    small.slab_lo = 1.0 / 3.0;
    small.slab_hi = 2.0 / 3.0;
    small.rod_lo = 1.0 / 3.0;
    small.rod_hi = 2.0 / 3.0;
    small.sigma_inner = 1.0;
    small.sigma_outer = 2.0;
    small.eps_inner = 1.0;
    small.eps_outer = 2.0;
    auto p = build_problem(small);
    auto [k_full, m_full] = assemble_KM(p.mesh, p.materials);
    expect(asymmetry_inf(k_full) == 0.0 && asymmetry_inf(m_full) == 0.0, "assembled operators asymmetric");
    const double kscale = k_full.norm_inf(), mscale = m_full.norm_inf();
    for (Index r = 0; r < k_full.nrows(); ++r) {
        Cplx sk(0, 0), sm(0, 0);
        for (Index q = k_full.row_offsets()[static_cast<std::size_t>(r)];
             q < k_full.row_offsets()[static_cast<std::size_t>(r) + 1]; ++q)
            sk += k_full.values()[static_cast<std::size_t>(q)];
        for (Index q = m_full.row_offsets()[static_cast<std::size_t>(r)];
             q < m_full.row_offsets()[static_cast<std::size_t>(r) + 1]; ++q)
            sm += m_full.values()[static_cast<std::size_t>(q)];
        expect(std::abs(sk) <= 1e-13 * kscale && std::abs(sm) <= 1e-13 * mscale,
               "row sums of the raw operators do not vanish");
    }
    auto sys_small = reduce_system(p.mesh, p.materials, p.bc);
    expect(sys_small.num_dofs <= 500, "oracle mesh unexpectedly large");
    expect(dense_is_spd(DenseMatrix::from_sparse(sys_small.M)),
           "reduced displacement operator is not positive definite");
    auto blocks_small = partition(sys_small, p.mesh, p.materials);
    expect(dense_is_spd(DenseMatrix::from_sparse(blocks_small.M22)), "M22 is not positive definite");
    expect(dense_is_spd(DenseMatrix::from_sparse(blocks_small.K11)), "K11 is not positive definite");
}

// --------------------------------------------------------------------------
// criterion 8: floating-potential gluing
// --------------------------------------------------------------------------
void criterion_floating_potential() {
    const Index div = 8;
    auto mesh = build_box_mesh({1, 1, 1}, {div, div, div});
    MaterialMap mat;
    mat.sigma = {0.0};
    mat.eps = {vacuum_permittivity};

    BoundaryConditions bc;
    for (Index k = 0; k <= div; ++k)
        for (Index j = 0; j <= div; ++j) {
            bc.dirichlet_nodes.push_back(mesh.node_index(0, j, k));
            bc.dirichlet_values.push_back(Cplx(0, 0));
            bc.dirichlet_nodes.push_back(mesh.node_index(div, j, k));
            bc.dirichlet_values.push_back(Cplx(1, 0));
        }
    std::vector<Index> group;
    for (Index k = 0; k <= div; ++k)
        for (Index j = 0; j <= div; ++j) group.push_back(mesh.node_index(div / 2, j, k));
    bc.floating_groups.push_back(group);

    auto unglued = reduce_system(mesh, mat, BoundaryConditions{bc.dirichlet_nodes, bc.dirichlet_values, {}});
    auto sys = reduce_system(mesh, mat, bc);
    expect(unglued.num_dofs - sys.num_dofs == static_cast<Index>(group.size()) - 1,
           "dof reduction is not sum(|group| - 1)");

    auto lu = lu_factor(sys.M);
    auto x = solve_refined(sys.M, lu, sys.r_dynamic);  // electrostatic solve
    auto phi = sys.expand(x);
    const Cplx master = phi[static_cast<std::size_t>(group.front())];
    for (Index nglued : group)
        expect(std::abs(phi[static_cast<std::size_t>(nglued)] - master) <= 1e-12,
               "electrode potential not constant on the group");
    expect(std::abs(master - Cplx(0.5, 0.0)) < 1e-10,
           "electrode potential " + fmt(master.real()) + " is not the divider value 0.5");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        std::string name;
        std::function<void()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "closed-form conditioning asymptotics of the RC benchmark", criterion_rc_asymptotics},
        {2, "static-limit breakdown detection", criterion_breakdown_detection},
        {3, "constant displacement field on the layered-capacitor benchmark", criterion_constant_displacement},
        {4, "solution equivalence of all scalings across 20 frequencies", criterion_solution_equivalence},
        {5, "conditioning curves across step sizes", criterion_conditioning_curves},
        {6, "iteration-count ordering of unpreconditioned BiCGStab", criterion_iteration_ordering},
        {7, "structural invariants (symmetry, vanishing rows, partition, SPD)", criterion_structural_invariants},
        {8, "floating-potential gluing", criterion_floating_potential},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        std::cout << "criterion " << c.id << ": " << c.name << " ... " << std::flush;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run();
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::cout << "PASS (" << fmt(secs) << " s)\n";
        } catch (const std::exception& e) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::cout << "FAIL (" << fmt(secs) << " s): " << e.what() << "\n";
            ++failures;
        }
    }
    if (failures == 0) std::cout << "all acceptance criteria passed\n";
    else std::cout << failures << " acceptance criteria failed\n";
    return failures;
}
