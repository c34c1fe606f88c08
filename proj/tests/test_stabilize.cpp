#include "eqstab/benchmark.hpp"
#include "eqstab/circuit.hpp"
#include "eqstab/condest.hpp"
#include "eqstab/fem.hpp"
#include "eqstab/stabilize.hpp"
#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <numbers>

using namespace eqstab;

namespace {

const std::vector<std::string> all_nonoriginal = {"i", "ii", "iii", "iv", "v", "vi", "jacobi-l", "jacobi-s"};

TwoBlockSystem small_field_system() {
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
    auto sys = reduce_system(p.mesh, p.materials, p.bc);
    return partition(sys, p.mesh, p.materials);
}

std::vector<Cplx> original_rhs(const TwoBlockSystem& sys, double omega) {
    auto r1 = sys.r1(omega);
    auto r2 = sys.r2(omega);
    r1.insert(r1.end(), r2.begin(), r2.end());
    return r1;
}

}  // namespace

TEST_CASE("variant parsing and recovery metadata") {
    for (const auto& name : all_nonoriginal) REQUIRE(ScalingVariant::from_cli(name).label() == name);
    REQUIRE(ScalingVariant::from_cli("orig").tag == ScalingTag::original);
    REQUIRE_THROWS_AS(ScalingVariant::from_cli("vii"), std::invalid_argument);

    REQUIRE_FALSE(ScalingVariant::from_cli("i").recoverable_at_zero());
    REQUIRE_FALSE(ScalingVariant::from_cli("iii").recoverable_at_zero());
    REQUIRE_FALSE(ScalingVariant::from_cli("jacobi-s").recoverable_at_zero());
    for (const auto& name : {"orig", "ii", "iv", "v", "vi", "jacobi-l"})
        REQUIRE(ScalingVariant::from_cli(name).recoverable_at_zero());
}

TEST_CASE("effective coefficients carry the analytic cancellations") {
    SECTION("symmetric omega scaling at omega = 0") {
        auto c = effective_coefficients(ScalingVariant::from_cli("i"), 0.0);
        REQUIRE(c.c_K11 == Cplx(1, 0));
        REQUIRE(c.c_M11 == Cplx(0, 0));
        REQUIRE(c.c_M12 == Cplx(0, 0));
        REQUIRE(c.c_M21 == Cplx(0, 0));
        REQUIRE(c.c_M22 == Cplx(0, 1));  // j omega * omega^-1 = j exactly
        REQUIRE(c.c_r1 == Cplx(1, 0));
        REQUIRE_FALSE(c.c_r2_finite);
    }
    SECTION("non-symmetric scaling multiplies the lower blocks by omega^-1") {
        for (double omega : {0.0, 1e-12, 3.5, 1e9}) {
            auto c = effective_coefficients(ScalingVariant::from_cli("ii"), omega);
            REQUIRE(c.c_M21 == Cplx(0, 1));
            REQUIRE(c.c_M22 == Cplx(0, 1));
        }
    }
    SECTION("matrix-valued variants have no scalar table") {
        REQUIRE_THROWS_AS(effective_coefficients(ScalingVariant::from_cli("jacobi-l"), 1.0),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(effective_coefficients(ScalingVariant::from_cli("v"), 1.0),
                          std::invalid_argument);
    }
}

TEST_CASE("benchmark circuit under the symmetric omega scaling") {
    const double R = 1.0, C = 1e-12, omega = 4.0;
    auto sys = partition_circuit(rc_benchmark(R, C));
    auto scaled = scale_system(sys, ScalingVariant::from_cli("i"), omega);
    REQUIRE(scaled.A.at(0, 0) == Cplx(1.0 / R, omega * C));
    REQUIRE(scaled.A.at(0, 1) == Cplx(0.0, -std::sqrt(omega) * C));
    REQUIRE(scaled.A.at(1, 0) == Cplx(0.0, -std::sqrt(omega) * C));
    REQUIRE(scaled.A.at(1, 1) == Cplx(0.0, 2.0 * C));
}

TEST_CASE("material scaling gives the exact unit-diagonal circuit matrix") {
    const double R = 2.0, C = 3e-12;
    auto sys = partition_circuit(rc_benchmark(R, C));
    for (double omega : {1e-10, 1.0, 1e10}) {
        auto scaled = scale_system(sys, ScalingVariant::from_cli("iii"), omega);
        REQUIRE(scaled.A.at(0, 0) == Cplx(1.0, 0.0));
        REQUIRE(scaled.A.at(1, 1) == Cplx(1.0, 0.0));
        // off-diagonal matches the closed form (1+j)/(-2) sqrt(omega C / (1/R + j omega C))
        const Cplx expect = Cplx(1.0, 1.0) / Cplx(-2.0, 0.0) *
                            std::sqrt(Cplx(omega * C, 0.0) / Cplx(1.0 / R, omega * C));
        REQUIRE(std::abs(scaled.A.at(0, 1) - expect) < 1e-15 * std::abs(expect) + 1e-300);
        REQUIRE(scaled.A.at(0, 1) == scaled.A.at(1, 0));
    }
}

TEST_CASE("symmetric variants produce exactly symmetric matrices") {
    auto circuit = partition_circuit(rc_benchmark(1.0, 1e-12));
    auto field = small_field_system();
    for (const auto& name : {"i", "iii", "jacobi-s"}) {
        for (double omega : {0.0, 1e-8, 2.0 * std::numbers::pi * 50.0, 1e6}) {
            auto sc = scale_system(circuit, ScalingVariant::from_cli(name), omega);
            REQUIRE(asymmetry_inf(sc.A) == 0.0);
            auto sf = scale_system(field, ScalingVariant::from_cli(name), omega);
            REQUIRE(asymmetry_inf(sf.A) == 0.0);
        }
    }
}

TEST_CASE("no equation vanishes at any frequency for the stabilized variants") {
    auto field = small_field_system();
    for (const auto& name : all_nonoriginal) {
        for (double omega : {0.0, 1e-20, 1e-6, 1.0, 1e6}) {
            auto sc = scale_system(field, ScalingVariant::from_cli(name), omega);
            for (Index r = 0; r < sc.A.nrows(); ++r) {
                INFO("variant " << name << " omega " << omega << " row " << r);
                REQUIRE(sc.A.row_abs_sum(r) > 0.0);
            }
        }
    }
    // while the original formulation loses the insulator rows at omega = 0
    auto orig = scale_system(field, ScalingVariant::from_cli("orig"), 0.0);
    Index vanished = 0;
    for (Index r = 0; r < orig.A.nrows(); ++r)
        if (orig.A.row_abs_sum(r) == 0.0) ++vanished;
    REQUIRE(vanished == field.n2());
    REQUIRE(lu_factor(orig.A).singular());
}

TEST_CASE("Jacobi scalings normalize the diagonal") {
    auto field = small_field_system();
    auto circuit = partition_circuit(rc_benchmark(1.0, 1e-12));
    for (double omega : {0.0, 1e-4, 50.0}) {
        for (const auto* sys : {&field, &circuit}) {
            auto left = scale_system(*sys, ScalingVariant::from_cli("jacobi-l"), omega);
            auto symm = scale_system(*sys, ScalingVariant::from_cli("jacobi-s"), omega);
            for (Index i = 0; i < left.A.nrows(); ++i) {
                REQUIRE(left.A.at(i, i) == Cplx(1.0, 0.0));
                REQUIRE(symm.A.at(i, i) == Cplx(1.0, 0.0));
            }
        }
    }
}

TEST_CASE("recovered solutions match the original solve") {
    auto circuit = partition_circuit(rc_benchmark(1.0, 1e-12));
    auto field = small_field_system();
    const ScalingVariant original;
    for (const auto* sys : {&circuit, &field}) {
        for (double omega : {1e-8, 1e-2, 1.0, 2.0 * std::numbers::pi * 50.0, 1e5}) {
            auto orig = scale_system(*sys, original, omega);
            auto lu_orig = lu_factor(orig.A);
            REQUIRE_FALSE(lu_orig.singular());
            auto x_orig = solve_refined(orig.A, lu_orig, orig.rhs);
            auto phi_orig = recover_solution(orig, x_orig).phi;

            for (const auto& name : all_nonoriginal) {
                auto sc = scale_system(*sys, ScalingVariant::from_cli(name), omega);
                auto lu = lu_factor(sc.A);
                REQUIRE_FALSE(lu.singular());
                auto xi = solve_refined(sc.A, lu, sc.rhs);
                auto rec = recover_solution(sc, xi);
                REQUIRE(rec.block2_defined);
                INFO("variant " << name << " omega " << omega);
                REQUIRE(test::rel_error(rec.phi, phi_orig) < 1e-10);
            }
        }
    }
}

TEST_CASE("unscaling the symmetric-omega circuit solution reproduces the original") {
    const double R = 1.0, C = 1e-12, omega = 1e-3;
    auto sys = partition_circuit(rc_benchmark(R, C));
    auto orig = scale_system(sys, ScalingVariant{}, omega);
    auto x_orig = solve_refined(orig.A, lu_factor(orig.A), orig.rhs);
    auto phi_orig = recover_solution(orig, x_orig).phi;

    auto sc = scale_system(sys, ScalingVariant::from_cli("i"), omega);
    auto xi = solve_refined(sc.A, lu_factor(sc.A), sc.rhs);
    // phi_2 = xi_2 / sqrt(omega)
    REQUIRE(std::abs(xi[1] / std::sqrt(omega) - phi_orig[1]) <= 1e-12 * std::abs(phi_orig[1]));

    // residual oracle: the recovered solution satisfies the original system
    auto rec = recover_solution(sc, xi);
    auto res = orig.A.multiply(sys.gather(rec.phi));
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= orig.rhs[i];
    REQUIRE(norm2(res) / norm2(orig.rhs) <= 1e-10);
}

TEST_CASE("recovery at omega = 0") {
    auto sys = partition_circuit(rc_benchmark(1.0, 1e-12));
    SECTION("non-symmetric scaling keeps the original unknowns") {
        auto sc = scale_system(sys, ScalingVariant::from_cli("ii"), 0.0);
        auto xi = solve_refined(sc.A, lu_factor(sc.A), sc.rhs);
        auto rec = recover_solution(sc, xi);
        REQUIRE(rec.block2_defined);
        for (std::size_t i = 0; i < xi.size(); ++i) REQUIRE(rec.phi[i] == xi[i]);  // b = 1
        // static limit of the benchmark: phi_1 = -R I, charge-free phi_2
        REQUIRE(std::abs(rec.phi[0] - Cplx(-1.0, 0.0)) < 1e-12);
    }
    SECTION("symmetric scaling marks block 2 undefined, never a numeric guess") {
        auto sc = scale_system(sys, ScalingVariant::from_cli("i"), 0.0);
        auto xi = solve_refined(sc.A, lu_factor(sc.A), sc.rhs);
        auto rec = recover_solution(sc, xi);
        REQUIRE_FALSE(rec.block2_defined);
        REQUIRE(std::isnan(rec.phi[1].real()));
        REQUIRE_FALSE(std::isnan(rec.phi[0].real()));  // block 1 is recovered
        REQUIRE(std::abs(rec.phi[0] - Cplx(-1.0, 0.0)) < 1e-12);
    }
}

TEST_CASE("incompatible insulator sources are rejected at omega = 0") {
    // current source driving the purely capacitive node
    CircuitNetlist nl;
    nl.num_nodes = 2;
    nl.resistors.push_back({0, -1, 1.0, "R"});
    nl.capacitors.push_back({0, 1, 1e-9, "C1"});
    nl.capacitors.push_back({1, -1, 1e-9, "C2"});
    nl.current_sources.push_back({1, -1, Cplx(1.0, 0.0), "I"});
    auto sys = partition_circuit(nl);
    REQUIRE(norm2(sys.r2_static) > 0.0);
    for (const auto& name : all_nonoriginal)
        REQUIRE_THROWS_AS(scale_system(sys, ScalingVariant::from_cli(name), 0.0),
                          IncompatibleSourceError);
    // at omega > 0 the same source is fine
    for (const auto& name : all_nonoriginal)
        REQUIRE_NOTHROW(scale_system(sys, ScalingVariant::from_cli(name), 50.0));
    // and the original formulation accepts it at omega = 0 (it is merely singular)
    REQUIRE_NOTHROW(scale_system(sys, ScalingVariant{}, 0.0));
}

TEST_CASE("material variant stays real and regular in the static limit") {
    auto field = small_field_system();
    auto sc = scale_system(field, ScalingVariant::from_cli("iv"), 0.0);
    for (const Cplx& v : sc.A.values()) REQUIRE(v.imag() == 0.0);
    auto lu = lu_factor(sc.A);
    REQUIRE_FALSE(lu.singular());
    REQUIRE_FALSE(std::isinf(dense_cond_exact(DenseMatrix::from_sparse(sc.A))));
}

TEST_CASE("block preconditioners") {
    auto field = small_field_system();
    const double omega = 2.0 * std::numbers::pi * 50.0;

    SECTION("preconditioned system is well conditioned") {
        const double omega_low = 1e-8;  // deep in the breakdown regime
        auto var = ScalingVariant::from_cli("v");
        var.exact_block_lu = true;
        auto sc = scale_system(field, var, omega_low);
        REQUIRE(sc.precond != nullptr);
        // materialize the preconditioned operator densely on this small case
        const Index n = sc.A.nrows();
        DenseMatrix b(n, n);
        std::vector<Cplx> e(static_cast<std::size_t>(n), Cplx(0, 0));
        for (Index c = 0; c < n; ++c) {
            e[static_cast<std::size_t>(c)] = Cplx(1, 0);
            auto col = sc.precond->apply(sc.A.multiply(e));
            e[static_cast<std::size_t>(c)] = Cplx(0, 0);
            for (Index r = 0; r < n; ++r) b(r, c) = col[static_cast<std::size_t>(r)];
        }
        const double kappa_pre = dense_cond_exact(b);
        const double kappa_plain = dense_cond_exact(
            DenseMatrix::from_sparse(scale_system(field, ScalingVariant{}, omega_low).A));
        REQUIRE(kappa_pre < 50.0);
        REQUIRE(kappa_plain > 1e6);  // the unpreconditioned system has broken down
        REQUIRE(kappa_pre < kappa_plain / 1e4);
    }

    SECTION("fixed-frequency variant at omega0 = omega equals the frequency-dependent one") {
        auto v5 = ScalingVariant::from_cli("v");
        v5.exact_block_lu = true;
        auto v6 = ScalingVariant::from_cli("vi", omega);
        v6.exact_block_lu = true;
        auto p5 = build_block_preconditioner(field, v5, omega);
        auto p6 = build_block_preconditioner(field, v6, omega);
        std::mt19937 rng(31);
        auto x = test::random_vector(field.n(), rng);
        auto y5 = p5->apply(x);
        auto y6 = p6->apply(x);
        for (std::size_t i = 0; i < y5.size(); ++i) REQUIRE(y5[i] == y6[i]);
    }

    SECTION("floating conductor without Dirichlet contact is a singular block") {
        // conducting island inside an insulated, fully Neumann box
        auto mesh = build_box_mesh({1, 1, 1}, {4, 4, 4}, [](double x, double y, double z) {
            return (x > 0.25 && x < 0.75 && y > 0.25 && y < 0.75 && z > 0.25 && z < 0.75) ? 1 : 0;
        });
        MaterialMap mat;
        mat.sigma = {0.0, 1.0};
        mat.eps = {1.0, 1.0};
        auto sys = reduce_system(mesh, mat, BoundaryConditions{});
        auto blocks = partition(sys, mesh, mat);
        // the conduction block alone carries the constant nullspace; any
        // factorization at omega~ = 0 must refuse it
        auto v5 = ScalingVariant::from_cli("v");
        v5.exact_block_lu = true;
        REQUIRE_THROWS_AS(build_block_preconditioner(blocks, v5, 0.0), SingularBlockError);
        auto v6 = ScalingVariant::from_cli("vi", 0.0);
        v6.exact_block_lu = true;
        REQUIRE_THROWS_AS(build_block_preconditioner(blocks, v6, 50.0), SingularBlockError);
    }
}
