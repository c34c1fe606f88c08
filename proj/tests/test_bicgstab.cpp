#include "eqstab/bicgstab.hpp"
#include "eqstab/ilu0.hpp"
#include "eqstab/sparse_lu.hpp"
#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace eqstab;

namespace {

ComplexSparseMatrix spd_laplacian_2d(Index side) {
    // standard 5-point stencil, SPD
    const Index n = side * side;
    std::vector<Triplet> t;
    auto id = [side](Index i, Index j) { return i * side + j; };
    for (Index i = 0; i < side; ++i)
        for (Index j = 0; j < side; ++j) {
            t.push_back({id(i, j), id(i, j), Cplx(4.0, 0.0)});
            if (i > 0) t.push_back({id(i, j), id(i - 1, j), Cplx(-1.0, 0.0)});
            if (i < side - 1) t.push_back({id(i, j), id(i + 1, j), Cplx(-1.0, 0.0)});
            if (j > 0) t.push_back({id(i, j), id(i, j - 1), Cplx(-1.0, 0.0)});
            if (j < side - 1) t.push_back({id(i, j), id(i, j + 1), Cplx(-1.0, 0.0)});
        }
    return ComplexSparseMatrix::from_triplets(n, n, std::move(t));
}

}  // namespace

TEST_CASE("identity needs at most one iteration") {
    auto a = ComplexSparseMatrix::identity(15);
    std::mt19937 rng(8);
    auto b = test::random_vector(15, rng);
    auto res = bicgstab(a, b, 1e-12, 10);
    REQUIRE(res.iterations <= 1);
    REQUIRE(test::rel_error(res.x, b) < 1e-12);
}

TEST_CASE("SPD system matches the LU solve") {
    auto a = spd_laplacian_2d(10);  // 100 unknowns
    std::mt19937 rng(9);
    auto b = test::random_vector(100, rng);
    auto res = bicgstab(a, b, 1e-12, 500);
    auto lu = lu_factor(a);
    auto x_ref = lu.solve(b);
    REQUIRE(test::rel_error(res.x, x_ref) < 1e-9);
}

TEST_CASE("converged returns satisfy the residual contract post hoc") {
    std::mt19937 rng(10);
    auto a = test::random_diag_dominant(60, rng);
    auto b = test::random_vector(60, rng);
    for (double tol : {1e-6, 1e-10, 1e-13}) {
        auto res = bicgstab(a, b, tol, 1000);
        auto r = a.multiply(res.x);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
        REQUIRE(norm2(r) / norm2(b) <= tol);
        REQUIRE(res.residual <= tol);
    }
}

TEST_CASE("no convergence carries the best iterate and residual") {
    auto a = spd_laplacian_2d(12);
    std::mt19937 rng(12);
    auto b = test::random_vector(144, rng);
    try {
        bicgstab(a, b, 1e-14, 2);
        FAIL("expected NoConvergenceError");
    } catch (const NoConvergenceError& e) {
        REQUIRE(e.iterations() == 2);
        REQUIRE(e.best_iterate().size() == 144);
        // the carried residual matches the carried iterate
        auto r = a.multiply(e.best_iterate());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
        REQUIRE(norm2(r) / norm2(b) == Catch::Approx(e.residual()).epsilon(1e-10));
    }
}

TEST_CASE("ILU(0) preconditioning cuts the iteration count") {
    auto a = spd_laplacian_2d(20);  // 400 unknowns
    std::mt19937 rng(13);
    auto b = test::random_vector(400, rng);
    auto plain = bicgstab(a, b, 1e-10, 2000);
    auto p = ilu0(a);
    auto pre = bicgstab(a, b, 1e-10, 2000,
                        [&](std::span<const Cplx> v) { return p.solve(v); });
    REQUIRE(pre.iterations < plain.iterations);
    REQUIRE(test::rel_error(pre.x, plain.x) < 1e-7);
}

TEST_CASE("zero right-hand side returns zero immediately") {
    auto a = ComplexSparseMatrix::identity(4);
    std::vector<Cplx> b(4, Cplx(0, 0));
    auto res = bicgstab(a, b, 1e-12, 10);
    REQUIRE(res.iterations == 0);
    REQUIRE(norm2(res.x) == 0.0);
}
