#pragma once

// Shared scalar/index types and the error hierarchy used across the toolkit.

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqstab {

using Cplx = std::complex<double>;
using Index = std::int32_t;

inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m

/// Norm used for condition numbers (1-norm or infinity-norm).
enum class Norm { One, Inf };

inline Cplx imag_unit() { return Cplx(0.0, 1.0); }

/// Factorization hit an (exact or numerical) zero pivot.
class SingularMatrixError : public std::runtime_error {
public:
    explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

/// A block factorization required by a preconditioner is singular
/// (typically a conducting region with no Dirichlet contact).
class SingularBlockError : public std::runtime_error {
public:
    explicit SingularBlockError(const std::string& what) : std::runtime_error(what) {}
};

/// ILU(0) or a Jacobi scaling found a vanishing diagonal entry.
class ZeroDiagonalError : public std::runtime_error {
public:
    explicit ZeroDiagonalError(Index row)
        : std::runtime_error("zero diagonal entry at row " + std::to_string(row)), row_(row) {}
    [[nodiscard]] Index row() const { return row_; }

private:
    Index row_ = -1;
};

/// Iterative solver failed to reach the requested tolerance.
/// Carries the best iterate and its residual so callers can still inspect it.
class NoConvergenceError : public std::runtime_error {
public:
    NoConvergenceError(int iterations, double residual, std::vector<Cplx> best)
        : std::runtime_error("no convergence after " + std::to_string(iterations) +
                             " iterations (relative residual " + std::to_string(residual) + ")"),
          iterations_(iterations), residual_(residual), best_(std::move(best)) {}
    [[nodiscard]] int iterations() const { return iterations_; }
    [[nodiscard]] double residual() const { return residual_; }
    [[nodiscard]] const std::vector<Cplx>& best_iterate() const { return best_; }

private:
    int iterations_;
    double residual_;
    std::vector<Cplx> best_;
};

/// A scaling with a2 ~ omega^(-p) was requested at omega = 0 while the
/// omega-free part of the insulator right-hand side is nonzero; the source
/// is not divergence-free in the stationary limit.
class IncompatibleSourceError : public std::runtime_error {
public:
    explicit IncompatibleSourceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace eqstab
