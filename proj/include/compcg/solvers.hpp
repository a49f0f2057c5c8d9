#pragma once

#include "compcg/companion.hpp"
#include "compcg/report.hpp"
#include "compcg/types.hpp"

#include <functional>
#include <memory>
#include <variant>

namespace compcg {

/// Matrix-free symmetric operator.
struct LinearOperator {
    Index dim = 0;
    std::function<Vector(const Vector&)> apply;
};

// ---------------------------------------------------------------------------
// Preconditioners. Every variant applies a symmetric positive semidefinite map.

struct IdentityPrecond {};
struct DiagonalPrecond {
    Vector inverse_diagonal;
};
/// Symmetric SOR: applies M^{-1} with M = (D/w + L) (w/(2-w)) D^{-1} (D/w + L^T).
struct SsorPrecond {
    std::shared_ptr<const Matrix> A;
    double omega = 1.0;
    Matrix lower;  // D/omega + strict lower triangle of A
};
struct DenseSpsdPrecond {
    Matrix P;
};
struct OperatorPrecond {
    std::function<Vector(const Vector&)> apply;
    bool symmetric = true;
};

class Preconditioner {
public:
    using Variant = std::variant<IdentityPrecond, DiagonalPrecond, SsorPrecond, DenseSpsdPrecond, OperatorPrecond>;

    Preconditioner() = default;
    Preconditioner(Variant v) : variant_(std::move(v)) {}  // NOLINT(google-explicit-constructor)

    static Preconditioner identity() { return Preconditioner(IdentityPrecond{}); }

    Vector apply(const Vector& r) const;
    const Variant& variant() const noexcept { return variant_; }

private:
    Variant variant_ = IdentityPrecond{};
};

/// Inverse diagonal of A. Throws InputError on a nonpositive diagonal entry.
Preconditioner jacobi_preconditioner(const Matrix& A);

/// SSOR with relaxation omega in (0, 2); omega = 1 is symmetric Gauss-Seidel.
Preconditioner ssor_preconditioner(const Matrix& A, double omega);

/// Predictive covariance of the companion model as a matrix-free preconditioner.
Preconditioner covariance_preconditioner(const PredictiveDistribution& dist);

// ---------------------------------------------------------------------------

struct PcgOptions {
    double tol_rel = 1e-5;
    int maxit = -1;  // negative: 10 * d
    int recompute_every = 0;  // > 0: replace the recurrence residual by b - A x every k iterations
    /// Called with (k, x_k) for k = 0, 1, ... including the final iterate.
    std::function<void(int, const Vector&)> observer;
};

/// Preconditioned conjugate gradients. Stops once ||r_k|| <= tol_rel ||b|| or
/// after maxit iterations. A singular P is allowed when x0 already agrees with
/// the solution on the null space of P.
SolveReport pcg(const LinearOperator& A, const Vector& b, const Vector& x0, const Preconditioner& P,
                const PcgOptions& opts = {});
SolveReport pcg(const Matrix& A, const Vector& b, const Vector& x0, const Preconditioner& P,
                const PcgOptions& opts = {});
inline SolveReport pcg(const Matrix& A, const Vector& b, const Vector& x0, const Preconditioner& P, double tol_rel,
                       int maxit) {
    PcgOptions o;
    o.tol_rel = tol_rel;
    o.maxit = maxit;
    return pcg(A, b, x0, P, o);
}

/// True iff ||S^T A x0 - S^T b|| <= tol ||S^T b||; vacuously true when S has no columns.
bool consistency_check(const Matrix& A, const Matrix& S, const Vector& x0, const Vector& b, double tol);

}  // namespace compcg
