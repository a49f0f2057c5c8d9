#include "compcg/solvers.hpp"

#include "compcg/errors.hpp"

#include <cmath>
#include <string>

namespace compcg {

Vector Preconditioner::apply(const Vector& r) const {
    return std::visit(
        [&](const auto& p) -> Vector {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, IdentityPrecond>) {
                return r;
            } else if constexpr (std::is_same_v<T, DiagonalPrecond>) {
                return p.inverse_diagonal.cwiseProduct(r);
            } else if constexpr (std::is_same_v<T, SsorPrecond>) {
                const double w = p.omega;
                Vector t = p.lower.template triangularView<Eigen::Lower>().solve(r);
                t = ((2.0 - w) / w) * p.A->diagonal().cwiseProduct(t);
                return p.lower.transpose().template triangularView<Eigen::Upper>().solve(t);
            } else if constexpr (std::is_same_v<T, DenseSpsdPrecond>) {
                return p.P * r;
            } else {
                return p.apply(r);
            }
        },
        variant_);
}

Preconditioner jacobi_preconditioner(const Matrix& A) {
    if (A.rows() != A.cols()) throw InputError("jacobi_preconditioner: A must be square");
    Vector diag = A.diagonal();
    for (Index i = 0; i < diag.size(); ++i) {
        if (!(diag(i) > 0.0)) {
            throw InputError("jacobi_preconditioner: diagonal entry " + std::to_string(i) + " is not positive");
        }
    }
    return Preconditioner(DiagonalPrecond{diag.cwiseInverse()});
}

Preconditioner ssor_preconditioner(const Matrix& A, double omega) {
    if (!(omega > 0.0 && omega < 2.0)) {
        throw InputError("ssor_preconditioner: omega must lie in (0, 2), got " + std::to_string(omega));
    }
    if (A.rows() != A.cols()) throw InputError("ssor_preconditioner: A must be square");
    if (!(A.diagonal().array() > 0.0).all()) {
        throw InputError("ssor_preconditioner: diagonal of A must be positive");
    }
    SsorPrecond p;
    p.A = std::make_shared<const Matrix>(A);
    p.omega = omega;
    p.lower = A.triangularView<Eigen::StrictlyLower>();
    p.lower.diagonal() = A.diagonal() / omega;
    return Preconditioner(std::move(p));
}

Preconditioner covariance_preconditioner(const PredictiveDistribution& dist) {
    auto shared = std::make_shared<const PredictiveDistribution>(dist);
    return Preconditioner(OperatorPrecond{[shared](const Vector& v) { return shared->apply(v); }, true});
}

// ---------------------------------------------------------------------------

SolveReport pcg(const LinearOperator& A, const Vector& b, const Vector& x0, const Preconditioner& P,
                const PcgOptions& opts) {
    const Index d = A.dim;
    if (b.size() != d || x0.size() != d) throw InputError("pcg: vector sizes do not match the operator");
    if (!(opts.tol_rel > 0.0)) throw InputError("pcg: tolerance must be positive");
    const int maxit = opts.maxit < 0 ? static_cast<int>(10 * d) : opts.maxit;
    const double threshold = opts.tol_rel * b.norm();

    SolveReport rep;
    rep.x = x0;
    Vector r = b - A.apply(rep.x);
    double rnorm = r.norm();
    rep.residual_history.push_back(rnorm);
    if (opts.observer) opts.observer(0, rep.x);

    Vector z;
    Vector p;
    double rz = 0.0;
    if (rnorm > threshold) {
        z = P.apply(r);
        p = z;
        rz = r.dot(z);
    }

    int k = 0;
    while (rnorm > threshold) {
        if (k >= maxit) break;
        if (!(rz > 0.0)) {
            rep.breakdown = "r^T P r is not positive (singular preconditioner inconsistent with x0?)";
            break;
        }
        const Vector ap = A.apply(p);
        const double pap = p.dot(ap);
        if (!(pap > 0.0)) {
            rep.breakdown = "p^T A p is not positive (A is not positive definite)";
            break;
        }
        const double alpha = rz / pap;
        rep.x.noalias() += alpha * p;
        r.noalias() -= alpha * ap;
        ++k;
        if (opts.recompute_every > 0 && k % opts.recompute_every == 0) r = b - A.apply(rep.x);
        rnorm = r.norm();
        rep.residual_history.push_back(rnorm);
        if (opts.observer) opts.observer(k, rep.x);
        if (rnorm <= threshold) break;

        z = P.apply(r);
        const double rz_next = r.dot(z);
        const double beta = rz_next / rz;
        p = z + beta * p;
        rz = rz_next;
    }
    rep.iterations = k;
    rep.converged = rnorm <= threshold;
    return rep;
}

SolveReport pcg(const Matrix& A, const Vector& b, const Vector& x0, const Preconditioner& P,
                const PcgOptions& opts) {
    if (A.rows() != A.cols()) throw InputError("pcg: A must be square");
    LinearOperator op{A.rows(), [&A](const Vector& v) -> Vector { return A * v; }};
    return pcg(op, b, x0, P, opts);
}

bool consistency_check(const Matrix& A, const Matrix& S, const Vector& x0, const Vector& b, double tol) {
    if (S.cols() == 0) return true;
    const Vector sb = S.transpose() * b;
    const Vector gap = S.transpose() * (A * x0) - sb;
    return gap.norm() <= tol * sb.norm();
}

}  // namespace compcg
