#pragma once

// Dense reference implementations written independently of the library code
// paths they check: the companion posterior is assembled as one big block
// system and solved with a pivoted LU, CG is the textbook recurrence.

#include "compcg/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using compcg::Index;
using compcg::Matrix;
using compcg::ParameterPoint;
using compcg::Vector;

inline double matern32(double r, double lengthscale, double amplitude) {
    const double s = std::sqrt(3.0) * r / lengthscale;
    return amplitude * (1.0 + s) * std::exp(-s);
}

inline double matern32(const ParameterPoint& a, const ParameterPoint& b, double lengthscale, double amplitude) {
    double sq = 0.0;
    for (Index i = 0; i < a.dim(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    return matern32(std::sqrt(sq), lengthscale, amplitude);
}

using BlockFn = std::function<Matrix(const ParameterPoint&, const ParameterPoint&)>;
using MeanFn = std::function<Vector(const ParameterPoint&)>;

inline BlockFn tensor_block(double lengthscale, double amplitude, Matrix sigma) {
    return [=](const ParameterPoint& a, const ParameterPoint& b) {
        return Matrix(matern32(a, b, lengthscale, amplitude) * sigma);
    };
}

/// k(a, b) A_a^{-1/2} A_b^{-1/2}, the symmetric-root form of L_a^{-1} k(a, b) L_b^{-T}.
inline BlockFn nonseparable_block(double lengthscale, double amplitude,
                                  std::function<Matrix(const ParameterPoint&)> system) {
    return [=](const ParameterPoint& a, const ParameterPoint& b) {
        const Matrix ra = Eigen::SelfAdjointEigenSolver<Matrix>(system(a)).operatorInverseSqrt();
        const Matrix rb = Eigen::SelfAdjointEigenSolver<Matrix>(system(b)).operatorInverseSqrt();
        return Matrix(matern32(a, b, lengthscale, amplitude) * ra * rb.transpose());
    };
}

struct Record {
    ParameterPoint theta;
    Matrix A;
    Matrix S;
    Vector y;
};

struct Posterior {
    Vector mean;
    Matrix cov;
};

inline Matrix gram(const BlockFn& c0, const std::vector<Record>& recs) {
    Index M = 0;
    for (const auto& r : recs) M += r.S.cols();
    Matrix G(M, M);
    Index row = 0;
    for (const auto& ri : recs) {
        Index col = 0;
        const Matrix wi = ri.A.transpose() * ri.S;
        for (const auto& rj : recs) {
            const Matrix wj = rj.A.transpose() * rj.S;
            G.block(row, col, wi.cols(), wj.cols()) = wi.transpose() * c0(ri.theta, rj.theta) * wj;
            col += wj.cols();
        }
        row += wi.cols();
    }
    return G;
}

inline Matrix k_row(const BlockFn& c0, const std::vector<Record>& recs, const ParameterPoint& theta, Index d) {
    Index M = 0;
    for (const auto& r : recs) M += r.S.cols();
    Matrix K(d, M);
    Index col = 0;
    for (const auto& r : recs) {
        K.middleCols(col, r.S.cols()) = c0(theta, r.theta) * r.A.transpose() * r.S;
        col += r.S.cols();
    }
    return K;
}

/// Mean and covariance at theta, plus the cross covariance with theta2 when requested.
inline Posterior posterior(const BlockFn& c0, const MeanFn& x0, const std::vector<Record>& recs,
                           const ParameterPoint& theta, Index d) {
    Posterior out;
    out.mean = x0(theta);
    out.cov = c0(theta, theta);
    if (recs.empty()) return out;
    Index M = 0;
    for (const auto& r : recs) M += r.S.cols();
    Vector z(M);
    Index off = 0;
    for (const auto& r : recs) {
        z.segment(off, r.S.cols()) = r.y - r.S.transpose() * r.A * x0(r.theta);
        off += r.S.cols();
    }
    const Matrix G = gram(c0, recs);
    const Matrix K = k_row(c0, recs, theta, d);
    Eigen::FullPivLU<Matrix> lu(G);
    out.mean += K * lu.solve(z);
    out.cov -= K * lu.solve(K.transpose());
    return out;
}

inline Matrix cross(const BlockFn& c0, const std::vector<Record>& recs, const ParameterPoint& a,
                    const ParameterPoint& b, Index d) {
    Matrix out = c0(a, b);
    if (recs.empty()) return out;
    Eigen::FullPivLU<Matrix> lu(gram(c0, recs));
    out -= k_row(c0, recs, a, d) * lu.solve(k_row(c0, recs, b, d).transpose());
    return out;
}

/// Textbook CG; returns every iterate x_0, x_1, ...
inline std::vector<Vector> plain_cg(const Matrix& A, const Vector& b, Vector x, double tol_rel, int maxit) {
    std::vector<Vector> iterates{x};
    Vector r = b - A * x;
    Vector p = r;
    double rr = r.squaredNorm();
    const double stop = tol_rel * b.norm();
    for (int k = 0; k < maxit && std::sqrt(rr) > stop; ++k) {
        const Vector Ap = A * p;
        const double alpha = rr / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        const double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        rr = rr_new;
        iterates.push_back(x);
    }
    return iterates;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
    const double scale = std::max(b.norm(), 1e-300);
    return (a - b).norm() / scale;
}

}  // namespace oracle
