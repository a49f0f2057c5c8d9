#include "compcg/directions.hpp"

#include "compcg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace compcg {

namespace {

constexpr double kResidualStop = 1e-13;
constexpr double kBreakdown = 1e-14;

// The index offset is formed from the integer difference so that mirror-image ties stay exact.
double index_sq_distance(Index a, Index b, Index d) {
    const double di = static_cast<double>(a - b) / static_cast<double>(d);
    return di * di;
}

}  // namespace

Index DirectionSpec::columns(Index d) const {
    if (m.has_value() == alpha.has_value()) {
        throw InputError("direction spec: set exactly one of m and alpha");
    }
    Index cols = 0;
    if (m) {
        cols = *m;
    } else {
        if (!(*alpha > 0.0 && *alpha <= 1.0)) throw InputError("direction spec: alpha must lie in (0, 1]");
        cols = static_cast<Index>(std::ceil(*alpha * static_cast<double>(d)));
    }
    if (cols < 1 || cols > d) {
        throw InputError("direction spec: column count " + std::to_string(cols) + " outside [1, " +
                         std::to_string(d) + "]");
    }
    return cols;
}

std::vector<Index> subset_directions(Index d, Index m, const ParameterPoint& theta, SubsetHistory& history) {
    if (d < 1) throw InputError("subset_directions: d must be positive");
    if (m < 1 || m > d) {
        throw InputError("subset_directions: m = " + std::to_string(m) + " outside [1, " + std::to_string(d) + "]");
    }
    std::vector<double> min_sq(static_cast<std::size_t>(d), std::numeric_limits<double>::infinity());
    for (const auto& [idx, point] : history) {
        if (point.dim() != theta.dim()) throw InputError("subset_directions: history parameter dimension differs");
        const double dtheta = (theta.coords() - point.coords()).squaredNorm();
        for (Index i = 0; i < d; ++i) {
            const double dist = index_sq_distance(i, idx, d) + dtheta;
            min_sq[static_cast<std::size_t>(i)] = std::min(min_sq[static_cast<std::size_t>(i)], dist);
        }
    }

    std::vector<bool> taken(static_cast<std::size_t>(d), false);
    std::vector<Index> chosen;
    chosen.reserve(static_cast<std::size_t>(m));
    for (Index pick = 0; pick < m; ++pick) {
        Index best = -1;
        double best_dist = -1.0;
        for (Index i = 0; i < d; ++i) {
            if (taken[static_cast<std::size_t>(i)]) continue;
            if (min_sq[static_cast<std::size_t>(i)] > best_dist) {
                best_dist = min_sq[static_cast<std::size_t>(i)];
                best = i;
            }
        }
        taken[static_cast<std::size_t>(best)] = true;
        chosen.push_back(best);
        for (Index i = 0; i < d; ++i) {
            // Same theta: only the index axis differs.
            min_sq[static_cast<std::size_t>(i)] = std::min(min_sq[static_cast<std::size_t>(i)], index_sq_distance(i, best, d));
        }
    }
    for (Index idx : chosen) history.emplace_back(idx, theta);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

Matrix selection_matrix(Index d, const std::vector<Index>& indices) {
    Matrix s = Matrix::Zero(d, static_cast<Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) s(indices[j], static_cast<Index>(j)) = 1.0;
    return s;
}

BayesCGResult bayescg_run(const Matrix& A, const Vector& b, const Vector& mean, const CovarianceApply& cov_apply,
                          Index m) {
    const Index d = A.rows();
    if (A.cols() != d || b.size() != d || mean.size() != d) throw InputError("bayescg: dimension mismatch");
    if (m < 0 || m > d) throw InputError("bayescg: m must lie in [0, d]");

    BayesCGResult out;
    out.mean = mean;
    out.residual = b - A * mean;
    const double bnorm = b.norm();
    std::vector<Vector> cols;

    Vector s_prev;
    Vector w_prev;  // A Sigma0 A^T s_prev
    for (Index j = 0; j < m; ++j) {
        const Vector& r = out.residual;
        const double rnorm = r.norm();
        if (rnorm == 0.0 || rnorm < kResidualStop * bnorm) break;

        Vector s = r;
        if (j > 0) s -= r.dot(w_prev) * s_prev;
        const Vector as = A * s;
        const Vector sigma_as = cov_apply(as);
        const double sq = as.dot(sigma_as);
        const double denom = sq > 0.0 ? std::sqrt(sq) : 0.0;
        if (!(denom >= kBreakdown * rnorm) || denom == 0.0) break;

        s /= denom;
        const Vector sigma_as_n = sigma_as / denom;
        const Vector w = A * sigma_as_n;
        const double step = s.dot(r);
        out.mean.noalias() += step * sigma_as_n;
        out.residual.noalias() -= step * w;

        cols.push_back(s);
        s_prev = std::move(s);
        w_prev = w;
    }

    out.S.resize(d, static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.S.col(static_cast<Index>(j)) = cols[j];
    return out;
}

Matrix bayescg_directions(const Matrix& A, const Vector& b, const Vector& mean, const CovarianceApply& cov_apply,
                          Index m) {
    return bayescg_run(A, b, mean, cov_apply, m).S;
}

Matrix bayescg_id_directions(const Matrix& A, const Vector& b, Index m) {
    return bayescg_directions(A, b, Vector::Zero(A.rows()), [](const Vector& v) { return v; }, m);
}

FullObservation full_solution_observation(const Matrix& A, const Vector& b) {
    if (A.rows() != A.cols() || b.size() != A.rows()) throw InputError("full_solution_observation: dimension mismatch");
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw InputError("full_solution_observation: A is not SPD");
    return FullObservation{Matrix::Identity(A.rows(), A.rows()), llt.solve(b)};
}

}  // namespace compcg
