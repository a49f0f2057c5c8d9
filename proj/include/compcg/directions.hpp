#pragma once

#include "compcg/types.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace compcg {

enum class DirectionStrategy { Subset, BayesCG, BayesCGId, FullObservation };

/// Number of search directions per system: either m directly or m = ceil(alpha * d).
struct DirectionSpec {
    DirectionStrategy strategy = DirectionStrategy::Subset;
    std::optional<Index> m;
    std::optional<double> alpha = 0.2;

    /// Resolved column count in [1, d]. Throws InputError unless exactly one of m, alpha is set.
    Index columns(Index d) const;
};

/// A coordinate index observed at a parameter point.
using SubsetHistory = std::vector<std::pair<Index, ParameterPoint>>;

/// Greedy max-min (fill distance) choice of m coordinates in the augmented
/// space (i / d, theta). Ties go to the lowest index. The chosen pairs are
/// appended to `history`; the returned indices are sorted ascending.
std::vector<Index> subset_directions(Index d, Index m, const ParameterPoint& theta, SubsetHistory& history);

/// Columns of the identity selected by `indices`.
Matrix selection_matrix(Index d, const std::vector<Index>& indices);

using CovarianceApply = std::function<Vector(const Vector&)>;

struct BayesCGResult {
    Matrix S;  // d x j, j <= m
    Vector mean;  // BayesCG mean after the j steps
    Vector residual;
};

/// Runs up to m BayesCG steps from prior N(mean, Sigma0), Sigma0 given by
/// `cov_apply`, and returns directions orthonormal in the A Sigma0 A^T inner
/// product. Stops early on a converged residual or a breakdown.
BayesCGResult bayescg_run(const Matrix& A, const Vector& b, const Vector& mean, const CovarianceApply& cov_apply,
                          Index m);

Matrix bayescg_directions(const Matrix& A, const Vector& b, const Vector& mean, const CovarianceApply& cov_apply,
                          Index m);

/// BayesCG directions with zero prior mean and identity prior covariance.
Matrix bayescg_id_directions(const Matrix& A, const Vector& b, Index m);

struct FullObservation {
    Matrix W;  // identity
    Vector y;  // A^{-1} b
};

/// Observation with S = A^{-1}: W = I and y = x*. Dense Cholesky solve.
FullObservation full_solution_observation(const Matrix& A, const Vector& b);

}  // namespace compcg
