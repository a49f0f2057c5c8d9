#pragma once

#include "compcg/kernels.hpp"
#include "compcg/report.hpp"
#include "compcg/types.hpp"

#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace compcg {

/// One projected observation S^T A x = S^T b stored as W = A^T S and
/// z = y - W^T x_0(theta).
struct TrainingRecord {
    ParameterPoint theta;
    Matrix W;
    Vector z;
    double jitter = 0.0;  // absolute diagonal shift added to this record's Schur block

    Index m() const noexcept { return W.cols(); }
};

enum class UpdateMode { Always, OnHighIterations, EveryJth, Never };

/// When to keep, drop or wipe the training data after a solve.
struct UpdatePolicy {
    UpdateMode mode = UpdateMode::Always;
    int iteration_threshold = 50;
    double reset_jump_factor = 3.0;
    std::size_t max_records = std::numeric_limits<std::size_t>::max();
    int every_j = 1;
    std::size_t trailing_window = 5;
    std::size_t min_history = 2;

    void validate() const;
};

enum class UpdateAction { Skip, Update, Reset };

/// Action after solving the system whose report is `report`; `history` holds
/// the reports of all earlier systems in order (so its size is the 0-based
/// index of the current system). Reset takes precedence over Update.
UpdateAction decide_update(const UpdatePolicy& policy, const SolveReport& report,
                           std::span<const SolveReport> history);

/// Extends a lower Cholesky factor L of B11 to the factor of
/// [[B11, B12], [B12^T, B22]]. `jitter` is added to the diagonal of the Schur
/// complement. Throws AppendError if the Schur complement is not positive definite.
Matrix chol_append(const Matrix& L, const Matrix& B12, const Matrix& B22, double jitter = 0.0);

class CompanionModel;

/// Predictive distribution of x_theta given the training data. The covariance
/// C_0(theta,theta) - K G^{-1} K^T is held as C_0 block plus the whitened
/// factor V = chol_G^{-1} K^T, so that cov = C_0 - V^T V.
class PredictiveDistribution {
public:
    PredictiveDistribution(ParameterPoint theta, Vector mean, Matrix prior_block, Matrix k_row,
                           Matrix whitened, std::shared_ptr<const Matrix> chol_g);

    const ParameterPoint& theta() const noexcept { return theta_; }
    const Vector& mean() const noexcept { return mean_; }
    Index dim() const noexcept { return mean_.size(); }

    /// C_n(theta, theta) v, never materializing the d x d covariance.
    Vector apply(const Vector& v) const;
    Matrix dense() const;

    const Matrix& prior_block() const noexcept { return prior_block_; }
    const Matrix& k_row() const noexcept { return k_row_; }
    const Matrix& whitened() const noexcept { return whitened_; }
    const Matrix& chol_g() const noexcept { return *chol_g_; }

private:
    ParameterPoint theta_;
    Vector mean_;
    Matrix prior_block_;
    Matrix k_row_;     // d x M
    Matrix whitened_;  // M x d
    std::shared_ptr<const Matrix> chol_g_;
};

/// Gaussian-process companion regression model over theta -> x_theta.
/// A value type: conditioning returns a new model and leaves the source untouched.
class CompanionModel {
public:
    /// `jitter_scale` multiplies the mean diagonal of each new G block to give its jitter.
    CompanionModel(PriorMean mean, PriorCovariance cov, Index d, UpdatePolicy policy = {},
                   double jitter_scale = 1e-12);

    Index dim() const noexcept { return d_; }
    Index total_columns() const noexcept { return chol_g_->rows(); }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    const PriorMean& prior_mean() const noexcept { return mean_; }
    const PriorCovariance& prior_cov() const noexcept { return cov_; }
    const UpdatePolicy& policy() const noexcept { return policy_; }
    double jitter_scale() const noexcept { return jitter_scale_; }
    const std::vector<std::shared_ptr<const TrainingRecord>>& records() const noexcept { return records_; }
    const Matrix& chol_g() const noexcept { return *chol_g_; }

    /// Conditions on S^T A x = y at theta. Truncates the oldest record first
    /// when max_records would be exceeded.
    CompanionModel condition(const ParameterPoint& theta, const Matrix& A, const Matrix& S,
                             const Vector& y) const;

    /// Same, with W = A^T S already formed and y = S^T b.
    CompanionModel condition_projected(const ParameterPoint& theta, Matrix W, const Vector& y) const;

    PredictiveDistribution predict(const ParameterPoint& theta) const;

    /// C_n(a, b) = C_0(a, b) - K_n(a) G_n^{-1} K_n(b)^T.
    Matrix predict_cross(const ParameterPoint& a, const ParameterPoint& b) const;

    /// Drops all records; prior, policy and jitter are kept.
    CompanionModel reset() const;

    /// Assembles G_n block by block from the records (including jitter). Desk-scale diagnostics.
    Matrix assemble_gram() const;

    /// Rebuilds a model from stored parts (snapshot loading). The factor is taken as-is.
    static CompanionModel from_parts(PriorMean mean, PriorCovariance cov, Index d, UpdatePolicy policy,
                                     double jitter_scale,
                                     std::vector<std::shared_ptr<const TrainingRecord>> records,
                                     Matrix chol_g);

private:
    Matrix k_row(const ParameterPoint& theta) const;
    Matrix whiten(const Matrix& k_row) const;
    CompanionModel append(std::shared_ptr<const TrainingRecord> rec) const;

    PriorMean mean_;
    PriorCovariance cov_;
    Index d_;
    UpdatePolicy policy_;
    double jitter_scale_;
    std::vector<std::shared_ptr<const TrainingRecord>> records_;
    std::shared_ptr<const Matrix> chol_g_;
};

/// Free-function spellings of the model operations.
inline CompanionModel condition(const CompanionModel& model, const ParameterPoint& theta, const Matrix& A,
                                const Matrix& S, const Vector& y) {
    return model.condition(theta, A, S, y);
}
inline PredictiveDistribution predict(const CompanionModel& model, const ParameterPoint& theta) {
    return model.predict(theta);
}
inline Matrix predict_cross(const CompanionModel& model, const ParameterPoint& a, const ParameterPoint& b) {
    return model.predict_cross(a, b);
}
inline CompanionModel reset(const CompanionModel& model) { return model.reset(); }

namespace testing {
/// Fault-injection hook: when set, chol_append negates its off-diagonal block.
void set_cholesky_sign_fault(bool enabled);
bool cholesky_sign_fault();
}  // namespace testing

}  // namespace compcg
