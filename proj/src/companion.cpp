#include "compcg/companion.hpp"

#include "compcg/errors.hpp"

#include <atomic>
#include <numeric>
#include <string>

namespace compcg {

namespace testing {
namespace {
std::atomic<bool> g_cholesky_sign_fault{false};
}
void set_cholesky_sign_fault(bool enabled) { g_cholesky_sign_fault.store(enabled); }
bool cholesky_sign_fault() { return g_cholesky_sign_fault.load(); }
}  // namespace testing

namespace {

// Pivots of the Schur block at or below this fraction of its scale count as singular.
constexpr double kPivotFloor = 1e-14;

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

// ---------------------------------------------------------------------------

void UpdatePolicy::validate() const {
    if (iteration_threshold < 1) throw InputError("update policy: iteration_threshold must be positive");
    if (!(reset_jump_factor > 1.0)) throw InputError("update policy: reset_jump_factor must exceed 1");
    if (max_records < 1) throw InputError("update policy: max_records must be at least 1");
    if (every_j < 1) throw InputError("update policy: every_j must be positive");
    if (trailing_window < 1) throw InputError("update policy: trailing_window must be positive");
}

UpdateAction decide_update(const UpdatePolicy& policy, const SolveReport& report,
                           std::span<const SolveReport> history) {
    switch (policy.mode) {
        case UpdateMode::Always:
            return UpdateAction::Update;
        case UpdateMode::Never:
            return UpdateAction::Skip;
        case UpdateMode::EveryJth:
            return history.size() % static_cast<std::size_t>(policy.every_j) == 0 ? UpdateAction::Update
                                                                                  : UpdateAction::Skip;
        case UpdateMode::OnHighIterations: {
            if (history.size() >= policy.min_history && !history.empty()) {
                const std::size_t window = std::min(policy.trailing_window, history.size());
                double sum = 0.0;
                for (std::size_t i = history.size() - window; i < history.size(); ++i) {
                    sum += history[i].iterations;
                }
                const double trailing_mean = sum / static_cast<double>(window);
                if (report.iterations > policy.reset_jump_factor * trailing_mean) return UpdateAction::Reset;
            }
            return report.iterations > policy.iteration_threshold ? UpdateAction::Update : UpdateAction::Skip;
        }
    }
    return UpdateAction::Skip;
}

Matrix chol_append(const Matrix& L, const Matrix& B12, const Matrix& B22, double jitter) {
    const Index M = L.rows();
    const Index m = B22.rows();
    if (L.cols() != M || B22.cols() != m || B12.rows() != M || B12.cols() != m) {
        throw InputError("chol_append: block dimensions are inconsistent");
    }
    if (m == 0) return L;

    Matrix out = Matrix::Zero(M + m, M + m);
    out.topLeftCorner(M, M) = L;

    Matrix l12t = L.triangularView<Eigen::Lower>().solve(B12);  // M x m
    if (testing::cholesky_sign_fault()) l12t = -l12t;
    Matrix schur = B22 - l12t.transpose() * l12t;
    schur = 0.5 * (schur + schur.transpose());
    schur.diagonal().array() += jitter;

    Eigen::LLT<Matrix> llt(schur);
    const double scale = B22.diagonal().cwiseAbs().mean();
    if (llt.info() != Eigen::Success) {
        throw AppendError("chol_append: Schur complement is not positive definite");
    }
    Matrix l22 = llt.matrixL();
    for (Index j = 0; j < m; ++j) {
        const double pivot = l22(j, j) * l22(j, j);
        if (!(pivot > kPivotFloor * scale)) {
            throw AppendError("chol_append: Schur complement is numerically singular (pivot " +
                              std::to_string(j) + ")");
        }
    }
    out.bottomLeftCorner(m, M) = l12t.transpose();
    out.bottomRightCorner(m, m) = l22;
    return out;
}

// ---------------------------------------------------------------------------

PredictiveDistribution::PredictiveDistribution(ParameterPoint theta, Vector mean, Matrix prior_block,
                                               Matrix k_row, Matrix whitened,
                                               std::shared_ptr<const Matrix> chol_g)
    : theta_(std::move(theta)),
      mean_(std::move(mean)),
      prior_block_(std::move(prior_block)),
      k_row_(std::move(k_row)),
      whitened_(std::move(whitened)),
      chol_g_(std::move(chol_g)) {}

Vector PredictiveDistribution::apply(const Vector& v) const {
    if (v.size() != dim()) throw InputError("predictive covariance apply: dimension mismatch");
    Vector out = prior_block_ * v;
    if (whitened_.rows() > 0) out.noalias() -= whitened_.transpose() * (whitened_ * v);
    return out;
}

Matrix PredictiveDistribution::dense() const {
    Matrix c = prior_block_;
    if (whitened_.rows() > 0) c.noalias() -= whitened_.transpose() * whitened_;
    return 0.5 * (c + c.transpose());
}

// ---------------------------------------------------------------------------

CompanionModel::CompanionModel(PriorMean mean, PriorCovariance cov, Index d, UpdatePolicy policy,
                               double jitter_scale)
    : mean_(std::move(mean)),
      cov_(std::move(cov)),
      d_(d),
      policy_(policy),
      jitter_scale_(jitter_scale),
      chol_g_(std::make_shared<const Matrix>(0, 0)) {
    if (d_ < 1) throw InputError("companion model: dimension must be positive");
    if (!(jitter_scale_ >= 0.0)) throw InputError("companion model: jitter must be nonnegative");
    policy_.validate();
    if (const auto* tp = std::get_if<TensorProductPrior>(&cov_.variant())) {
        if (tp->sigma.rows() != d_) throw InputError("companion model: Sigma size does not match d");
    }
}

CompanionModel CompanionModel::from_parts(PriorMean mean, PriorCovariance cov, Index d, UpdatePolicy policy,
                                          double jitter_scale,
                                          std::vector<std::shared_ptr<const TrainingRecord>> records,
                                          Matrix chol_g) {
    CompanionModel model(std::move(mean), std::move(cov), d, policy, jitter_scale);
    Index total = 0;
    for (const auto& r : records) {
        if (!r || r->W.rows() != d || r->z.size() != r->W.cols()) {
            throw InputError("companion model: malformed training record");
        }
        total += r->m();
    }
    if (chol_g.rows() != total || chol_g.cols() != total) {
        throw InputError("companion model: factor size does not match record columns");
    }
    model.records_ = std::move(records);
    model.chol_g_ = std::make_shared<const Matrix>(std::move(chol_g));
    return model;
}

CompanionModel CompanionModel::condition(const ParameterPoint& theta, const Matrix& A, const Matrix& S,
                                         const Vector& y) const {
    if (A.rows() != d_ || A.cols() != d_) throw InputError("condition: A must be d x d");
    if (S.rows() != d_) throw InputError("condition: S must have d rows");
    return condition_projected(theta, A.transpose() * S, y);
}

CompanionModel CompanionModel::condition_projected(const ParameterPoint& theta, Matrix W,
                                                   const Vector& y) const {
    if (W.rows() != d_) throw InputError("condition: W must have d rows");
    if (W.cols() < 1 || W.cols() > d_) throw InputError("condition: column count must lie in [1, d]");
    if (y.size() != W.cols()) throw InputError("condition: observation length does not match S");

    auto rec = std::make_shared<TrainingRecord>();
    rec->z = y - W.transpose() * prior_mean_eval(mean_, theta, d_);
    rec->theta = theta;
    rec->W = std::move(W);

    if (records_.size() >= policy_.max_records) {
        // Drop the oldest records and refactor; Cholesky downdates are not supported.
        CompanionModel trimmed = reset();
        const std::size_t keep = policy_.max_records - 1;
        for (std::size_t i = records_.size() - keep; i < records_.size(); ++i) {
            auto copy = std::make_shared<TrainingRecord>(*records_[i]);
            trimmed = trimmed.append(std::move(copy));
        }
        return trimmed.append(std::move(rec));
    }
    return append(std::move(rec));
}

CompanionModel CompanionModel::append(std::shared_ptr<const TrainingRecord> rec_in) const {
    auto rec = std::make_shared<TrainingRecord>(*rec_in);
    const Index M = total_columns();
    const Index m = rec->m();

    Matrix c_new = cov_.apply_block(rec->theta, rec->theta, rec->W);  // C_0(theta,theta) W
    Matrix b22 = rec->W.transpose() * c_new;
    b22 = 0.5 * (b22 + b22.transpose());

    Matrix b12(M, m);
    Index offset = 0;
    for (const auto& r : records_) {
        b12.middleRows(offset, r->m()) = r->W.transpose() * cov_.apply_block(r->theta, rec->theta, rec->W);
        offset += r->m();
    }

    rec->jitter = jitter_scale_ * b22.diagonal().mean();
    Matrix grown;
    try {
        grown = chol_append(*chol_g_, b12, b22, rec->jitter);
    } catch (const AppendError& e) {
        throw ConditioningError(std::string("conditioning failed for record ") +
                                    std::to_string(records_.size()) + ": " + e.what(),
                                records_.size());
    }

    CompanionModel out = *this;
    out.records_.push_back(std::move(rec));
    out.chol_g_ = std::make_shared<const Matrix>(std::move(grown));
    return out;
}

CompanionModel CompanionModel::reset() const {
    CompanionModel out = *this;
    out.records_.clear();
    out.chol_g_ = std::make_shared<const Matrix>(0, 0);
    return out;
}

Matrix CompanionModel::k_row(const ParameterPoint& theta) const {
    Matrix k(d_, total_columns());
    Index offset = 0;
    for (const auto& r : records_) {
        k.middleCols(offset, r->m()) = cov_.apply_block(theta, r->theta, r->W);
        offset += r->m();
    }
    return k;
}

Matrix CompanionModel::whiten(const Matrix& k_row) const {
    Matrix v = chol_g_->triangularView<Eigen::Lower>().solve(k_row.transpose());
    if (!all_finite(v)) throw DegenerateModelError("companion model: triangular solve produced non-finite values");
    return v;
}

PredictiveDistribution CompanionModel::predict(const ParameterPoint& theta) const {
    Vector mean = prior_mean_eval(mean_, theta, d_);
    Matrix c0 = cov_.block(theta, theta);
    c0 = 0.5 * (c0 + c0.transpose());
    Matrix k = k_row(theta);
    Matrix v = whiten(k);
    if (!records_.empty()) {
        Vector z(total_columns());
        Index offset = 0;
        for (const auto& r : records_) {
            z.segment(offset, r->m()) = r->z;
            offset += r->m();
        }
        chol_g_->triangularView<Eigen::Lower>().solveInPlace(z);
        mean.noalias() += v.transpose() * z;
        if (!mean.allFinite()) throw DegenerateModelError("companion model: predictive mean is not finite");
    }
    return PredictiveDistribution(theta, std::move(mean), std::move(c0), std::move(k), std::move(v), chol_g_);
}

Matrix CompanionModel::predict_cross(const ParameterPoint& a, const ParameterPoint& b) const {
    Matrix c = cov_.block(a, b);
    if (records_.empty()) return c;
    const Matrix va = whiten(k_row(a));
    const Matrix vb = (a == b) ? va : whiten(k_row(b));
    c.noalias() -= va.transpose() * vb;
    return c;
}

Matrix CompanionModel::assemble_gram() const {
    const Index M = total_columns();
    Matrix g(M, M);
    Index oi = 0;
    for (const auto& ri : records_) {
        Index oj = 0;
        for (const auto& rj : records_) {
            g.block(oi, oj, ri->m(), rj->m()) = ri->W.transpose() * cov_.apply_block(ri->theta, rj->theta, rj->W);
            oj += rj->m();
        }
        g.block(oi, oi, ri->m(), ri->m()).diagonal().array() += ri->jitter;
        oi += ri->m();
    }
    return g;
}

}  // namespace compcg
