#include "compcg/kernels.hpp"

#include "compcg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

namespace compcg {

namespace {

std::vector<double> key_of(const ParameterPoint& theta) {
    const Vector& c = theta.coords();
    return std::vector<double>(c.data(), c.data() + c.size());
}

/// Symmetric A^{-1/2}. It is the one factor with A = L L^T for which L^{-1} L^{-T} is A^{-1}.
Matrix symmetric_inverse_root(const Matrix& a, const char* what) {
    if (a.rows() != a.cols()) throw InputError(std::string(what) + ": matrix is not square");
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
    if (eig.info() != Eigen::Success || asym > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) ||
        !(eig.eigenvalues().minCoeff() > 0.0)) {
        throw FactorizationError(std::string(what) + ": matrix is not symmetric positive definite");
    }
    const Matrix& q = eig.eigenvectors();
    Matrix r = q * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
    return 0.5 * (r + r.transpose());
}

}  // namespace

void ScalarKernel::validate() const {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
        throw InputError("kernel lengthscale must be positive, got " + std::to_string(lengthscale));
    }
    if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
        throw InputError("kernel amplitude must be positive, got " + std::to_string(amplitude));
    }
}

double kernel_eval(const ScalarKernel& k, const ParameterPoint& a, const ParameterPoint& b) {
    if (a.dim() != b.dim()) {
        throw InputError("kernel_eval: parameter dimensions differ (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
    }
    const double r = (a.coords() - b.coords()).norm();
    switch (k.family) {
        case KernelFamily::Matern32: {
            const double s = std::sqrt(3.0) * r / k.lengthscale;
            return k.amplitude * (1.0 + s) * std::exp(-s);
        }
    }
    return 0.0;
}

Matrix kernel_matrix(const ScalarKernel& k,
                     const std::vector<ParameterPoint>& rows,
                     const std::vector<ParameterPoint>& cols) {
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out(static_cast<Index>(i), static_cast<Index>(j)) = kernel_eval(k, rows[i], cols[j]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

FactorCache::FactorCache(SystemMatrixProvider provider) : provider_(std::move(provider)) {
    if (!provider_) throw InputError("FactorCache: empty system-matrix provider");
}

std::shared_ptr<const Matrix> FactorCache::inverse_root(const ParameterPoint& theta) const {
    auto key = key_of(theta);
    {
        std::shared_lock lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    // Factor outside the lock; a racing insert of the same key is harmless.
    auto factor = std::make_shared<const Matrix>(symmetric_inverse_root(provider_(theta), "nonseparable prior"));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = cache_.emplace(std::move(key), std::move(factor));
    return it->second;
}

std::size_t FactorCache::size() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
}

// ---------------------------------------------------------------------------

PriorCovariance PriorCovariance::tensor_product(ScalarKernel kernel, Matrix sigma) {
    kernel.validate();
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
        throw InputError("tensor-product prior: Sigma must be a nonempty square matrix");
    }
    const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
        throw InputError("tensor-product prior: Sigma is not symmetric");
    }
    if (Eigen::LLT<Matrix>(sigma).info() != Eigen::Success) {
        throw InputError("tensor-product prior: Sigma is not positive definite");
    }
    const bool identity = sigma.isIdentity(0.0);
    return PriorCovariance(TensorProductPrior{kernel, std::move(sigma)}, identity);
}

PriorCovariance PriorCovariance::identity_tensor_product(ScalarKernel kernel, Index d) {
    return tensor_product(kernel, Matrix::Identity(d, d));
}

PriorCovariance PriorCovariance::nonseparable(ScalarKernel kernel, SystemMatrixProvider provider) {
    kernel.validate();
    return PriorCovariance(NonseparablePrior{kernel, std::make_shared<FactorCache>(std::move(provider))});
}

const ScalarKernel& PriorCovariance::kernel() const {
    return std::visit([](const auto& p) -> const ScalarKernel& { return p.kernel; }, variant_);
}

Matrix PriorCovariance::block(const ParameterPoint& a, const ParameterPoint& b) const {
    if (const auto* tp = std::get_if<TensorProductPrior>(&variant_)) {
        return kernel_eval(tp->kernel, a, b) * tp->sigma;
    }
    const auto& ns = std::get<NonseparablePrior>(variant_);
    const auto ra = ns.factors->inverse_root(a);
    const auto rb = ns.factors->inverse_root(b);
    if (ra->rows() != rb->rows()) throw InputError("nonseparable prior: system sizes differ");
    return kernel_eval(ns.kernel, a, b) * (*ra) * (*rb);
}

Matrix PriorCovariance::apply_block(const ParameterPoint& a, const ParameterPoint& b,
                                    const Matrix& rhs) const {
    if (const auto* tp = std::get_if<TensorProductPrior>(&variant_)) {
        if (rhs.rows() != tp->sigma.rows()) throw InputError("apply_block: dimension mismatch");
        const double kab = kernel_eval(tp->kernel, a, b);
        if (sigma_identity_) return kab * rhs;
        return kab * (tp->sigma * rhs);
    }
    const auto& ns = std::get<NonseparablePrior>(variant_);
    const auto ra = ns.factors->inverse_root(a);
    const auto rb = ns.factors->inverse_root(b);
    if (rhs.rows() != rb->rows() || ra->rows() != rb->rows()) {
        throw InputError("apply_block: dimension mismatch");
    }
    return kernel_eval(ns.kernel, a, b) * ((*ra) * ((*rb) * rhs));
}

Matrix cov_block(const PriorCovariance& prior, const ParameterPoint& a, const ParameterPoint& b) {
    return prior.block(a, b);
}

// ---------------------------------------------------------------------------

Vector prior_mean_eval(const PriorMean& mean, const ParameterPoint& theta, Index d) {
    return std::visit(
        [&](const auto& m) -> Vector {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ZeroMean>) {
                return Vector::Zero(d);
            } else if constexpr (std::is_same_v<T, ConstantMean>) {
                if (m.value.size() != d) {
                    throw ContractError("constant prior mean has length " + std::to_string(m.value.size()) +
                                        ", expected " + std::to_string(d));
                }
                return m.value;
            } else {
                if (!m.fn) throw ContractError("callback prior mean is empty");
                Vector v = m.fn(theta);
                if (v.size() != d) {
                    throw ContractError("callback prior mean returned length " + std::to_string(v.size()) +
                                        ", expected " + std::to_string(d));
                }
                return v;
            }
        },
        mean);
}

}  // namespace compcg
