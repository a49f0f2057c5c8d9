#pragma once

#include "compcg/types.hpp"

#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <variant>
#include <vector>

namespace compcg {

enum class KernelFamily { Matern32 };

/// Isotropic stationary kernel on the parameter space.
struct ScalarKernel {
    KernelFamily family = KernelFamily::Matern32;
    double lengthscale = 1.0;
    double amplitude = 1.0;  // sigma^2, the value at zero distance

    /// Throws InputError unless lengthscale and amplitude are positive.
    void validate() const;
};

/// k(theta, theta'); Euclidean distance on raw coordinates.
double kernel_eval(const ScalarKernel& k, const ParameterPoint& a, const ParameterPoint& b);

/// Gram matrix with entry (i, j) = k(rows[i], cols[j]). Empty inputs give empty matrices.
Matrix kernel_matrix(const ScalarKernel& k,
                     const std::vector<ParameterPoint>& rows,
                     const std::vector<ParameterPoint>& cols);

// ---------------------------------------------------------------------------
// Prior covariance C_0(theta, theta')

/// C_0(theta, theta') = k(theta, theta') * Sigma.
struct TensorProductPrior {
    ScalarKernel kernel;
    Matrix sigma;
};

/// Returns A_theta for the nonseparable prior.
using SystemMatrixProvider = std::function<Matrix(const ParameterPoint&)>;

/// Caches A_theta^{-1/2}, keyed by exact theta coordinates.
/// Concurrent lookups share a lock; insertion is exclusive.
class FactorCache {
public:
    explicit FactorCache(SystemMatrixProvider provider);

    /// Symmetric inverse square root of A_theta. Throws FactorizationError when A_theta is not SPD.
    std::shared_ptr<const Matrix> inverse_root(const ParameterPoint& theta) const;

    std::size_t size() const;

private:
    SystemMatrixProvider provider_;
    mutable std::shared_mutex mutex_;
    mutable std::map<std::vector<double>, std::shared_ptr<const Matrix>> cache_;
};

/// C_0(theta, theta') = L_theta^{-1} k(theta, theta') L_theta'^{-T} with the symmetric root
/// L_theta = A_theta^{1/2}, so that C_0(theta, theta) = k A_theta^{-1}; desk scale only.
struct NonseparablePrior {
    ScalarKernel kernel;
    std::shared_ptr<FactorCache> factors;
};

class PriorCovariance {
public:
    using Variant = std::variant<TensorProductPrior, NonseparablePrior>;

    /// Validates Sigma (square, symmetric, Cholesky succeeds).
    static PriorCovariance tensor_product(ScalarKernel kernel, Matrix sigma);
    static PriorCovariance identity_tensor_product(ScalarKernel kernel, Index d);
    static PriorCovariance nonseparable(ScalarKernel kernel, SystemMatrixProvider provider);

    const Variant& variant() const noexcept { return variant_; }
    const ScalarKernel& kernel() const;
    bool is_tensor_product() const noexcept {
        return std::holds_alternative<TensorProductPrior>(variant_);
    }

    /// Dense d x d block C_0(a, b).
    Matrix block(const ParameterPoint& a, const ParameterPoint& b) const;

    /// C_0(a, b) * rhs without forming the block when avoidable.
    Matrix apply_block(const ParameterPoint& a, const ParameterPoint& b, const Matrix& rhs) const;

private:
    explicit PriorCovariance(Variant v, bool sigma_identity = false)
        : variant_(std::move(v)), sigma_identity_(sigma_identity) {}

    Variant variant_;
    bool sigma_identity_ = false;
};

/// The d x d block C_0(theta, theta') of the prior.
Matrix cov_block(const PriorCovariance& prior, const ParameterPoint& a, const ParameterPoint& b);

// ---------------------------------------------------------------------------
// Prior mean x_0(theta)

struct ZeroMean {};
struct ConstantMean {
    Vector value;
};
struct CallbackMean {
    std::function<Vector(const ParameterPoint&)> fn;
};
using PriorMean = std::variant<ZeroMean, ConstantMean, CallbackMean>;

/// Evaluates the prior mean at theta as a length-d vector; throws ContractError on a length mismatch.
Vector prior_mean_eval(const PriorMean& mean, const ParameterPoint& theta, Index d);

}  // namespace compcg
