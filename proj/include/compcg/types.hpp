#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <vector>

namespace compcg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point theta in the parameter space indexing one linear system.
class ParameterPoint {
public:
    ParameterPoint() = default;
    explicit ParameterPoint(Vector coords) : coords_(std::move(coords)) {}
    ParameterPoint(std::initializer_list<double> values)
        : coords_(static_cast<Index>(values.size())) {
        Index i = 0;
        for (double v : values) coords_(i++) = v;
    }

    Index dim() const noexcept { return coords_.size(); }
    const Vector& coords() const noexcept { return coords_; }
    double operator[](Index i) const { return coords_(i); }

    /// Exact coordinate equality; used for cache keys and revisit detection.
    friend bool operator==(const ParameterPoint& a, const ParameterPoint& b) {
        return a.coords_.size() == b.coords_.size() && a.coords_ == b.coords_;
    }

private:
    Vector coords_;
};

/// One SPD system A x = b generated at parameter theta.
struct LinearSystem {
    ParameterPoint theta;
    Matrix A;
    Vector b;
};

}  // namespace compcg
