#pragma once

#include "compcg/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace compcg {

/// Telemetry from one pCG solve.
struct SolveReport {
    Vector x;
    int iterations = 0;
    std::vector<double> residual_history;  // ||r_k||, length iterations + 1
    bool converged = false;
    std::optional<std::string> breakdown;
};

}  // namespace compcg
