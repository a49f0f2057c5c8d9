#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace compcg {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // worst observed quantity against its bound
};

/// Runs the structural property checks of the companion solver on seeded
/// desk-scale instances. Output is deterministic for a given seed.
std::vector<CheckResult> run_verification(std::uint64_t seed = 20240601);

}  // namespace compcg
