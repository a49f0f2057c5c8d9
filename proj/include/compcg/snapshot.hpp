#pragma once

#include "compcg/companion.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>

namespace compcg {

/// Binary model snapshot, format version 1. Layout is documented in
/// docs/snapshot_format.md: little-endian fields, row-major float64 matrices.
///
/// Tensor-product priors and zero/constant means are stored in full. A
/// nonseparable prior is stored by kernel only; `load_snapshot` then needs the
/// system-matrix provider. Callback means cannot be saved.
void save_snapshot(const CompanionModel& model, std::ostream& out);

CompanionModel load_snapshot(std::istream& in,
                             std::optional<SystemMatrixProvider> provider = std::nullopt,
                             std::optional<PriorMean> callback_mean = std::nullopt);

inline constexpr std::uint32_t kSnapshotVersion = 1;

}  // namespace compcg
