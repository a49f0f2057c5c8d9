#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace compcg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes `content` to `path` through a temporary file in the same directory.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace compcg::cli
