#pragma once

#include "compcg/companion.hpp"
#include "compcg/directions.hpp"
#include "compcg/kernels.hpp"
#include "compcg/types.hpp"

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace compcg {

// ---------------------------------------------------------------------------
// Random streams

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Deterministic child seed for (parent, stream) pairs.
std::uint64_t split_seed(std::uint64_t parent, std::uint64_t stream);

// ---------------------------------------------------------------------------
// Methods

struct PlainCG {};
struct WarmRestartCG {};
struct JacobiCG {};
struct SsorCG {
    double omega = 1.0;
};
struct CompCG {
    DirectionStrategy strategy = DirectionStrategy::Subset;
    bool learning = true;
    bool mean_only = false;
};
using MethodSpec = std::variant<PlainCG, WarmRestartCG, JacobiCG, SsorCG, CompCG>;

/// Canonical label, e.g. "plain", "ssor:1.5", "compcg-subset+nolearn".
std::string method_name(const MethodSpec& method);
/// Inverse of method_name. Throws InputError on an unknown name.
MethodSpec parse_method(const std::string& name);

// ---------------------------------------------------------------------------

/// How theta enters the fill-distance space of the subset strategy.
/// Domain rescales it to [0, 1] with the eigenvalue range so that both axes
/// of the augmented space are unit-ranged; Raw uses theta as is.
enum class SubsetEmbedding { Domain, Raw };

struct SimConfig {
    Index d = 100;
    std::optional<Index> d_param;  // default min(40, d)
    int n_systems = 40;
    int n_runs = 10;
    ScalarKernel kernel{KernelFamily::Matern32, 1.0, 1.0};  // regression model
    std::optional<double> data_lengthscale;                   // sampled solutions; default kernel.lengthscale
    std::optional<Index> m;  // overrides alpha when set
    double alpha = 0.2;
    double tol_rel = 1e-5;
    int maxit = 0;  // 0: 10 * d
    std::uint64_t seed = 1;
    MethodSpec method = CompCG{};
    UpdatePolicy policy;
    double jitter = 1e-12;
    double eig_low = 0.8;  // tail eigenvalues and theta0 ~ U(eig_low, eig_high)
    double eig_high = 100.0;
    double step_scale = 0.05;
    bool timing = true;
    SubsetEmbedding subset_embedding = SubsetEmbedding::Domain;

    void validate() const;
    DirectionSpec direction_spec() const;
    Index resolved_d_param() const { return d_param ? *d_param : std::min<Index>(40, d); }
    ScalarKernel data_kernel() const;
    ParameterPoint subset_point(const ParameterPoint& theta) const;
    int resolved_maxit() const { return maxit > 0 ? maxit : static_cast<int>(10 * d); }
};

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix, columns signed by diag(R).
Matrix haar_orthogonal(Index d, Rng& rng);

/// theta_i = theta_{i-1} + step_scale * eps_i / i, eps_i ~ U(0,1)^{d'}, for i = 1..n.
std::vector<ParameterPoint> make_theta_walk(Index d_param, int n, const ParameterPoint& theta0, Rng& rng,
                                            double step_scale = 0.05);

/// A = U1 diag([theta; tail]) U1^T, symmetrized.
Matrix build_system(const ParameterPoint& theta, const Matrix& U1, const Vector& tail);

/// Joint draw of x(theta_1..n) from N(0, k(T,T) kron Sigma) under a tensor-product prior.
std::vector<Vector> sample_solutions_joint(const PriorCovariance& prior, const std::vector<ParameterPoint>& T,
                                           Rng& rng);

/// One generated problem sequence together with the sampled true solutions.
struct ProblemSequence {
    std::vector<LinearSystem> systems;
    std::vector<Vector> solutions;
};

/// The synthetic sequence for run `run` of `cfg`; independent of the method.
ProblemSequence generate_sequence(const SimConfig& cfg, int run);

// ---------------------------------------------------------------------------

struct SystemOutcome {
    int iterations = 0;
    int pre_iterations = 0;
    bool converged = false;
    bool fallback = false;  // pCG broke down or missed the true-residual contract; plain CG finished
    bool conditioning_failed = false;
    double wall_ms = 0.0;
    double relative_residual = 0.0;  // ||b - A x|| / ||b||
};

struct RunResult {
    int run = 0;
    std::vector<SystemOutcome> systems;
    double wall_ms = 0.0;
};

/// Solves the sequence with cfg.method; the companion model persists across systems.
RunResult run_sequence(const SimConfig& cfg, const std::vector<LinearSystem>& systems);

/// Runs cfg.n_runs independent sequences, optionally on `jobs` threads. Output order is by run.
std::vector<RunResult> run_experiment(const SimConfig& cfg, int jobs = 1);

// ---------------------------------------------------------------------------

struct SummaryRow {
    int system_index = 0;
    double iter_mean = 0.0;
    double iter_std = 0.0;  // population standard deviation
    int n_runs = 0;
};

struct Summary {
    std::string method;
    std::vector<SummaryRow> rows;
    double total_mean = 0.0;  // mean over runs of the total iterations across systems
};

Summary aggregate(const std::string& method, const std::vector<RunResult>& runs);

/// Shortest decimal that round-trips to the same double.
std::string format_number(double v);

inline constexpr const char* kRunsCsvHeader = "method,run,system_index,iterations,converged,wall_ms,pre_iters,fallback";
inline constexpr const char* kAggregateCsvHeader = "method,system_index,iter_mean,iter_std,n_runs";

/// Writes rows of the per-run CSV (no header). `prefix` is prepended to every row.
void write_runs_csv(std::ostream& out, const std::string& method, const std::vector<RunResult>& runs,
                    const std::string& prefix = {});
void write_aggregate_csv(std::ostream& out, const Summary& summary, const std::string& prefix = {});
void write_summary_table(std::ostream& out, const Summary& summary);

struct OutputSink {
    std::ostream* runs_csv = nullptr;
    std::ostream* aggregate_csv = nullptr;
    std::ostream* summary = nullptr;
};

/// Aggregates, writes both CSVs with headers and the summary table. Throws IoError if a stream fails.
Summary aggregate_and_emit(const std::string& method, const std::vector<RunResult>& runs, const OutputSink& sink);

}  // namespace compcg
