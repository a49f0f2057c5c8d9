#include "compcg/harness.hpp"

#include "compcg/errors.hpp"
#include "compcg/solvers.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace compcg {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t split_seed(std::uint64_t parent, std::uint64_t stream) {
    return mix_seed(mix_seed(parent) ^ mix_seed(stream + 0x632be59bd9b4e019ull));
}

// ---------------------------------------------------------------------------

namespace {

const char* strategy_name(DirectionStrategy s) {
    switch (s) {
        case DirectionStrategy::Subset: return "subset";
        case DirectionStrategy::BayesCG: return "bayescg";
        case DirectionStrategy::BayesCGId: return "bayescg-id";
        case DirectionStrategy::FullObservation: return "full";
    }
    return "?";
}

}  // namespace

std::string method_name(const MethodSpec& method) {
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PlainCG>) {
                return "plain";
            } else if constexpr (std::is_same_v<T, WarmRestartCG>) {
                return "warm";
            } else if constexpr (std::is_same_v<T, JacobiCG>) {
                return "jacobi";
            } else if constexpr (std::is_same_v<T, SsorCG>) {
                return m.omega == 1.0 ? std::string("ssor") : "ssor:" + format_number(m.omega);
            } else {
                std::string s = std::string("compcg-") + strategy_name(m.strategy);
                if (!m.learning) s += "+nolearn";
                if (m.mean_only) s += "+meanonly";
                return s;
            }
        },
        method);
}

MethodSpec parse_method(const std::string& name) {
    if (name == "plain") return PlainCG{};
    if (name == "warm") return WarmRestartCG{};
    if (name == "jacobi") return JacobiCG{};
    if (name == "ssor") return SsorCG{1.0};
    if (name.rfind("ssor:", 0) == 0) {
        const std::string tail = name.substr(5);
        double omega = 0.0;
        auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), omega);
        if (ec != std::errc() || ptr != tail.data() + tail.size()) throw InputError("unknown method '" + name + "'");
        if (!(omega > 0.0 && omega < 2.0)) throw InputError("ssor omega must lie in (0, 2)");
        return SsorCG{omega};
    }
    if (name.rfind("compcg-", 0) == 0) {
        std::string rest = name.substr(7);
        CompCG c;
        std::vector<std::string> parts;
        std::stringstream ss(rest);
        std::string part;
        while (std::getline(ss, part, '+')) parts.push_back(part);
        if (parts.empty()) throw InputError("unknown method '" + name + "'");
        const std::string& s = parts.front();
        if (s == "subset") c.strategy = DirectionStrategy::Subset;
        else if (s == "bayescg") c.strategy = DirectionStrategy::BayesCG;
        else if (s == "bayescg-id") c.strategy = DirectionStrategy::BayesCGId;
        else if (s == "full") c.strategy = DirectionStrategy::FullObservation;
        else throw InputError("unknown method '" + name + "'");
        for (std::size_t i = 1; i < parts.size(); ++i) {
            if (parts[i] == "nolearn") c.learning = false;
            else if (parts[i] == "meanonly") c.mean_only = true;
            else throw InputError("unknown method modifier '" + parts[i] + "' in '" + name + "'");
        }
        return c;
    }
    throw InputError("unknown method '" + name + "'");
}

// ---------------------------------------------------------------------------

void SimConfig::validate() const {
    if (d < 1) throw InputError("d must be positive");
    if (d_param && (*d_param < 1 || *d_param > d)) throw InputError("d_param must lie in [1, d]");
    if (n_systems < 1) throw InputError("n_systems must be at least 1");
    if (n_runs < 1) throw InputError("n_runs must be at least 1");
    kernel.validate();
    if (!(tol_rel > 0.0)) throw InputError("tol_rel must be positive");
    if (maxit < 0) throw InputError("maxit must be nonnegative");
    if (!(eig_low > 0.0) || !(eig_high > eig_low)) throw InputError("eigenvalue range must satisfy 0 < eig_low < eig_high");
    if (!(jitter >= 0.0)) throw InputError("jitter must be nonnegative");
    if (data_lengthscale && !(*data_lengthscale > 0.0)) throw InputError("data_lengthscale must be positive");
    if (!(step_scale >= 0.0)) throw InputError("step_scale must be nonnegative");
    policy.validate();
    direction_spec().columns(d);
    if (const auto* s = std::get_if<SsorCG>(&method)) {
        if (!(s->omega > 0.0 && s->omega < 2.0)) throw InputError("ssor omega must lie in (0, 2)");
    }
}

DirectionSpec SimConfig::direction_spec() const {
    DirectionSpec spec;
    if (const auto* c = std::get_if<CompCG>(&method)) spec.strategy = c->strategy;
    if (m) {
        spec.m = *m;
        spec.alpha.reset();
    } else {
        spec.alpha = alpha;
    }
    return spec;
}

ScalarKernel SimConfig::data_kernel() const {
    ScalarKernel k = kernel;
    if (data_lengthscale) k.lengthscale = *data_lengthscale;
    return k;
}

ParameterPoint SimConfig::subset_point(const ParameterPoint& theta) const {
    if (subset_embedding == SubsetEmbedding::Raw) return theta;
    return ParameterPoint(Vector((theta.coords().array() - eig_low) / (eig_high - eig_low)));
}

Matrix haar_orthogonal(Index d, Rng& rng) {
    if (d < 1) throw InputError("haar_orthogonal: d must be positive");
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(d, d);
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < d; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const auto r = qr.matrixQR().diagonal();
    for (Index j = 0; j < d; ++j) {
        if (r(j) < 0.0) q.col(j) *= -1.0;
    }
    return q;
}

std::vector<ParameterPoint> make_theta_walk(Index d_param, int n, const ParameterPoint& theta0, Rng& rng,
                                            double step_scale) {
    if (theta0.dim() != d_param) throw InputError("make_theta_walk: theta0 has the wrong dimension");
    if (!(theta0.coords().array() > 0.0).all()) throw InputError("make_theta_walk: theta0 must be positive");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<ParameterPoint> out;
    out.reserve(static_cast<std::size_t>(std::max(n, 0)));
    Vector theta = theta0.coords();
    for (int i = 1; i <= n; ++i) {
        for (Index j = 0; j < d_param; ++j) theta(j) += step_scale * unif(rng) / static_cast<double>(i);
        out.emplace_back(theta);
    }
    return out;
}

Matrix build_system(const ParameterPoint& theta, const Matrix& U1, const Vector& tail) {
    const Index d = U1.rows();
    if (U1.cols() != d || theta.dim() + tail.size() != d) throw InputError("build_system: dimension mismatch");
    Vector eig(d);
    eig << theta.coords(), tail;
    if (!(eig.array() > 0.0).all()) throw InputError("build_system: eigenvalues must be positive");
    Matrix a = U1 * eig.asDiagonal() * U1.transpose();
    return 0.5 * (a + a.transpose());
}

std::vector<Vector> sample_solutions_joint(const PriorCovariance& prior, const std::vector<ParameterPoint>& T,
                                           Rng& rng) {
    const auto* tp = std::get_if<TensorProductPrior>(&prior.variant());
    if (!tp) throw InputError("sample_solutions_joint: requires a tensor-product prior");
    const Index n = static_cast<Index>(T.size());
    const Index d = tp->sigma.rows();
    if (n == 0) return {};
    Eigen::LLT<Matrix> kchol(kernel_matrix(tp->kernel, T, T));
    if (kchol.info() != Eigen::Success) {
        throw InputError("sample_solutions_joint: kernel matrix is not positive definite (duplicate parameters?)");
    }
    Eigen::LLT<Matrix> schol(tp->sigma);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(d, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < d; ++i) z(i, j) = normal(rng);
    // X = L_Sigma Z L_K^T has vec covariance k(T,T) kron Sigma.
    const Matrix x = Matrix(schol.matrixL()) * z * Matrix(kchol.matrixL()).transpose();
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) out.emplace_back(x.col(j));
    return out;
}

ProblemSequence generate_sequence(const SimConfig& cfg, int run) {
    cfg.validate();
    const std::uint64_t run_seed = split_seed(cfg.seed, static_cast<std::uint64_t>(run));
    Rng rng_basis(split_seed(run_seed, 1));
    Rng rng_tail(split_seed(run_seed, 2));
    Rng rng_walk(split_seed(run_seed, 3));
    Rng rng_solutions(split_seed(run_seed, 4));

    const Matrix U1 = haar_orthogonal(cfg.d, rng_basis);
    std::uniform_real_distribution<double> eig(cfg.eig_low, cfg.eig_high);
    const Index d_param = cfg.resolved_d_param();
    Vector tail(cfg.d - d_param);
    for (Index i = 0; i < tail.size(); ++i) tail(i) = eig(rng_tail);
    Vector theta0(d_param);
    for (Index i = 0; i < d_param; ++i) theta0(i) = eig(rng_walk);
    const auto thetas = make_theta_walk(d_param, cfg.n_systems, ParameterPoint(theta0), rng_walk, cfg.step_scale);

    const auto prior = PriorCovariance::identity_tensor_product(cfg.data_kernel(), cfg.d);
    // Repeated parameters (step_scale = 0) share one draw: the joint law is perfectly correlated there.
    std::vector<ParameterPoint> distinct;
    std::vector<std::size_t> slot(thetas.size());
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        const auto it = std::find(distinct.begin(), distinct.end(), thetas[i]);
        slot[i] = static_cast<std::size_t>(it - distinct.begin());
        if (it == distinct.end()) distinct.push_back(thetas[i]);
    }
    const auto draws = sample_solutions_joint(prior, distinct, rng_solutions);
    ProblemSequence seq;
    for (const std::size_t k : slot) seq.solutions.push_back(draws[k]);
    seq.systems.reserve(thetas.size());
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        Matrix a = build_system(thetas[i], U1, tail);
        Vector b = a * seq.solutions[i];
        seq.systems.push_back(LinearSystem{thetas[i], std::move(a), std::move(b)});
    }
    return seq;
}

// ---------------------------------------------------------------------------

namespace {

struct Observation {
    Matrix W;
    Vector y;
    SubsetHistory picks;  // subset strategy only
    int pre_iterations = 0;
};

Observation observe(DirectionStrategy strategy, const LinearSystem& sys, Index m, const CompanionModel& base,
                    const SubsetHistory& history, const ParameterPoint& embedded) {
    Observation obs;
    const Index d = sys.A.rows();
    switch (strategy) {
        case DirectionStrategy::Subset: {
            // Fill distance is measured against every coordinate already in the model.
            SubsetHistory combined = history;
            const auto before = combined.size();
            const auto idx = subset_directions(d, m, embedded, combined);
            obs.picks.assign(combined.begin() + static_cast<std::ptrdiff_t>(before), combined.end());
            obs.W.resize(d, m);
            obs.y.resize(m);
            for (Index j = 0; j < m; ++j) {
                const Index row = idx[static_cast<std::size_t>(j)];
                obs.W.col(j) = sys.A.row(row).transpose();  // A^T e_row
                obs.y(j) = sys.b(row);
            }
            break;
        }
        case DirectionStrategy::BayesCG: {
            const auto prior = base.predict(sys.theta);
            const auto run = bayescg_run(sys.A, sys.b, prior.mean(), [&prior](const Vector& v) { return prior.apply(v); }, m);
            obs.pre_iterations = static_cast<int>(run.S.cols());
            obs.W = sys.A.transpose() * run.S;
            obs.y = run.S.transpose() * sys.b;
            break;
        }
        case DirectionStrategy::BayesCGId: {
            const Matrix s = bayescg_id_directions(sys.A, sys.b, m);
            obs.pre_iterations = static_cast<int>(s.cols());
            obs.W = sys.A.transpose() * s;
            obs.y = s.transpose() * sys.b;
            break;
        }
        case DirectionStrategy::FullObservation: {
            auto full = full_solution_observation(sys.A, sys.b);
            obs.W = std::move(full.W);
            obs.y = std::move(full.y);
            break;
        }
    }
    return obs;
}

}  // namespace

RunResult run_sequence(const SimConfig& cfg, const std::vector<LinearSystem>& systems) {
    cfg.validate();
    const Index d = cfg.d;
    const Index m = cfg.direction_spec().columns(d);
    PcgOptions opts;
    opts.tol_rel = cfg.tol_rel;
    opts.maxit = cfg.resolved_maxit();

    const auto prior = PriorCovariance::identity_tensor_product(cfg.kernel, d);
    CompanionModel model(ZeroMean{}, prior, d, cfg.policy, cfg.jitter);
    SubsetHistory history;
    std::vector<SolveReport> reports;
    reports.reserve(systems.size());
    Vector previous_x;

    RunResult result;
    result.systems.reserve(systems.size());
    const auto run_start = std::chrono::steady_clock::now();

    for (const auto& sys : systems) {
        if (sys.A.rows() != d || sys.A.cols() != d || sys.b.size() != d) {
            throw InputError("run_sequence: system dimension does not match the configuration");
        }
        const auto t0 = std::chrono::steady_clock::now();
        SystemOutcome outcome;
        Vector x0 = Vector::Zero(d);
        Preconditioner P = Preconditioner::identity();

        const auto* comp = std::get_if<CompCG>(&cfg.method);
        std::optional<Observation> obs;
        std::optional<CompanionModel> candidate;
        SubsetHistory candidate_history;

        if (std::holds_alternative<WarmRestartCG>(cfg.method)) {
            if (previous_x.size() == d) x0 = previous_x;
        } else if (std::holds_alternative<JacobiCG>(cfg.method)) {
            P = jacobi_preconditioner(sys.A);
        } else if (const auto* s = std::get_if<SsorCG>(&cfg.method)) {
            P = ssor_preconditioner(sys.A, s->omega);
        } else if (comp) {
            const CompanionModel base = comp->learning ? model : model.reset();
            candidate_history = comp->learning ? history : SubsetHistory{};
            if (comp->strategy != DirectionStrategy::FullObservation) {
                obs = observe(comp->strategy, sys, m, base, candidate_history, cfg.subset_point(sys.theta));
                outcome.pre_iterations = obs->pre_iterations;
                candidate_history.insert(candidate_history.end(), obs->picks.begin(), obs->picks.end());
            }

            CompanionModel conditioned = base;
            if (obs && obs->W.cols() > 0) {
                try {
                    conditioned = base.condition_projected(sys.theta, obs->W, obs->y);
                } catch (const ConditioningError&) {
                    outcome.conditioning_failed = true;
                }
            }
            const auto dist = conditioned.predict(sys.theta);
            x0 = dist.mean();
            if (!comp->mean_only) P = covariance_preconditioner(dist);
            if (comp->strategy != DirectionStrategy::FullObservation && !outcome.conditioning_failed) {
                candidate = std::move(conditioned);
            }
        }

        SolveReport rep = pcg(sys.A, sys.b, x0, P, opts);
        const double bnorm = sys.b.norm();
        auto rel_residual = [&](const Vector& x) {
            const double rn = (sys.b - sys.A * x).norm();
            return bnorm > 0.0 ? rn / bnorm : rn;
        };
        double rel = rel_residual(rep.x);
        const bool contract_ok = rep.converged && rel <= cfg.tol_rel * (1.0 + 1e-8);
        if (rep.breakdown || (rep.converged && !contract_ok)) {
            PcgOptions fb = opts;
            fb.maxit = std::max(0, opts.maxit - rep.iterations);
            SolveReport plain = pcg(sys.A, sys.b, rep.x, Preconditioner::identity(), fb);
            plain.iterations += rep.iterations;
            rep = std::move(plain);
            rel = rel_residual(rep.x);
            outcome.fallback = true;
        }
        outcome.iterations = rep.iterations;
        outcome.converged = rep.converged && rel <= cfg.tol_rel * (1.0 + 1e-8);
        outcome.relative_residual = rel;

        if (comp) {
            if (comp->strategy == DirectionStrategy::FullObservation && comp->learning) {
                obs = observe(DirectionStrategy::FullObservation, sys, m, model, history, sys.theta);
                try {
                    candidate = model.condition_projected(sys.theta, obs->W, obs->y);
                } catch (const ConditioningError&) {
                    outcome.conditioning_failed = true;
                }
            }
            const UpdateAction action =
                comp->learning ? decide_update(cfg.policy, rep, reports) : UpdateAction::Skip;
            if (action == UpdateAction::Update && candidate) {
                model = std::move(*candidate);
                history = std::move(candidate_history);
                // Truncation drops the oldest records; drop their picks too (m per subset record).
                const auto keep = model.size() * static_cast<std::size_t>(m);
                if (history.size() > keep) history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(keep));
            } else if (action == UpdateAction::Reset) {
                model = model.reset();
                history.clear();
                if (obs && obs->W.cols() > 0) {
                    try {
                        model = model.condition_projected(sys.theta, obs->W, obs->y);
                        history = obs->picks;
                    } catch (const ConditioningError&) {
                        outcome.conditioning_failed = true;
                    }
                }
            }
        }
        previous_x = rep.x;
        reports.push_back(std::move(rep));

        if (cfg.timing) {
            outcome.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        }
        result.systems.push_back(outcome);
    }
    if (cfg.timing) {
        result.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - run_start).count();
    }
    return result;
}

std::vector<RunResult> run_experiment(const SimConfig& cfg, int jobs) {
    cfg.validate();
    std::vector<RunResult> results(static_cast<std::size_t>(cfg.n_runs));
    auto one = [&](int r) {
        const auto seq = generate_sequence(cfg, r);
        RunResult res = run_sequence(cfg, seq.systems);
        res.run = r;
        results[static_cast<std::size_t>(r)] = std::move(res);
    };
    jobs = std::max(1, std::min(jobs, cfg.n_runs));
    if (jobs == 1) {
        for (int r = 0; r < cfg.n_runs; ++r) one(r);
        return results;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (int t = 0; t < jobs; ++t) {
        workers.emplace_back([&] {
            for (int r = next++; r < cfg.n_runs; r = next++) {
                try {
                    one(r);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

// ---------------------------------------------------------------------------

Summary aggregate(const std::string& method, const std::vector<RunResult>& runs) {
    Summary s;
    s.method = method;
    if (runs.empty()) return s;
    const std::size_t n_sys = runs.front().systems.size();
    for (const auto& r : runs) {
        if (r.systems.size() != n_sys) throw InputError("aggregate: runs have different sequence lengths");
    }
    const double n = static_cast<double>(runs.size());
    for (std::size_t i = 0; i < n_sys; ++i) {
        double sum = 0.0;
        for (const auto& r : runs) sum += r.systems[i].iterations;
        const double mean = sum / n;
        double var = 0.0;
        for (const auto& r : runs) {
            const double dev = r.systems[i].iterations - mean;
            var += dev * dev;
        }
        s.rows.push_back(SummaryRow{static_cast<int>(i) + 1, mean, std::sqrt(var / n), static_cast<int>(runs.size())});
    }
    long long total = 0;
    for (const auto& r : runs) {
        for (const auto& o : r.systems) total += o.iterations;
    }
    s.total_mean = static_cast<double>(total) / n;
    return s;
}

std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

void write_runs_csv(std::ostream& out, const std::string& method, const std::vector<RunResult>& runs,
                    const std::string& prefix) {
    for (const auto& r : runs) {
        for (std::size_t i = 0; i < r.systems.size(); ++i) {
            const auto& o = r.systems[i];
            out << prefix << method << ',' << r.run << ',' << (i + 1) << ',' << o.iterations << ','
                << (o.converged ? 1 : 0) << ',' << format_number(o.wall_ms) << ',' << o.pre_iterations << ','
                << (o.fallback ? 1 : 0) << '\n';
        }
    }
    if (!out) throw IoError("failed writing run CSV");
}

void write_aggregate_csv(std::ostream& out, const Summary& summary, const std::string& prefix) {
    for (const auto& row : summary.rows) {
        out << prefix << summary.method << ',' << row.system_index << ',' << format_number(row.iter_mean) << ','
            << format_number(row.iter_std) << ',' << row.n_runs << '\n';
    }
    if (!out) throw IoError("failed writing aggregate CSV");
}

void write_summary_table(std::ostream& out, const Summary& summary) {
    out << "method: " << summary.method << '\n';
    out << std::setw(8) << "system" << std::setw(14) << "iter_mean" << std::setw(14) << "iter_std" << '\n';
    for (const auto& row : summary.rows) {
        out << std::setw(8) << row.system_index << std::setw(14) << format_number(row.iter_mean) << std::setw(14)
            << format_number(row.iter_std) << '\n';
    }
    out << "total iterations (mean over runs): " << format_number(summary.total_mean) << '\n';
    if (!out) throw IoError("failed writing summary table");
}

Summary aggregate_and_emit(const std::string& method, const std::vector<RunResult>& runs, const OutputSink& sink) {
    Summary s = aggregate(method, runs);
    if (sink.runs_csv) {
        *sink.runs_csv << kRunsCsvHeader << '\n';
        write_runs_csv(*sink.runs_csv, method, runs);
    }
    if (sink.aggregate_csv) {
        *sink.aggregate_csv << kAggregateCsvHeader << '\n';
        write_aggregate_csv(*sink.aggregate_csv, s);
    }
    if (sink.summary) write_summary_table(*sink.summary, s);
    return s;
}

}  // namespace compcg
