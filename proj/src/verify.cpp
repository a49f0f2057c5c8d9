#include "compcg/verify.hpp"

#include "compcg/companion.hpp"
#include "compcg/errors.hpp"
#include "compcg/harness.hpp"
#include "compcg/solvers.hpp"

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <functional>

namespace compcg {

namespace {

constexpr Index kDim = 20;
constexpr Index kCols = 5;
constexpr int kRecords = 3;
constexpr int kInstances = 5;

Matrix random_spd(Index d, Rng& rng) {
    std::normal_distribution<double> normal;
    Matrix g(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) g(i, j) = normal(rng);
    Matrix a = g * g.transpose() / static_cast<double>(d) + Matrix::Identity(d, d);
    return 0.5 * (a + a.transpose());
}

Matrix random_matrix(Index r, Index c, Rng& rng) {
    std::normal_distribution<double> normal;
    Matrix g(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) g(i, j) = normal(rng);
    return g;
}

struct Instance {
    Matrix sigma;
    ScalarKernel kernel{KernelFamily::Matern32, 1.0, 1.0};
    std::vector<ParameterPoint> thetas;
    std::vector<Matrix> A;
    std::vector<Matrix> S;
    std::vector<Vector> b;
    ParameterPoint fresh;  // not in the training set
};

Instance make_instance(Rng& rng) {
    Instance in;
    in.sigma = random_spd(kDim, rng);
    std::uniform_real_distribution<double> unif(0.0, 2.0);
    for (int i = 0; i < kRecords; ++i) {
        in.thetas.push_back(ParameterPoint{unif(rng), unif(rng)});
        in.A.push_back(random_spd(kDim, rng));
        in.S.push_back(random_matrix(kDim, kCols, rng));
        in.b.push_back(random_matrix(kDim, 1, rng).col(0));
    }
    in.fresh = ParameterPoint{unif(rng) + 3.0, unif(rng)};
    return in;
}

CompanionModel build(const Instance& in, int n) {
    CompanionModel model(ZeroMean{}, PriorCovariance::tensor_product(in.kernel, in.sigma), kDim, {}, 0.0);
    for (int i = 0; i < n; ++i) {
        model = model.condition(in.thetas[i], in.A[i], in.S[i], in.S[i].transpose() * in.b[i]);
    }
    return model;
}

double rel_frobenius(const Matrix& a, const Matrix& b) {
    const double scale = std::max(b.norm(), 1e-300);
    return (a - b).norm() / scale;
}

std::string fmt(const char* label, double value, double bound) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s %.3e (bound %.1e)", label, value, bound);
    return buf;
}

using Check = std::function<CheckResult(Rng&)>;

CheckResult check_cholesky(Rng& rng) {
    CheckResult res;
    double worst = 0.0;
    double worst_min_eig = 1.0;
    for (int t = 0; t < kInstances; ++t) {
        const Instance in = make_instance(rng);
        const CompanionModel model = build(in, kRecords);
        const Index M = kCols * kRecords;
        Matrix g(M, M);
        for (int i = 0; i < kRecords; ++i) {
            for (int j = 0; j < kRecords; ++j) {
                const Matrix wi = in.A[i].transpose() * in.S[i];
                const Matrix wj = in.A[j].transpose() * in.S[j];
                g.block(i * kCols, j * kCols, kCols, kCols) =
                    kernel_eval(in.kernel, in.thetas[i], in.thetas[j]) * wi.transpose() * in.sigma * wj;
            }
        }
        const Matrix& l = model.chol_g();
        worst = std::max(worst, rel_frobenius(l * l.transpose(), g));
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (g + g.transpose()));
        worst_min_eig = std::min(worst_min_eig, es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff());
    }
    res.passed = worst <= 1e-10 && worst_min_eig > 0.0;
    res.detail = fmt("max rel. error", worst, 1e-10);
    return res;
}

CheckResult check_full_rank(Rng& rng) {
    CheckResult res;
    double worst = 1.0;
    for (int t = 0; t < kInstances; ++t) {
        const Instance in = make_instance(rng);
        const CompanionModel model = build(in, kRecords);
        Eigen::SelfAdjointEigenSolver<Matrix> es(model.predict(in.fresh).dense());
        worst = std::min(worst, es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff());
    }
    res.passed = worst > 1e-10;
    res.detail = fmt("min lambda_min/lambda_max", worst, 1e-10);
    return res;
}

CheckResult check_null_space(Rng& rng) {
    CheckResult res;
    double worst = 0.0;
    bool rank_ok = true;
    for (int t = 0; t < kInstances; ++t) {
        const Instance in = make_instance(rng);
        const CompanionModel model = build(in, kRecords);
        const int n = kRecords - 1;
        const Matrix c = model.predict(in.thetas[n]).dense();
        const Matrix c0 = kernel_eval(in.kernel, in.thetas[n], in.thetas[n]) * in.sigma;
        worst = std::max(worst, (c * in.A[n].transpose() * in.S[n]).norm() / c0.norm());
        Eigen::SelfAdjointEigenSolver<Matrix> es(c);
        const double lmax = es.eigenvalues().maxCoeff();
        Index small = 0;
        for (Index i = 0; i < kDim; ++i) small += es.eigenvalues()(i) < 1e-10 * lmax ? 1 : 0;
        rank_ok = rank_ok && small == kCols;
    }
    res.passed = worst <= 1e-8 && rank_ok;
    res.detail = fmt("max ||C_n A^T S||_F / ||C_0||_F", worst, 1e-8) + (rank_ok ? "" : "; wrong null-space dimension");
    return res;
}

CheckResult check_mean_consistency(Rng& rng) {
    CheckResult res;
    double worst = 0.0;
    for (int t = 0; t < kInstances; ++t) {
        const Instance in = make_instance(rng);
        const CompanionModel model = build(in, kRecords);
        const int n = kRecords - 1;
        const Vector mean = model.predict(in.thetas[n]).mean();
        const Vector sb = in.S[n].transpose() * in.b[n];
        worst = std::max(worst, (in.S[n].transpose() * (in.A[n] * mean) - sb).norm() / sb.norm());
    }
    res.passed = worst <= 1e-8;
    res.detail = fmt("max relative gap", worst, 1e-8);
    return res;
}

CheckResult check_singular_pcg(Rng& rng) {
    CheckResult res;
    double worst = 0.0;
    bool all_converged = true;
    for (int t = 0; t < kInstances; ++t) {
        const Instance in = make_instance(rng);
        const CompanionModel model = build(in, kRecords);
        const int n = kRecords - 1;
        const auto dist = model.predict(in.thetas[n]);
        PcgOptions opts;
        opts.tol_rel = 1e-10;
        opts.maxit = static_cast<int>(kDim);
        const SolveReport rep = pcg(in.A[n], in.b[n], dist.mean(), covariance_preconditioner(dist), opts);
        const Vector exact = in.A[n].llt().solve(in.b[n]);
        all_converged = all_converged && rep.converged;
        worst = std::max(worst, (rep.x - exact).norm() / exact.norm());
    }
    res.passed = all_converged && worst <= 1e-8;
    res.detail = fmt("max relative error", worst, 1e-8) + (all_converged ? "" : "; not converged within d iterations");
    return res;
}

CheckResult check_iterative_update(Rng& rng) {
    CheckResult res;
    double worst = 0.0;
    for (int t = 0; t < kInstances; ++t) {
        const Instance in = make_instance(rng);
        const CompanionModel before = build(in, kRecords - 1);
        const CompanionModel after = build(in, kRecords);
        const int n = kRecords - 1;
        for (const auto& theta : {in.fresh, in.thetas[0]}) {
            const Matrix prev = before.predict(theta).dense();
            const Matrix w = in.A[n].transpose() * in.S[n];
            const Matrix prev_w = before.predict_cross(theta, in.thetas[n]) * w;
            const Matrix gram = w.transpose() * before.predict(in.thetas[n]).dense() * w;
            const Matrix updated = prev - prev_w * gram.ldlt().solve(prev_w.transpose());
            worst = std::max(worst, rel_frobenius(updated, after.predict(theta).dense()));
        }
    }
    res.passed = worst <= 1e-9;
    res.detail = fmt("max rel. error", worst, 1e-9);
    return res;
}

}  // namespace

std::vector<CheckResult> run_verification(std::uint64_t seed) {
    const std::vector<std::pair<const char*, Check>> checks = {
        {"Lemma 1 (Cholesky growth of G_n)", check_cholesky},
        {"Theorem 2 (full rank off the training set)", check_full_rank},
        {"Theorem 3 (null space at the newest point)", check_null_space},
        {"Theorem 4 (mean consistency)", check_mean_consistency},
        {"Theorem 5 (pCG with a singular preconditioner)", check_singular_pcg},
        {"Lemma 6 (iterative covariance update)", check_iterative_update},
    };
    std::vector<CheckResult> out;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        Rng rng(split_seed(seed, i));
        try {
            CheckResult r = checks[i].second(rng);
            r.name = checks[i].first;
            out.push_back(r);
        } catch (const std::exception& e) {
            out.push_back({checks[i].first, false, std::string("exception: ") + e.what()});
        }
    }
    return out;
}

}  // namespace compcg
