#include "compcg/errors.hpp"
#include "compcg/harness.hpp"

#include "random_fixtures.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <sstream>

using namespace compcg;

namespace {

SimConfig small_config(MethodSpec method) {
    SimConfig cfg;
    cfg.d = 20;
    cfg.d_param = 8;
    cfg.n_systems = 6;
    cfg.n_runs = 2;
    cfg.m = 5;
    cfg.method = method;
    cfg.timing = false;
    return cfg;
}

std::vector<LinearSystem> copies(const LinearSystem& sys, int n) { return std::vector<LinearSystem>(n, sys); }

}  // namespace

TEST(Seeds, SplitIsDeterministicAndDistinct) {
    EXPECT_EQ(split_seed(7, 3), split_seed(7, 3));
    EXPECT_NE(split_seed(7, 3), split_seed(7, 4));
    EXPECT_NE(split_seed(7, 3), split_seed(8, 3));
}

TEST(Haar, OneByOne) {
    Rng rng(1);
    const Matrix q = haar_orthogonal(1, rng);
    EXPECT_EQ(std::abs(q(0, 0)), 1.0);
}

TEST(Haar, OrthogonalAndDeterministic) {
    Rng a(5), b(5);
    const Matrix q = haar_orthogonal(50, a);
    EXPECT_LE((q.transpose() * q - Matrix::Identity(50, 50)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(q, haar_orthogonal(50, b));
    EXPECT_THROW(haar_orthogonal(0, a), InputError);
}

TEST(ThetaWalk, MonotoneWithShrinkingSteps) {
    Rng rng(2);
    const ParameterPoint start{1.0, 2.0, 3.0};
    const auto walk = make_theta_walk(3, 30, start, rng);
    ASSERT_EQ(walk.size(), 30u);
    Vector prev = start.coords();
    for (std::size_t i = 0; i < walk.size(); ++i) {
        const Vector step = walk[i].coords() - prev;
        EXPECT_GE(step.minCoeff(), 0.0);
        EXPECT_LE(step.maxCoeff(), 0.05 / static_cast<double>(i + 1) + 1e-15);
        prev = walk[i].coords();
    }
    Rng again(2);
    const auto walk2 = make_theta_walk(3, 30, start, again);
    for (std::size_t i = 0; i < walk.size(); ++i) EXPECT_EQ(walk[i], walk2[i]);
}

TEST(ThetaWalk, RejectsNonpositiveStart) {
    Rng rng(3);
    EXPECT_THROW(make_theta_walk(2, 3, ParameterPoint{1.0, 0.0}, rng), InputError);
    EXPECT_THROW(make_theta_walk(3, 3, ParameterPoint{1.0, 1.0}, rng), InputError);
}

TEST(BuildSystem, IdentityBasisGivesDiagonal) {
    Vector tail(2);
    tail << 4.0, 5.0;
    const Matrix a = build_system(ParameterPoint{1.0, 2.0, 3.0}, Matrix::Identity(5, 5), tail);
    Vector want(5);
    want << 1, 2, 3, 4, 5;
    EXPECT_EQ(a, Matrix(want.asDiagonal()));
}

TEST(BuildSystem, SpectrumAndSymmetry) {
    Rng rng(4);
    const Index d = 20;
    const Matrix u = haar_orthogonal(d, rng);
    std::uniform_real_distribution<double> eig(0.8, 100.0);
    Vector th(6), tail(d - 6);
    for (Index i = 0; i < 6; ++i) th(i) = eig(rng);
    for (Index i = 0; i < tail.size(); ++i) tail(i) = eig(rng);
    const Matrix a = build_system(ParameterPoint(th), u, tail);
    EXPECT_LE((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    Vector want(d);
    want << th, tail;
    std::sort(want.begin(), want.end());
    const Vector got = Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues();
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-10 * want.maxCoeff());
}

TEST(BuildSystem, RejectsNonpositiveEigenvalues) {
    Vector tail(1);
    tail << -1.0;
    EXPECT_THROW(build_system(ParameterPoint{1.0}, Matrix::Identity(2, 2), tail), InputError);
    tail << 1.0;
    EXPECT_THROW(build_system(ParameterPoint{0.0}, Matrix::Identity(2, 2), tail), InputError);
}

TEST(SampleSolutions, MonteCarloCovariance) {
    Rng rng(5);
    const Index d = 4;
    const Matrix sigma = fixtures::spd(d, rng);
    const ScalarKernel k{KernelFamily::Matern32, 1.0, 2.0};
    const auto prior = PriorCovariance::tensor_product(k, sigma);
    const std::vector<ParameterPoint> T{{0.3, 0.7}};
    const int draws = 10000;
    Matrix acc = Matrix::Zero(d, d);
    for (int i = 0; i < draws; ++i) {
        const auto x = sample_solutions_joint(prior, T, rng);
        ASSERT_EQ(x.size(), 1u);
        acc += x[0] * x[0].transpose();
    }
    acc /= draws;
    const Matrix c0 = 2.0 * sigma;
    EXPECT_LE((acc - c0).norm() / c0.norm(), 0.05);
}

TEST(SampleSolutions, JointCorrelationAcrossParameters) {
    Rng rng(6);
    const ScalarKernel k{KernelFamily::Matern32, 1.0, 1.0};
    const auto prior = PriorCovariance::identity_tensor_product(k, 1);
    const std::vector<ParameterPoint> T{{0.0}, {0.5}};
    const int draws = 20000;
    double cross = 0.0;
    for (int i = 0; i < draws; ++i) {
        const auto x = sample_solutions_joint(prior, T, rng);
        cross += x[0](0) * x[1](0);
    }
    EXPECT_NEAR(cross / draws, kernel_eval(k, T[0], T[1]), 0.03);
}

TEST(SampleSolutions, DegenerateAndErrors) {
    Rng rng(7);
    const auto tiny = PriorCovariance::identity_tensor_product(ScalarKernel{KernelFamily::Matern32, 1.0, 1e-30}, 5);
    for (const auto& x : sample_solutions_joint(tiny, {{0.0}, {1.0}}, rng)) EXPECT_LE(x.norm(), 1e-12);
    const auto prior = PriorCovariance::identity_tensor_product(ScalarKernel{}, 3);
    EXPECT_THROW(sample_solutions_joint(prior, {{0.5}, {0.5}}, rng), InputError);
    const auto nonsep = PriorCovariance::nonseparable(ScalarKernel{}, [](const ParameterPoint&) {
        return Matrix(Matrix::Identity(3, 3));
    });
    EXPECT_THROW(sample_solutions_joint(nonsep, {{0.5}}, rng), InputError);
    Rng a(9), b(9);
    const auto xa = sample_solutions_joint(prior, {{0.1}, {0.2}}, a);
    const auto xb = sample_solutions_joint(prior, {{0.1}, {0.2}}, b);
    EXPECT_EQ(xa[1], xb[1]);
}

TEST(GenerateSequence, ShapesAndConsistency) {
    const auto cfg = small_config(PlainCG{});
    const auto seq = generate_sequence(cfg, 0);
    ASSERT_EQ(seq.systems.size(), 6u);
    for (std::size_t i = 0; i < seq.systems.size(); ++i) {
        const auto& s = seq.systems[i];
        EXPECT_EQ(s.theta.dim(), 8);
        EXPECT_LE((s.A * seq.solutions[i] - s.b).norm(), 1e-10 * s.b.norm());
    }
    const auto again = generate_sequence(cfg, 0);
    EXPECT_EQ(again.systems[3].A, seq.systems[3].A);
    EXPECT_NE(generate_sequence(cfg, 1).systems[0].b, seq.systems[0].b);
}

TEST(RunSequence, PlainOnIdentitySystems) {
    auto cfg = small_config(PlainCG{});
    Rng rng(10);
    std::vector<LinearSystem> systems;
    for (int i = 0; i < 4; ++i) {
        systems.push_back({ParameterPoint{1.0 + i}, Matrix::Identity(20, 20), fixtures::gaussian_vec(20, rng)});
    }
    const auto res = run_sequence(cfg, systems);
    ASSERT_EQ(res.systems.size(), 4u);
    for (const auto& o : res.systems) {
        EXPECT_EQ(o.iterations, 1);
        EXPECT_TRUE(o.converged);
    }
}

TEST(RunSequence, WarmRestartOnRepeatedSystem) {
    auto cfg = small_config(WarmRestartCG{});
    Rng rng(11);
    const LinearSystem sys{ParameterPoint{1.0}, fixtures::spd(20, rng, 100.0), fixtures::gaussian_vec(20, rng)};
    const auto res = run_sequence(cfg, copies(sys, 5));
    EXPECT_GT(res.systems[0].iterations, 1);
    for (std::size_t i = 1; i < res.systems.size(); ++i) EXPECT_LE(res.systems[i].iterations, 1);
}

TEST(RunSequence, FullObservationRevisitNeedsNoIterations) {
    auto cfg = small_config(CompCG{DirectionStrategy::FullObservation, true, false});
    cfg.jitter = 0.0;
    Rng rng(12);
    const LinearSystem sys{ParameterPoint{0.5}, fixtures::spd(20, rng, 50.0), fixtures::gaussian_vec(20, rng)};
    const auto res = run_sequence(cfg, copies(sys, 3));
    EXPECT_GT(res.systems[0].iterations, 0);
    EXPECT_EQ(res.systems[1].iterations, 0);
    EXPECT_EQ(res.systems[2].iterations, 0);
}

TEST(RunSequence, EveryMethodMeetsResidualContract) {
    for (const char* name : {"plain", "warm", "jacobi", "ssor", "ssor:1.3", "compcg-subset", "compcg-subset+nolearn",
                             "compcg-subset+meanonly", "compcg-bayescg", "compcg-bayescg-id", "compcg-full"}) {
        auto cfg = small_config(parse_method(name));
        const auto seq = generate_sequence(cfg, 0);
        const auto res = run_sequence(cfg, seq.systems);
        for (std::size_t i = 0; i < res.systems.size(); ++i) {
            const auto& o = res.systems[i];
            if (!o.converged) continue;
            EXPECT_LE(o.relative_residual, cfg.tol_rel * (1 + 1e-8)) << name << " system " << i;
        }
        const int converged = static_cast<int>(std::count_if(res.systems.begin(), res.systems.end(),
                                                             [](const SystemOutcome& o) { return o.converged; }));
        EXPECT_EQ(converged, cfg.n_systems) << name;
    }
}

TEST(RunSequence, RejectsDimensionMismatch) {
    auto cfg = small_config(PlainCG{});
    const std::vector<LinearSystem> bad{{ParameterPoint{1.0}, Matrix::Identity(3, 3), Vector::Ones(3)}};
    EXPECT_THROW(run_sequence(cfg, bad), InputError);
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
    auto cfg = small_config(parse_method("compcg-subset"));
    cfg.n_runs = 4;
    const auto one = run_experiment(cfg, 1);
    const auto four = run_experiment(cfg, 4);
    ASSERT_EQ(one.size(), four.size());
    for (std::size_t r = 0; r < one.size(); ++r) {
        EXPECT_EQ(one[r].run, static_cast<int>(r));
        for (std::size_t i = 0; i < one[r].systems.size(); ++i) {
            EXPECT_EQ(one[r].systems[i].iterations, four[r].systems[i].iterations);
        }
    }
}

TEST(Aggregate, PopulationStatistics) {
    RunResult a, b;
    a.run = 0;
    b.run = 1;
    SystemOutcome o;
    o.iterations = 10;
    a.systems.push_back(o);
    o.iterations = 20;
    b.systems.push_back(o);
    const auto s = aggregate("plain", {a, b});
    ASSERT_EQ(s.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(s.rows[0].iter_mean, 15.0);
    EXPECT_DOUBLE_EQ(s.rows[0].iter_std, 5.0);
    EXPECT_EQ(s.rows[0].n_runs, 2);
    EXPECT_DOUBLE_EQ(s.total_mean, 15.0);
}

TEST(Aggregate, SingleRunAndConstantCounts) {
    RunResult a;
    for (int i = 0; i < 3; ++i) {
        SystemOutcome o;
        o.iterations = 7 + i;
        a.systems.push_back(o);
    }
    for (const auto& row : aggregate("m", {a}).rows) EXPECT_EQ(row.iter_std, 0.0);
    RunResult b = a;
    b.run = 1;
    const auto s = aggregate("m", {a, b});
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(s.rows[i].iter_mean, 7.0 + static_cast<double>(i));
        EXPECT_EQ(s.rows[i].iter_std, 0.0);
    }
}

TEST(Emit, CsvHeadersAndDeterminism) {
    auto cfg = small_config(parse_method("compcg-subset"));
    auto emit = [&] {
        std::ostringstream runs, agg, summary;
        aggregate_and_emit("compcg-subset", run_experiment(cfg, 2), {&runs, &agg, &summary});
        return std::make_tuple(runs.str(), agg.str(), summary.str());
    };
    const auto [runs, agg, summary] = emit();
    EXPECT_EQ(runs.substr(0, runs.find('\n')), kRunsCsvHeader);
    EXPECT_EQ(agg.substr(0, agg.find('\n')), kAggregateCsvHeader);
    EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 1 + cfg.n_runs * cfg.n_systems);
    EXPECT_EQ(std::count(agg.begin(), agg.end(), '\n'), 1 + cfg.n_systems);
    EXPECT_FALSE(summary.empty());
    const auto [runs2, agg2, summary2] = emit();
    EXPECT_EQ(runs, runs2);
    EXPECT_EQ(agg, agg2);
}

TEST(Emit, FailingStreamIsIoError) {
    std::ostringstream runs;
    runs.setstate(std::ios::badbit);
    RunResult r;
    r.systems.push_back({});
    EXPECT_THROW(aggregate_and_emit("plain", {r}, {&runs, nullptr, nullptr}), IoError);
}

TEST(FormatNumber, ShortestRoundTrip) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(15.0), "15");
    EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333333333");
}

TEST(Methods, NameRoundTrip) {
    for (const char* name : {"plain", "warm", "jacobi", "ssor", "ssor:1.5", "compcg-subset", "compcg-bayescg",
                             "compcg-bayescg-id", "compcg-full", "compcg-subset+nolearn", "compcg-subset+meanonly",
                             "compcg-bayescg+nolearn+meanonly"}) {
        EXPECT_EQ(method_name(parse_method(name)), name);
    }
    EXPECT_THROW(parse_method("gmres"), InputError);
    EXPECT_THROW(parse_method("ssor:3"), InputError);
    EXPECT_THROW(parse_method("compcg-subset+fast"), InputError);
}

TEST(SimConfigValidation, Rejections) {
    auto ok = small_config(PlainCG{});
    EXPECT_NO_THROW(ok.validate());
    auto c = ok;
    c.d_param = 21;
    EXPECT_THROW(c.validate(), InputError);
    c = ok;
    c.n_systems = 0;
    EXPECT_THROW(c.validate(), InputError);
    c = ok;
    c.tol_rel = 0.0;
    EXPECT_THROW(c.validate(), InputError);
    c = ok;
    c.kernel.lengthscale = -1.0;
    EXPECT_THROW(c.validate(), InputError);
    c = ok;
    c.m = 21;
    EXPECT_THROW(c.validate(), InputError);
}

TEST(SimConfigValidation, DefaultsResolve) {
    SimConfig c;
    EXPECT_EQ(c.resolved_d_param(), 40);
    EXPECT_EQ(c.resolved_maxit(), 1000);
    c.d = 20;
    EXPECT_EQ(c.resolved_d_param(), 20);
    EXPECT_EQ(c.direction_spec().columns(100), 20);
    const auto p = c.subset_point(ParameterPoint{c.eig_low, c.eig_high});
    EXPECT_DOUBLE_EQ(p[0], 0.0);
    EXPECT_DOUBLE_EQ(p[1], 1.0);
}

TEST(RunSequence, BoundedModelKeepsConverging) {
    auto cfg = small_config(parse_method("compcg-subset"));
    cfg.n_systems = 10;
    cfg.policy.max_records = 2;
    const auto seq = generate_sequence(cfg, 0);
    for (const auto& o : run_sequence(cfg, seq.systems).systems) {
        EXPECT_TRUE(o.converged);
        EXPECT_FALSE(o.conditioning_failed);
    }
}
