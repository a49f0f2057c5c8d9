#include "compcg/directions.hpp"
#include "compcg/errors.hpp"

#include "oracle.hpp"
#include "random_fixtures.hpp"

#include <gtest/gtest.h>

#include <Eigen/QR>

#include <numeric>

using namespace compcg;

namespace {

/// Brute-force greedy max-min, kept deliberately naive.
std::vector<Index> brute_subset(Index d, Index m, const ParameterPoint& theta, const SubsetHistory& history) {
    std::vector<std::pair<Index, ParameterPoint>> pts(history.begin(), history.end());
    std::vector<Index> out;
    for (Index k = 0; k < m; ++k) {
        Index best = -1;
        double best_val = -1.0;
        for (Index c = 0; c < d; ++c) {
            if (std::find(out.begin(), out.end(), c) != out.end()) continue;
            double mn = std::numeric_limits<double>::infinity();
            for (const auto& [pi, pt] : pts) {
                const double di = static_cast<double>(c - pi) / static_cast<double>(d);
                mn = std::min(mn, di * di + (theta.coords() - pt.coords()).squaredNorm());
            }
            if (mn > best_val) {
                best_val = mn;
                best = c;
            }
        }
        out.push_back(best);
        pts.emplace_back(best, theta);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Index rank_of(const Matrix& m) {
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    qr.setThreshold(1e-10);
    return qr.rank();
}

}  // namespace

TEST(DirectionSpec, ResolvesColumns) {
    DirectionSpec s;
    EXPECT_EQ(s.columns(100), 20);
    EXPECT_EQ(s.columns(11), 3);  // ceil(2.2)
    s.alpha.reset();
    s.m = 7;
    EXPECT_EQ(s.columns(10), 7);
}

TEST(DirectionSpec, RejectsInvalid) {
    DirectionSpec both;
    both.m = 3;
    EXPECT_THROW(both.columns(10), InputError);
    DirectionSpec none;
    none.alpha.reset();
    EXPECT_THROW(none.columns(10), InputError);
    DirectionSpec big;
    big.alpha.reset();
    big.m = 11;
    EXPECT_THROW(big.columns(10), InputError);
    DirectionSpec bad_alpha;
    bad_alpha.alpha = 1.5;
    EXPECT_THROW(bad_alpha.columns(10), InputError);
}

TEST(Subset, AllCoordinatesWhenMEqualsD) {
    SubsetHistory h;
    std::vector<Index> want(6);
    std::iota(want.begin(), want.end(), 0);
    EXPECT_EQ(subset_directions(6, 6, {0.0}, h), want);
    EXPECT_EQ(h.size(), 6u);
}

TEST(Subset, EmptyHistoryFirstPickIsZero) {
    SubsetHistory h;
    EXPECT_EQ(subset_directions(5, 1, {1.0, 2.0}, h), std::vector<Index>{0});
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h[0].first, 0);
}

TEST(Subset, HandWorkedFourCoordinates) {
    SubsetHistory h{{0, ParameterPoint{0.5}}};
    const auto idx = subset_directions(4, 2, {0.5}, h);
    EXPECT_EQ(idx, (std::vector<Index>{1, 3}));
    // Order of selection: 3 first, then 1.
    ASSERT_EQ(h.size(), 3u);
    EXPECT_EQ(h[1].first, 3);
    EXPECT_EQ(h[2].first, 1);
}

TEST(Subset, MatchesBruteForceGreedy) {
    fixtures::Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const Index d = 5 + t % 12;
        SubsetHistory h;
        for (int step = 0; step < 4; ++step) {
            const auto th = fixtures::theta(2, rng, 0, 0.1);
            const Index m = 1 + (t + step) % d;
            const auto ref = brute_subset(d, m, th, h);
            EXPECT_EQ(subset_directions(d, m, th, h), ref);
        }
    }
}

TEST(Subset, DeterministicAndValidated) {
    SubsetHistory h1{{2, ParameterPoint{0.1}}}, h2 = h1;
    EXPECT_EQ(subset_directions(9, 4, {0.3}, h1), subset_directions(9, 4, {0.3}, h2));
    SubsetHistory h;
    EXPECT_THROW(subset_directions(4, 5, {0.0}, h), InputError);
    EXPECT_THROW(subset_directions(4, 0, {0.0}, h), InputError);
}

TEST(Subset, SelectionMatrixHasFullRank) {
    SubsetHistory h;
    const auto idx = subset_directions(16, 5, {0.0}, h);
    const Matrix S = selection_matrix(16, idx);
    EXPECT_EQ(rank_of(S), 5);
    for (std::size_t j = 0; j < idx.size(); ++j) EXPECT_EQ(S(idx[j], static_cast<Index>(j)), 1.0);
    EXPECT_EQ(S.sum(), 5.0);
}

TEST(BayesCG, FirstColumnIsNormalizedResidual) {
    fixtures::Rng rng(4);
    const Matrix A = fixtures::spd(6, rng);
    const Matrix sigma = fixtures::spd(6, rng);
    const Vector b = fixtures::gaussian_vec(6, rng);
    const Vector x0 = fixtures::gaussian_vec(6, rng);
    const Matrix S = bayescg_directions(A, b, x0, [&](const Vector& v) { return Vector(sigma * v); }, 3);
    const Vector r0 = b - A * x0;
    const double nrm = std::sqrt(r0.dot(A * sigma * A * r0));
    EXPECT_LE((S.col(0) - r0 / nrm).norm(), 1e-12 * S.col(0).norm());
}

TEST(BayesCG, IdentityCovarianceMatchesIdVariant) {
    fixtures::Rng rng(5);
    const Matrix A = fixtures::spd(8, rng);
    const Vector b = fixtures::gaussian_vec(8, rng);
    const Matrix a = bayescg_directions(A, b, Vector::Zero(8), [](const Vector& v) { return v; }, 5);
    const Matrix c = bayescg_id_directions(A, b, 5);
    EXPECT_LE(oracle::rel_diff(a, c), 1e-12);
}

TEST(BayesCG, IdFirstColumnParallelToRhs) {
    fixtures::Rng rng(6);
    const Matrix A = fixtures::spd(7, rng);
    const Vector b = fixtures::gaussian_vec(7, rng);
    const Matrix S = bayescg_id_directions(A, b, 3);
    const Vector s0 = S.col(0);
    EXPECT_NEAR(std::abs(s0.dot(b)) / (s0.norm() * b.norm()), 1.0, 1e-12);
    EXPECT_GT(s0.dot(b), 0.0);
}

TEST(BayesCG, IdentitySystemGivesEuclideanOrthonormal) {
    fixtures::Rng rng(7);
    const Vector b = fixtures::gaussian_vec(6, rng);
    // A = I and Sigma = I: after one step the mean is exact, so at most one column.
    const Matrix S = bayescg_id_directions(Matrix::Identity(6, 6), b, 4);
    ASSERT_GE(S.cols(), 1);
    EXPECT_LE((S.transpose() * S - Matrix::Identity(S.cols(), S.cols())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BayesCG, OrthonormalInPriorInnerProduct) {
    fixtures::Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const Index d = 6 + t % 10;
        const Matrix A = fixtures::spd(d, rng);
        const Matrix sigma = fixtures::spd(d, rng);
        const Vector b = fixtures::gaussian_vec(d, rng);
        const Index m = std::min<Index>(d, 4);
        const Matrix S = bayescg_directions(A, b, Vector::Zero(d), [&](const Vector& v) { return Vector(sigma * v); }, m);
        const Matrix gram = S.transpose() * A * sigma * A * S;
        EXPECT_LE((gram - Matrix::Identity(S.cols(), S.cols())).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_EQ(rank_of(S), S.cols());
    }
}

TEST(BayesCG, ZeroResidualGivesNoColumns) {
    fixtures::Rng rng(9);
    const Matrix A = fixtures::spd(5, rng);
    const Vector b = fixtures::gaussian_vec(5, rng);
    const Vector x = A.llt().solve(b);
    const Matrix S = bayescg_directions(A, b, x, [](const Vector& v) { return v; }, 3);
    EXPECT_EQ(S.cols(), 0);
    EXPECT_EQ(bayescg_id_directions(A, Vector::Zero(5), 3).cols(), 0);
}

TEST(BayesCG, StopsBeforeNullDirectionsOfSingularCovariance) {
    fixtures::Rng rng(10);
    const Index d = 8;
    const Matrix A = fixtures::spd(d, rng);
    const Matrix B = fixtures::gaussian(d, 3, rng);
    const Matrix sigma = B * B.transpose();  // rank 3
    const Vector b = fixtures::gaussian_vec(d, rng);
    const auto run = bayescg_run(A, b, Vector::Zero(d), [&](const Vector& v) { return Vector(sigma * v); }, d);
    EXPECT_LE(run.S.cols(), 3);
    for (Index j = 0; j < run.S.cols(); ++j) EXPECT_GT((sigma * A * run.S.col(j)).norm(), 0.0);
}

TEST(BayesCG, MeanUpdateReducesResidual) {
    fixtures::Rng rng(11);
    const Matrix A = fixtures::spd(10, rng);
    const Vector b = fixtures::gaussian_vec(10, rng);
    const auto run = bayescg_run(A, b, Vector::Zero(10), [](const Vector& v) { return v; }, 10);
    EXPECT_LE((b - A * run.mean).norm(), 1e-8 * b.norm());
    EXPECT_LE((run.residual - (b - A * run.mean)).norm(), 1e-8 * b.norm());
}

TEST(FullObservation, DiagonalSolve) {
    Matrix A = Matrix::Zero(2, 2);
    A.diagonal() << 2.0, 2.0;
    Vector b(2);
    b << 2.0, 4.0;
    const auto obs = full_solution_observation(A, b);
    EXPECT_EQ(obs.W, Matrix::Identity(2, 2));
    EXPECT_DOUBLE_EQ(obs.y(0), 1.0);
    EXPECT_DOUBLE_EQ(obs.y(1), 2.0);
}

TEST(FullObservation, ZeroRhsAndRandomResidual) {
    fixtures::Rng rng(12);
    const Matrix A = fixtures::spd(5, rng);
    EXPECT_EQ(full_solution_observation(A, Vector::Zero(5)).y, Vector::Zero(5));
    const Vector b = fixtures::gaussian_vec(5, rng);
    EXPECT_LE((A * full_solution_observation(A, b).y - b).norm(), 1e-10 * b.norm());
}

TEST(FullObservation, NonSpdIsInputError) {
    EXPECT_THROW(full_solution_observation(-Matrix::Identity(3, 3), Vector::Ones(3)), InputError);
}
