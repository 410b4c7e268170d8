#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cvxnmf/cp_factorize.hpp"
#include "oracles.hpp"

using namespace cvxnmf;

namespace {

void expect_nonnegative(const Matrix& u) {
    for (double v : u.values()) EXPECT_GE(v, 0.0);
}

Matrix outer(const std::vector<double>& v) {
    Matrix m(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = v[i] * v[j];
    return m;
}

} // namespace

TEST(CpRankBound, Formula) {
    EXPECT_EQ(cp_rank_bound(0), 0);
    EXPECT_EQ(cp_rank_bound(1), 1);
    EXPECT_EQ(cp_rank_bound(2), 2);
    EXPECT_EQ(cp_rank_bound(3), 5);
    for (long long r = 2; r <= 10; ++r) EXPECT_EQ(cp_rank_bound(r), r * (r + 1) / 2 - 1);
    EXPECT_THROW(cp_rank_bound(-1), InvalidInput);
}

TEST(RankOneExp, ZeroVector) {
    const auto f = decompose_rank_one_exp(std::vector<double>{0.0, 0.0, 0.0});
    EXPECT_EQ(f.M, 0.0);
    EXPECT_EQ(f.scale, 1.0);
    for (double y : f.y) EXPECT_EQ(y, 0.0);
    for (double z : f.z) EXPECT_EQ(z, 1.0);
}

TEST(RankOneExp, SignedPair) {
    const auto f = decompose_rank_one_exp(std::vector<double>{1.0, -1.0});
    EXPECT_EQ(f.M, 1.0);
    EXPECT_EQ(f.y[0], 2.0);
    EXPECT_EQ(f.y[1], 0.0);
    EXPECT_NEAR(f.z[0], std::exp(-1.0), 1e-16);
    EXPECT_NEAR(f.z[1], std::exp(1.0), 1e-15);
    EXPECT_NEAR(f.scale, std::exp(-1.0), 1e-16);
    const double v[2] = {1.0, -1.0};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            EXPECT_NEAR(f.scale * std::exp(f.y[i] * f.y[j]) * f.z[i] * f.z[j], std::exp(v[i] * v[j]), 1e-14);
}

TEST(RankOneExp, IdentityOnRandomVectors) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ud(-2.0, 2.0);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> v(1 + t % 6);
        for (double& e : v) e = t % 4 == 0 ? std::abs(ud(rng)) : ud(rng);
        const auto f = decompose_rank_one_exp(v);
        for (std::size_t i = 0; i < v.size(); ++i) {
            EXPECT_GE(f.y[i], 0.0);
            EXPECT_GT(f.z[i], 0.0);
            for (std::size_t j = 0; j < v.size(); ++j) {
                const double lhs = f.scale * std::exp(f.y[i] * f.y[j]) * f.z[i] * f.z[j];
                const double rhs = std::exp(v[i] * v[j]);
                EXPECT_LE(std::abs(lhs - rhs), 1e-12 * rhs);
            }
        }
    }
}

TEST(TaylorFactor, Examples) {
    const auto z = taylor_factor(std::vector<double>{0.0, 0.0}, 5);
    const Matrix g = oracle::gram(z.matrix());
    for (double v : g.values()) EXPECT_EQ(v, 1.0);

    const auto e = taylor_factor(std::vector<double>{1.0}, 12);
    EXPECT_EQ(e.cols(), 13u);
    EXPECT_NEAR(oracle::gram(e.matrix())(0, 0), std::numbers::e, 1e-9);

    const std::vector<double> y{1.0, 0.5};
    const Matrix h = oracle::gram(taylor_factor(y, 12).matrix());
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(h(i, j), std::exp(y[i] * y[j]), 1e-8);
}

TEST(TaylorFactor, ErrorsAndMonotoneInDegree) {
    EXPECT_THROW(taylor_factor(std::vector<double>{-1.0}, 3), InvalidInput);
    EXPECT_THROW(taylor_factor(std::vector<double>{1.0}, 0), InvalidInput);
    EXPECT_THROW(taylor_factor(std::vector<double>{1e200}, 3), RangeError);
    const std::vector<double> y{1.5, 0.3, 0.9};
    double prev = INFINITY;
    for (int d : {2, 4, 8, 12}) {
        const double err = oracle::rel_err(oracle::gram(taylor_factor(y, d).matrix()), oracle::exp_entries(outer(y)));
        EXPECT_LE(err, prev);
        prev = err;
    }
}

TEST(PruneColumns, DropsSmallestWithinBudgetAndTiesHighIndexFirst) {
    const Matrix u{{3.0, 1.0, 1.0, 0.1}};
    auto p = detail::prune_columns(u, 1.5, 10);
    // norms² = 9, 1, 1, 0.01: drop col 3 (0.01) then col 2 (tie → higher index) → 1.01 ≤ 1.5.
    ASSERT_EQ(p.u.cols(), 2u);
    EXPECT_EQ(p.u(0, 0), 3.0);
    EXPECT_EQ(p.u(0, 1), 1.0);
    EXPECT_FALSE(p.capped);

    p = detail::prune_columns(u, 0.0, 2);
    ASSERT_EQ(p.u.cols(), 2u);
    EXPECT_TRUE(p.capped);

    p = detail::prune_columns(Matrix{{1e-20, 1e-20}}, 1.0, 10);
    EXPECT_EQ(p.u.cols(), 1u);
}

TEST(RotateIntoQuadrant, PreservesGramAndFitsOrthogonalRows) {
    const Matrix g{{1.0, 1.0}, {-1.0, 1.0}, {0.0, 1.4}};
    const auto r = rotate_into_quadrant(g);
    EXPECT_NEAR(r.span, std::numbers::pi / 2.0, 1e-14);
    EXPECT_LE(oracle::max_abs_diff(oracle::gram(r.rows), oracle::gram(g)), 1e-14);
    for (double v : r.rows.values()) EXPECT_GE(v, -1e-14);
}

TEST(CpFactorRankTwo, RankOne) {
    const std::vector<double> v{0.5, 1.0, 2.0};
    const auto u = cp_factor_rank_two(SymMatrix(outer(v)));
    ASSERT_EQ(u.cols(), 1u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(u(i, 0), v[i], 1e-12);
}

TEST(CpFactorRankTwo, Identity) {
    const auto u = cp_factor_rank_two(SymMatrix::identity(2));
    ASSERT_EQ(u.cols(), 2u);
    EXPECT_LE(oracle::max_abs_diff(oracle::gram(u.matrix()), Matrix::identity(2)), 1e-14);
    // Orthogonal nonnegative rows are the axes.
    EXPECT_NEAR(u(0, 0) * u(0, 1), 0.0, 1e-14);
    EXPECT_NEAR(u(1, 0) * u(1, 1), 0.0, 1e-14);
}

TEST(CpFactorRankTwo, TwoByTwo) {
    const Matrix s{{2.0, 1.0}, {1.0, 2.0}};
    const auto u = cp_factor_rank_two(SymMatrix(s));
    expect_nonnegative(u.matrix());
    EXPECT_LE(oracle::max_abs_diff(oracle::gram(u.matrix()), s), 1e-10);
}

TEST(CpFactorRankTwo, RandomDoublyNonnegative) {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + t % 6;
        const Matrix b = oracle::uniform(rng, n, 2, 0.0, 2.0);
        const Matrix s = oracle::gram(b);
        const auto u = cp_factor_rank_two(SymMatrix(s));
        EXPECT_LE(u.cols(), static_cast<std::size_t>(cp_rank_bound(2)));
        expect_nonnegative(u.matrix());
        EXPECT_LE(oracle::rel_err(oracle::gram(u.matrix()), s), 1e-8);
    }
}

TEST(CpFactorRankTwo, Rejections) {
    EXPECT_THROW(cp_factor_rank_two(SymMatrix::identity(3)), InvalidInput);
    EXPECT_THROW(cp_factor_rank_two(SymMatrix(Matrix{{1.0, 0.0}, {0.0, -1.0}})), InvalidInput);
    EXPECT_THROW(cp_factor_rank_two(SymMatrix(Matrix{{1.0, -0.5}, {-0.5, 1.0}})), InvalidInput);
}

TEST(FactorizeHadamardExp, ZeroMatrix) {
    const auto f = factorize_hadamard_exp(SymMatrix::zeros(4));
    ASSERT_EQ(f.U.cols(), 1u);
    for (double v : f.U.matrix().values()) EXPECT_EQ(v, 1.0);
    EXPECT_EQ(f.residual, 0.0);
    EXPECT_EQ(f.factors_used, 0u);
}

TEST(FactorizeHadamardExp, RankOneInstance) {
    const SymMatrix x(outer({0.6, 0.3, 0.1}));
    const auto f = factorize_hadamard_exp(x);
    expect_nonnegative(f.U.matrix());
    EXPECT_EQ(f.factors_used, 1u);
    EXPECT_LE(oracle::rel_err(oracle::gram(f.U.matrix()), oracle::exp_entries(x.matrix())), 1e-6);
}

TEST(FactorizeHadamardExp, RandomRankThree) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 10; ++t) {
        const auto x = oracle::random_psd(rng, 5, 3, 1.0);
        const auto f = factorize_hadamard_exp(x);
        expect_nonnegative(f.U.matrix());
        const double ref = oracle::rel_err(oracle::gram(f.U.matrix()), oracle::exp_entries(x.matrix()));
        EXPECT_LE(ref, 1e-3);
        EXPECT_NEAR(f.residual, ref, 1e-12);
    }
}

TEST(FactorizeHadamardExp, ResidualNonIncreasingInDegree) {
    std::mt19937_64 rng(14);
    const auto x = oracle::random_psd(rng, 5, 2, 2.0);
    double prev = INFINITY;
    for (int d : {2, 4, 8, 12}) {
        FactorizeOptions o;
        o.taylor_degree = d;
        o.prune_tol = 0.0;
        const double r = factorize_hadamard_exp(x, o).residual;
        EXPECT_LE(r, prev + 1e-15);
        prev = r;
    }
}

TEST(FactorizeHadamardExp, RankTwoModeColumnCount) {
    std::mt19937_64 rng(15);
    // Small nonnegative rank-one X: exp_H(vvᵀ) has a nonnegative rank-2 part.
    const SymMatrix x(outer({0.2, 0.25, 0.3}));
    FactorizeOptions o;
    o.mode = FactorizeMode::rank_two;
    o.prune_tol = 0.0;
    const auto f = factorize_hadamard_exp(x, o);
    EXPECT_EQ(f.columns_before_pruning, std::pow(2.0, static_cast<double>(f.factors_used)));
    expect_nonnegative(f.U.matrix());
    EXPECT_LE(f.residual, 1e-2);
    (void)rng;
}

TEST(FactorizeHadamardExp, RankTwoModeFailureNamesFactor) {
    // Top-two truncation of exp_H(vvᵀ) has a negative entry (about −0.5% of
    // the largest) for this v.
    const SymMatrix x(outer({1.5, 0.5, 0.5, 0.5, -1.0}));
    FactorizeOptions o;
    o.mode = FactorizeMode::rank_two;
    try {
        factorize_hadamard_exp(x, o);
        FAIL() << "expected ModeFailure";
    } catch (const ModeFailure& e) {
        EXPECT_EQ(e.factor(), 0u);
    }
}

TEST(FactorizeHadamardExp, ColumnCapSetsFlag) {
    std::mt19937_64 rng(16);
    const auto x = oracle::random_psd(rng, 5, 4, 1.0);
    FactorizeOptions o;
    o.max_cols = 8;
    o.prune_tol = 0.0;
    const auto f = factorize_hadamard_exp(x, o);
    EXPECT_TRUE(f.capped);
    EXPECT_LE(f.U.cols(), 8u);
    expect_nonnegative(f.U.matrix());
}
