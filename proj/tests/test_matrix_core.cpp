#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cvxnmf/matrix.hpp"
#include "oracles.hpp"

using namespace cvxnmf;

namespace {

double orthonormality_error(const Matrix& v) {
    const Matrix g = matmul_tn(v, v);
    return frobenius_norm(g - Matrix::identity(v.cols()));
}

void expect_valid_decomposition(const SymMatrix& s, const EigenDecomposition& e) {
    const double scale = std::max(1.0, frobenius_norm(s));
    EXPECT_LE(frobenius_norm(e.reconstruct() - s), 1e-10 * scale);
    EXPECT_LE(orthonormality_error(e.eigenvectors), 1e-10);
    for (std::size_t i = 1; i < e.eigenvalues.size(); ++i) EXPECT_GE(e.eigenvalues[i - 1], e.eigenvalues[i]);
}

} // namespace

TEST(SymMatrix, SymmetrizesSmallAsymmetry) {
    SymMatrix s(Matrix{{1.0, 2.0 + 1e-12}, {2.0, 3.0}});
    EXPECT_EQ(s(0, 1), s(1, 0));
    EXPECT_NEAR(s(0, 1), 2.0 + 5e-13, 1e-15);
}

TEST(SymMatrix, RejectsLargeAsymmetryAndNonFinite) {
    EXPECT_THROW(SymMatrix(Matrix{{1.0, 2.0}, {2.1, 3.0}}), InvalidInput);
    EXPECT_THROW(SymMatrix(Matrix{{1.0, NAN}, {NAN, 3.0}}), InvalidInput);
    EXPECT_THROW(SymMatrix(Matrix(2, 3)), InvalidInput);
}

TEST(SymEig, DiagonalCase) {
    const auto e = sym_eig(SymMatrix(Matrix{{3.0, 0.0}, {0.0, 1.0}}));
    EXPECT_DOUBLE_EQ(e.eigenvalues[0], 3.0);
    EXPECT_DOUBLE_EQ(e.eigenvalues[1], 1.0);
    EXPECT_NEAR(std::abs(e.eigenvectors(0, 0)), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(e.eigenvectors(1, 1)), 1.0, 1e-15);
    EXPECT_NEAR(e.eigenvectors(1, 0), 0.0, 1e-15);
}

TEST(SymEig, SwapMatrixAgainstOracle) {
    const SymMatrix s(Matrix{{0.0, 1.0}, {1.0, 0.0}});
    const auto ref = oracle::eigenvalues(s.matrix());  // ascending
    const auto e = sym_eig(s);
    EXPECT_NEAR(e.eigenvalues[0], static_cast<double>(ref[1]), 1e-14);
    EXPECT_NEAR(e.eigenvalues[1], static_cast<double>(ref[0]), 1e-14);
    const double r = 1.0 / std::numbers::sqrt2;
    EXPECT_NEAR(std::abs(e.eigenvectors(0, 0)), r, 1e-14);
    EXPECT_NEAR(e.eigenvectors(0, 0) * e.eigenvectors(1, 0), 0.5, 1e-14);
    EXPECT_NEAR(e.eigenvectors(0, 1) * e.eigenvectors(1, 1), -0.5, 1e-14);
}

TEST(SymEig, IdentityReconstructs) {
    const auto s = SymMatrix::identity(4);
    const auto e = sym_eig(s);
    for (double l : e.eigenvalues) EXPECT_NEAR(l, 1.0, 1e-15);
    expect_valid_decomposition(s, e);
}

TEST(SymEig, EmptyMatrixIsInvalid) {
    EXPECT_THROW(sym_eig(SymMatrix::zeros(0)), InvalidInput);
    EXPECT_THROW(sym_eig_jacobi(SymMatrix::zeros(0)), InvalidInput);
}

TEST(SymEig, RandomMatricesMatchOracle) {
    std::mt19937_64 rng(11);
    for (std::size_t n : {1u, 2u, 3u, 7u, 20u, 45u}) {
        const auto s = oracle::random_symmetric(rng, n, 3.0);
        const auto ref = oracle::eigenvalues(s.matrix());
        for (const auto& e : {sym_eig(s), sym_eig_jacobi(s)}) {
            expect_valid_decomposition(s, e);
            for (std::size_t i = 0; i < n; ++i)
                EXPECT_NEAR(e.eigenvalues[i], static_cast<double>(ref[n - 1 - i]), 1e-11 * frobenius_norm(s));
        }
    }
}

TEST(SymEig, RepeatedAndZeroEigenvalues) {
    std::mt19937_64 rng(5);
    const Matrix g = oracle::gaussian(rng, 8, 2);
    const SymMatrix s = SymMatrix::assume_symmetric(oracle::gram(g));
    const auto e = sym_eig(s);
    expect_valid_decomposition(s, e);
    for (std::size_t i = 2; i < 8; ++i) EXPECT_NEAR(e.eigenvalues[i], 0.0, 1e-12 * frobenius_norm(s));
}

TEST(PsdProject, DiagonalClipping) {
    const auto p = psd_project(SymMatrix(Matrix{{1.0, 0.0}, {0.0, -1.0}}));
    EXPECT_NEAR(p(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(p(1, 1), 0.0, 1e-15);
    EXPECT_NEAR(p(0, 1), 0.0, 1e-15);
}

TEST(PsdProject, SwapMatrixMatchesOracle) {
    const SymMatrix s(Matrix{{0.0, 1.0}, {1.0, 0.0}});
    const Matrix ref = oracle::psd_project(s.matrix());
    const auto p = psd_project(s);
    EXPECT_LE(oracle::max_abs_diff(p.matrix(), ref), 1e-14);
    for (double v : p.values()) EXPECT_NEAR(v, 0.5, 1e-14);
}

TEST(PsdProject, IdentityOnTheCone) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        const auto s = oracle::random_psd(rng, 6, 3 + t % 4, 5.0);
        EXPECT_LE(frobenius_norm(psd_project(s) - s), 1e-10 * std::max(1.0, frobenius_norm(s)));
    }
}

TEST(PsdProject, IdempotentAndFeasible) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto s = oracle::random_symmetric(rng, 6);
        const auto p = psd_project(s);
        EXPECT_LE(frobenius_norm(psd_project(p) - p), 1e-10);
        EXPECT_GE(min_eigenvalue(p), -1e-10 * frobenius_norm(s));
    }
}

TEST(PsdProject, NearestPointAgainstRandomPsdCompetitors) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        const auto s = oracle::random_symmetric(rng, 6);
        const double best = frobenius_norm(s - psd_project(s));
        for (int c = 0; c < 50; ++c) {
            const auto p = oracle::random_psd(rng, 6, 1 + c % 6, 0.1 + 0.1 * (c % 30));
            EXPECT_LE(best, frobenius_norm(s - p) + 1e-12);
        }
    }
}

TEST(PsdProject, TenByTenMatchesHighPrecisionReference) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
        const auto s = oracle::random_symmetric(rng, 10);
        EXPECT_LE(oracle::max_abs_diff(psd_project(s).matrix(), oracle::psd_project(s.matrix())), 1e-10);
    }
}

TEST(HadamardExp, Examples) {
    const auto ones = hadamard_exp(SymMatrix::zeros(3));
    for (double v : ones.values()) EXPECT_EQ(v, 1.0);
    const auto d = hadamard_exp(SymMatrix::identity(2));
    EXPECT_DOUBLE_EQ(d(0, 0), std::exp(1.0));
    EXPECT_DOUBLE_EQ(d(0, 1), 1.0);
    const SymMatrix a(Matrix{{2.0, 0.5}, {0.5, 3.0}});
    Matrix l = a.matrix();
    for (double& v : l.values()) v = std::log(v);
    EXPECT_LE(oracle::max_abs_diff(hadamard_exp(SymMatrix(l)).matrix(), a.matrix()), 1e-15);
}

TEST(HadamardExp, OverflowGuard) {
    EXPECT_THROW(hadamard_exp(SymMatrix::constant(2, 700.5)), RangeError);
    EXPECT_NO_THROW(hadamard_exp(SymMatrix::constant(2, 700.0)));
}

TEST(FactorMatrix, Invariants) {
    EXPECT_THROW(FactorMatrix(Matrix{{1.0, -1e-300}}), InvalidInput);
    EXPECT_THROW(FactorMatrix(Matrix(3, 0)), InvalidInput);
    const FactorMatrix u(Matrix{{1.0, 2.0}, {0.0, 3.0}});
    const auto g = u.gram();
    EXPECT_DOUBLE_EQ(g(0, 0), 5.0);
    EXPECT_DOUBLE_EQ(g(0, 1), 6.0);
    EXPECT_DOUBLE_EQ(g(1, 1), 9.0);
}

TEST(HadamardCombine, OnesAreNeutral) {
    const FactorMatrix ones(Matrix(4, 1, 1.0));
    const auto w = hadamard_combine(ones, ones);
    ASSERT_EQ(w.cols(), 1u);
    for (double v : w.matrix().values()) EXPECT_EQ(v, 1.0);
}

TEST(HadamardCombine, ColumnOrdering) {
    const FactorMatrix u(Matrix{{1.0, 2.0}, {3.0, 4.0}});
    const FactorMatrix v(Matrix{{5.0, 6.0, 7.0}, {8.0, 9.0, 10.0}});
    const auto w = hadamard_combine(u, v);
    ASSERT_EQ(w.cols(), 6u);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(w(r, i * 3 + j), u(r, i) * v(r, j));
}

TEST(HadamardCombine, ChainRuleAgainstBruteForce) {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 50; ++t) {
        const Matrix u = oracle::uniform(rng, 4, 2, 0.0, 2.0);
        const Matrix v = oracle::uniform(rng, 4, 2 + t % 3, 0.0, 2.0);
        const auto w = hadamard_combine(FactorMatrix(u), FactorMatrix(v));
        const Matrix lhs = oracle::hadamard(oracle::gram(u), oracle::gram(v));
        EXPECT_LE(oracle::rel_err(oracle::gram(w.matrix()), lhs), 1e-10);
    }
}

TEST(HadamardCombine, RowMismatch) {
    EXPECT_THROW(hadamard_combine(FactorMatrix(Matrix(3, 1, 1.0)), FactorMatrix(Matrix(4, 1, 1.0))),
                 InvalidInput);
}
