#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cvxnmf/decompositions.hpp"
#include "oracles.hpp"

using namespace cvxnmf;

namespace {

void expect_nonnegative(const Matrix& u) {
    for (double v : u.values()) EXPECT_GE(v, 0.0);
}

SymMatrix two_component_instance() {
    const std::vector<double> u{3.0, 3.0, 3.0, 0.0, 0.0, 0.0};
    const std::vector<double> w{0.0, 0.0, 0.0, 3.0, 3.0, 3.0};
    Matrix a(6, 6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) a(i, j) = u[i] * u[j] + w[i] * w[j];
    return SymMatrix(std::move(a));
}

} // namespace

TEST(SymmetricNmfKl, KnownSolution) {
    std::mt19937_64 rng(1);
    const auto xs = oracle::random_psd(rng, 6, 3, 1.5);
    const SymMatrix a = hadamard_exp(xs);
    const auto r = symmetric_nmf_kl(a);
    ASSERT_TRUE(r.certificate.has_value());
    EXPECT_LE(r.report.final_value, 1e-6);
    EXPECT_LE(r.certificate->gap, 1e-6);
    expect_nonnegative(r.U.matrix());
    EXPECT_GE(min_eigenvalue(r.X), -1e-8);
}

TEST(SymmetricNmfKl, AllOnes) {
    const auto r = symmetric_nmf_kl(SymMatrix::constant(4, 1.0));
    EXPECT_NEAR(r.report.final_value, 0.0, 1e-12);
    EXPECT_LE(max_abs(r.X.matrix()), 1e-12);
}

TEST(SymmetricNmfKl, ZeroDataStaysFiniteAndDoesNotIncrease) {
    // With A = 0 the objective is Σ exp(X_ij); X = 0 already satisfies the
    // optimality conditions over the PSD cone (gradient 11ᵀ ⪰ 0, ⟨11ᵀ, 0⟩ = 0).
    SolverOptions o;
    o.record_history = true;
    const auto r = symmetric_nmf_kl(SymMatrix::zeros(3), o, {}, SymMatrix::identity(3));
    const auto& h = r.report.value_history;
    ASSERT_FALSE(h.empty());
    for (double v : h) EXPECT_TRUE(std::isfinite(v));
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1]);
    EXPECT_LT(h.back(), h.front());
    ASSERT_TRUE(r.certificate.has_value());
    EXPECT_LE(r.certificate->gap, 1e-6 * 9.0);
}

TEST(SymmetricNmfMse, KnownSolutionAndFeasibility) {
    std::mt19937_64 rng(2);
    const auto xs = oracle::random_psd(rng, 6, 2, 1.2);
    const SymMatrix a = hadamard_exp(xs);
    const auto r = symmetric_nmf_mse(a);
    EXPECT_FALSE(r.certificate.has_value());
    EXPECT_LE(r.report.final_value, 1e-8 * frobenius_dot(a, a));
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) EXPECT_GE(std::exp(r.X(i, j)), a(i, j) / 2 - 1e-8);
}

TEST(SymmetricNmfMse, AllOnes) {
    const auto r = symmetric_nmf_mse(SymMatrix::constant(3, 1.0));
    EXPECT_NEAR(r.report.final_value, 0.0, 1e-12);
    EXPECT_LE(max_abs(r.X.matrix()), 1e-12);
}

TEST(SymmetricNmfMse, FeasibleFromAnyStart) {
    std::mt19937_64 rng(3);
    Matrix m = oracle::uniform(rng, 5, 5, 0.0, 2.0);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i);
    m(0, 3) = m(3, 0) = 0.0;
    const SymMatrix a(std::move(m));
    SolverOptions o;
    o.max_iter = 200;
    const auto r = symmetric_nmf_mse(a, o);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            if (a(i, j) > 0.0) EXPECT_GE(std::exp(r.X(i, j)), a(i, j) / 2 - 1e-8);
    EXPECT_GE(min_eigenvalue(r.X), -1e-8 * std::max(1.0, frobenius_norm(r.X)));
    expect_nonnegative(r.U.matrix());
}

TEST(SymmetricNmf, NegativeDataRejected) {
    EXPECT_THROW(symmetric_nmf_kl(SymMatrix(Matrix{{1.0, -0.1}, {-0.1, 1.0}})), InvalidInput);
}

TEST(SparseLowRank, UnpenalizedRecoversFeasibleData) {
    std::mt19937_64 rng(4);
    const SymMatrix a(oracle::gram(oracle::uniform(rng, 6, 3, 0.0, 1.0)));
    SolverOptions o;
    o.tol = 1e-9;
    const auto r = sparse_lowrank(a, {0.0, 0.0}, o);
    EXPECT_LE(oracle::max_abs_diff(r.X.matrix(), a.matrix()), 1e-6);
}

TEST(SparseLowRank, LargeTraceOrL1WeightGivesZero) {
    std::mt19937_64 rng(5);
    const SymMatrix a(oracle::gram(oracle::uniform(rng, 5, 2, 0.0, 1.0)));
    const double lmax = sym_eig(a).eigenvalues.front();
    const auto r1 = sparse_lowrank(a, {0.0, 2.0 * lmax});
    EXPECT_LE(max_abs(r1.X.matrix()), 1e-8);
    const auto r2 = sparse_lowrank(a, {2.0 * max_abs(a.matrix()), 0.0});
    EXPECT_LE(max_abs(r2.X.matrix()), 1e-8);
}

TEST(SparseLowRank, MassNonIncreasingInGamma) {
    std::mt19937_64 rng(6);
    const SymMatrix a(oracle::gram(oracle::uniform(rng, 6, 3, 0.0, 1.0)));
    SolverOptions o;
    o.tol = 1e-9;
    double prev = INFINITY;
    for (double g : {0.0, 0.1, 0.4}) {
        double mass = 0.0;
        for (double v : sparse_lowrank(a, {g, 0.0}, o).X.values()) mass += v;
        EXPECT_LE(mass, prev + 1e-8);
        prev = mass;
    }
}

TEST(SparseLowRank, FactorExactAtRankTwo) {
    std::mt19937_64 rng(7);
    const Matrix b = oracle::uniform(rng, 6, 2, 0.0, 1.0);
    const SymMatrix a(oracle::gram(b));
    SolverOptions o;
    o.tol = 1e-10;
    const auto r = sparse_lowrank(a, {0.0, 0.0}, o);
    expect_nonnegative(r.U.matrix());
    EXPECT_LE(r.U.cols(), 2u);
    EXPECT_LE(r.factor_residual, 1e-6);
}

TEST(SparseLowRank, NegativeWeightsRejected) {
    EXPECT_THROW(sparse_lowrank(SymMatrix::identity(2), {-1.0, 0.0}), InvalidInput);
}

TEST(RecursiveDecompose, OneRoundMatchesSingleShot) {
    std::mt19937_64 rng(8);
    const auto xs = oracle::random_psd(rng, 4, 2, 1.0);
    const SymMatrix a = hadamard_exp(xs);
    const auto rec = recursive_decompose(a, LossKind::MSE, {1, kLogFloor});
    ASSERT_EQ(rec.rounds.size(), 1u);
    const auto single = symmetric_nmf(a, LossKind::MSE, round_upper_bound(a, rec.rounds[0].floor_used), {}, {});
    EXPECT_EQ(rec.U.matrix(), single.U.matrix());
}

TEST(RecursiveDecompose, TwoComponentInstance) {
    const SymMatrix a = two_component_instance();
    const auto rec = recursive_decompose(a, LossKind::MSE, {2, kLogFloor});
    ASSERT_FALSE(rec.rounds.empty());
    for (const auto& ak : rec.residuals)
        for (double v : ak.values()) EXPECT_GE(v, 0.0);
    for (std::size_t k = 1; k < rec.rounds.size(); ++k)
        EXPECT_LE(rec.rounds[k].total_loss, rec.rounds[k - 1].total_loss);
    expect_nonnegative(rec.U.matrix());
    const double total = mse_loss(a.matrix(), oracle::gram(rec.U.matrix()));
    EXPECT_NEAR(total, rec.rounds.back().total_loss, 1e-8 * frobenius_dot(a, a));
    EXPECT_LE(total, 0.05 * frobenius_dot(a, a));
}

TEST(RecursiveDecompose, Validation) {
    EXPECT_THROW(recursive_decompose(SymMatrix::identity(2), LossKind::MSE, {0, 1e-8}), InvalidInput);
    EXPECT_THROW(recursive_decompose(SymMatrix::identity(2), LossKind::MSE, {1, 0.0}), InvalidInput);
}

TEST(NonsymmetricObjective, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    const Matrix a = oracle::uniform(rng, 2, 3, 0.2, 2.0);
    const auto w = oracle::random_symmetric(rng, 5, 0.4);
    for (LossKind k : {LossKind::MSE, LossKind::KL}) {
        const NonsymConfig cfg{0.3, k};
        const auto g = nonsymmetric_objective(a, w, cfg).gradient;
        const auto fd = oracle::fd_gradient([&](const SymMatrix& z) { return nonsymmetric_objective(a, z, cfg).value; }, w);
        EXPECT_LE(frobenius_norm(g.matrix() - fd) / frobenius_norm(fd), 1e-5);
    }
}

TEST(NonsymmetricObjective, ReducesToBlockLoss) {
    std::mt19937_64 rng(10);
    Matrix s = oracle::uniform(rng, 3, 3, 0.1, 2.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
    const auto w = oracle::random_symmetric(rng, 6, 0.5);
    Matrix block(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) block(i, j) = std::exp(w(i, 3 + j));
    const double v = nonsymmetric_objective(s, w, {0.0, LossKind::MSE}).value;
    EXPECT_NEAR(v, mse_loss(s, block), 1e-12 * std::max(1.0, v));
}

TEST(NonsymmetricNmf, RankOneInstance) {
    std::mt19937_64 rng(11);
    const Matrix p = oracle::uniform(rng, 3, 1, 0.5, 2.0);
    const Matrix q = oracle::uniform(rng, 4, 1, 0.5, 2.0);
    const Matrix a = matmul_nt(p, q);
    const auto r = nonsymmetric_nmf(a, {1e-3, LossKind::MSE});
    expect_nonnegative(r.P.matrix());
    expect_nonnegative(r.Q.matrix());
    EXPECT_LE(oracle::rel_err(matmul_nt(r.P.matrix(), r.Q.matrix()), a), 0.1);
}

TEST(NonsymmetricNmf, BlockSwapSymmetry) {
    const Matrix a{{1.0, 0.5, 0.2}, {0.5, 2.0, 0.3}, {0.2, 0.3, 1.5}};
    SolverOptions o;
    o.max_iter = 300;
    const auto r = nonsymmetric_nmf(a, {1e-3, LossKind::MSE}, o);
    const Matrix e = hadamard_exp(r.W.matrix());
    Matrix swapped(6, 6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) swapped(i, j) = e((i + 3) % 6, (j + 3) % 6);
    EXPECT_LE(oracle::max_abs_diff(swapped, e), 1e-6);
}

TEST(NonsymmetricNmf, LargerGammaShrinksDiagonal) {
    const Matrix a{{1.0, 2.0}, {0.5, 1.0}};
    SolverOptions o;
    o.max_iter = 500;
    auto diag_mass = [&](double gamma) {
        const auto r = nonsymmetric_nmf(a, {gamma, LossKind::MSE}, o);
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) s += std::exp(r.W(i, i));
        return s;
    };
    EXPECT_LT(diag_mass(1e3 * 2.0), diag_mass(1e-3));
}

TEST(NonsymmetricNmf, Validation) {
    EXPECT_THROW(nonsymmetric_nmf(Matrix{{-1.0}}, {}), InvalidInput);
    EXPECT_THROW(nonsymmetric_nmf(Matrix{{1.0}}, {-1.0, LossKind::MSE}), InvalidInput);
}
