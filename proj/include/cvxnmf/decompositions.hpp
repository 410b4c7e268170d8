#pragma once

// Problem assemblies on top of the projected-gradient solver:
//   * symmetric NMF through the exponential change of variables (KL, MSE),
//   * sparse low-rank fit over the doubly nonnegative cone,
//   * recursive deflation A_{k+1} = max(A_k − U_kU_kᵀ, 0),
//   * nonsymmetric NMF through the symmetric block embedding.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cp_factorize.hpp"
#include "matrix.hpp"
#include "objectives.hpp"
#include "pgd.hpp"

namespace cvxnmf {

struct SymNmfResult {
    SymMatrix X;
    FactorMatrix U;
    std::optional<DualCertificate> certificate;
    SolveReport report;
    /// Relative error of UUᵀ against the matrix it factors (exp_H(X), or X
    /// itself for the sparse path).
    double factor_residual = 0.0;
};

inline constexpr double kLogFloor = 1e-8;

namespace detail {

inline void require_nonnegative(const Matrix& a, const char* where) {
    for (double v : a.values())
        if (v < 0.0) throw InvalidInput(std::string(where) + ": data must be entrywise nonnegative");
}

inline SymMatrix entrywise_log(const SymMatrix& a, double floor) {
    Matrix m = a.matrix();
    for (double& v : m.values()) v = std::log(std::max(v, floor));
    return SymMatrix::assume_symmetric(std::move(m));
}

/// X_ij ≥ log(A_ij / 2) where A_ij > 0, unbounded elsewhere.
inline Matrix mse_lower_bound(const SymMatrix& a) {
    Matrix l(a.dim(), a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < a.dim(); ++j)
            l(i, j) = a(i, j) > 0.0 ? std::log(a(i, j) / 2.0) : -INFINITY;
    return l;
}

inline SolverOptions scaled(SolverOptions opts, const Matrix& a) {
    opts.tol_scale = std::max(1.0, frobenius_norm(a));
    return opts;
}

} // namespace detail

/// psd_project(log(max(A, 1e-8))), the projected exact-fit point.
inline SymMatrix default_start(const SymMatrix& a) {
    return psd_project(detail::entrywise_log(a, kLogFloor));
}

/// Symmetric NMF through exp_H with an optional entrywise upper bound on X
/// (used by the recursive decomposition). The KL problem without an upper
/// bound stops on the duality gap; every other variant stops on the
/// gradient-mapping norm.
inline SymNmfResult symmetric_nmf(const SymMatrix& a, LossKind loss,
                                  const std::optional<Matrix>& upper, const SolverOptions& opts,
                                  const FactorizeOptions& fopts,
                                  const std::optional<SymMatrix>& x0 = std::nullopt) {
    detail::require_nonnegative(a.matrix(), "symmetric_nmf");
    std::vector<Projector> sets;
    if (loss == LossKind::MSE) sets.push_back(Projector::lower_bound(detail::mse_lower_bound(a)));
    if (upper) sets.push_back(Projector::upper_bound(*upper));
    sets.push_back(Projector::psd());
    const ConstraintSet constraints(std::move(sets));

    ObjectiveFn objective = [&a, loss](const SymMatrix& x) { return objective_grad(loss, a, x); };
    GapFn gap;
    if (loss == LossKind::KL && !upper)
        gap = [&a](const SymMatrix& x) { return duality_gap(a, x).gap; };

    SymNmfResult out;
    out.report = projected_gradient_minimize(objective, constraints, x0 ? *x0 : default_start(a),
                                             detail::scaled(opts, a.matrix()), gap);
    out.X = out.report.final_point;
    auto fac = factorize_hadamard_exp(out.X, fopts);
    out.U = std::move(fac.U);
    out.factor_residual = fac.residual;
    if (loss == LossKind::KL && !upper) out.certificate = duality_gap(a, out.X);
    return out;
}

/// min Σ A(log A − X) + exp(X) − A over X ⪰ 0, certified by the duality gap.
inline SymNmfResult symmetric_nmf_kl(const SymMatrix& a, const SolverOptions& opts = {},
                                     const FactorizeOptions& fopts = {},
                                     const std::optional<SymMatrix>& x0 = std::nullopt) {
    return symmetric_nmf(a, LossKind::KL, std::nullopt, opts, fopts, x0);
}

/// min Σ (exp(X) − A)² over X ⪰ 0 and exp(X_ij) ≥ A_ij/2, the region where
/// the objective is convex.
inline SymNmfResult symmetric_nmf_mse(const SymMatrix& a, const SolverOptions& opts = {},
                                      const FactorizeOptions& fopts = {},
                                      const std::optional<SymMatrix>& x0 = std::nullopt) {
    return symmetric_nmf(a, LossKind::MSE, std::nullopt, opts, fopts, x0);
}

struct SparseLowRankConfig {
    double gamma = 0.0;  ///< entrywise ℓ1 weight
    double nu = 0.0;     ///< trace weight
};

/// ‖A − X‖²_F + γ ΣX_ij + ν Tr X and its gradient. On X ≥ 0 the ℓ1 term
/// is the plain entry sum.
inline ValueGrad sparse_lowrank_objective(const SymMatrix& a, const SymMatrix& x,
                                          const SparseLowRankConfig& cfg) {
    const std::size_t n = a.dim();
    Matrix g(n, n);
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double d = x(i, j) - a(i, j);
            value += d * d + cfg.gamma * x(i, j);
            g(i, j) = 2.0 * d + cfg.gamma;
        }
    for (std::size_t i = 0; i < n; ++i) {
        value += cfg.nu * x(i, i);
        g(i, i) += cfg.nu;
    }
    return {value, SymMatrix::assume_symmetric(std::move(g))};
}

/// Factor of a doubly nonnegative X from its eigenpairs above
/// eig_cutoff·λ_max: exact (cone rotation) when at most two pairs remain,
/// otherwise √λ-scaled eigenvectors with each column's largest-magnitude
/// entry made positive and negatives clipped. Returns the factor and its
/// relative residual ‖X − UUᵀ‖_F/‖X‖_F.
inline std::pair<FactorMatrix, double> factor_dnn(const SymMatrix& x, double eig_cutoff) {
    const std::size_t n = x.dim();
    const double xnorm = frobenius_norm(x);
    if (xnorm == 0.0) return {FactorMatrix::zero(n), 0.0};
    const auto eig = sym_eig(x);
    const double lmax = eig.eigenvalues.front();
    if (!(lmax > 0.0)) return {FactorMatrix::zero(n), 1.0};
    std::size_t r = 0;
    while (r < n && eig.eigenvalues[r] > eig_cutoff * lmax) ++r;

    auto residual_of = [&](const Matrix& u) {
        return frobenius_norm(x.matrix() - matmul_nt(u, u)) / xnorm;
    };
    if (r <= 2) {
        const auto u1 = detail::column(eig.eigenvectors, 0);
        const double l2 = r == 2 ? eig.eigenvalues[1] : 0.0;
        const auto u2 = r == 2 ? detail::column(eig.eigenvectors, 1) : std::vector<double>(n, 0.0);
        try {
            Matrix u = detail::factor_top_two(lmax, u1, l2, u2, 0);
            const double res = residual_of(u);
            return {FactorMatrix(std::move(u)), res};
        } catch (const Infeasible&) {
            // fall through to clipping
        }
    }
    Matrix u(n, r);
    for (std::size_t c = 0; c < r; ++c) {
        const double s = std::sqrt(eig.eigenvalues[c]);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(eig.eigenvectors(i, c)) > std::abs(eig.eigenvectors(arg, c))) arg = i;
        const double sign = eig.eigenvectors(arg, c) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) u(i, c) = std::max(0.0, sign * s * eig.eigenvectors(i, c));
    }
    const double res = residual_of(u);
    return {FactorMatrix(std::move(u)), res};
}

/// min ‖A − X‖²_F + γ|X| + ν Tr X over X ≥ 0, X ⪰ 0.
inline SymNmfResult sparse_lowrank(const SymMatrix& a, const SparseLowRankConfig& cfg,
                                   const SolverOptions& opts = {},
                                   const FactorizeOptions& fopts = {}) {
    if (!(cfg.gamma >= 0.0) || !(cfg.nu >= 0.0))
        throw InvalidInput("sparse_lowrank: gamma and nu must be >= 0");
    const ConstraintSet dnn{Projector::nonnegative(), Projector::psd()};
    ObjectiveFn objective = [&a, cfg](const SymMatrix& x) {
        return sparse_lowrank_objective(a, x, cfg);
    };
    // ∇f is 2-Lipschitz, so steps beyond 1/2 are never needed.
    SolverOptions o = detail::scaled(opts, a.matrix());
    o.init_step = std::min(o.init_step, 0.5);
    SymNmfResult out;
    out.report = projected_gradient_minimize(objective, dnn, SymMatrix::zeros(a.dim()), o);
    out.X = out.report.final_point;
    auto [u, res] = factor_dnn(out.X, fopts.eig_cutoff);
    out.U = std::move(u);
    out.factor_residual = res;
    return out;
}

struct RecursiveConfig {
    int rounds = 1;
    /// Floor for zero entries of A_k in the bound X ≤ log(max(A_k, floor)).
    double floor_eps = kLogFloor;
};

struct RecursiveRound {
    double floor_used = 0.0;
    double total_loss = 0.0;  ///< loss(A, Σ_{j≤k} U_jU_jᵀ)
    std::size_t columns = 0;
    SolveReport report;
};

struct RecursiveResult {
    FactorMatrix U;                  ///< [U_1 … U_R]
    std::vector<RecursiveRound> rounds;
    std::vector<SymMatrix> residuals;  ///< A_1, A_2, … after each accepted round
    std::string stop_note;             ///< why fewer than `rounds` rounds were kept
};

inline Matrix round_upper_bound(const SymMatrix& ak, double floor) {
    Matrix b = ak.matrix();
    for (double& v : b.values()) v = std::log(std::max(v, floor));
    return b;
}

/// Deflation: round k fits exp_H(X_k) ≈ A_k under exp(X_k) ≤ max(A_k, floor)
/// entrywise, then A_{k+1} = max(A_k − U_kU_kᵀ, 0). When the bounded set is
/// empty the floor is raised tenfold and the round retried (up to
/// max A_k). A round that does not lower loss(A, Σ U_jU_jᵀ) by more than
/// 1e-12 ends the recursion and is discarded.
inline RecursiveResult recursive_decompose(const SymMatrix& a, LossKind loss,
                                           const RecursiveConfig& rcfg,
                                           const SolverOptions& opts = {},
                                           const FactorizeOptions& fopts = {}) {
    detail::require_nonnegative(a.matrix(), "recursive_decompose");
    if (rcfg.rounds < 1) throw InvalidInput("recursive_decompose: rounds must be >= 1");
    if (!(rcfg.floor_eps > 0.0)) throw InvalidInput("recursive_decompose: floor_eps must be > 0");

    const std::size_t n = a.dim();
    RecursiveResult out;
    Matrix sum(n, n);
    SymMatrix ak = a;
    double prev = loss == LossKind::MSE ? mse_loss(a.matrix(), sum)
                                        : std::numeric_limits<double>::infinity();
    std::vector<Matrix> blocks;

    for (int k = 0; k < rcfg.rounds; ++k) {
        const double amax = max_abs(ak.matrix());
        if (amax == 0.0) {
            out.stop_note = "residual is zero";
            break;
        }
        std::optional<SymNmfResult> fit;
        double floor = rcfg.floor_eps;
        for (;;) {
            try {
                fit = symmetric_nmf(ak, loss, round_upper_bound(ak, floor), opts, fopts);
                break;
            } catch (const NumericError&) {
                if (floor >= amax) break;
                floor = std::min(10.0 * floor, amax);
            }
        }
        if (!fit) {
            out.stop_note = "round " + std::to_string(k + 1) + ": no feasible point for exp(X) <= A_k";
            break;
        }
        const Matrix gram = matmul_nt(fit->U.matrix(), fit->U.matrix());
        Matrix next_sum = sum + gram;
        double total;
        try {
            total = loss == LossKind::MSE ? mse_loss(a.matrix(), next_sum)
                                          : kl_loss(a.matrix(), next_sum);
        } catch (const DomainError&) {
            total = std::numeric_limits<double>::infinity();
        }
        if (!(total < prev - 1e-12)) {
            out.stop_note = "round " + std::to_string(k + 1) + " did not improve the loss";
            break;
        }
        prev = total;
        sum = std::move(next_sum);
        Matrix next = ak.matrix() - gram;
        for (double& v : next.values()) v = std::max(v, 0.0);
        ak = SymMatrix::assume_symmetric(std::move(next));
        out.residuals.push_back(ak);
        out.rounds.push_back({floor, total, fit->U.cols(), fit->report});
        blocks.push_back(fit->U.matrix());
    }

    if (blocks.empty()) {
        out.U = FactorMatrix::zero(n);
        return out;
    }
    std::size_t cols = 0;
    for (const auto& b : blocks) cols += b.cols();
    Matrix u(n, cols);
    std::size_t off = 0;
    for (const auto& b : blocks) {
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < b.cols(); ++c) u(r, off + c) = b(r, c);
        off += b.cols();
    }
    out.U = FactorMatrix(std::move(u));
    return out;
}

struct NonsymConfig {
    double gamma = 1e-3;  ///< weight on Σ exp(W_ii), the trace of exp_H(W)
    LossKind loss = LossKind::MSE;
};

/// Objective over W ∈ S^{m+n}:
///   loss(A, E₁₂) + γ·Σᵢ exp(W_ii),   E = exp_H(W), E₁₂ = rows [0,m) × cols [m,m+n).
/// The block appears twice in the symmetric W, so each copy carries half of
/// the loss gradient.
inline ValueGrad nonsymmetric_objective(const Matrix& a, const SymMatrix& w,
                                        const NonsymConfig& cfg) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (w.dim() != m + n) throw InvalidInput("nonsymmetric_objective: W must be (m+n)x(m+n)");
    Matrix g(m + n, m + n);
    double value = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double x = w(i, m + j);
            if (!(std::abs(x) <= kExpArgLimit)) throw RangeError("nonsymmetric_objective: exp overflow");
            const double e = std::exp(x);
            const double aij = a(i, j);
            double d;
            if (cfg.loss == LossKind::MSE) {
                value += (e - aij) * (e - aij);
                d = 2.0 * (e - aij) * e;
            } else {
                value += (aij == 0.0 ? 0.0 : aij * (std::log(aij) - x)) + e - aij;
                d = e - aij;
            }
            g(i, m + j) = 0.5 * d;
            g(m + j, i) = 0.5 * d;
        }
    for (std::size_t i = 0; i < m + n; ++i) {
        if (!(std::abs(w(i, i)) <= kExpArgLimit)) throw RangeError("nonsymmetric_objective: exp overflow");
        const double e = std::exp(w(i, i));
        value += cfg.gamma * e;
        g(i, i) += cfg.gamma * e;
    }
    return {value, SymMatrix::assume_symmetric(std::move(g))};
}

struct NonsymResult {
    FactorMatrix P;  ///< m×k
    FactorMatrix Q;  ///< n×k
    SymMatrix W;
    SolveReport report;
    double factor_residual = 0.0;
};

/// A ≈ PQᵀ: minimize over W ⪰ 0, factor exp_H(W) = UUᵀ and split U by rows.
inline NonsymResult nonsymmetric_nmf(const Matrix& a, const NonsymConfig& cfg,
                                     const SolverOptions& opts = {},
                                     const FactorizeOptions& fopts = {},
                                     const std::optional<SymMatrix>& w0 = std::nullopt) {
    detail::require_nonnegative(a, "nonsymmetric_nmf");
    if (!(cfg.gamma >= 0.0)) throw InvalidInput("nonsymmetric_nmf: gamma must be >= 0");
    if (a.rows() == 0 || a.cols() == 0) throw InvalidInput("nonsymmetric_nmf: empty matrix");
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    ObjectiveFn objective = [&a, cfg](const SymMatrix& w) { return nonsymmetric_objective(a, w, cfg); };

    NonsymResult out;
    out.report = projected_gradient_minimize(objective, ConstraintSet{Projector::psd()},
                                             w0 ? *w0 : SymMatrix::zeros(m + n),
                                             detail::scaled(opts, a));
    out.W = out.report.final_point;
    auto fac = factorize_hadamard_exp(out.W, fopts);
    out.factor_residual = fac.residual;
    const Matrix& u = fac.U.matrix();
    Matrix p(m, u.cols());
    Matrix q(n, u.cols());
    for (std::size_t c = 0; c < u.cols(); ++c) {
        for (std::size_t i = 0; i < m; ++i) p(i, c) = u(i, c);
        for (std::size_t j = 0; j < n; ++j) q(j, c) = u(m + j, c);
    }
    out.P = FactorMatrix(std::move(p));
    out.Q = FactorMatrix(std::move(q));
    return out;
}

} // namespace cvxnmf
