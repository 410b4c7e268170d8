#pragma once

// Completely positive factorizations.
//
// For X ⪰ 0 with eigenpairs (λᵢ, xᵢ), exp_H(X) is the Hadamard product of
// the factors exp_H(vᵢvᵢᵀ), vᵢ = √λᵢ·xᵢ. Each factor splits as
//   exp_H(vvᵀ) = exp(−M²) · exp_H(yyᵀ) ∘ zzᵀ,  M = max|vᵢ|, y = M1 + v ≥ 0,
//   z = exp_H(−M v) > 0,
// and exp_H(yyᵀ) = Σ_d (y^{∘d})(y^{∘d})ᵀ / d! has nonnegative columns.
// Merging the per-direction factors column-wise (hadamard_combine) gives
// exp_H(X) ≈ UUᵀ with U ≥ 0.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "matrix.hpp"

namespace cvxnmf {

/// Upper bound r(r+1)/2 − 1 on the cp-rank of a completely positive matrix
/// of rank r ≥ 2. Returns r for r ∈ {0, 1}.
inline long long cp_rank_bound(long long r) {
    if (r < 0) throw InvalidInput("cp_rank_bound: rank must be >= 0");
    if (r < 2) return r;
    return r * (r + 1) / 2 - 1;
}

struct RankOneExpFactors {
    std::vector<double> v;
    double M = 0.0;
    std::vector<double> y;
    std::vector<double> z;
    double scale = 1.0;
};

inline RankOneExpFactors decompose_rank_one_exp(std::span<const double> v) {
    RankOneExpFactors f;
    f.v.assign(v.begin(), v.end());
    for (double e : v) {
        if (!std::isfinite(e)) throw InvalidInput("decompose_rank_one_exp: non-finite entry");
        f.M = std::max(f.M, std::abs(e));
    }
    f.y.resize(v.size());
    f.z.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        f.y[i] = std::max(0.0, f.M + v[i]);
        f.z[i] = std::exp(-f.M * v[i]);
    }
    f.scale = std::exp(-f.M * f.M);
    return f;
}

/// Columns y^{∘d}/√(d!) for d = 0..degree; UUᵀ is the degree-truncated
/// Taylor series of exp_H(yyᵀ).
inline FactorMatrix taylor_factor(std::span<const double> y, int degree) {
    if (degree < 1) throw InvalidInput("taylor_factor: degree must be >= 1");
    for (double e : y)
        if (!(e >= 0.0)) throw InvalidInput("taylor_factor: y must be nonnegative");
    Matrix u(y.size(), static_cast<std::size_t>(degree) + 1);
    for (std::size_t r = 0; r < y.size(); ++r) {
        double term = 1.0;  // y^d / sqrt(d!)
        u(r, 0) = 1.0;
        for (int d = 1; d <= degree; ++d) {
            term *= y[r] / std::sqrt(static_cast<double>(d));
            if (!std::isfinite(term))
                throw RangeError("taylor_factor: y^d overflows at degree " + std::to_string(d) +
                                 "; lower the degree or rescale X");
            u(r, static_cast<std::size_t>(d)) = term;
        }
    }
    return FactorMatrix(std::move(u));
}

namespace detail {

inline double squared_column_norm(const Matrix& u, std::size_t c) {
    double s = 0.0;
    for (std::size_t r = 0; r < u.rows(); ++r) s += u(r, c) * u(r, c);
    return s;
}

inline Matrix select_columns(const Matrix& u, const std::vector<std::size_t>& cols) {
    Matrix out(u.rows(), cols.size());
    for (std::size_t r = 0; r < u.rows(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = u(r, cols[c]);
    return out;
}

struct Pruned {
    Matrix u;
    bool capped = false;
};

/// Drops the smallest columns while their summed squared norms (each column's
/// ‖uuᵀ‖_F) stay within `budget`, then keeps at most `max_cols` of the
/// largest. Equal norms: the higher column index goes first. Surviving
/// columns keep their relative order; at least one column survives.
inline Pruned prune_columns(const Matrix& u, double budget, std::size_t max_cols) {
    const std::size_t k = u.cols();
    std::vector<double> norm2(k);
    for (std::size_t c = 0; c < k; ++c) norm2[c] = squared_column_norm(u, c);
    std::vector<std::size_t> asc(k);
    std::iota(asc.begin(), asc.end(), std::size_t{0});
    std::sort(asc.begin(), asc.end(), [&](std::size_t a, std::size_t b) {
        return norm2[a] != norm2[b] ? norm2[a] < norm2[b] : a > b;
    });
    std::vector<char> keep(k, 1);
    double dropped = 0.0;
    std::size_t remaining = k;
    for (std::size_t idx : asc) {
        if (remaining == 1 || dropped + norm2[idx] > budget) break;
        dropped += norm2[idx];
        keep[idx] = 0;
        --remaining;
    }
    Pruned out;
    if (remaining > max_cols) {
        out.capped = true;
        std::size_t to_drop = remaining - max_cols;
        for (std::size_t idx : asc) {
            if (to_drop == 0) break;
            if (keep[idx]) {
                keep[idx] = 0;
                --to_drop;
            }
        }
    }
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < k; ++c)
        if (keep[c]) cols.push_back(c);
    out.u = select_columns(u, cols);
    return out;
}

} // namespace detail

struct QuadrantRotation {
    Matrix rows;        ///< rotated n×2 rows
    double span = 0.0;  ///< angle of the cone spanned by the nonzero rows
};

/// Rotates the rows of an n×2 matrix so that the planar cone they span is
/// centred on the diagonal of the first quadrant. Inner products between
/// rows are unchanged. When span ≤ π/2 every rotated row is nonnegative up
/// to round-off.
inline QuadrantRotation rotate_into_quadrant(const Matrix& g) {
    if (g.cols() != 2) throw InvalidInput("rotate_into_quadrant: expected two columns");
    double max_norm = 0.0;
    for (std::size_t r = 0; r < g.rows(); ++r) max_norm = std::max(max_norm, std::hypot(g(r, 0), g(r, 1)));
    std::vector<double> angles;
    for (std::size_t r = 0; r < g.rows(); ++r)
        if (std::hypot(g(r, 0), g(r, 1)) > 1e-14 * max_norm) angles.push_back(std::atan2(g(r, 1), g(r, 0)));
    QuadrantRotation out{g, 0.0};
    if (angles.empty()) return out;
    std::sort(angles.begin(), angles.end());
    constexpr double two_pi = 2.0 * std::numbers::pi;
    // The cone is the complement of the largest circular gap between angles.
    double gap = angles.front() + two_pi - angles.back();
    double start = angles.front();
    for (std::size_t i = 1; i < angles.size(); ++i) {
        const double d = angles[i] - angles[i - 1];
        if (d > gap) {
            gap = d;
            start = angles[i];
        }
    }
    out.span = two_pi - gap;
    const double phi = std::numbers::pi / 4.0 - (start + out.span / 2.0);
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    for (std::size_t r = 0; r < g.rows(); ++r) {
        const double a = g(r, 0);
        const double b = g(r, 1);
        out.rows(r, 0) = c * a - s * b;
        out.rows(r, 1) = s * a + c * b;
    }
    return out;
}

namespace detail {

inline constexpr double kRankTwoRelTol = 1e-8;

/// Nonnegative factor of λ₁u₁u₁ᵀ + λ₂u₂u₂ᵀ (λ₁ ≥ λ₂ ≥ 0). Always returns
/// `pad_to` columns when pad_to > 0 (zero-padded in the rank-one case).
inline Matrix factor_top_two(double l1, std::span<const double> u1, double l2,
                             std::span<const double> u2, std::size_t pad_to) {
    const std::size_t n = u1.size();
    const bool rank_one = l2 <= kRankTwoRelTol * l1;
    Matrix g(n, rank_one ? 1 : 2);
    const double s1 = std::sqrt(std::max(l1, 0.0));
    const double s2 = std::sqrt(std::max(l2, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
        g(r, 0) = s1 * u1[r];
        if (!rank_one) g(r, 1) = s2 * u2[r];
    }
    double max_entry = 0.0;
    for (double v : g.values()) max_entry = std::max(max_entry, std::abs(v));
    const double neg_tol = std::sqrt(kRankTwoRelTol) * max_entry;

    if (rank_one) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) sum += g(r, 0);
        const double sign = sum < 0.0 ? -1.0 : 1.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double v = sign * g(r, 0);
            if (v < -neg_tol) throw Infeasible("rank-one factor has entries of both signs");
            g(r, 0) = std::max(v, 0.0);
        }
    } else {
        auto rot = rotate_into_quadrant(g);
        if (rot.span > std::numbers::pi / 2.0 + kRankTwoRelTol)
            throw Infeasible("rank-two Gram cone is wider than a quadrant (span " +
                             std::to_string(rot.span) + " rad)");
        for (double& v : rot.rows.values()) {
            if (v < -neg_tol) throw Infeasible("rank-two factor has a negative entry");
            v = std::max(v, 0.0);
        }
        g = std::move(rot.rows);
    }
    if (pad_to > g.cols()) {
        Matrix padded(n, pad_to);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) padded(r, c) = g(r, c);
        g = std::move(padded);
    }
    return g;
}

inline std::vector<double> column(const Matrix& m, std::size_t c) {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c);
    return out;
}

} // namespace detail

/// Nonnegative factor U (≤ 2 columns) with UUᵀ = S for a doubly
/// nonnegative S of rank ≤ 2.
inline FactorMatrix cp_factor_rank_two(const SymMatrix& s) {
    const std::size_t n = s.dim();
    const auto eig = sym_eig(s);
    const double l1 = eig.eigenvalues.front();
    if (l1 <= 0.0) {
        if (max_abs(s.matrix()) == 0.0) return FactorMatrix::zero(n);
        throw InvalidInput("cp_factor_rank_two: matrix is not positive semidefinite");
    }
    const double tol = detail::kRankTwoRelTol * l1;
    if (eig.eigenvalues.back() < -tol)
        throw InvalidInput("cp_factor_rank_two: matrix is not positive semidefinite");
    if (n >= 3 && eig.eigenvalues[2] > tol)
        throw InvalidInput("cp_factor_rank_two: numerical rank exceeds two");
    for (double v : s.values())
        if (v < -tol) throw InvalidInput("cp_factor_rank_two: matrix has negative entries");
    const double l2 = n >= 2 ? eig.eigenvalues[1] : 0.0;
    const auto u1 = detail::column(eig.eigenvectors, 0);
    const auto u2 = n >= 2 ? detail::column(eig.eigenvectors, 1) : std::vector<double>(n, 0.0);
    return FactorMatrix(detail::factor_top_two(l1, u1, l2, u2, 0));
}

enum class FactorizeMode { taylor, rank_two };

struct FactorizeOptions {
    int taylor_degree = 12;
    FactorizeMode mode = FactorizeMode::taylor;
    /// Columns are dropped while their summed ‖uuᵀ‖_F stays below
    /// prune_tol·‖target‖_F.
    double prune_tol = 1e-10;
    /// Eigen-directions of X with λ ≤ eig_cutoff·λ_max are ignored.
    double eig_cutoff = 1e-10;
    std::size_t max_cols = 4096;

    void validate() const {
        if (taylor_degree < 1) throw InvalidInput("FactorizeOptions: taylor_degree must be >= 1");
        if (!(prune_tol >= 0.0)) throw InvalidInput("FactorizeOptions: prune_tol must be >= 0");
        if (!(eig_cutoff >= 0.0)) throw InvalidInput("FactorizeOptions: eig_cutoff must be >= 0");
        if (max_cols < 1) throw InvalidInput("FactorizeOptions: max_cols must be >= 1");
    }
};

struct HadamardExpFactorization {
    FactorMatrix U;
    /// ‖exp_H(X) − UUᵀ‖_F / ‖exp_H(X)‖_F
    double residual = 0.0;
    /// Number r of retained eigen-directions.
    std::size_t factors_used = 0;
    /// Product of the per-direction column counts, i.e. the width of the
    /// unpruned Hadamard combination ((degree+1)^r or 2^r).
    double columns_before_pruning = 1.0;
    bool capped = false;
};

/// Relative Frobenius error of UUᵀ against exp_H(X).
inline double hadamard_exp_residual(const SymMatrix& x, const FactorMatrix& u) {
    const Matrix e = hadamard_exp(x.matrix());
    return frobenius_norm(e - matmul_nt(u.matrix(), u.matrix())) / frobenius_norm(e);
}

/// exp_H(X) ≈ UUᵀ with U ≥ 0 for X ⪰ 0 (X is PSD-projected first).
inline HadamardExpFactorization factorize_hadamard_exp(const SymMatrix& x,
                                                       const FactorizeOptions& opts = {}) {
    opts.validate();
    const std::size_t n = x.dim();
    const SymMatrix xp = psd_project(x);
    const Matrix target = hadamard_exp(xp.matrix());
    const double target_norm = frobenius_norm(target);
    const auto eig = sym_eig(xp);
    const double lmax = eig.eigenvalues.front();

    HadamardExpFactorization out;
    Matrix u(n, 1, 1.0);  // exp_H(0) = 11ᵀ
    bool first = true;
    for (std::size_t i = 0; i < n && lmax > 0.0; ++i) {
        const double lambda = eig.eigenvalues[i];
        if (!(lambda > opts.eig_cutoff * lmax)) break;
        std::vector<double> v = detail::column(eig.eigenvectors, i);
        for (double& e : v) e *= std::sqrt(lambda);

        Matrix f;
        if (opts.mode == FactorizeMode::taylor) {
            const auto parts = decompose_rank_one_exp(v);
            f = taylor_factor(parts.y, opts.taylor_degree).matrix();
            for (std::size_t r = 0; r < n; ++r) {
                // √scale · z_r = exp(−M²/2 − M v_r), kept in one exponent.
                const double w = std::exp(-0.5 * parts.M * parts.M - parts.M * v[r]);
                for (std::size_t c = 0; c < f.cols(); ++c) f(r, c) *= w;
            }
        } else {
            Matrix outer(n, n);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b) outer(a, b) = v[a] * v[b];
            const auto fe = sym_eig(hadamard_exp(SymMatrix::assume_symmetric(std::move(outer))));
            const double l1 = fe.eigenvalues[0];
            const double l2 = n >= 2 ? std::max(fe.eigenvalues[1], 0.0) : 0.0;
            const auto u1 = detail::column(fe.eigenvectors, 0);
            const auto u2 = n >= 2 ? detail::column(fe.eigenvectors, 1) : std::vector<double>(n, 0.0);
            double min_entry = 0.0;
            double max_entry = 0.0;
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b) {
                    const double e = l1 * u1[a] * u1[b] + l2 * u2[a] * u2[b];
                    min_entry = std::min(min_entry, e);
                    max_entry = std::max(max_entry, e);
                }
            if (min_entry < -detail::kRankTwoRelTol * max_entry)
                throw ModeFailure("rank-two approximation of exp_H(v v^T) for eigen-direction " +
                                      std::to_string(i) + " has negative entries",
                                  i);
            try {
                f = detail::factor_top_two(l1, u1, l2, u2, 2);
            } catch (const Infeasible& e) {
                throw ModeFailure(std::string(e.what()) + " (eigen-direction " +
                                      std::to_string(i) + ")",
                                  i);
            }
        }
        ++out.factors_used;
        out.columns_before_pruning *= static_cast<double>(f.cols());
        if (first) {
            u = std::move(f);
            first = false;
        } else {
            u = hadamard_combine(FactorMatrix(std::move(u)), FactorMatrix(std::move(f))).matrix();
        }
        const double partial = frobenius_norm(matmul_nt(u, u));
        auto pruned = detail::prune_columns(u, opts.prune_tol * partial, opts.max_cols);
        out.capped = out.capped || pruned.capped;
        u = std::move(pruned.u);
    }
    if (first) {
        auto pruned = detail::prune_columns(u, opts.prune_tol * target_norm, opts.max_cols);
        u = std::move(pruned.u);
    }
    out.U = FactorMatrix(std::move(u));
    out.residual = frobenius_norm(target - matmul_nt(out.U.matrix(), out.U.matrix())) / target_norm;
    return out;
}

} // namespace cvxnmf
