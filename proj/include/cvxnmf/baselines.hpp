#pragma once

// Nonconvex NMF baselines A ≈ UVᵀ: Lee–Seung multiplicative updates and
// alternating least squares with clipping.

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "objectives.hpp"
#include "rng.hpp"

namespace cvxnmf {

struct BaselineOptions {
    std::size_t k = 1;
    int iters = 500;
    std::uint64_t seed = 0;
    double eps_guard = 1e-12;

    void validate() const {
        if (k < 1) throw InvalidInput("BaselineOptions: k must be >= 1");
        if (iters < 1) throw InvalidInput("BaselineOptions: iters must be >= 1");
        if (!(eps_guard > 0.0)) throw InvalidInput("BaselineOptions: eps_guard must be > 0");
    }
};

struct BaselineResult {
    FactorMatrix U;  ///< m×k
    FactorMatrix V;  ///< n×k
    /// ‖A − UVᵀ‖²_F at the start (entry 0) and after each iteration.
    std::vector<double> loss_trace;
};

/// Seeded start: U then V filled row-major with uniform draws in (0.1, 1.1)
/// from the stream derive(seed, {}).
inline std::pair<Matrix, Matrix> baseline_init(std::size_t m, std::size_t n, const BaselineOptions& opts) {
    CounterRng rng(CounterRng::derive(opts.seed, {}));
    Matrix u(m, opts.k);
    Matrix v(n, opts.k);
    for (double& e : u.values()) e = 0.1 + rng.uniform();
    for (double& e : v.values()) e = 0.1 + rng.uniform();
    return {std::move(u), std::move(v)};
}

namespace detail {

inline double baseline_loss(const Matrix& a, const Matrix& u, const Matrix& v) {
    return mse_loss(a, matmul_nt(u, v));
}

inline void check_baseline_input(const Matrix& a, const Matrix& u, const Matrix& v, std::size_t k) {
    for (double e : a.values())
        if (!(e >= 0.0) || !std::isfinite(e)) throw InvalidInput("baseline: A must be finite and nonnegative");
    if (u.rows() != a.rows() || v.rows() != a.cols() || u.cols() != k || v.cols() != k)
        throw InvalidInput("baseline: initial factor shapes do not match A and k");
}

/// Solves (G + ridge·I) x = b in place for symmetric positive definite G.
inline void cholesky_solve(Matrix g, std::vector<double>& b, double ridge) {
    const std::size_t k = g.rows();
    for (std::size_t i = 0; i < k; ++i) g(i, i) += ridge;
    for (std::size_t j = 0; j < k; ++j) {
        double d = g(j, j);
        for (std::size_t p = 0; p < j; ++p) d -= g(j, p) * g(j, p);
        d = std::sqrt(std::max(d, ridge));
        g(j, j) = d;
        for (std::size_t i = j + 1; i < k; ++i) {
            double s = g(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= g(i, p) * g(j, p);
            g(i, j) = s / d;
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        double s = b[i];
        for (std::size_t p = 0; p < i; ++p) s -= g(i, p) * b[p];
        b[i] = s / g(i, i);
    }
    for (std::size_t i = k; i-- > 0;) {
        double s = b[i];
        for (std::size_t p = i + 1; p < k; ++p) s -= g(p, i) * b[p];
        b[i] = s / g(i, i);
    }
}

/// Rows of argmin_X ‖B − X Fᵀ‖ (X = B F (FᵀF + ridge)^{-1}), negatives clipped.
inline Matrix ls_clip(const Matrix& b, const Matrix& f, double ridge) {
    const Matrix gram = matmul_tn(f, f);
    const Matrix rhs = matmul(b, f);
    Matrix x(b.rows(), f.cols());
    std::vector<double> row(f.cols());
    for (std::size_t i = 0; i < b.rows(); ++i) {
        for (std::size_t c = 0; c < f.cols(); ++c) row[c] = rhs(i, c);
        cholesky_solve(gram, row, ridge);
        for (std::size_t c = 0; c < f.cols(); ++c) x(i, c) = std::max(row[c], 0.0);
    }
    return x;
}

} // namespace detail

/// U ← U∘(AV)/(UVᵀV + ε), then V ← V∘(AᵀU)/(VUᵀU + ε).
inline BaselineResult multiplicative_update(const Matrix& a, const BaselineOptions& opts, Matrix u, Matrix v) {
    opts.validate();
    detail::check_baseline_input(a, u, v, opts.k);
    BaselineResult out;
    out.loss_trace.reserve(static_cast<std::size_t>(opts.iters) + 1);
    out.loss_trace.push_back(detail::baseline_loss(a, u, v));
    for (int it = 0; it < opts.iters; ++it) {
        {
            const Matrix num = matmul(a, v);
            const Matrix den = matmul(u, matmul_tn(v, v));
            for (std::size_t i = 0; i < u.rows(); ++i)
                for (std::size_t c = 0; c < opts.k; ++c) u(i, c) *= num(i, c) / (den(i, c) + opts.eps_guard);
        }
        {
            const Matrix num = matmul_tn(a, u);
            const Matrix den = matmul(v, matmul_tn(u, u));
            for (std::size_t j = 0; j < v.rows(); ++j)
                for (std::size_t c = 0; c < opts.k; ++c) v(j, c) *= num(j, c) / (den(j, c) + opts.eps_guard);
        }
        out.loss_trace.push_back(detail::baseline_loss(a, u, v));
    }
    out.U = FactorMatrix(std::move(u));
    out.V = FactorMatrix(std::move(v));
    return out;
}

inline BaselineResult multiplicative_update(const Matrix& a, const BaselineOptions& opts) {
    auto [u, v] = baseline_init(a.rows(), a.cols(), opts);
    return multiplicative_update(a, opts, std::move(u), std::move(v));
}

inline constexpr double kAlsRidge = 1e-10;

/// Alternating least squares: U from the normal equations with V fixed,
/// clip, then V with U fixed, clip. The loss trace is not monotone in
/// general.
inline BaselineResult als_nmf(const Matrix& a, const BaselineOptions& opts, Matrix u, Matrix v) {
    opts.validate();
    detail::check_baseline_input(a, u, v, opts.k);
    BaselineResult out;
    out.loss_trace.reserve(static_cast<std::size_t>(opts.iters) + 1);
    out.loss_trace.push_back(detail::baseline_loss(a, u, v));
    const Matrix at = transpose(a);
    for (int it = 0; it < opts.iters; ++it) {
        u = detail::ls_clip(a, v, kAlsRidge);
        v = detail::ls_clip(at, u, kAlsRidge);
        out.loss_trace.push_back(detail::baseline_loss(a, u, v));
    }
    out.U = FactorMatrix(std::move(u));
    out.V = FactorMatrix(std::move(v));
    return out;
}

inline BaselineResult als_nmf(const Matrix& a, const BaselineOptions& opts) {
    auto [u, v] = baseline_init(a.rows(), a.cols(), opts);
    return als_nmf(a, opts, std::move(u), std::move(v));
}

} // namespace cvxnmf
