#pragma once

// Losses, the smooth objectives of the exponential restriction, the
// KL dual and its duality-gap certificate.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "matrix.hpp"

namespace cvxnmf {

enum class LossKind { MSE, KL };

inline std::string_view to_string(LossKind k) { return k == LossKind::MSE ? "mse" : "kl"; }

inline LossKind parse_loss(std::string_view s) {
    if (s == "mse" || s == "MSE") return LossKind::MSE;
    if (s == "kl" || s == "KL") return LossKind::KL;
    throw InvalidInput("unknown loss '" + std::string(s) + "' (expected kl or mse)");
}

/// x·log(x) with 0·log 0 = 0. Negative arguments are a hard error.
inline double xlogx(double x) {
    if (x < 0.0) throw DomainError("log of negative argument " + std::to_string(x));
    return x == 0.0 ? 0.0 : x * std::log(x);
}

/// Σᵢⱼ (A_ij − Y_ij)², the squared Frobenius distance.
inline double mse_loss(const Matrix& a, const Matrix& y) {
    if (!a.same_shape(y)) throw InvalidInput("mse_loss: shape mismatch");
    double s = 0.0;
    auto av = a.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - yv[i];
        s += d * d;
    }
    return s;
}

/// Generalized KL divergence Σ A log(A/Y) + Y − A with 0·log 0 = 0.
inline double kl_loss(const Matrix& a, const Matrix& y) {
    if (!a.same_shape(y)) throw InvalidInput("kl_loss: shape mismatch");
    double s = 0.0;
    auto av = a.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double aij = av[i];
        const double yij = yv[i];
        if (aij < 0.0) throw InvalidInput("kl_loss: negative data entry");
        if (aij == 0.0) {
            s += yij;
            continue;
        }
        if (yij <= 0.0) throw DomainError("kl_loss: model entry <= 0 where data is positive");
        s += aij * std::log(aij / yij) + yij - aij;
    }
    return s;
}

inline double mse_loss(const SymMatrix& a, const SymMatrix& y) {
    return mse_loss(a.matrix(), y.matrix());
}
inline double kl_loss(const SymMatrix& a, const SymMatrix& y) {
    return kl_loss(a.matrix(), y.matrix());
}
inline double loss(LossKind kind, const Matrix& a, const Matrix& y) {
    return kind == LossKind::MSE ? mse_loss(a, y) : kl_loss(a, y);
}

struct ValueGrad {
    double value = 0.0;
    SymMatrix gradient;
};

/// f(X) = Σ A(log A − X) + exp(X) − A, ∇f = exp_H(X) − A.
inline ValueGrad kl_objective_grad(const SymMatrix& a, const SymMatrix& x) {
    if (a.dim() != x.dim()) throw InvalidInput("kl_objective_grad: dimension mismatch");
    const Matrix e = hadamard_exp(x.matrix());
    Matrix g(a.dim(), a.dim());
    double value = 0.0;
    auto av = a.values();
    auto xv = x.values();
    auto ev = e.values();
    auto gv = g.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        if (av[i] < 0.0) throw InvalidInput("kl_objective_grad: negative data entry");
        const double alog = av[i] == 0.0 ? 0.0 : av[i] * (std::log(av[i]) - xv[i]);
        value += alog + ev[i] - av[i];
        gv[i] = ev[i] - av[i];
    }
    return {value, SymMatrix::assume_symmetric(std::move(g))};
}

/// f(X) = Σ (exp(X) − A)², ∇f = 2(exp(X) − A)∘exp(X).
inline ValueGrad mse_objective_grad(const SymMatrix& a, const SymMatrix& x) {
    if (a.dim() != x.dim()) throw InvalidInput("mse_objective_grad: dimension mismatch");
    const Matrix e = hadamard_exp(x.matrix());
    Matrix g(a.dim(), a.dim());
    double value = 0.0;
    auto av = a.values();
    auto ev = e.values();
    auto gv = g.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double r = ev[i] - av[i];
        value += r * r;
        gv[i] = 2.0 * r * ev[i];
    }
    return {value, SymMatrix::assume_symmetric(std::move(g))};
}

inline ValueGrad objective_grad(LossKind kind, const SymMatrix& a, const SymMatrix& x) {
    return kind == LossKind::MSE ? mse_objective_grad(a, x) : kl_objective_grad(a, x);
}

/// Dual of the KL restriction,
///   g(Y) = Σ A log A + Y − (A+Y) log(A+Y),   Y ⪰ 0.
/// Minimizing the Lagrangian f(X) − ⟨Y, X⟩ over X gives exp(X) = A + Y, and
/// substituting back yields exactly g(Y). The Σ(A log A − A) part is
/// constant in Y; keeping it makes g(Y*) = f(X*) so the gap closes at the
/// optimum.
inline double dual_objective(const SymMatrix& a, const SymMatrix& y) {
    if (a.dim() != y.dim()) throw InvalidInput("dual_objective: dimension mismatch");
    double s = 0.0;
    auto av = a.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double ay = av[i] + yv[i];
        if (ay < 0.0) throw DomainError("dual_objective: A + Y has a negative entry");
        s += xlogx(av[i]) + yv[i] - xlogx(ay);
    }
    return s;
}

struct DualCertificate {
    SymMatrix y;
    double primal_value = 0.0;
    double dual_value = 0.0;
    double gap = 0.0;
    /// Factor θ ∈ (0,1] applied to psd_project(exp_H(X) − A) to keep A + Y ≥ 0.
    double dual_scale = 1.0;
};

/// Certificate for a primal point X ⪰ 0 of the KL restriction, using the
/// dual point Y = θ·(exp_H(X) − A)₊ with the largest θ ∈ [0,1] such that
/// A + Y ≥ 0 entrywise (θ = 1 near the optimum).
inline DualCertificate duality_gap(const SymMatrix& a, const SymMatrix& x) {
    const ValueGrad primal = kl_objective_grad(a, x);
    SymMatrix y = psd_project(primal.gradient);
    double theta = 1.0;
    auto av = a.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < av.size(); ++i)
        if (yv[i] < 0.0 && av[i] + yv[i] < 0.0) theta = std::min(theta, av[i] / -yv[i]);
    if (theta < 1.0) {
        y = theta * y;
        // Guard the boundary entries against round-off below -A.
        Matrix m = y.matrix();
        auto mv = m.values();
        for (std::size_t i = 0; i < av.size(); ++i) mv[i] = std::max(mv[i], -av[i]);
        y = SymMatrix::assume_symmetric(std::move(m));
    }
    DualCertificate c;
    c.primal_value = primal.value;
    c.dual_value = dual_objective(a, y);
    c.gap = c.primal_value - c.dual_value;
    c.dual_scale = theta;
    c.y = std::move(y);
    return c;
}

} // namespace cvxnmf
