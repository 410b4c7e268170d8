#pragma once

// Dense matrices, the symmetric eigensolver, cone projections and
// Hadamard (entrywise) operations shared by the rest of the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace cvxnmf {

/// Dense row-major real matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows_ * cols_)
            throw InvalidInput("Matrix: value count does not match " + std::to_string(rows_) +
                               "x" + std::to_string(cols_));
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw InvalidInput("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o, "operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o, "operator-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Matrix& operator*=(double s) noexcept {
        for (double& v : data_) v *= s;
        return *this;
    }

    bool same_shape(const Matrix& o) const noexcept {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    void require_same_shape(const Matrix& o, const char* where) const {
        if (!same_shape(o)) throw InvalidInput(std::string(where) + ": shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw InvalidInput("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t l = 0; l < a.cols(); ++l) {
            const double ail = a(i, l);
            if (ail == 0.0) continue;
            auto bl = b.row(l);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += ail * bl[j];
        }
    }
    return c;
}

/// a * bᵀ without forming the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw InvalidInput("matmul_nt: inner dimensions differ");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto bj = b.row(j);
            c(i, j) = std::inner_product(ai.begin(), ai.end(), bj.begin(), 0.0);
        }
    }
    return c;
}

/// aᵀ * b without forming the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw InvalidInput("matmul_tn: inner dimensions differ");
    Matrix c(a.cols(), b.cols());
    for (std::size_t l = 0; l < a.rows(); ++l) {
        auto al = a.row(l);
        auto bl = b.row(l);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ali = al[i];
            if (ali == 0.0) continue;
            auto ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += ali * bl[j];
        }
    }
    return c;
}

inline double frobenius_dot(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw InvalidInput("frobenius_dot: shape mismatch");
    auto av = a.values();
    auto bv = b.values();
    return std::inner_product(av.begin(), av.end(), bv.begin(), 0.0);
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(const Matrix& a) {
    return std::all_of(a.values().begin(), a.values().end(),
                       [](double v) { return std::isfinite(v); });
}

/// Dense real symmetric matrix. Construction symmetrizes by (S + Sᵀ)/2 and
/// rejects inputs that are asymmetric beyond 1e-8 relative or non-finite.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(Matrix m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols()) throw InvalidInput("SymMatrix: matrix is not square");
        if (!all_finite(m_)) throw InvalidInput("SymMatrix: non-finite entry");
        const double tol = 1e-8 * std::max(1.0, max_abs(m_));
        for (std::size_t i = 0; i < m_.rows(); ++i)
            for (std::size_t j = i + 1; j < m_.cols(); ++j)
                if (std::abs(m_(i, j) - m_(j, i)) > tol)
                    throw InvalidInput("SymMatrix: asymmetric at (" + std::to_string(i) + "," +
                                       std::to_string(j) + ")");
        symmetrize();
    }

    SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
        : SymMatrix(Matrix(rows)) {}

    /// For results that are symmetric by construction up to round-off.
    /// Skips the asymmetry check; non-finite entries raise NumericError.
    static SymMatrix assume_symmetric(Matrix m) {
        if (m.rows() != m.cols()) throw InvalidInput("SymMatrix: matrix is not square");
        if (!all_finite(m)) throw NumericError("SymMatrix: non-finite entry");
        SymMatrix s;
        s.m_ = std::move(m);
        s.symmetrize();
        return s;
    }

    static SymMatrix zeros(std::size_t n) { return assume_symmetric(Matrix(n, n)); }
    static SymMatrix constant(std::size_t n, double v) { return assume_symmetric(Matrix(n, n, v)); }
    static SymMatrix identity(std::size_t n) { return assume_symmetric(Matrix::identity(n)); }
    static SymMatrix diagonal(std::span<const double> d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return SymMatrix(std::move(m));
    }

    std::size_t dim() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
    const Matrix& matrix() const noexcept { return m_; }
    std::span<const double> values() const noexcept { return m_.values(); }

    double trace() const noexcept {
        double t = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i);
        return t;
    }

    friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
        return assume_symmetric(a.m_ + b.m_);
    }
    friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
        return assume_symmetric(a.m_ - b.m_);
    }
    friend SymMatrix operator*(double s, const SymMatrix& a) { return assume_symmetric(s * a.m_); }
    friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

private:
    void symmetrize() {
        for (std::size_t i = 0; i < m_.rows(); ++i)
            for (std::size_t j = i + 1; j < m_.cols(); ++j) {
                const double v = 0.5 * (m_(i, j) + m_(j, i));
                m_(i, j) = v;
                m_(j, i) = v;
            }
    }

    Matrix m_;
};

inline double frobenius_norm(const SymMatrix& s) { return frobenius_norm(s.matrix()); }
inline double frobenius_dot(const SymMatrix& a, const SymMatrix& b) {
    return frobenius_dot(a.matrix(), b.matrix());
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending,
/// eigenvectors stored as orthonormal columns.
struct EigenDecomposition {
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
    /// Jacobi sweeps or total QL iterations spent.
    int sweeps = 0;

    std::size_t dim() const noexcept { return eigenvalues.size(); }

    /// Σ f(λᵢ) xᵢxᵢᵀ over the pairs where f(λᵢ) != 0.
    template <class F>
    SymMatrix reconstruct(F&& f) const {
        const std::size_t n = dim();
        std::vector<std::size_t> keep;
        std::vector<double> weight;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = f(eigenvalues[i]);
            if (w != 0.0) {
                keep.push_back(i);
                weight.push_back(w);
            }
        }
        Matrix out(n, n);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a; b < n; ++b) {
                double s = 0.0;
                for (std::size_t t = 0; t < keep.size(); ++t)
                    s += weight[t] * eigenvectors(a, keep[t]) * eigenvectors(b, keep[t]);
                out(a, b) = s;
                out(b, a) = s;
            }
        return SymMatrix::assume_symmetric(std::move(out));
    }

    SymMatrix reconstruct() const {
        return reconstruct([](double l) { return l; });
    }
};

inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr double kJacobiRelTol = 1e-12;

namespace detail {

inline EigenDecomposition sorted_decomposition(std::span<const double> d, const Matrix& v) {
    const std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return d[i] > d[j]; });
    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        out.eigenvalues[c] = d[order[c]];
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = v(r, order[c]);
    }
    return out;
}

} // namespace detail

/// Cyclic Jacobi eigensolver. Stops when the off-diagonal Frobenius norm
/// drops below 1e-12·‖S‖_F; throws NumericError after `max_sweeps` sweeps.
inline EigenDecomposition sym_eig_jacobi(const SymMatrix& s, int max_sweeps = kJacobiMaxSweeps) {
    const std::size_t n = s.dim();
    if (n == 0) throw InvalidInput("sym_eig: empty matrix");

    Matrix a = s.matrix();
    Matrix v = Matrix::identity(n);
    const double target = kJacobiRelTol * frobenius_norm(s);

    auto off_norm = [&] {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(off);
    };

    int sweep = 0;
    for (;; ++sweep) {
        if (off_norm() <= target) break;
        if (sweep >= max_sweeps)
            throw NumericError("sym_eig: no convergence after " + std::to_string(max_sweeps) +
                                   " Jacobi sweeps",
                               std::vector<double>(a.values().begin(), a.values().end()), n);
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Negligible relative to both diagonal entries: annihilate.
                if (sweep > 3 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
                    std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    const double np = c * akp - sn * akq;
                    const double nq = sn * akp + c * akq;
                    a(k, p) = np;
                    a(p, k) = np;
                    a(k, q) = nq;
                    a(q, k) = nq;
                }
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    auto vk = v.row(k);
                    const double vkp = vk[p];
                    const double vkq = vk[q];
                    vk[p] = c * vkp - sn * vkq;
                    vk[q] = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
    auto out = detail::sorted_decomposition(diag, v);
    out.sweeps = sweep;
    return out;
}

inline constexpr int kQlMaxIterations = 60;

/// Householder reduction to tridiagonal form followed by implicit-shift QL
/// (the EISPACK tred2/tql2 pair). At most 60 QL iterations per eigenvalue;
/// beyond that NumericError is thrown. This is the solver used throughout
/// the library; sym_eig_jacobi is the slower, rotation-only alternative.
inline EigenDecomposition sym_eig(const SymMatrix& s) {
    const std::size_t n = s.dim();
    if (n == 0) throw InvalidInput("sym_eig: empty matrix");
    Matrix v = s.matrix();
    std::vector<double> d(n);
    std::vector<double> e(n);

    // Tridiagonalize; v accumulates the orthogonal transformation.
    for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);
    for (std::size_t i = n - 1; i > 0; --i) {
        double scale = 0.0;
        double h = 0.0;
        for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (std::size_t j = 0; j < i; ++j) {
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
                v(j, i) = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = f > 0.0 ? -std::sqrt(h) : std::sqrt(h);
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                v(j, i) = f;
                g = e[j] + v(j, j) * f;
                for (std::size_t k = j + 1; k < i; ++k) {
                    g += v(k, j) * d[k];
                    e[k] += v(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (std::size_t k = j; k < i; ++k) v(k, j) -= f * e[k] + g * d[k];
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
            }
        }
        d[i] = h;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        v(n - 1, i) = v(i, i);
        v(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
            for (std::size_t j = 0; j <= i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
                for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
            }
        }
        for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = v(n - 1, j);
        v(n - 1, j) = 0.0;
    }
    v(n - 1, n - 1) = 1.0;
    e[0] = 0.0;

    // Implicit QL on the tridiagonal (d, e).
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    double shift_sum = 0.0;
    double tst1 = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();
    int total_iters = 0;
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t m = l;
        while (m < n && std::abs(e[m]) > eps * tst1) ++m;
        if (m == n) m = n - 1;
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > kQlMaxIterations)
                    throw NumericError("sym_eig: QL iteration did not converge for eigenvalue " +
                                       std::to_string(l));
                ++total_iters;
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0.0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
                shift_sum += h;

                p = d[m];
                double c = 1.0;
                double c2 = c;
                double c3 = c;
                const double el1 = e[l + 1];
                double sn = 0.0;
                double s2 = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = sn;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = sn * r;
                    sn = e[i] / r;
                    c = p / r;
                    p = c * d[i] - sn * g;
                    d[i + 1] = h + sn * (c * g + sn * d[i]);
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vk1 = v(k, i + 1);
                        v(k, i + 1) = sn * v(k, i) + c * vk1;
                        v(k, i) = c * v(k, i) - sn * vk1;
                    }
                }
                p = -sn * s2 * c3 * el1 * e[l] / dl1;
                e[l] = sn * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += shift_sum;
        e[l] = 0.0;
    }
    auto out = detail::sorted_decomposition(d, v);
    out.sweeps = total_iters;
    return out;
}

/// Frobenius-nearest PSD matrix: negative eigenvalues are set to zero.
inline SymMatrix psd_project(const SymMatrix& s) {
    const auto eig = sym_eig(s);
    if (eig.eigenvalues.back() >= 0.0) return s;
    return eig.reconstruct([](double l) { return l > 0.0 ? l : 0.0; });
}

inline double min_eigenvalue(const SymMatrix& s) { return sym_eig(s).eigenvalues.back(); }

inline constexpr double kExpArgLimit = 700.0;

/// Entrywise exponential. |X_ij| > 700 raises RangeError.
inline Matrix hadamard_exp(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    auto in = x.values();
    auto o = out.values();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!(std::abs(in[i]) <= kExpArgLimit))
            throw RangeError("hadamard_exp: entry " + std::to_string(in[i]) +
                             " outside [-700, 700]");
        o[i] = std::exp(in[i]);
    }
    return out;
}

inline SymMatrix hadamard_exp(const SymMatrix& x) {
    return SymMatrix::assume_symmetric(hadamard_exp(x.matrix()));
}

/// n×k matrix with nonnegative entries and k ≥ 1.
class FactorMatrix {
public:
    FactorMatrix() = default;
    explicit FactorMatrix(Matrix m) : m_(std::move(m)) {
        if (m_.cols() == 0) throw InvalidInput("FactorMatrix: needs at least one column");
        for (double v : m_.values())
            if (!(v >= 0.0) || !std::isfinite(v))
                throw InvalidInput("FactorMatrix: entries must be finite and nonnegative");
    }

    /// Single all-zero column, the factor of the zero matrix.
    static FactorMatrix zero(std::size_t rows) { return FactorMatrix(Matrix(rows, 1)); }

    std::size_t rows() const noexcept { return m_.rows(); }
    std::size_t cols() const noexcept { return m_.cols(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
    const Matrix& matrix() const noexcept { return m_; }

    /// UUᵀ.
    SymMatrix gram() const { return SymMatrix::assume_symmetric(matmul_nt(m_, m_)); }

    friend bool operator==(const FactorMatrix&, const FactorMatrix&) = default;

private:
    Matrix m_;
};

/// Columns uᵢ ∘ vⱼ ordered (u₁∘v₁, u₁∘v₂, …, u_k∘v_l), so that
/// (UUᵀ) ∘ (VVᵀ) = WWᵀ.
inline FactorMatrix hadamard_combine(const FactorMatrix& u, const FactorMatrix& v) {
    if (u.rows() != v.rows()) throw InvalidInput("hadamard_combine: row counts differ");
    const std::size_t n = u.rows();
    const std::size_t k = u.cols();
    const std::size_t l = v.cols();
    Matrix w(n, k * l);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < l; ++j) w(r, i * l + j) = u(r, i) * v(r, j);
    return FactorMatrix(std::move(w));
}

} // namespace cvxnmf
