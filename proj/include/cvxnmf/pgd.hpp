#pragma once

// Projected-gradient minimization over an intersection of closed convex
// sets of symmetric matrices. Intersections are projected with Dykstra's
// algorithm.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "matrix.hpp"
#include "objectives.hpp"

namespace cvxnmf {

/// One closed convex set with an exact Frobenius projector.
class Projector {
public:
    enum class Kind { PSD, LowerBound, UpperBound, Nonnegative };

    static Projector psd() { return Projector(Kind::PSD, {}); }
    static Projector nonnegative() { return Projector(Kind::Nonnegative, {}); }
    /// Entrywise X ≥ L. Entries of L may be -inf (no bound).
    static Projector lower_bound(Matrix l) { return Projector(Kind::LowerBound, std::move(l)); }
    /// Entrywise X ≤ B. Entries of B may be +inf (no bound).
    static Projector upper_bound(Matrix b) { return Projector(Kind::UpperBound, std::move(b)); }

    Kind kind() const noexcept { return kind_; }
    const Matrix& bound() const noexcept { return bound_; }

    SymMatrix apply(const SymMatrix& x) const {
        switch (kind_) {
        case Kind::PSD: return psd_project(x);
        case Kind::Nonnegative: {
            Matrix m = x.matrix();
            for (double& v : m.values()) v = std::max(v, 0.0);
            return SymMatrix::assume_symmetric(std::move(m));
        }
        case Kind::LowerBound:
        case Kind::UpperBound: {
            check_dim(x);
            Matrix m = x.matrix();
            auto mv = m.values();
            auto bv = bound_.values();
            for (std::size_t i = 0; i < mv.size(); ++i)
                mv[i] = kind_ == Kind::LowerBound ? std::max(mv[i], bv[i]) : std::min(mv[i], bv[i]);
            return SymMatrix::assume_symmetric(std::move(m));
        }
        }
        return x;
    }

    /// Largest constraint violation (0 when feasible).
    double violation(const SymMatrix& x) const {
        switch (kind_) {
        case Kind::PSD: return std::max(0.0, -min_eigenvalue(x));
        case Kind::Nonnegative: {
            double v = 0.0;
            for (double e : x.values()) v = std::max(v, -e);
            return v;
        }
        case Kind::LowerBound:
        case Kind::UpperBound: {
            check_dim(x);
            double v = 0.0;
            auto xv = x.values();
            auto bv = bound_.values();
            for (std::size_t i = 0; i < xv.size(); ++i)
                v = std::max(v, kind_ == Kind::LowerBound ? bv[i] - xv[i] : xv[i] - bv[i]);
            return v;
        }
        }
        return 0.0;
    }

private:
    Projector(Kind k, Matrix b) : kind_(k), bound_(std::move(b)) {
        if (kind_ != Kind::LowerBound && kind_ != Kind::UpperBound) return;
        if (bound_.rows() != bound_.cols()) throw InvalidInput("Projector: bound must be square");
        const double sentinel = kind_ == Kind::LowerBound ? -INFINITY : INFINITY;
        for (std::size_t i = 0; i < bound_.rows(); ++i)
            for (std::size_t j = 0; j < bound_.cols(); ++j) {
                const double v = bound_(i, j);
                if (std::isnan(v) || (std::isinf(v) && v != sentinel))
                    throw InvalidInput("Projector: bound entries must be finite or the "
                                       "matching infinity");
                if (v != bound_(j, i)) throw InvalidInput("Projector: bound must be symmetric");
            }
    }

    void check_dim(const SymMatrix& x) const {
        if (x.dim() != bound_.rows()) throw InvalidInput("Projector: bound dimension mismatch");
    }

    Kind kind_;
    Matrix bound_;
};

/// Ordered, non-empty list of sets whose intersection is the feasible set.
class ConstraintSet {
public:
    ConstraintSet(std::initializer_list<Projector> items) : items_(items) { check(); }
    explicit ConstraintSet(std::vector<Projector> items) : items_(std::move(items)) { check(); }

    const std::vector<Projector>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }

    double violation(const SymMatrix& x) const {
        double v = 0.0;
        for (const auto& p : items_) v = std::max(v, p.violation(x));
        return v;
    }

private:
    void check() const {
        if (items_.empty()) throw InvalidInput("ConstraintSet: at least one set is required");
    }
    std::vector<Projector> items_;
};

struct DykstraResult {
    SymMatrix point;
    int cycles = 0;
};

/// Dykstra's algorithm: the Frobenius projection of X onto the intersection.
/// Returns with cycles = 0 when one set's projection is already feasible.
/// Stops when a full cycle moves the iterate by less than tol·max(1, ‖X‖_F).
/// Throws NumericError (carrying the last iterate) if that does not happen
/// within max_cycles, or if the stalled iterate is infeasible, which means
/// the sets do not intersect.
inline DykstraResult dykstra(const SymMatrix& x, const ConstraintSet& c, double tol,
                             int max_cycles) {
    if (c.size() == 1) return {c.items().front().apply(x), 1};
    const double scale = std::max(1.0, frobenius_norm(x));
    // A single-set projection that lands in every other set is already the
    // projection onto the intersection.
    for (const auto& p : c.items()) {
        SymMatrix y = p.apply(x);
        if (c.violation(y) <= tol * scale) return {std::move(y), 0};
    }
    const std::size_t m = c.size();
    std::vector<Matrix> corr(m, Matrix(x.dim(), x.dim()));
    SymMatrix cur = x;
    for (int cycle = 1; cycle <= max_cycles; ++cycle) {
        const SymMatrix start = cur;
        for (std::size_t i = 0; i < m; ++i) {
            const SymMatrix shifted = SymMatrix::assume_symmetric(cur.matrix() + corr[i]);
            SymMatrix next = c.items()[i].apply(shifted);
            corr[i] = shifted.matrix() - next.matrix();
            cur = std::move(next);
        }
        if (frobenius_norm(cur - start) < tol * scale) {
            const double feas = std::max(100.0 * tol, 1e-10) * scale;
            if (c.violation(cur) > feas) {
                auto v = cur.values();
                throw NumericError("dykstra: iterates stalled outside the intersection; the "
                                   "sets appear not to intersect",
                                   {v.begin(), v.end()}, cur.dim());
            }
            return {std::move(cur), cycle};
        }
    }
    auto v = cur.values();
    throw NumericError("dykstra: no convergence after " + std::to_string(max_cycles) + " cycles",
                       {v.begin(), v.end()}, cur.dim());
}

inline SymMatrix dykstra_project(const SymMatrix& x, const ConstraintSet& c, double tol,
                                 int max_cycles) {
    return dykstra(x, c, tol, max_cycles).point;
}

struct SolverOptions {
    int max_iter = 2000;
    /// Target on the duality gap when a certificate is supplied, otherwise on
    /// the Frobenius norm of the projected-gradient mapping. Both are
    /// multiplied by tol_scale (callers pass max(1, ‖A‖_F)).
    double tol = 1e-6;
    double tol_scale = 1.0;
    double init_step = 1.0;
    double ls_shrink = 0.5;
    int ls_max = 40;
    int gap_check_every = 10;
    bool record_history = false;
    double dykstra_tol = 1e-10;
    int dykstra_max_cycles = 20000;

    void validate() const {
        if (max_iter < 0) throw InvalidInput("SolverOptions: max_iter must be >= 0");
        if (!(tol > 0.0)) throw InvalidInput("SolverOptions: tol must be > 0");
        if (!(tol_scale > 0.0)) throw InvalidInput("SolverOptions: tol_scale must be > 0");
        if (!(init_step > 0.0)) throw InvalidInput("SolverOptions: init_step must be > 0");
        if (!(ls_shrink > 0.0 && ls_shrink < 1.0))
            throw InvalidInput("SolverOptions: ls_shrink must lie in (0,1)");
        if (ls_max < 1) throw InvalidInput("SolverOptions: ls_max must be >= 1");
        if (gap_check_every < 1) throw InvalidInput("SolverOptions: gap_check_every must be >= 1");
        if (!(dykstra_tol > 0.0) || dykstra_max_cycles < 1)
            throw InvalidInput("SolverOptions: bad Dykstra settings");
    }
};

enum class StopReason { tolerance, max_iter, line_search_failure };

inline std::string_view to_string(StopReason r) {
    switch (r) {
    case StopReason::tolerance: return "tolerance";
    case StopReason::max_iter: return "max_iter";
    case StopReason::line_search_failure: return "line_search_failure";
    }
    return "?";
}

struct SolveReport {
    SymMatrix final_point;
    double final_value = 0.0;
    int iterations = 0;
    bool converged = false;
    StopReason stop_reason = StopReason::max_iter;
    std::optional<double> final_gap;
    double gradient_mapping_norm = NAN;
    std::vector<double> value_history;
    std::vector<double> gap_history;
};

using ObjectiveFn = std::function<ValueGrad(const SymMatrix&)>;
using GapFn = std::function<double(const SymMatrix&)>;

/// Minimize f over C by x⁺ = p_C(x − t∇f(x)), with t chosen by Armijo
/// backtracking on the gradient mapping G = (x − x⁺)/t:
///   f(x⁺) ≤ f(x) − 1e-4·t·‖G‖².
/// The trial step starts at twice the last accepted one, capped at init_step.
inline SolveReport projected_gradient_minimize(const ObjectiveFn& objective,
                                               const ConstraintSet& constraints,
                                               const SymMatrix& x0, const SolverOptions& opts,
                                               const GapFn& certificate = {}) {
    opts.validate();
    constexpr double kArmijo = 1e-4;
    const double target = opts.tol * opts.tol_scale;

    auto project = [&](const SymMatrix& x) {
        return dykstra_project(x, constraints, opts.dykstra_tol, opts.dykstra_max_cycles);
    };
    auto evaluate = [&](const SymMatrix& x) {
        ValueGrad vg = objective(x);
        if (!std::isfinite(vg.value)) throw NumericError("projected_gradient: non-finite objective");
        return vg;
    };

    SolveReport rep;
    SymMatrix x = project(x0);
    ValueGrad cur = evaluate(x);
    if (opts.record_history) rep.value_history.push_back(cur.value);

    auto check_gap = [&]() {
        const double gap = certificate(x);
        rep.final_gap = gap;
        if (opts.record_history) rep.gap_history.push_back(gap);
        return gap <= target;
    };
    auto finish = [&](StopReason why, bool ok) {
        rep.final_point = x;
        rep.final_value = cur.value;
        rep.stop_reason = why;
        rep.converged = ok;
        return rep;
    };

    double step = opts.init_step;
    double step_cap = opts.init_step;
    Matrix last_move;
    for (int it = 0; it < opts.max_iter; ++it) {
        if (certificate && it % opts.gap_check_every == 0 && check_gap())
            return finish(StopReason::tolerance, true);

        bool accepted = false;
        SymMatrix trial;
        ValueGrad next;
        for (int ls = 0; ls < opts.ls_max; ++ls, step *= opts.ls_shrink) {
            trial = project(x - step * cur.gradient);
            const double gnorm = frobenius_norm(x - trial) / step;
            rep.gradient_mapping_norm = gnorm;
            if (!certificate && gnorm <= target) {
                // Stationary to tolerance; keep the trial only if it is no worse.
                try {
                    ValueGrad tv = evaluate(trial);
                    if (tv.value <= cur.value) {
                        x = std::move(trial);
                        cur = std::move(tv);
                        ++rep.iterations;
                        if (opts.record_history) rep.value_history.push_back(cur.value);
                    }
                } catch (const RangeError&) {
                } catch (const DomainError&) {
                }
                return finish(StopReason::tolerance, true);
            }
            try {
                next = evaluate(trial);
            } catch (const RangeError&) {
                continue;
            } catch (const DomainError&) {
                continue;
            }
            // Rounding slack so that steps near the optimum, where the
            // decrease drops below double resolution, are not rejected.
            const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(cur.value));
            if (next.value <= cur.value - kArmijo * step * gnorm * gnorm + slack) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (certificate && check_gap()) return finish(StopReason::tolerance, true);
            return finish(StopReason::line_search_failure, false);
        }
        // Consecutive moves pointing against each other mean the step
        // overshoots the valley; lower the ceiling on later steps.
        Matrix move = trial.matrix() - x.matrix();
        const bool zigzag = it > 0 && frobenius_dot(move, last_move) < 0.0;
        last_move = std::move(move);
        x = std::move(trial);
        cur = std::move(next);
        ++rep.iterations;
        if (opts.record_history) rep.value_history.push_back(cur.value);
        if (zigzag) step_cap = step * opts.ls_shrink;
        step = std::min(step_cap, step / opts.ls_shrink);
    }
    if (certificate && opts.max_iter > 0 && check_gap()) return finish(StopReason::tolerance, true);
    return finish(StopReason::max_iter, false);
}

} // namespace cvxnmf
