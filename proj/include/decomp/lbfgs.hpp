#pragma once

#include "decomp/linalg.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace decomp {

struct DescentOptions {
    int max_iter = 1000;
    int memory = 10;
    /// Stop when ‖∇f‖_F <= grad_tol_abs + grad_tol_rel * ‖x‖_F.
    double grad_tol_abs = 0.0;
    double grad_tol_rel = 1e-8;
    int max_line_search = 60;
    double armijo = 1e-4;
    double curvature = 0.9;
    /// Record the accepted objective values in DescentResult::history.
    bool keep_history = false;
};

enum class DescentStatus { Converged, MaxIterations, LineSearchFailed };

inline const char *to_string(DescentStatus s) {
    switch (s) {
    case DescentStatus::Converged:
        return "converged";
    case DescentStatus::MaxIterations:
        return "max_iterations";
    case DescentStatus::LineSearchFailed:
        return "line_search_failed";
    }
    return "unknown";
}

struct DescentResult {
    Matrix x;
    Matrix gradient;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    DescentStatus status = DescentStatus::MaxIterations;
    std::vector<double> history;
};

namespace detail {
inline double inner(const Matrix &a, const Matrix &b) { return a.cwiseProduct(b).sum(); }
} // namespace detail

/// Limited-memory BFGS over matrix-shaped variables.
///
/// `fn(x, grad)` returns f(x) and writes ∇f(x) into `grad`. The line search
/// brackets a weak Wolfe step; every accepted step satisfies f_new <= f, so
/// the objective sequence is nonincreasing. Near the rounding floor of f the
/// Armijo test is replaced by the approximate Wolfe test (Hager-Zhang) still
/// subject to f_new <= f.
template <class Fn>
DescentResult minimize_lbfgs(Fn &&fn, Matrix x0, const DescentOptions &opt) {
    DescentResult res;
    res.x = std::move(x0);
    res.gradient.resizeLike(res.x);
    res.value = fn(res.x, res.gradient);
    if (!std::isfinite(res.value) || !res.gradient.allFinite())
        throw ConvergenceError("minimize_lbfgs: non-finite objective at the starting point");
    if (opt.keep_history)
        res.history.push_back(res.value);

    struct Pair {
        Matrix s, y;
        double rho;
    };
    std::deque<Pair> mem;
    Matrix g_new(res.x.rows(), res.x.cols()), x_new, direction;
    Matrix best_x, best_g;

    for (res.iterations = 0;; ++res.iterations) {
        res.grad_norm = res.gradient.norm();
        if (res.grad_norm <= opt.grad_tol_abs + opt.grad_tol_rel * res.x.norm()) {
            res.status = DescentStatus::Converged;
            return res;
        }
        if (res.iterations >= opt.max_iter) {
            res.status = DescentStatus::MaxIterations;
            return res;
        }

        // Two-loop recursion.
        direction = -res.gradient;
        std::vector<double> alpha(mem.size());
        for (std::size_t i = mem.size(); i-- > 0;) {
            alpha[i] = mem[i].rho * detail::inner(mem[i].s, direction);
            direction -= alpha[i] * mem[i].y;
        }
        if (!mem.empty()) {
            const auto &last = mem.back();
            direction *= 1.0 / (last.rho * last.y.squaredNorm());
        } else {
            const double xn = res.x.norm();
            direction *= (xn > 0 ? 1e-2 * xn : 1.0) / res.grad_norm;
        }
        for (std::size_t i = 0; i < mem.size(); ++i) {
            const double beta = mem[i].rho * detail::inner(mem[i].y, direction);
            direction += (alpha[i] - beta) * mem[i].s;
        }
        double slope = detail::inner(res.gradient, direction);
        if (!(slope < 0)) {
            mem.clear();
            direction = -res.gradient;
            slope = -res.grad_norm * res.grad_norm;
        }

        // Weak Wolfe bracketing.
        const double f0 = res.value;
        const double approx_tol = 1e-10 * std::abs(f0);
        double lo = 0.0, hi = std::numeric_limits<double>::infinity(), t = 1.0;
        bool accepted = false;
        double best_f = f0;
        bool have_best = false;
        for (int ls = 0; ls < opt.max_line_search; ++ls) {
            x_new = res.x + t * direction;
            const double f = fn(x_new, g_new);
            const bool finite = std::isfinite(f) && g_new.allFinite();
            if (finite && f < best_f) {
                best_f = f;
                best_x = x_new;
                best_g = g_new;
                have_best = true;
            }
            const double new_slope = finite ? detail::inner(g_new, direction) : 0.0;
            const bool armijo = finite && f <= f0 + opt.armijo * t * slope;
            const bool approx_wolfe = finite && f <= f0 && f - f0 <= approx_tol &&
                                      new_slope <= (2.0 * 0.1 - 1.0) * slope;
            if (!finite || (!armijo && !approx_wolfe)) {
                hi = t;
            } else if (new_slope < opt.curvature * slope) {
                lo = t;
            } else {
                accepted = true;
                res.value = f;
                break;
            }
            t = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo;
        }
        if (!accepted) {
            if (!have_best) {
                res.status = DescentStatus::LineSearchFailed;
                return res;
            }
            x_new = best_x;
            g_new = best_g;
            res.value = best_f;
        }

        Pair p{x_new - res.x, g_new - res.gradient, 0.0};
        const double sy = detail::inner(p.s, p.y);
        if (sy > 1e-12 * p.s.norm() * p.y.norm()) {
            p.rho = 1.0 / sy;
            mem.push_back(std::move(p));
            if (static_cast<int>(mem.size()) > opt.memory)
                mem.pop_front();
        }
        res.x.swap(x_new);
        res.gradient.swap(g_new);
        if (opt.keep_history)
            res.history.push_back(res.value);
    }
}

} // namespace decomp
