#pragma once

#include "decomp/lbfgs.hpp"
#include "decomp/linalg.hpp"
#include "decomp/objectives.hpp"

#include <Eigen/QR>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

// Path following from the convex surrogate (eta = 0) to the per-atom penalty
// (eta = 1), warm-starting each stage from the previous one.

namespace decomp {

struct HomotopySchedule {
    std::vector<double> etas{0.0, 0.25, 0.5, 0.75, 1.0};
    int iters_per_stage = 200;
    /// Iteration cap of the final eta = 1 stage, which is run to convergence.
    int final_stage_iters = 5000;
    double grad_tol = 1e-9;

    void validate() const {
        if (etas.size() < 2 || etas.front() != 0.0 || etas.back() != 1.0)
            throw std::invalid_argument("HomotopySchedule: etas must start at 0 and end at 1");
        for (std::size_t i = 1; i < etas.size(); ++i)
            if (!(etas[i] > etas[i - 1]))
                throw std::invalid_argument("HomotopySchedule: etas must be strictly increasing");
        if (iters_per_stage <= 0 || final_stage_iters <= 0 || !(grad_tol > 0))
            throw std::invalid_argument(
                "HomotopySchedule: iteration caps and grad_tol must be positive");
    }
};

struct RoundedFactorization {
    Matrix U; // N x M, zero columns pruned
    Matrix V; // P x M
    /// Unsmoothed eta = 1 objective at U0 and at the returned U.
    double objective_start = 0.0;
    double objective = 0.0;
    /// ‖U Vᵀ - X‖_F.
    double residual = 0.0;
};

struct RoundedEstimate {
    Matrix U;
    Matrix V;
    Matrix X;
    /// Unsmoothed eta = 1 objective at U0 and at the returned U.
    double objective_start = 0.0;
    double objective = 0.0;
};

namespace detail {

inline Matrix prune_columns(const Matrix &u) {
    const Vector norms = u.colwise().norm().transpose();
    const double top = norms.size() ? norms.maxCoeff() : 0.0;
    std::vector<Index> keep;
    for (Index m = 0; m < u.cols(); ++m)
        if (top > 0 && norms(m) > 1e-8 * top)
            keep.push_back(m);
    Matrix out(u.rows(), static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
        out.col(static_cast<Index>(k)) = u.col(keep[k]);
    return out;
}

template <class MakeObjective>
Matrix follow_path(Matrix u, const HomotopySchedule &schedule, double tol_abs,
                   MakeObjective &&make, const char *what) {
    DescentOptions opt;
    opt.grad_tol_rel = schedule.grad_tol;
    opt.grad_tol_abs = tol_abs;
    for (std::size_t k = 0; k < schedule.etas.size(); ++k) {
        const double eta = schedule.etas[k];
        opt.max_iter = k + 1 == schedule.etas.size() ? schedule.final_stage_iters
                                                     : schedule.iters_per_stage;
        const auto obj = make(eta);
        const std::string stage = std::string(what) + ": stage " + std::to_string(k) +
                                  " (eta = " + std::to_string(eta) + ")";
        DescentResult r;
        try {
            r = minimize_lbfgs(obj, std::move(u), opt);
        } catch (const ConvergenceError &) {
            throw ConvergenceError(stage + ": non-finite objective");
        }
        if (!std::isfinite(r.value))
            throw ConvergenceError(stage + ": non-finite objective");
        u = std::move(r.x);
    }
    return u;
}

} // namespace detail

/// Rounds a factor of the norm lower bound of X toward an explicit
/// factorization X = U Vᵀ. V is the minimum-norm solution of U Vᵀ = X, which
/// equals Xᵀ(U Uᵀ)⁻¹U on the span of U.
inline RoundedFactorization round_norm_factorization(const Matrix &x, const Matrix &u0, double nu,
                                                     double eps,
                                                     const HomotopySchedule &schedule = {}) {
    require_finite(x, "round_norm_factorization");
    require_finite(u0, "round_norm_factorization");
    schedule.validate();
    if (u0.rows() != x.rows() || u0.cols() < 1)
        throw std::invalid_argument("round_norm_factorization: U0 has shape " + shape_string(u0) +
                                    ", X has shape " + shape_string(x));
    if (!(eps > 0))
        throw std::invalid_argument("round_norm_factorization: eps must be positive");
    const NormObjective exact(x, nu, 0.0, 1.0);
    RoundedFactorization out;
    out.objective_start = exact.evaluate(u0);
    if (!std::isfinite(out.objective_start))
        throw ConvergenceError("round_norm_factorization: U0 Uᵀ0 is singular");

    Matrix u = detail::follow_path(
        u0, schedule, schedule.grad_tol * std::sqrt(x.norm()),
        [&](double eta) { return NormObjective(x, nu, eps, eta); }, "round_norm_factorization");
    if (!(exact.evaluate(u) <= out.objective_start))
        u = u0;
    out.U = detail::prune_columns(u);
    out.objective = exact.evaluate(out.U);
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(out.U);
    out.V = cod.solve(x).transpose();
    out.residual = (out.U * out.V.transpose() - x).norm();
    return out;
}

/// Rounds a convex estimation solution U0 by following eta from 0 to 1 on
/// (1/2NP) tr Yᵀ(U Uᵀ/λNP + I)⁻¹Y + (λ/2)[(1-eta) F(U Uᵀ) + eta Σ F(u_m u_mᵀ)],
/// with λ fixed. V = Yᵀ(U Uᵀ + λNP I)⁻¹U and X = U Vᵀ.
inline RoundedEstimate round_estimation(const Matrix &y, double lambda, double nu, const Matrix &u0,
                                        double eps, const HomotopySchedule &schedule = {}) {
    require_finite(y, "round_estimation");
    require_finite(u0, "round_estimation");
    schedule.validate();
    if (u0.rows() != y.rows() || u0.cols() < 1)
        throw std::invalid_argument("round_estimation: U0 has shape " + shape_string(u0) +
                                    ", Y has shape " + shape_string(y));
    if (!(eps > 0))
        throw std::invalid_argument("round_estimation: eps must be positive");
    const EstimationObjective exact(y, lambda, nu, 0.0, 1.0);
    RoundedEstimate out;
    out.objective_start = exact.evaluate(u0);

    const double top = y.isZero(0.0) ? 0.0 : singular_values(y)(0);
    Matrix u = detail::follow_path(
        u0, schedule, schedule.grad_tol * lambda * std::sqrt(top),
        [&](double eta) { return EstimationObjective(y, lambda, nu, eps, eta); },
        "round_estimation");
    if (!(exact.evaluate(u) <= out.objective_start))
        u = u0;
    out.U = detail::prune_columns(u);
    if (out.U.cols() == 0) {
        out.U = Matrix::Zero(y.rows(), 1);
    }
    out.objective = exact.evaluate(out.U);
    out.V = exact.optimal_v(out.U);
    out.X = out.U * out.V.transpose();
    return out;
}

} // namespace decomp
