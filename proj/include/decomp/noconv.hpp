#pragma once

#include "decomp/linalg.hpp"
#include "decomp/prox.hpp"
#include "decomp/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace decomp {

struct AltMinConfig {
    int max_sweeps = 500;
    /// Stop when the relative objective decrease over a sweep falls below tol.
    double tol = 1e-7;
    /// Proximal-gradient steps per U-step.
    int inner_iters = 10;
    int restarts = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_sweeps <= 0 || inner_iters <= 0 || restarts <= 0)
            throw std::invalid_argument("AltMinConfig: counts must be positive");
        if (!(tol > 0))
            throw std::invalid_argument("AltMinConfig: tol must be positive");
    }
};

struct NoConvResult {
    Matrix U; // N x M
    Matrix V; // P x M
    Matrix X; // U Vᵀ
    double objective = 0.0;
    int sweeps = 0;
    int best_restart = 0;
    /// Objective after each sweep of the best restart.
    std::vector<double> history;
};

/// (1/2NP) ‖Y - U Vᵀ‖² + (λ/2) Σ_m (‖u_m‖₁² + ‖v_m‖₂²).
inline double noconv_objective(const Matrix &y, double lambda, const Matrix &u, const Matrix &v) {
    const double np = static_cast<double>(y.size());
    const double l1 = u.cwiseAbs().colwise().sum().squaredNorm();
    return (y - u * v.transpose()).squaredNorm() / (2.0 * np) + 0.5 * lambda * (l1 + v.squaredNorm());
}

namespace detail {

/// Exact minimizer in V: Yᵀ U (Uᵀ U + λNP I)⁻¹.
inline Matrix noconv_v_step(const Matrix &y, double lambda, const Matrix &u) {
    Matrix k = u.transpose() * u;
    k.diagonal().array() += lambda * static_cast<double>(y.size());
    return k.llt().solve(u.transpose() * y).transpose();
}

/// Proximal gradient on U with step 1/L, L = ‖VᵀV‖₂/NP, and the per-column
/// prox of the squared ℓ1 norm. Each step does not increase the objective.
inline Matrix noconv_u_step(const Matrix &y, double lambda, Matrix u, const Matrix &v, int iters) {
    const double np = static_cast<double>(y.size());
    const Matrix vtv = v.transpose() * v;
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(vtv, Eigen::EigenvaluesOnly);
    const double lip = eig.eigenvalues().maxCoeff() / np;
    if (!(lip > 0))
        return Matrix::Zero(u.rows(), u.cols());
    const double step = 1.0 / lip;
    const Matrix yv = y * v;
    for (int k = 0; k < iters; ++k) {
        const Matrix z = u - step * (u * vtv - yv) / np;
        for (Index m = 0; m < u.cols(); ++m)
            u.col(m) = prox_squared_l1(z.col(m), step * lambda);
    }
    return u;
}

} // namespace detail

/// Alternating minimization of the sparse dictionary objective with M atoms:
/// U-step by proximal gradient, exact ridge V-step, best of `restarts`
/// random dictionaries (unit columns, U = 0).
inline NoConvResult noconv_solve(const Matrix &y, double lambda, Index m,
                                 const AltMinConfig &cfg = {}) {
    require_nonempty(y, "noconv_solve");
    require_finite(y, "noconv_solve");
    if (m < 1)
        throw std::invalid_argument("noconv_solve: M must be >= 1");
    if (!(lambda > 0) || !std::isfinite(lambda))
        throw std::invalid_argument("noconv_solve: lambda must be positive");
    cfg.validate();
    const Index n = y.rows(), p = y.cols();
    const RngStream root(cfg.seed);

    NoConvResult best;
    best.objective = std::numeric_limits<double>::infinity();
    for (int r = 0; r < cfg.restarts; ++r) {
        RngStream rng = root.substream(static_cast<std::uint64_t>(r));
        Matrix v = standard_normal_matrix(rng, p, m);
        v.colwise().normalize();
        Matrix u = Matrix::Zero(n, m);
        double prev = noconv_objective(y, lambda, u, v);
        std::vector<double> history;
        int sweeps = 0;
        while (sweeps < cfg.max_sweeps) {
            u = detail::noconv_u_step(y, lambda, std::move(u), v, cfg.inner_iters);
            v = detail::noconv_v_step(y, lambda, u);
            const double cur = noconv_objective(y, lambda, u, v);
            ++sweeps;
            history.push_back(cur);
            const double drop = prev - cur;
            prev = cur;
            if (drop <= cfg.tol * std::max(std::abs(cur), std::numeric_limits<double>::min()))
                break;
        }
        if (prev < best.objective) {
            best.U = std::move(u);
            best.V = std::move(v);
            best.objective = prev;
            best.sweeps = sweeps;
            best.best_restart = r;
            best.history = std::move(history);
        }
    }
    best.X = best.U * best.V.transpose();
    return best;
}

} // namespace decomp
