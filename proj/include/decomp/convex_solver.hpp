#pragma once

#include "decomp/lbfgs.hpp"
#include "decomp/linalg.hpp"
#include "decomp/norms.hpp"
#include "decomp/objectives.hpp"
#include "decomp/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace decomp {

struct SolverConfig {
    /// Smoothing of the l1 terms; unset means eps_rel * max|Y|.
    std::optional<double> eps;
    double eps_rel = 1e-4;
    /// Halve eps once after the first certified (or final) descent.
    bool continuation = true;
    /// Relative stationarity tolerance, see stationarity_tolerance().
    double grad_tol = 1e-9;
    int max_iter = 5000;
    Index m_init = 1;
    /// Largest column count; 0 means N.
    Index m_max = 0;
    /// Minimum number of columns appended per growth step.
    Index m_step = 1;
    /// Relative tolerance of the rank and PSD tests.
    double eig_tol = 1e-6;
    /// L-BFGS history length; 0 picks 10 for estimation and 40 for the norm
    /// lower bound, whose surplus columns decay along very flat directions.
    int memory = 0;
    std::uint64_t seed = 0;
};

struct ConvexSolution {
    Matrix U; // N x M
    Matrix A; // U Uᵀ
    Matrix V; // P x M
    Matrix X; // U Vᵀ
    /// Objective with the unsmoothed penalty.
    double objective = 0.0;
    bool certified_global = false;
    Index rank_estimate = 0;
    double eps = 0.0;
    int iterations = 0;
    int growth_steps = 0;

    Index size() const { return U.cols(); }
};

struct Certificate {
    bool certified = false;
    Index rank_estimate = 0;
    double min_eigenvalue = 0.0;
};

namespace detail {

inline Index resolve_m_max(const SolverConfig &cfg, Index n) {
    return cfg.m_max > 0 ? cfg.m_max : n;
}

inline void validate(const SolverConfig &cfg, Index n) {
    if ((cfg.eps && !(*cfg.eps > 0)) || !(cfg.eps_rel > 0))
        throw std::invalid_argument("SolverConfig: eps and eps_rel must be positive");
    if (!(cfg.grad_tol > 0))
        throw std::invalid_argument("SolverConfig: grad_tol must be positive");
    if (cfg.max_iter <= 0 || cfg.memory < 0)
        throw std::invalid_argument("SolverConfig: max_iter must be positive, memory >= 0");
    if (!(cfg.eig_tol > 0))
        throw std::invalid_argument("SolverConfig: eig_tol must be positive");
    const Index m_max = resolve_m_max(cfg, n);
    if (cfg.m_init < 1 || cfg.m_init > m_max || m_max > n)
        throw std::invalid_argument("SolverConfig: need 1 <= m_init <= m_max <= N (N = " +
                                    std::to_string(n) + ")");
    if (cfg.m_step < 1)
        throw std::invalid_argument("SolverConfig: m_step must be >= 1");
}

inline double resolve_eps(const SolverConfig &cfg, const Matrix &data) {
    return cfg.eps ? *cfg.eps : cfg.eps_rel * data.cwiseAbs().maxCoeff();
}

} // namespace detail

/// Certificate for a stationary U of H(U) = G(U Uᵀ): global optimality of
/// U Uᵀ holds when U is rank deficient (rank < M) and ∇G(U Uᵀ) is positive
/// semidefinite. Rank counts singular values above
/// eig_tol * max(σ_max(U), rank_floor); the PSD test accepts
/// λ_min(∇G) >= -eig_tol * ‖∇G‖₂.
inline Certificate certify_global(const Matrix &u, const Matrix &grad_g, const SolverConfig &cfg,
                                  double rank_floor = 0.0) {
    Certificate out;
    out.rank_estimate = numerical_rank(u, cfg.eig_tol, rank_floor);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (grad_g + grad_g.transpose()),
                                              Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
        return out;
    const Vector &ev = eig.eigenvalues();
    out.min_eigenvalue = ev(0);
    const double spectral = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    out.certified = out.rank_estimate < u.cols() && ev(0) >= -cfg.eig_tol * spectral;
    return out;
}

namespace detail {

/// Absolute scale of U used for the stationarity and rank floors: √σ_max(Y).
inline double u_scale(const Matrix &y) {
    const double top = y.isZero(0.0) ? 0.0 : singular_values(y)(0);
    return std::sqrt(top);
}

struct StageResult {
    DescentResult descent;
    Certificate cert;
};

inline StageResult descend_estimation(const Matrix &y, double lambda, double nu, double eps,
                                      Matrix u0, const SolverConfig &cfg, double scale) {
    const EstimationObjective obj(y, lambda, nu, eps);
    DescentOptions opt;
    opt.max_iter = cfg.max_iter;
    opt.memory = cfg.memory > 0 ? cfg.memory : 10;
    opt.grad_tol_rel = cfg.grad_tol * lambda;
    opt.grad_tol_abs = cfg.grad_tol * lambda * scale;
    StageResult out{minimize_lbfgs(obj, std::move(u0), opt), {}};
    if (!std::isfinite(out.descent.value))
        throw ConvergenceError("solve_estimation: non-finite objective");
    if (out.descent.status == DescentStatus::MaxIterations) {
        out.cert.rank_estimate = numerical_rank(out.descent.x, cfg.eig_tol, scale);
        return out;
    }
    out.cert = certify_global(out.descent.x, obj.gradient_wrt_a(out.descent.x), cfg, scale);
    return out;
}

inline Matrix initial_factor(const Matrix &y, Index m, std::uint64_t seed) {
    const double n = static_cast<double>(y.rows()), p = static_cast<double>(y.cols());
    const double s = std::sqrt(y.norm() / (n * p));
    if (s == 0.0)
        return Matrix::Zero(y.rows(), m);
    RngStream rng(seed);
    return s * standard_normal_matrix(rng, y.rows(), m);
}

/// Number of eigenvalues of ∇G below -eig_tol * ‖∇G‖₂.
inline Index negative_directions(const Eigen::SelfAdjointEigenSolver<Matrix> &eig, double eig_tol) {
    const Vector &ev = eig.eigenvalues();
    const double spectral = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    Index k = 0;
    while (k < ev.size() && ev(k) < -eig_tol * spectral)
        ++k;
    return k;
}

/// Appends max(m_step, #negative directions of ∇G) columns, capped at m_max:
/// small Gaussian noise plus the negative curvature directions.
inline Matrix grow(const Matrix &u, const Matrix &grad_g, const SolverConfig &cfg, Index m_max,
                   double scale, RngStream &rng) {
    const Index n = u.rows(), m = u.cols();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (grad_g + grad_g.transpose()));
    const bool ok = eig.info() == Eigen::Success;
    const Index neg = ok ? negative_directions(eig, cfg.eig_tol) : 0;
    const Index count = std::min(std::max(cfg.m_step, neg), m_max - m);
    Matrix out(n, m + count);
    out.leftCols(m) = u;
    const double unorm = u.norm();
    const double base = unorm > 0 ? unorm : scale;
    const double noise = 1e-4 * base / std::sqrt(static_cast<double>(n * (m + count)));
    out.rightCols(count) = noise * standard_normal_matrix(rng, n, count);
    for (Index k = 0; k < std::min(count, neg); ++k)
        out.col(m + k) += 1e-4 * base * eig.eigenvectors().col(k);
    return out;
}

inline ConvexSolution finish(const Matrix &y, double lambda, double nu, const StageResult &st,
                             double eps) {
    ConvexSolution sol;
    const EstimationObjective exact(y, lambda, nu, 0.0);
    sol.U = st.descent.x;
    sol.A = sol.U * sol.U.transpose();
    sol.V = exact.optimal_v(sol.U);
    sol.X = sol.U * sol.V.transpose();
    sol.objective = exact.evaluate(sol.U);
    sol.certified_global = st.cert.certified;
    sol.rank_estimate = st.cert.rank_estimate;
    sol.eps = eps;
    return sol;
}

/// When σ_max(Y) <= λNP the subgradient D = I of F at 0 gives
/// ∇G(0) = (λ/2)(I - Y Yᵀ/(λNP)²) ⪰ 0, so A = 0 is the global minimum for
/// every ν. Smoothing would otherwise turn it into a tiny full-rank A.
inline ConvexSolution zero_solution(const Matrix &y, double lambda, double nu, Index m,
                                    double eps) {
    StageResult st;
    st.descent.x = Matrix::Zero(y.rows(), m);
    st.cert.certified = true;
    return finish(y, lambda, nu, st, eps);
}

} // namespace detail

/// Minimizes G(A) = (1/2NP) tr Yᵀ(A/λNP + I)⁻¹Y + (λ/2) F(A) over A = U Uᵀ,
/// starting at M = m_init columns (or from `warm_start`) and appending
/// columns whenever the rank-deficiency certificate fails, until it holds or
/// M reaches m_max. An uncertified result is still returned, flagged.
/// Data with σ_max(Y) <= λNP returns U = 0 directly (certified).
inline ConvexSolution grow_and_solve(const Matrix &y, double lambda, double nu,
                                     const SolverConfig &cfg,
                                     const std::optional<Matrix> &warm_start = std::nullopt) {
    require_nonempty(y, "solve_estimation");
    require_finite(y, "solve_estimation");
    if (!(lambda > 0) || !std::isfinite(lambda))
        throw std::invalid_argument("solve_estimation: lambda must be positive");
    require_nu(nu);
    detail::validate(cfg, y.rows());
    const Index m_max = detail::resolve_m_max(cfg, y.rows());

    double eps = detail::resolve_eps(cfg, y);
    const double scale = detail::u_scale(y);
    const double c = lambda * static_cast<double>(y.size());
    if (!warm_start && scale * scale <= c)
        return detail::zero_solution(y, lambda, nu, cfg.m_init, eps);
    Matrix u;
    if (warm_start) {
        if (warm_start->rows() != y.rows() || warm_start->cols() < 1 || warm_start->cols() > m_max)
            throw std::invalid_argument("solve_estimation: warm start has shape " +
                                        shape_string(*warm_start));
        u = *warm_start;
    } else {
        u = detail::initial_factor(y, cfg.m_init, cfg.seed);
    }
    RngStream rng = RngStream(cfg.seed).substream(0x67726f77);

    int iterations = 0, growth = 0;
    bool halved = !cfg.continuation || eps == 0.0;
    detail::StageResult st;
    for (;;) {
        st = detail::descend_estimation(y, lambda, nu, eps, u, cfg, scale);
        iterations += st.descent.iterations;
        u = st.descent.x;
        const bool done = st.cert.certified || u.cols() >= m_max;
        if (done && !halved) {
            halved = true;
            eps *= 0.5;
            continue;
        }
        if (done)
            break;
        const EstimationObjective obj(y, lambda, nu, eps);
        u = detail::grow(u, obj.gradient_wrt_a(u), cfg, m_max, scale, rng);
        ++growth;
    }
    ConvexSolution sol = detail::finish(y, lambda, nu, st, eps);
    sol.iterations = iterations;
    sol.growth_steps = growth;
    return sol;
}

/// Convex lower-bound estimation: see grow_and_solve.
inline ConvexSolution solve_estimation(const Matrix &y, double lambda, double nu,
                                       const SolverConfig &cfg = {}) {
    return grow_and_solve(y, lambda, nu, cfg);
}

struct NormBound {
    double value = 0.0;
    /// Minimizing factor (N x M); empty when X = 0.
    Matrix U;
    double eps = 0.0;
};

/// Lower bound on the mixed decomposition norm:
/// min_{A ⪰ 0} ½ F(A) + ½ tr Xᵀ A⁻¹ X, with A = U Uᵀ over M = m_max columns
/// (N by default) and A regularized as A + 1e-9 tr(A)/N · I. With
/// continuation, eps is divided by 10 four times. The reported value uses the
/// unsmoothed F.
inline NormBound norm_lower_bound_solution(const Matrix &x, double nu, const SolverConfig &cfg = {}) {
    require_nonempty(x, "norm_lower_bound");
    require_finite(x, "norm_lower_bound");
    require_nu(nu);
    detail::validate(cfg, x.rows());
    NormBound out;
    if (x.isZero(0.0))
        return out;
    const Index n = x.rows(), m = detail::resolve_m_max(cfg, n);
    double eps = detail::resolve_eps(cfg, x);
    const double s =
        std::sqrt(x.norm() / static_cast<double>(n * x.cols()));
    RngStream rng(cfg.seed);
    Matrix u = s * standard_normal_matrix(rng, n, m);

    DescentOptions opt;
    opt.max_iter = cfg.max_iter;
    opt.memory = cfg.memory > 0 ? cfg.memory : 40;
    opt.grad_tol_rel = cfg.grad_tol;
    opt.grad_tol_abs = cfg.grad_tol * std::sqrt(x.norm());
    // The unsmoothed value at the smoothed minimizer is biased upward by
    // O(eps); continuation down to 1e-4 eps keeps the bound usable at 1e-6.
    const int stages = cfg.continuation ? 5 : 1;
    for (int stage = 0; stage < stages; ++stage) {
        const NormObjective obj(x, nu, eps);
        u = minimize_lbfgs(obj, std::move(u), opt).x;
        if (stage + 1 < stages)
            eps *= 0.1;
    }
    out.value = NormObjective(x, nu, 0.0).evaluate(u);
    if (!std::isfinite(out.value))
        throw ConvergenceError("norm_lower_bound: non-finite objective");
    out.U = std::move(u);
    out.eps = eps;
    return out;
}

inline double norm_lower_bound(const Matrix &x, double nu, const SolverConfig &cfg = {}) {
    return norm_lower_bound_solution(x, nu, cfg).value;
}

} // namespace decomp
