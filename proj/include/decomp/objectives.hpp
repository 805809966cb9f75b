#pragma once

#include "decomp/linalg.hpp"
#include "decomp/norms.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <stdexcept>

// Smoothed objectives over U, with A = U Uᵀ. The penalty is blended between
// the convex surrogate F(U Uᵀ) (eta = 0) and the per-atom sum Σ_m F(u_m u_mᵀ)
// (eta = 1); eta = 0 gives the convex problems, intermediate values the
// rounding homotopy.

namespace decomp {

namespace detail {

/// (1 - eta) F_eps(U Uᵀ) + eta Σ_m f_vec_eps(u_m), plus its gradient in U.
inline double blended_penalty(const Matrix &u, double nu, double eps, double eta, Matrix *grad,
                              Matrix *grad_a = nullptr) {
    double value = 0.0;
    if (grad)
        grad->setZero(u.rows(), u.cols());
    if (eta < 1.0) {
        const Matrix a = u * u.transpose();
        Matrix d;
        value += (1.0 - eta) * f_penalty_smoothed(a, nu, eps, (grad || grad_a) ? &d : nullptr);
        if (grad)
            grad->noalias() += (2.0 * (1.0 - eta)) * (d * u);
        if (grad_a)
            *grad_a = d;
    }
    if (eta > 0.0) {
        Vector g;
        for (Index m = 0; m < u.cols(); ++m) {
            value += eta * f_vec_smoothed(u.col(m), nu, eps, grad ? &g : nullptr);
            if (grad)
                grad->col(m) += eta * g;
        }
    }
    return value;
}

inline void require_eta(double eta) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw std::invalid_argument("eta must lie in [0, 1]");
}

} // namespace detail

/// Square-loss estimation objective with V profiled out:
///
///   H(U) = (λ/2) tr Yᵀ (U Uᵀ + c I)⁻¹ Y + (λ/2) penalty_eta(U),   c = λ N P,
///
/// which equals (1/2NP) tr Yᵀ (U Uᵀ/(λNP) + I)⁻¹ Y + (λ/2) penalty. The
/// minimizing V for a given U is Yᵀ (U Uᵀ + c I)⁻¹ U.
class EstimationObjective {
  public:
    EstimationObjective(const Matrix &y, double lambda, double nu, double eps, double eta = 0.0)
        : y_(y), lambda_(lambda), nu_(nu), eps_(eps), eta_(eta),
          c_(lambda * static_cast<double>(y.rows()) * static_cast<double>(y.cols())) {
        if (!(lambda > 0) || !std::isfinite(lambda))
            throw std::invalid_argument("EstimationObjective: lambda must be positive");
        require_nu(nu);
        detail::require_eta(eta);
        if (eps < 0)
            throw std::invalid_argument("EstimationObjective: eps must be nonnegative");
    }

    double lambda() const { return lambda_; }
    double nu() const { return nu_; }
    double eps() const { return eps_; }
    double eta() const { return eta_; }
    double ridge() const { return c_; }

    /// (U Uᵀ + c I)⁻¹ Y via the M x M system (Uᵀ U + c I).
    Matrix resolvent_times_y(const Matrix &u) const {
        Matrix k = u.transpose() * u;
        k.diagonal().array() += c_;
        const Matrix w = u.transpose() * y_;
        const Matrix z = k.llt().solve(w);
        return (y_ - u * z) / c_;
    }

    double operator()(const Matrix &u, Matrix &grad) const { return evaluate(u, &grad); }

    double evaluate(const Matrix &u, Matrix *grad = nullptr) const {
        const Matrix b = resolvent_times_y(u);
        const double loss = 0.5 * lambda_ * y_.cwiseProduct(b).sum();
        Matrix pen_grad;
        const double pen =
            detail::blended_penalty(u, nu_, eps_, eta_, grad ? &pen_grad : nullptr);
        if (grad) {
            *grad = 0.5 * lambda_ * pen_grad;
            grad->noalias() -= lambda_ * (b * (b.transpose() * u));
        }
        return loss + 0.5 * lambda_ * pen;
    }

    /// ∇G at A = U Uᵀ for the convex (eta = 0) objective: (λ/2)(∂F_eps(A) - B Bᵀ).
    Matrix gradient_wrt_a(const Matrix &u) const {
        const Matrix b = resolvent_times_y(u);
        Matrix d;
        f_penalty_smoothed(u * u.transpose(), nu_, eps_, &d);
        return 0.5 * lambda_ * (d - b * b.transpose());
    }

    Matrix optimal_v(const Matrix &u) const { return resolvent_times_y(u).transpose() * u; }
    Matrix estimate(const Matrix &u) const { return u * optimal_v(u).transpose(); }

  private:
    Matrix y_;
    double lambda_, nu_, eps_, eta_, c_;
};

/// Objective whose minimum over U lower-bounds (eta = 0) or equals (eta = 1,
/// M large) the mixed decomposition norm of X:
///
///   L(U) = ½ penalty_eta(U) + ½ tr Xᵀ (U Uᵀ + δ I)⁻¹ X,   δ = κ tr(U Uᵀ) / N.
///
/// δ keeps the inverse defined when U Uᵀ is singular; its dependence on U is
/// included in the gradient.
class NormObjective {
  public:
    static constexpr double default_kappa = 1e-9;

    NormObjective(const Matrix &x, double nu, double eps, double eta = 0.0,
                  double kappa = default_kappa)
        : x_(x), nu_(nu), eps_(eps), eta_(eta), kappa_(kappa) {
        require_nu(nu);
        detail::require_eta(eta);
        if (eps < 0)
            throw std::invalid_argument("NormObjective: eps must be nonnegative");
    }

    double operator()(const Matrix &u, Matrix &grad) const { return evaluate(u, &grad); }

    double evaluate(const Matrix &u, Matrix *grad = nullptr) const {
        Matrix b;
        if (!inverse_times_x(u, b))
            return std::numeric_limits<double>::infinity();
        const double fit = 0.5 * x_.cwiseProduct(b).sum();
        Matrix pen_grad;
        const double pen =
            detail::blended_penalty(u, nu_, eps_, eta_, grad ? &pen_grad : nullptr);
        if (grad) {
            const double n = static_cast<double>(u.rows());
            *grad = 0.5 * pen_grad;
            grad->noalias() -= b * (b.transpose() * u);
            *grad -= (kappa_ / n) * b.squaredNorm() * u;
        }
        return fit + 0.5 * pen;
    }

    /// V = Xᵀ (U Uᵀ + δ I)⁻¹ U, so that U Vᵀ reproduces X on the span of U.
    Matrix optimal_v(const Matrix &u) const {
        Matrix b;
        if (!inverse_times_x(u, b))
            throw NotPositiveDefinite("NormObjective: U Uᵀ is singular (U = 0?)");
        return b.transpose() * u;
    }

  private:
    bool inverse_times_x(const Matrix &u, Matrix &b) const {
        Matrix a = u * u.transpose();
        const double trace = a.trace();
        a.diagonal().array() += kappa_ * trace / static_cast<double>(a.rows());
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() != Eigen::Success || !(trace > 0))
            return false;
        if (llt.matrixLLT().diagonal().array().square().minCoeff() <= 1e-300)
            return false;
        b = llt.solve(x_);
        return b.allFinite();
    }

    Matrix x_;
    double nu_, eps_, eta_, kappa_;
};

} // namespace decomp
