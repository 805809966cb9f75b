#pragma once

#include "decomp/linalg.hpp"
#include "decomp/prox.hpp"
#include "decomp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace decomp {

enum class ColumnNorm { L1, L2, Mixed };
enum class RowNorm { L1, L2 };

/// Norm on the columns of U (‖·‖_C) and on the columns of V (‖·‖_R).
/// Mixed is ‖u‖_C² = (1 - nu) ‖u‖₁² + nu ‖u‖₂².
struct NormSpec {
    ColumnNorm column_norm = ColumnNorm::L2;
    RowNorm row_norm = RowNorm::L2;
    double nu = 1.0;

    static NormSpec trace() { return {ColumnNorm::L2, RowNorm::L2, 1.0}; }
    static NormSpec row_l2() { return {ColumnNorm::L1, RowNorm::L2, 0.0}; }
    static NormSpec entrywise() { return {ColumnNorm::L1, RowNorm::L1, 0.0}; }
    static NormSpec mixed(double nu, RowNorm row = RowNorm::L2) {
        return {ColumnNorm::Mixed, row, nu};
    }
};

class NoClosedForm : public Error {
  public:
    using Error::Error;
};

class IntractableDual : public Error {
  public:
    using Error::Error;
};

inline void require_nu(double nu) {
    if (!(nu >= 0.0 && nu <= 1.0))
        throw std::invalid_argument("nu must lie in [0, 1], got " + std::to_string(nu));
}

inline std::string to_string(const NormSpec &spec) {
    std::string c = spec.column_norm == ColumnNorm::L1   ? "L1"
                    : spec.column_norm == ColumnNorm::L2 ? "L2"
                                                         : "Mixed(" + std::to_string(spec.nu) + ")";
    return "(" + c + ", " + (spec.row_norm == RowNorm::L1 ? "L1" : "L2") + ")";
}

// ---------------------------------------------------------------------------
// Vector norms and the F penalty

inline double mixed_column_norm_sq(const Vector &u, double nu) {
    require_nu(nu);
    const double l1 = u.lpNorm<1>();
    return (1.0 - nu) * l1 * l1 + nu * u.squaredNorm();
}

inline double column_norm(const Vector &u, const NormSpec &spec) {
    switch (spec.column_norm) {
    case ColumnNorm::L1:
        return u.lpNorm<1>();
    case ColumnNorm::L2:
        return u.norm();
    case ColumnNorm::Mixed:
        return std::sqrt(mixed_column_norm_sq(u, spec.nu));
    }
    throw std::logic_error("column_norm: unknown norm");
}

inline double row_norm(const Vector &v, const NormSpec &spec) {
    return spec.row_norm == RowNorm::L1 ? v.lpNorm<1>() : v.norm();
}

/// F(A) = (1 - nu) Σ|A_ij| + nu tr A. F(u uᵀ) equals the squared mixed norm of u.
inline double f_penalty(const Matrix &a, double nu) {
    require_nu(nu);
    if (a.rows() != a.cols())
        throw std::invalid_argument("f_penalty: matrix must be square, got " + shape_string(a));
    return (1.0 - nu) * a.cwiseAbs().sum() + nu * a.trace();
}

/// Smoothed F: (1 - nu) Σ (A_ij² + eps²)^{1/2} + nu tr A. When `grad` is
/// non-null it receives dF/dA (a zero subgradient is used at A_ij = 0 when eps = 0).
inline double f_penalty_smoothed(const Matrix &a, double nu, double eps, Matrix *grad = nullptr) {
    require_nu(nu);
    if (eps < 0)
        throw std::invalid_argument("f_penalty_smoothed: eps must be nonnegative");
    if (a.rows() != a.cols())
        throw std::invalid_argument("f_penalty_smoothed: matrix must be square, got " +
                                    shape_string(a));
    const auto root = (a.array().square() + eps * eps).sqrt();
    const double value = (1.0 - nu) * root.sum() + nu * a.trace();
    if (grad) {
        if (eps > 0)
            *grad = (1.0 - nu) * (a.array() / root).matrix();
        else
            *grad = (1.0 - nu) * a.array().sign().matrix();
        grad->diagonal().array() += nu;
    }
    return value;
}

/// Smoothed F(u uᵀ): (1 - nu) (Σ (u_i² + eps²)^{1/2})² + nu ‖u‖₂².
inline double f_vec_smoothed(const Vector &u, double nu, double eps, Vector *grad = nullptr) {
    require_nu(nu);
    if (eps < 0)
        throw std::invalid_argument("f_vec_smoothed: eps must be nonnegative");
    const Eigen::ArrayXd root = (u.array().square() + eps * eps).sqrt();
    const double s = root.sum();
    if (grad) {
        if (eps > 0)
            *grad = 2.0 * (1.0 - nu) * s * (u.array() / root).matrix();
        else
            *grad = 2.0 * (1.0 - nu) * s * u.array().sign().matrix();
        *grad += 2.0 * nu * u;
    }
    return (1.0 - nu) * s * s + nu * u.squaredNorm();
}

// ---------------------------------------------------------------------------
// Decomposition norms

inline void require_closed_form(const NormSpec &spec, const char *op) {
    if (spec.column_norm == ColumnNorm::Mixed)
        throw NoClosedForm(std::string(op) + ": no closed form for " + to_string(spec) +
                           "; use norm_lower_bound for the mixed norm");
    if (spec.column_norm == ColumnNorm::L2 && spec.row_norm == RowNorm::L1)
        throw NoClosedForm(std::string(op) + ": no closed form for " + to_string(spec) +
                           "; transpose the data to put the l1 norm on the column space");
}

/// Closed-form decomposition norm:
/// (L2, L2) trace norm, (L1, L2) sum of row l2 norms, (L1, L1) sum of |X_np|.
inline double decomposition_norm_closed(const Matrix &x, const NormSpec &spec) {
    require_closed_form(spec, "decomposition_norm_closed");
    if (spec.column_norm == ColumnNorm::L2)
        return singular_values(x).sum();
    if (spec.row_norm == RowNorm::L2)
        return x.rowwise().norm().sum();
    return x.cwiseAbs().sum();
}

namespace detail {

/// Maximizer of <g, u> over the mixed-norm unit ball.
inline Vector mixed_ball_argmax(const Vector &g, double nu) {
    Vector u;
    if (nu <= 0.0) {
        Index k;
        g.cwiseAbs().maxCoeff(&k);
        u = Vector::Zero(g.size());
        u(k) = g(k) >= 0 ? 1.0 : -1.0;
    } else {
        u = soft_threshold(g, squared_l1_threshold(g, (1.0 - nu) / nu));
    }
    const double n = std::sqrt(mixed_column_norm_sq(u, nu));
    return n > 0 ? Vector(u / n) : Vector::Zero(g.size());
}

} // namespace detail

/// Dual of the mixed column norm: sup_{‖u‖_C ≤ 1} <g, u>.
inline double mixed_column_dual_norm(const Vector &g, double nu) {
    require_nu(nu);
    return g.dot(detail::mixed_ball_argmax(g, nu));
}

/// Dual decomposition norm sup_{‖u‖_C ≤ 1, ‖v‖_R ≤ 1} vᵀ Yᵀ u for the closed-form specs.
inline double dual_norm(const Matrix &y, const NormSpec &spec) {
    if (spec.column_norm == ColumnNorm::Mixed)
        throw IntractableDual("dual_norm: the mixed-norm dual has no tractable expression; "
                              "mixed_dual_norm_lower_bound gives a heuristic lower bound");
    require_closed_form(spec, "dual_norm");
    if (spec.column_norm == ColumnNorm::L2)
        return singular_values(y)(0);
    if (spec.row_norm == RowNorm::L2)
        return y.rowwise().norm().maxCoeff();
    return y.cwiseAbs().maxCoeff();
}

/// Heuristic lower bound on the mixed-norm dual sup_{‖u‖_C ≤ 1} ‖Yᵀu‖_{R*}.
///
/// Every unit vector u yields a valid bound; this runs a generalized power
/// iteration u <- argmax_{‖u‖_C ≤ 1} <∇φ(u), u> on φ(u) = ½‖Yᵀu‖² from the
/// canonical basis vectors of the largest rows plus `random_starts` Gaussian
/// starts, and reports the best value found. For RowNorm::L1 the supremum
/// separates over columns of Y and the value is exact.
inline double mixed_dual_norm_lower_bound(const Matrix &y, double nu, RowNorm row = RowNorm::L2,
                                          int random_starts = 8, std::uint64_t seed = 0) {
    require_nu(nu);
    if (row == RowNorm::L1) {
        double best = 0.0;
        for (Index p = 0; p < y.cols(); ++p)
            best = std::max(best, mixed_column_dual_norm(y.col(p), nu));
        return best;
    }
    const Index n = y.rows();
    auto value = [&](const Vector &u) { return (y.transpose() * u).norm(); };
    auto climb = [&](Vector u) {
        double current = value(u);
        for (int it = 0; it < 500; ++it) {
            const Vector g = y * (y.transpose() * u);
            if (g.squaredNorm() == 0.0)
                break;
            Vector next = detail::mixed_ball_argmax(g, nu);
            const double v = value(next);
            if (v <= current * (1.0 + 1e-13))
                break;
            u = std::move(next);
            current = v;
        }
        return current;
    };

    double best = 0.0;
    const Vector row_norms = y.rowwise().norm();
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return row_norms(a) > row_norms(b); });
    const std::size_t basis_starts = std::min<std::size_t>(order.size(), 8);
    for (std::size_t k = 0; k < basis_starts; ++k) {
        Vector u = Vector::Zero(n);
        u(order[k]) = 1.0;
        best = std::max(best, climb(u));
    }
    RngStream rng(seed);
    for (int s = 0; s < random_starts; ++s) {
        Vector u = standard_normal_matrix(rng, n, 1).col(0);
        u /= std::sqrt(mixed_column_norm_sq(u, nu));
        best = std::max(best, climb(u));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Explicit factorizations

/// X = U Vᵀ with U (N x M) and V (P x M).
struct Factorization {
    Matrix U;
    Matrix V;

    Factorization() = default;
    Factorization(Matrix u, Matrix v) : U(std::move(u)), V(std::move(v)) {
        if (U.cols() != V.cols())
            throw std::invalid_argument("Factorization: inner dimensions differ (" +
                                        shape_string(U) + " vs " + shape_string(V) + ")");
    }

    Index size() const { return U.cols(); }
    Matrix product() const { return U * V.transpose(); }
};

/// Σ_m ‖u_m‖_C ‖v_m‖_R, an upper bound on the decomposition norm of U Vᵀ.
inline double factorization_cost(const Factorization &f, const NormSpec &spec) {
    if (f.U.cols() != f.V.cols())
        throw std::invalid_argument("factorization_cost: inner dimensions differ");
    if (spec.column_norm == ColumnNorm::Mixed)
        require_nu(spec.nu);
    double cost = 0.0;
    for (Index m = 0; m < f.U.cols(); ++m)
        cost += column_norm(f.U.col(m), spec) * row_norm(f.V.col(m), spec);
    return cost;
}

} // namespace decomp
