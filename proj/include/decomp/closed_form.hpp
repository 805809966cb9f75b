#pragma once

#include "decomp/linalg.hpp"
#include "decomp/norms.hpp"

#include <stdexcept>

// Exact minimizers of (1/2NP) ‖Y - X‖_F² + λ ‖X‖_D for the closed-form
// decomposition norms. Every operator takes the already-scaled threshold
// t = λ N P.

namespace decomp {

namespace detail {
inline void require_threshold(double t, const char *op) {
    if (!(t >= 0.0) || !std::isfinite(t))
        throw std::invalid_argument(std::string(op) + ": threshold must be finite and >= 0");
}
} // namespace detail

/// Singular value thresholding Σ_m max(σ_m - t, 0) u_m v_mᵀ (trace norm).
inline Matrix svt(const Matrix &y, double threshold) {
    detail::require_threshold(threshold, "svt");
    if (threshold == 0.0)
        return y; // exact, unlike the SVD round trip
    const SvdResult dec = svd(y);
    const Vector shrunk = (dec.singular_values.array() - threshold).max(0.0);
    return dec.left_vectors * shrunk.asDiagonal() * dec.right_vectors.transpose();
}

/// Group soft-thresholding of each row in l2 length (sum of row norms).
inline Matrix row_group_threshold(const Matrix &y, double threshold) {
    detail::require_threshold(threshold, "row_group_threshold");
    require_finite(y, "row_group_threshold");
    Matrix x = Matrix::Zero(y.rows(), y.cols());
    for (Index n = 0; n < y.rows(); ++n) {
        const double len = y.row(n).norm();
        if (len > threshold)
            x.row(n) = ((len - threshold) / len) * y.row(n);
    }
    return x;
}

/// sign(Y_np) max(|Y_np| - t, 0) (l1 norm of all entries).
inline Matrix entrywise_soft_threshold(const Matrix &y, double threshold) {
    detail::require_threshold(threshold, "entrywise_soft_threshold");
    require_finite(y, "entrywise_soft_threshold");
    return y.array().sign() * (y.array().abs() - threshold).max(0.0);
}

/// Dispatches to the shrinkage operator matching `spec`.
inline Matrix closed_form_solve(const Matrix &y, const NormSpec &spec, double threshold) {
    require_closed_form(spec, "closed_form_solve");
    if (spec.column_norm == ColumnNorm::L2)
        return svt(y, threshold);
    if (spec.row_norm == RowNorm::L2)
        return row_group_threshold(y, threshold);
    return entrywise_soft_threshold(y, threshold);
}

} // namespace decomp
