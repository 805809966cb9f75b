#pragma once

#include "decomp/linalg.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <vector>

namespace decomp {

namespace detail {

struct ActiveSet {
    Index count = 0;
    double prefix = 0.0; // sum of the active magnitudes
};

// Coordinate k (0-based, magnitudes sorted descending) is active when
// mag_k > gamma * sum_{j<=k} (mag_j - mag_k); this form avoids the
// cancellation in mag_k > gamma s_k / (1 + gamma (k+1)) for large gamma.
inline ActiveSet squared_l1_active_set(const Vector &z, double gamma) {
    std::vector<double> mag(z.data(), z.data() + z.size());
    for (double &m : mag)
        m = std::abs(m);
    std::sort(mag.begin(), mag.end(), std::greater<>());
    ActiveSet out;
    for (std::size_t k = 0; k < mag.size(); ++k) {
        const double gap = std::max(0.0, out.prefix + mag[k] - static_cast<double>(k + 1) * mag[k]);
        if (!(mag[k] > gamma * gap))
            break;
        out.prefix += mag[k];
        ++out.count;
    }
    return out;
}

} // namespace detail

/// Threshold tau solving tau = gamma * sum_i max(|z_i| - tau, 0).
///
/// Sort magnitudes descending; with k active coordinates the fixed point is
/// gamma * s_k / (1 + gamma k), s_k the k-th prefix sum, and the active set is
/// the largest k whose k-th magnitude still exceeds that value.
inline double squared_l1_threshold(const Vector &z, double gamma) {
    if (gamma < 0)
        throw std::invalid_argument("squared_l1_threshold: gamma must be nonnegative");
    if (gamma == 0 || z.size() == 0)
        return 0.0;
    const detail::ActiveSet a = detail::squared_l1_active_set(z, gamma);
    return gamma * a.prefix / (1.0 + gamma * static_cast<double>(a.count));
}

inline Vector soft_threshold(const Vector &z, double tau) {
    return z.array().sign() * (z.array().abs() - tau).max(0.0);
}

/// Proximal operator of x -> (gamma/2) ||x||_1^2:
/// argmin_x 1/2 ||x - z||^2 + (gamma/2) ||x||_1^2.
inline Vector prox_squared_l1(const Vector &z, double gamma) {
    if (gamma < 0)
        throw std::invalid_argument("prox_squared_l1: gamma must be nonnegative");
    if (gamma == 0 || z.size() == 0)
        return z;
    const detail::ActiveSet a = detail::squared_l1_active_set(z, gamma);
    const double k = static_cast<double>(a.count);
    // |z_i| - tau written as (|z_i| + gamma (k |z_i| - s_k)) / (1 + gamma k).
    const Eigen::ArrayXd mag = z.array().abs();
    const Eigen::ArrayXd shrunk =
        ((mag + gamma * (k * mag - a.prefix)) / (1.0 + gamma * k)).max(0.0);
    return (z.array().sign() * shrunk).matrix();
}

} // namespace decomp
