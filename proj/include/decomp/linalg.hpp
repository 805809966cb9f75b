#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace decomp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
  public:
    using Error::Error;
};

class ConvergenceError : public Error {
  public:
    using Error::Error;
};

inline std::string shape_string(const Matrix &m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// Throws std::invalid_argument unless every entry of `m` is finite.
inline void require_finite(const Matrix &m, std::string_view what) {
    if (!m.allFinite())
        throw std::invalid_argument(std::string(what) + ": matrix " + shape_string(m) +
                                    " contains NaN or Inf");
}

inline void require_nonempty(const Matrix &m, std::string_view what) {
    if (m.rows() <= 0 || m.cols() <= 0)
        throw std::invalid_argument(std::string(what) + ": matrix must have positive dimensions");
}

/// Thin singular value decomposition X = U diag(s) V^T with r = min(rows, cols).
struct SvdResult {
    Matrix left_vectors;    // N x r
    Vector singular_values; // r, nonincreasing
    Matrix right_vectors;   // P x r

    Matrix reconstruct() const {
        return left_vectors * singular_values.asDiagonal() * right_vectors.transpose();
    }
};

inline SvdResult svd(const Matrix &x) {
    require_nonempty(x, "svd");
    require_finite(x, "svd");
    Eigen::BDCSVD<Matrix> dec(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success)
        throw ConvergenceError("svd: no convergence for " + shape_string(x) + " matrix");
    SvdResult out{dec.matrixU(), dec.singularValues(), dec.matrixV()};
    const double scale = std::max(1.0, x.norm());
    if (!((out.reconstruct() - x).norm() <= 1e-8 * scale))
        throw ConvergenceError("svd: reconstruction check failed for " + shape_string(x) +
                               " matrix");
    return out;
}

inline Vector singular_values(const Matrix &x) {
    require_nonempty(x, "singular_values");
    Eigen::BDCSVD<Matrix> dec(x);
    if (dec.info() != Eigen::Success)
        throw ConvergenceError("singular_values: no convergence for " + shape_string(x) +
                               " matrix");
    return dec.singularValues();
}

/// Solves A Z = B for symmetric positive definite A.
///
/// Fails with NotPositiveDefinite when a Cholesky pivot drops to
/// 1e-14 * trace(A) or below; every SPD system built in this library adds a
/// strictly positive multiple of the identity, so such pivots mean a caller bug.
inline Matrix solve_spd(const Matrix &a, const Matrix &b) {
    if (a.rows() != a.cols() || a.rows() != b.rows())
        throw std::invalid_argument("solve_spd: incompatible shapes " + shape_string(a) + " and " +
                                    shape_string(b));
    require_finite(a, "solve_spd");
    require_finite(b, "solve_spd");
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("solve_spd: matrix is not symmetric");
    const double trace = a.trace();
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success || !(trace > 0))
        throw NotPositiveDefinite("solve_spd: matrix " + shape_string(a) +
                                  " is not positive definite");
    const Vector pivots = llt.matrixLLT().diagonal().array().square();
    if (pivots.minCoeff() <= 1e-14 * trace)
        throw NotPositiveDefinite("solve_spd: matrix " + shape_string(a) +
                                  " is not positive definite (pivot below 1e-14 * trace)");
    return llt.solve(b);
}

/// Number of singular values above `rel_tol * max(sigma_max, abs_floor)`.
inline Index numerical_rank(const Matrix &x, double rel_tol, double abs_floor = 0.0) {
    if (x.size() == 0)
        return 0;
    const Vector s = singular_values(x);
    const double cutoff = rel_tol * std::max(s.size() ? s(0) : 0.0, abs_floor);
    Index r = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff)
            ++r;
    return r;
}

} // namespace decomp
