#pragma once

// Dense linear-algebra kernel: SVD-backed pseudoinverse, numerical rank,
// column-space membership and Tikhonov-regularized least squares.

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "bayesctl/errors.hpp"

namespace bayesctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numerical tolerances shared by the kernel.
///
/// A singular value counts as nonzero when it exceeds
/// `rank_tol * max(rows, cols) * sigma_max`. `residual_tol` is the absolute
/// slack (scaled by `1 + |v|`) used for column-space membership and
/// consistency checks.
struct Tolerance {
    double rank_tol = 1e-12;
    double residual_tol = 1e-9;

    double singular_cutoff(Eigen::Index rows, Eigen::Index cols, double sigma_max) const {
        return rank_tol * static_cast<double>(std::max(rows, cols)) * sigma_max;
    }
};

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

inline void require_nonempty(const Matrix& m, const char* what) {
    if (m.rows() == 0 || m.cols() == 0)
        throw InvalidInput(std::string(what) + ": dimension-zero matrix");
}

namespace detail {

inline Eigen::JacobiSVD<Matrix> svd(const Matrix& m) {
    return Eigen::JacobiSVD<Matrix>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

inline double cutoff(const Matrix& m, const Vector& sv, const Tolerance& tol) {
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    return tol.singular_cutoff(m.rows(), m.cols(), smax);
}

}  // namespace detail

inline Vector singular_values(const Matrix& m) {
    require_nonempty(m, "singular_values");
    require_finite(m, "singular_values");
    return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

inline double sigma_max(const Matrix& m) {
    const Vector sv = singular_values(m);
    return sv.size() > 0 ? sv(0) : 0.0;
}

/// Moore-Penrose pseudoinverse. Singular values at or below the rank cutoff
/// are treated as exact zeros.
inline Matrix pinv(const Matrix& m, const Tolerance& tol = {}) {
    require_nonempty(m, "pinv");
    require_finite(m, "pinv");
    const auto svd = detail::svd(m);
    const Vector& sv = svd.singularValues();
    const double cut = detail::cutoff(m, sv, tol);
    Vector inv = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline int rank_of(const Matrix& m, const Tolerance& tol = {}) {
    require_nonempty(m, "rank_of");
    require_finite(m, "rank_of");
    const Vector sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
    const double cut = detail::cutoff(m, sv, tol);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    return rank;
}

/// True iff v lies in the column span of m, up to
/// `residual_tol * (1 + |v|)` on the projection residual.
inline bool in_colspan(const Matrix& m, const Vector& v, const Tolerance& tol = {}) {
    if (v.size() != m.rows())
        throw InvalidInput("in_colspan: vector length " + std::to_string(v.size()) +
                           " does not match " + std::to_string(m.rows()) + " rows");
    require_finite(v, "in_colspan");
    const Vector projected = m * (pinv(m, tol) * v);
    return (projected - v).norm() <= tol.residual_tol * (1.0 + v.norm());
}

/// Default regularization strength for a gain matrix K.
inline double default_theta(const Matrix& k) { return 1e-6 * (1.0 + sigma_max(k)); }

/// Solves (K^T K + theta^2 I) u = K^T L.
///
/// Evaluated through the SVD of K, where the same operator reads
/// V diag(s / (s^2 + theta^2)) U^T; this keeps the small-theta limit
/// accurate when theta^2 is below the rounding level of K^T K.
inline Vector tikhonov_solve(const Matrix& k, const Vector& l, double theta, const Tolerance& tol = {}) {
    require_nonempty(k, "tikhonov_solve");
    require_finite(k, "tikhonov_solve");
    require_finite(l, "tikhonov_solve");
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw InvalidInput("tikhonov_solve: theta must be positive and finite");
    if (l.size() != k.rows())
        throw InvalidInput("tikhonov_solve: right-hand side length does not match rows of K");
    const auto svd = detail::svd(k);
    const Vector& sv = svd.singularValues();
    Vector gain(sv.size());
    const double t2 = theta * theta;
    // Singular values under the rank cutoff are roundoff; left in, they would
    // be amplified by sigma / theta^2.
    const double cut = detail::cutoff(k, sv, tol);
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        gain(i) = sv(i) > cut ? sv(i) / (sv(i) * sv(i) + t2) : 0.0;
    Vector u = svd.matrixV() * (gain.asDiagonal() * (svd.matrixU().transpose() * l));
    if (!u.allFinite()) throw NumericalError("tikhonov_solve: non-finite solution");
    return u;
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace bayesctl
