#pragma once

// Conjugate Pareto filtering of uniform disturbances.
//
// Each active coordinate i carries v_i ~ U[0, lambda_i] with
// lambda_i ~ Pareto(beta_i, r_i). Observing v maps the posterior to
// Pareto(beta_i + 1, max(r_i, v_i)); integrating lambda out gives the
// predictive density
//
//     h(v) = beta r^beta / (beta + 1) * max(r, v)^-(beta + 1),   v >= 0.

#include <algorithm>
#include <cmath>
#include <string>

#include "bayesctl/errors.hpp"
#include "bayesctl/linalg.hpp"
#include "bayesctl/scenario.hpp"

namespace bayesctl {

/// Which set of predictive constants to use. `Derived` integrates against
/// the predictive density; `Printed` is an alternative table, kept for
/// comparison, whose Q, Q3 and Q4 do not follow from that density.
enum class ConstantsMode { Printed, Derived };

inline const char* to_string(ConstantsMode mode) {
    return mode == ConstantsMode::Printed ? "printed" : "derived";
}

inline ConstantsMode parse_mode(const std::string& s) {
    if (s == "printed") return ConstantsMode::Printed;
    if (s == "derived") return ConstantsMode::Derived;
    throw InvalidInput("unknown constants mode '" + s + "' (expected printed|derived)");
}

struct FilterState {
    Vector beta;
    Vector r;
    int n = 0;
    int k = 0;
};

/// Predictive constants for one coordinate, relative to the current scale r:
///   E[v] = q r,  E[v^2] = q1 r^2,  E[max(r,v)] = q2 r,
///   E[max(r,v)^2] = q3 r^2,  E[v max(r,v)] = q4 r^2,
/// and the posterior multipliers E[lambda] = t r, E[lambda^2] = t1 r^2.
struct MomentConstants {
    double q = 0, q1 = 0, q2 = 0, q3 = 0, q4 = 0;
    double t = 0, t1 = 0;
    ConstantsMode mode = ConstantsMode::Derived;
};

inline void require_beta(double beta, const char* what) {
    if (!(beta > 2.0) || !std::isfinite(beta))
        throw InvalidInput(std::string(what) + ": moments undefined for beta <= 2");
}

inline MomentConstants moment_constants(double beta, ConstantsMode mode) {
    require_beta(beta, "moment_constants");
    const double b = beta;
    MomentConstants c;
    c.mode = mode;
    c.t = b / (b - 1.0);
    c.t1 = b / (b - 2.0);
    c.q1 = b / (3.0 * (b - 2.0));
    c.q2 = b * b / (b * b - 1.0);
    if (mode == ConstantsMode::Derived) {
        c.q = b / (2.0 * (b - 1.0));
        c.q3 = b * (b - 1.0) / ((b + 1.0) * (b - 2.0));
        c.q4 = b * b / (2.0 * (b + 1.0) * (b - 2.0));
    } else {
        c.q = 0.5 * b / (b + 1.0);
        c.q3 = b * (b - 1.0) / ((b + 1.0) * (b + 2.0));
        c.q4 = b * b / ((b + 1.0) * (b - 2.0));
    }
    return c;
}

/// Per-coordinate constants as vectors (zero on inactive coordinates).
struct StageConstants {
    Vector q, q1, q2, q3, q4, t, t1;
    ConstantsMode mode = ConstantsMode::Derived;
};

inline StageConstants stage_constants(const Vector& beta, int k, ConstantsMode mode) {
    const Eigen::Index m = beta.size();
    StageConstants sc{Vector::Zero(m), Vector::Zero(m), Vector::Zero(m), Vector::Zero(m),
                      Vector::Zero(m), Vector::Zero(m), Vector::Zero(m), mode};
    for (int i = 0; i < k; ++i) {
        const MomentConstants c = moment_constants(beta(i), mode);
        sc.q(i) = c.q;
        sc.q1(i) = c.q1;
        sc.q2(i) = c.q2;
        sc.q3(i) = c.q3;
        sc.q4(i) = c.q4;
        sc.t(i) = c.t;
        sc.t1(i) = c.t1;
    }
    return sc;
}

inline StageConstants predictive_constants(const FilterState& st, ConstantsMode mode) {
    return stage_constants(st.beta, st.k, mode);
}

inline FilterState init_filter(const PriorSpec& prior) {
    return FilterState{prior.beta, prior.rbar, 0, prior.k};
}

/// Recovers the disturbance from an observed transition
/// x_next = alpha x + b u + c v. Only the k active columns of c are used, so
/// inactive coordinates are exactly zero; a singular c yields the
/// minimum-norm solution.
inline Vector recover_disturbance(const Vector& x_next, const Vector& x, const Vector& u,
                                  const StageData& stage, int k, const Tolerance& tol = {}) {
    const Eigen::Index m = x.size();
    if (x_next.size() != stage.alpha.rows() || x.size() != stage.alpha.cols() ||
        u.size() != stage.b.cols())
        throw InvalidInput("recover_disturbance: dimension mismatch");
    Vector v = Vector::Zero(m);
    const Vector rhs = x_next - stage.alpha * x - stage.b * u;
    if (k == 0) {
        if (rhs.norm() > tol.residual_tol * (1.0 + x_next.norm()))
            throw InconsistentTransition("recover_disturbance: transition has no disturbance to absorb it");
        return v;
    }
    const Matrix active = stage.c.leftCols(k);
    v.head(k) = pinv(active, tol) * rhs;
    const double residual = (active * v.head(k) - rhs).norm();
    if (residual > tol.residual_tol * (1.0 + rhs.norm() + x_next.norm()))
        throw InconsistentTransition("recover_disturbance: residual " + std::to_string(residual) +
                                     " exceeds tolerance");
    for (int i = 0; i < k; ++i) {
        if (v(i) < -tol.residual_tol * (1.0 + rhs.norm()))
            throw InconsistentTransition("recover_disturbance: coordinate " + std::to_string(i) +
                                         " is negative (" + std::to_string(v(i)) +
                                         "), outside the uniform support");
        v(i) = std::max(v(i), 0.0);
    }
    return v;
}

inline FilterState update_posterior(const FilterState& st, const Vector& v) {
    if (v.size() != st.r.size()) throw InvalidInput("update_posterior: dimension mismatch");
    FilterState next = st;
    for (int i = 0; i < st.k; ++i) {
        if (!(v(i) >= 0.0))
            throw InvalidInput("update_posterior: active coordinate " + std::to_string(i) +
                               " is negative");
        next.beta(i) += 1.0;
        next.r(i) = std::max(st.r(i), v(i));
    }
    ++next.n;
    return next;
}

struct PosteriorMoments {
    Vector lambda_mean;
    Vector lambda_second;
};

inline PosteriorMoments posterior_moments(const FilterState& st) {
    const Eigen::Index m = st.r.size();
    PosteriorMoments pm{Vector::Zero(m), Vector::Zero(m)};
    for (int i = 0; i < st.k; ++i) {
        require_beta(st.beta(i), "posterior_moments");
        const double b = st.beta(i);
        pm.lambda_mean(i) = b / (b - 1.0) * st.r(i);
        pm.lambda_second(i) = b / (b - 2.0) * st.r(i) * st.r(i);
    }
    return pm;
}

/// Pareto(beta, r) density at lambda.
inline double pareto_pdf(double beta, double r, double lambda) {
    if (lambda < r) return 0.0;
    return beta * std::pow(r / lambda, beta) / lambda;
}

/// Predictive density of the next disturbance for given (beta, r).
inline double predictive_pdf(double beta, double r, double v) {
    if (v < 0.0) throw InvalidInput("predictive_density: v must be nonnegative");
    const double top = std::max(r, v);
    return beta / (beta + 1.0) * std::pow(r / top, beta) / top;
}

inline double predictive_density(const FilterState& st, int i, double v) {
    if (i < 0 || i >= st.k) throw InvalidInput("predictive_density: inactive coordinate");
    require_beta(st.beta(i), "predictive_density");
    return predictive_pdf(st.beta(i), st.r(i), v);
}

}  // namespace bayesctl
