#pragma once

// Backward recursion for the quadratic Bayes risk
//
//     W_n(x, r) = x' A_n x + 2 r' B_n x + 2 r' C_n r
//
// and the stage gains K_n u = L_n. The derivation is written out in
// docs/derivation.md.
//
// Coefficients are stored for phi_n W_n, where phi_n = P(N >= n); the
// accessors divide phi_n back out.

#include <optional>
#include <string>
#include <vector>

#include "bayesctl/errors.hpp"
#include "bayesctl/linalg.hpp"
#include "bayesctl/pareto_filter.hpp"
#include "bayesctl/scenario.hpp"

namespace bayesctl {

/// x' A x + 2 r' B x + 2 r' C r
struct QuadraticRisk {
    Matrix A;
    Matrix B;
    Matrix C;

    double operator()(const Vector& x, const Vector& r) const {
        return x.dot(A * x) + 2.0 * r.dot(B * x) + 2.0 * r.dot(C * r);
    }
};

struct StageCoeffs {
    QuadraticRisk weighted;  // coefficients of phi_n W_n
    double phi = 1.0;
    Matrix K;                // k_n + b' A_{n+1} b (normalized by phi_n)
    bool singular = false;   // K was singular; closed form not certified
};

struct RiskCoeffs {
    std::vector<StageCoeffs> stages;
    ConstantsMode mode = ConstantsMode::Derived;

    int max_stage() const { return static_cast<int>(stages.size()) - 1; }

    const StageCoeffs& at(int n) const {
        if (n < 0 || n > max_stage())
            throw InvalidInput("risk coefficients: stage " + std::to_string(n) + " out of range");
        return stages[static_cast<std::size_t>(n)];
    }
    Matrix A(int n) const { return at(n).weighted.A / at(n).phi; }
    Matrix B(int n) const { return at(n).weighted.B / at(n).phi; }
    Matrix C(int n) const { return at(n).weighted.C / at(n).phi; }
    bool any_singular() const {
        for (const auto& s : stages)
            if (s.singular) return true;
        return false;
    }
};

enum class SingularHandling {
    Throw,          // report the stage and stop
    Pseudoinverse,  // complete the square with K^+ and flag the stage
};

/// Posterior shape parameters in force at stage n (one observation per stage).
inline Vector stage_beta(const PriorSpec& prior, int n) {
    Vector beta = prior.beta;
    for (int i = 0; i < prior.k; ++i) beta(i) += n;
    return beta;
}

namespace detail {

/// Second-moment kernels: E[v v'] = D_r Pvv D_r, E[w w'] = D_r Pww D_r and
/// E[w v'] = D_r Pwv D_r, with w = max(r, v) and coordinates independent.
struct MomentKernels {
    Matrix vv, ww, wv;
};

inline MomentKernels moment_kernels(const StageConstants& c) {
    MomentKernels p;
    p.vv = c.q * c.q.transpose();
    p.ww = c.q2 * c.q2.transpose();
    p.wv = c.q2 * c.q.transpose();
    p.vv.diagonal() = c.q1;
    p.ww.diagonal() = c.q3;
    p.wv.diagonal() = c.q4;
    return p;
}

/// Expected stage cost E[y' s y] = x' Sxx x + 2 r' Bs x + r' Slam r.
struct StageCost {
    Matrix Sxx, Bs, Slam;
};

inline StageCost stage_cost(const Matrix& s, const StageConstants& c) {
    const Eigen::Index m = c.t.size();
    const Matrix sll = s.bottomRightCorner(m, m);
    StageCost sc;
    sc.Sxx = s.topLeftCorner(m, m);
    sc.Bs = c.t.asDiagonal() * s.topRightCorner(m, m).transpose();
    sc.Slam = c.t.asDiagonal() * sll * c.t.asDiagonal();
    for (Eigen::Index i = 0; i < m; ++i)
        sc.Slam(i, i) = sll(i, i) * c.t1(i);
    return sc;
}

struct StepResult {
    QuadraticRisk risk;
    Matrix K;  // weight * k + b' A' b
    bool singular = false;
};

/// One Bellman step: minimizes  weight * (u' k u + E[y' s y]) + E[next(x', r')]
/// over u, where x' = alpha x + b u + c v and r' = max(r, v).
inline StepResult bellman_step(const StageData& st, const StageConstants& c, double weight,
                               const QuadraticRisk* next, SingularHandling singular,
                               const Tolerance& tol, int stage) {
    const StageCost cost = stage_cost(st.s, c);
    StepResult out;
    if (next == nullptr) {
        // Terminal stage: the control does not move y, so u = 0.
        out.risk = {weight * cost.Sxx, weight * cost.Bs, 0.5 * weight * cost.Slam};
        out.K = weight * st.k;
        return out;
    }
    const Matrix& An = next->A;
    const Matrix& Bn = next->B;
    const Matrix& Cn = next->C;
    const MomentKernels p = moment_kernels(c);

    const Matrix F = An * st.c * c.q.asDiagonal() + Bn.transpose() * c.q2.asDiagonal();
    const Matrix cAc = st.c.transpose() * An * st.c;
    const Matrix Gr = cAc.cwiseProduct(p.vv) + 2.0 * (Bn * st.c).cwiseProduct(p.wv) +
                      2.0 * Cn.cwiseProduct(p.ww);

    out.K = weight * st.k + st.b.transpose() * An * st.b;
    const Matrix Gx = st.b.transpose() * An * st.alpha;
    const Matrix Grr = st.b.transpose() * F;

    const Eigen::Index m = out.K.rows();
    Matrix Kp;
    if (rank_of(out.K, tol) < m) {
        if (singular == SingularHandling::Throw)
            throw SingularGainError(stage, "gain matrix K is singular");
        out.singular = true;
        Kp = pinv(out.K, tol);
    } else {
        Kp = out.K.inverse();
    }

    out.risk.A = symmetrized(weight * cost.Sxx + st.alpha.transpose() * An * st.alpha -
                             Gx.transpose() * Kp * Gx);
    out.risk.B = weight * cost.Bs + F.transpose() * st.alpha - Grr.transpose() * Kp * Gx;
    out.risk.C = 0.5 * symmetrized(weight * cost.Slam + Gr - Grr.transpose() * Kp * Grr);
    return out;
}

}  // namespace detail

/// Backward pass over the random horizon.
inline RiskCoeffs backward_coefficients(const Scenario& sc, ConstantsMode mode,
                                        SingularHandling singular = SingularHandling::Throw,
                                        const Tolerance& tol = {}) {
    const int M = sc.max_stage();
    RiskCoeffs rc;
    rc.mode = mode;
    rc.stages.resize(static_cast<std::size_t>(M + 1));
    const QuadraticRisk* next = nullptr;
    for (int n = M; n >= 0; --n) {
        const double phi = tail_mass(sc.horizon, n);
        const StageConstants c = stage_constants(stage_beta(sc.prior, n), sc.prior.k, mode);
        auto step = detail::bellman_step(effective_stage(sc, n), c, phi, next, singular, tol, n);
        StageCoeffs& out = rc.stages[static_cast<std::size_t>(n)];
        out.weighted = std::move(step.risk);
        out.phi = phi;
        out.K = step.K / phi;
        out.singular = step.singular;
        next = &out.weighted;
    }
    return rc;
}

/// Backward pass for a horizon fixed at M (every stage is reached), with no
/// tail weights at all.
inline RiskCoeffs fixed_horizon_coefficients(const Scenario& sc, ConstantsMode mode,
                                             SingularHandling singular = SingularHandling::Throw,
                                             const Tolerance& tol = {}) {
    const int M = sc.max_stage();
    RiskCoeffs rc;
    rc.mode = mode;
    std::vector<StageCoeffs> rev;
    std::optional<QuadraticRisk> next;
    for (int n = M; n >= 0; --n) {
        const StageConstants c = stage_constants(stage_beta(sc.prior, n), sc.prior.k, mode);
        auto step = detail::bellman_step(effective_stage(sc, n), c, 1.0,
                                         next ? &*next : nullptr, singular, tol, n);
        next = step.risk;
        rev.push_back(StageCoeffs{std::move(step.risk), 1.0, std::move(step.K), step.singular});
    }
    rc.stages.assign(rev.rbegin(), rev.rend());
    return rc;
}

struct StageGain {
    Matrix K;
    Vector L;
};

/// K = k + b' A b,  L = -b' [A alpha x + (A c Dq + B' Dq2) r], where (A, B)
/// are the next-stage coefficients as seen from the current stage.
inline StageGain stage_gain(const StageData& st, const Matrix& a_next, const Matrix& b_next,
                            const Vector& x, const Vector& r, const StageConstants& c) {
    StageGain g;
    g.K = st.k + st.b.transpose() * a_next * st.b;
    g.L = -st.b.transpose() *
          (a_next * st.alpha * x +
           (a_next * st.c * c.q.asDiagonal() + b_next.transpose() * c.q2.asDiagonal()) * r);
    return g;
}

inline StageGain stage_gain(const Scenario& sc, const RiskCoeffs& rc, int n, const Vector& x,
                            const FilterState& state) {
    if (n < 0 || n >= rc.max_stage())
        throw InvalidInput("stage_gain: no next-stage coefficients for stage " + std::to_string(n));
    const double phi = rc.at(n).phi;
    const StageCoeffs& nx = rc.at(n + 1);
    return stage_gain(effective_stage(sc, n), nx.weighted.A / phi, nx.weighted.B / phi, x,
                      state.r, predictive_constants(state, rc.mode));
}

inline double bayes_risk_value(const RiskCoeffs& rc, int n, const Vector& x, const Vector& r) {
    const StageCoeffs& s = rc.at(n);
    return QuadraticRisk{s.weighted.A, s.weighted.B, s.weighted.C}(x, r) / s.phi;
}

}  // namespace bayesctl
