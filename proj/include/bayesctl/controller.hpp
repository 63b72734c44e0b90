#pragma once

// Solving K u = L across rank and shape regimes, and the closed-loop Bayes
// policy built on the risk recursion.

#include <memory>
#include <optional>
#include <string>

#include "bayesctl/errors.hpp"
#include "bayesctl/linalg.hpp"
#include "bayesctl/pareto_filter.hpp"
#include "bayesctl/risk_recursion.hpp"
#include "bayesctl/scenario.hpp"

namespace bayesctl {

enum class CaseTag {
    FullRankSquare,
    TallFullRankConsistent,
    TallFullRankInconsistent,
    RankDeficientRegularized,
    WideFullRankMinNorm,
};

inline const char* to_string(CaseTag tag) {
    switch (tag) {
    case CaseTag::FullRankSquare: return "FULL_RANK_SQUARE";
    case CaseTag::TallFullRankConsistent: return "TALL_FULL_RANK_CONSISTENT";
    case CaseTag::TallFullRankInconsistent: return "TALL_FULL_RANK_INCONSISTENT";
    case CaseTag::RankDeficientRegularized: return "RANK_DEFICIENT_REGULARIZED";
    case CaseTag::WideFullRankMinNorm: return "WIDE_FULL_RANK_MINNORM";
    }
    return "?";
}

struct ControlDecision {
    Vector u;
    CaseTag tag = CaseTag::FullRankSquare;
    std::optional<double> theta_used;
    double residual = 0.0;  // |K u - L|
};

/// Rank-deficient K maps to the regularized case whether or not L is
/// reachable; the two sub-cases share one formula.
inline CaseTag classify_case(const Matrix& k, const Vector& l, const Tolerance& tol = {}) {
    if (l.size() != k.rows()) throw InvalidInput("classify_case: L length does not match rows of K");
    const int rank = rank_of(k, tol);
    if (rank < std::min(k.rows(), k.cols())) return CaseTag::RankDeficientRegularized;
    if (k.rows() == k.cols()) return CaseTag::FullRankSquare;
    if (k.rows() < k.cols()) return CaseTag::WideFullRankMinNorm;
    return in_colspan(k, l, tol) ? CaseTag::TallFullRankConsistent
                                 : CaseTag::TallFullRankInconsistent;
}

/// Dispatches on classify_case:
///   square          u = K^-1 L
///   tall            u = (K'K)^-1 K' L     (left inverse; exact when consistent)
///   rank deficient  u = (K'K + theta^2 I)^-1 K' L
///   wide            u = K' (K K')^-1 L    (minimum norm)
/// `theta` defaults to 1e-6 (1 + sigma_max(K)).
inline ControlDecision bayes_control(const Matrix& k, const Vector& l, const Tolerance& tol = {},
                                     std::optional<double> theta = std::nullopt) {
    require_nonempty(k, "bayes_control");
    require_finite(k, "bayes_control");
    require_finite(l, "bayes_control");
    ControlDecision d;
    d.tag = classify_case(k, l, tol);
    auto fail = [&](const char* what) {
        return NumericalError(std::string("bayes_control [") + to_string(d.tag) + "]: " + what);
    };
    switch (d.tag) {
    case CaseTag::FullRankSquare: {
        const Eigen::PartialPivLU<Matrix> lu(k);
        d.u = lu.solve(l);
        break;
    }
    case CaseTag::TallFullRankConsistent:
    case CaseTag::TallFullRankInconsistent: {
        const Eigen::LLT<Matrix> gram(k.transpose() * k);
        if (gram.info() != Eigen::Success) throw fail("K'K is not positive definite");
        d.u = gram.solve(k.transpose() * l);
        break;
    }
    case CaseTag::WideFullRankMinNorm: {
        const Eigen::LLT<Matrix> gram(k * k.transpose());
        if (gram.info() != Eigen::Success) throw fail("K K' is not positive definite");
        d.u = k.transpose() * gram.solve(l);
        break;
    }
    case CaseTag::RankDeficientRegularized: {
        const double th = theta.value_or(default_theta(k));
        d.theta_used = th;
        d.u = tikhonov_solve(k, l, th, tol);
        break;
    }
    }
    if (!d.u.allFinite()) throw fail("non-finite control");
    d.residual = (k * d.u - l).norm();
    return d;
}

/// Closed-loop policy interface: act on the current state, then observe the
/// next one.
class Policy {
public:
    virtual ~Policy() = default;
    virtual Vector act(int n, const Vector& x) = 0;
    virtual void observe(const Vector& x_next) = 0;
};

class ZeroPolicy final : public Policy {
public:
    explicit ZeroPolicy(int m) : m_(m) {}
    Vector act(int, const Vector&) override { return Vector::Zero(m_); }
    void observe(const Vector&) override {}

private:
    int m_;
};

/// Bayes policy: gains from the risk recursion, disturbance recovery and
/// the conjugate update after every transition. Single-owner state.
class BayesPolicy final : public Policy {
public:
    BayesPolicy(std::shared_ptr<const Scenario> sc, std::shared_ptr<const RiskCoeffs> rc,
                std::optional<double> theta = std::nullopt, Tolerance tol = {})
        : sc_(std::move(sc)), rc_(std::move(rc)), theta_(theta), tol_(tol),
          state_(init_filter(sc_->prior)) {}

    Vector act(int n, const Vector& x) override {
        if (n != state_.n)
            throw InvalidInput("BayesPolicy: expected stage " + std::to_string(state_.n) +
                               ", got " + std::to_string(n));
        x_ = x;
        if (n >= sc_->max_stage()) {
            // Terminal stage: u has no effect on the loss beyond u'ku.
            u_ = Vector::Zero(sc_->m);
            last_.reset();
            return u_;
        }
        const StageGain g = stage_gain(*sc_, *rc_, n, x, state_);
        last_ = bayes_control(g.K, g.L, tol_, theta_);
        u_ = last_->u;
        return u_;
    }

    void observe(const Vector& x_next) override {
        const StageData st = effective_stage(*sc_, state_.n);
        const Vector v = recover_disturbance(x_next, x_, u_, st, state_.k, tol_);
        state_ = update_posterior(state_, v);
    }

    const FilterState& filter() const { return state_; }
    const std::optional<ControlDecision>& last_decision() const { return last_; }

private:
    std::shared_ptr<const Scenario> sc_;
    std::shared_ptr<const RiskCoeffs> rc_;
    std::optional<double> theta_;
    Tolerance tol_;
    FilterState state_;
    Vector x_;
    Vector u_;
    std::optional<ControlDecision> last_;
};

inline std::unique_ptr<Policy> make_policy(std::shared_ptr<const Scenario> sc,
                                           std::shared_ptr<const RiskCoeffs> rc,
                                           std::optional<double> theta = std::nullopt,
                                           Tolerance tol = {}) {
    return std::make_unique<BayesPolicy>(std::move(sc), std::move(rc), theta, tol);
}

}  // namespace bayesctl
