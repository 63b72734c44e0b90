#pragma once

// Independent reference computations: adaptive quadrature of predictive and
// posterior moments, and a brute-force dynamic program over a discretized
// (x, r) state space for scalar problems. Nothing here uses the closed-form
// constants or the risk recursion.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bayesctl/controller.hpp"
#include "bayesctl/errors.hpp"
#include "bayesctl/pareto_filter.hpp"
#include "bayesctl/scenario.hpp"

namespace bayesctl {

enum class Integrand { One, V, V2, MaxRV, MaxRV2, VMaxRV };

inline const char* to_string(Integrand f) {
    switch (f) {
    case Integrand::One: return "1";
    case Integrand::V: return "v";
    case Integrand::V2: return "v^2";
    case Integrand::MaxRV: return "max(r,v)";
    case Integrand::MaxRV2: return "max(r,v)^2";
    case Integrand::VMaxRV: return "v*max(r,v)";
    }
    return "?";
}

namespace detail {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 61>;

inline double eval_integrand(Integrand f, double r, double v) {
    const double w = std::max(r, v);
    switch (f) {
    case Integrand::One: return 1.0;
    case Integrand::V: return v;
    case Integrand::V2: return v * v;
    case Integrand::MaxRV: return w;
    case Integrand::MaxRV2: return w * w;
    case Integrand::VMaxRV: return v * w;
    }
    return 0.0;
}

// Power of v the integrand reduces to for v > r.
inline int tail_power(Integrand f) {
    switch (f) {
    case Integrand::One: return 0;
    case Integrand::V:
    case Integrand::MaxRV: return 1;
    default: return 2;
    }
}

}  // namespace detail

/// E[f(v)] under the predictive density h for (beta, r): adaptive
/// Gauss-Kronrod on [0, r] and [r, 10r], the power-law tail beyond 10r in
/// closed form.
inline double quadrature_moment(double beta, double r, Integrand f) {
    if (!(beta > 2.0)) throw InvalidInput("quadrature_moment: beta must exceed 2");
    if (!(r > 0.0)) throw InvalidInput("quadrature_moment: r must be positive");
    const auto integrand = [&](double v) {
        return detail::eval_integrand(f, r, v) * predictive_pdf(beta, r, v);
    };
    const double cut = 10.0 * r;
    double err = 0.0;
    const double head = detail::Kronrod::integrate(integrand, 0.0, r, 15, 1e-15, &err);
    const double body = detail::Kronrod::integrate(integrand, r, cut, 15, 1e-15, &err);
    const int j = detail::tail_power(f);
    // int_cut^inf v^j * beta r^beta / (beta+1) * v^-(beta+1) dv
    const double tail = beta / (beta + 1.0) * std::pow(r / cut, beta) * std::pow(cut, j) /
                        (beta - static_cast<double>(j));
    return head + body + tail;
}

/// E[lambda^p] under Pareto(beta, r), p < beta, by quadrature on [r, 10r]
/// plus the closed-form tail.
inline double pareto_moment_quadrature(double beta, double r, int p) {
    if (!(beta > p)) throw InvalidInput("pareto_moment_quadrature: moment diverges");
    const auto integrand = [&](double lam) { return std::pow(lam, p) * pareto_pdf(beta, r, lam); };
    const double cut = 10.0 * r;
    double err = 0.0;
    const double body = detail::Kronrod::integrate(integrand, r, cut, 15, 1e-15, &err);
    const double tail = beta * std::pow(r / cut, beta) * std::pow(cut, p) / (beta - p);
    return body + tail;
}

/// E[f(v)] under h for an arbitrary integrand, split at the kink v = r.
inline double expect_predictive(double beta, double r, const std::function<double(double)>& f) {
    const auto integrand = [&](double v) { return f(v) * predictive_pdf(beta, r, v); };
    double err = 0.0;
    const double head = detail::Kronrod::integrate(integrand, 0.0, r, 15, 1e-13, &err);
    const double tail = detail::Kronrod::integrate(integrand, r, std::numeric_limits<double>::infinity(),
                                                   15, 1e-13, &err);
    return head + tail;
}

// ---------------------------------------------------------------------------
// Grid dynamic-programming oracle (m = k = 1)
// ---------------------------------------------------------------------------

/// `count` points from `lo` to `hi`; uniform for x and u, geometric for r.
struct GridRange {
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;

    double step() const { return (hi - lo) / (count - 1); }
    double at(int i) const { return lo + i * step(); }
};

struct GridOracleOptions {
    double v_cap = 30.0;   // disturbance integration stops at v_cap * r
};

class GridOracle {
public:
    GridOracle(const Scenario& sc, GridRange u_grid, GridRange r_grid, GridRange x_grid,
               GridOracleOptions opts = {})
        : sc_(sc), ug_(u_grid), rg_(r_grid), xg_(x_grid), opts_(opts) {
        if (sc.m != 1 || sc.prior.k != 1)
            throw InvalidInput("grid oracle: requires a scalar state with one disturbance");
        if (sc.max_stage() > 3) throw InvalidInput("grid oracle: requires M <= 3");
        if (ug_.count < 2 || rg_.count < 2 || xg_.count < 2)
            throw InvalidInput("grid oracle: every grid needs at least two points");
        if (!(rg_.lo > 0.0) || !(rg_.hi > rg_.lo) || !(xg_.hi > xg_.lo) || !(ug_.hi > ug_.lo))
            throw InvalidInput("grid oracle: grid bounds must be increasing (and r > 0)");
        log_rlo_ = std::log(rg_.lo);
        log_rstep_ = (std::log(rg_.hi) - log_rlo_) / (rg_.count - 1);
        build();
    }

    const GridRange& u_grid() const { return ug_; }
    double r_at(int i) const { return std::exp(log_rlo_ + i * log_rstep_); }

    /// Unweighted value W_n at a grid node.
    double value(int n, int ix, int ir) const {
        return values_[idx(n, ix, ir)] / tail_mass(sc_.horizon, n);
    }

    double table_action(int n, int ix, int ir) const { return actions_[idx(n, ix, ir)]; }

    /// Minimizer over the control grid at an arbitrary (x, r), using the
    /// tabulated next-stage values.
    double best_action(int n, double x, double r) const {
        const Nodes nodes = expectation_nodes(n, r);
        return minimize(n, x, r, nodes).second;
    }

    /// Objective for a single control value (same discretization as the table).
    double objective(int n, double x, double r, double u) const {
        const Nodes nodes = expectation_nodes(n, r);
        return stage_term(n, x, r, u, nodes);
    }

    double initial_action() const { return best_action(0, sc_.x0(0), sc_.prior.rbar(0)); }

    /// Nearest-node lookup of the tabulated action.
    double lookup_action(int n, double x, double r) const {
        const double fx = (x - xg_.lo) / xg_.step();
        const double fr = (std::log(r) - log_rlo_) / log_rstep_;
        if (fx < -0.5 || fx > xg_.count - 0.5 || fr < -0.5 || fr > rg_.count - 0.5)
            throw ExtrapolationError("grid oracle: state (x=" + std::to_string(x) + ", r=" +
                                     std::to_string(r) + ") at stage " + std::to_string(n) +
                                     " is outside the grid");
        const int ix = std::clamp(static_cast<int>(std::lround(fx)), 0, xg_.count - 1);
        const int ir = std::clamp(static_cast<int>(std::lround(fr)), 0, rg_.count - 1);
        return table_action(n, ix, ir);
    }

    const Scenario& scenario() const { return sc_; }

private:
    struct Nodes {
        double lambda_mean = 0.0;
        double lambda_second = 0.0;
        std::vector<double> v;       // disturbance nodes
        std::vector<double> weight;  // quadrature weight times density
        std::vector<std::vector<double>> column;  // next-stage values along x at r' = max(r, v)
    };

    struct ScalarStage {
        double alpha, b, c, k, sxx, sxl, sll, phi;
    };

    std::size_t idx(int n, int ix, int ir) const {
        return (static_cast<std::size_t>(n) * xg_.count + ix) * rg_.count + ir;
    }

    double beta_at(int n) const { return sc_.prior.beta(0) + n; }

    Nodes expectation_nodes(int n, double r) const {
        Nodes nd;
        const double beta = beta_at(n);
        nd.lambda_mean = pareto_moment_quadrature(beta, r, 1);
        nd.lambda_second = pareto_moment_quadrature(beta, r, 2);
        if (n == sc_.max_stage()) return nd;

        using GL = boost::math::quadrature::gauss<double, 32>;
        const auto& absc = GL::abscissa();
        const auto& wts = GL::weights();
        auto add_piece = [&](double a, double b, bool log_space) {
            const double ta = log_space ? std::log(a) : a;
            const double tb = log_space ? std::log(b) : b;
            const double half = 0.5 * (tb - ta), mid = 0.5 * (tb + ta);
            for (std::size_t i = 0; i < absc.size(); ++i) {
                for (int sgn : {-1, 1}) {
                    if (absc[i] == 0.0 && sgn > 0) continue;
                    const double t = mid + sgn * half * absc[i];
                    const double v = log_space ? std::exp(t) : t;
                    const double jac = log_space ? v : 1.0;
                    nd.v.push_back(v);
                    nd.weight.push_back(wts[i] * half * jac * predictive_pdf(beta, r, v));
                }
            }
        };
        add_piece(0.0, r, false);
        add_piece(r, opts_.v_cap * r, true);

        const int nx = xg_.count;
        nd.column.reserve(nd.v.size());
        for (double v : nd.v) {
            const double rr = std::max(r, v);
            double fr = (std::log(rr) - log_rlo_) / log_rstep_;
            fr = std::clamp(fr, 0.0, static_cast<double>(rg_.count - 1));
            const int i0 = std::min(static_cast<int>(fr), rg_.count - 2);
            const double t = fr - i0;
            std::vector<double> col(static_cast<std::size_t>(nx));
            for (int ix = 0; ix < nx; ++ix)
                col[static_cast<std::size_t>(ix)] =
                    (1.0 - t) * values_[idx(n + 1, ix, i0)] + t * values_[idx(n + 1, ix, i0 + 1)];
            nd.column.push_back(std::move(col));
        }
        return nd;
    }

    double interp_x(const std::vector<double>& col, double x) const {
        double fx = (x - xg_.lo) / xg_.step();
        fx = std::clamp(fx, 0.0, static_cast<double>(xg_.count - 1));
        const int i0 = std::min(static_cast<int>(fx), xg_.count - 2);
        const double t = fx - i0;
        return (1.0 - t) * col[static_cast<std::size_t>(i0)] + t * col[static_cast<std::size_t>(i0) + 1];
    }

    // phi_n * (k u^2 + E[y' s y]) + E[V_{n+1}], with V the phi-weighted table.
    double stage_term(int n, double x, double /*r*/, double u, const Nodes& nd) const {
        const ScalarStage& st = stages_[static_cast<std::size_t>(n)];
        double val = st.phi * (st.k * u * u + st.sxx * x * x + 2.0 * st.sxl * x * nd.lambda_mean +
                               st.sll * nd.lambda_second);
        if (n < sc_.max_stage()) {
            const double base = st.alpha * x + st.b * u;
            double ev = 0.0;
            for (std::size_t q = 0; q < nd.v.size(); ++q)
                ev += nd.weight[q] * interp_x(nd.column[q], base + st.c * nd.v[q]);
            val += ev;
        }
        return val;
    }

    std::pair<double, double> minimize(int n, double x, double r, const Nodes& nd) const {
        double best = std::numeric_limits<double>::infinity();
        double best_u = 0.0;
        for (int iu = 0; iu < ug_.count; ++iu) {
            const double u = ug_.at(iu);
            const double val = stage_term(n, x, r, u, nd);
            const double slack = std::isfinite(best) ? 1e-12 * (1.0 + std::abs(best)) : 0.0;
            if (val < best - slack || (val <= best + slack && std::abs(u) < std::abs(best_u))) {
                best = std::min(best, val);
                best_u = u;
            }
        }
        return {best, best_u};
    }

    void build() {
        const int M = sc_.max_stage();
        for (int n = 0; n <= M; ++n) {
            const StageData st = effective_stage(sc_, n);
            stages_.push_back(ScalarStage{st.alpha(0, 0), st.b(0, 0), st.c(0, 0), st.k(0, 0),
                                          st.s(0, 0), st.s(0, 1), st.s(1, 1),
                                          tail_mass(sc_.horizon, n)});
        }
        const std::size_t total = static_cast<std::size_t>(M + 1) * xg_.count * rg_.count;
        values_.assign(total, 0.0);
        actions_.assign(total, 0.0);
        for (int n = M; n >= 0; --n) {
            for (int ir = 0; ir < rg_.count; ++ir) {
                const Nodes nd = expectation_nodes(n, r_at(ir));
                for (int ix = 0; ix < xg_.count; ++ix) {
                    const auto [val, u] = minimize(n, xg_.at(ix), r_at(ir), nd);
                    values_[idx(n, ix, ir)] = val;
                    actions_[idx(n, ix, ir)] = u;
                }
            }
        }
    }

    Scenario sc_;
    GridRange ug_, rg_, xg_;
    GridOracleOptions opts_;
    double log_rlo_ = 0.0, log_rstep_ = 0.0;
    std::vector<ScalarStage> stages_;
    std::vector<double> values_;   // phi_n-weighted values
    std::vector<double> actions_;
};

/// Grids sized from the scenario scale alone: a control grid symmetric about
/// zero, r from the prior scale to 16 times it, and x wide enough that
/// closed-loop paths of a few stages stay inside.
struct OracleGrids {
    GridRange u, r, x;
};

inline OracleGrids default_oracle_grids(const Scenario& sc, int u_count = 321) {
    const StageData st = effective_stage(sc, 0);
    const double r0 = sc.prior.rbar(0);
    const double scale = std::abs(sc.x0(0)) + r0 * (1.0 + std::abs(st.c(0, 0))) + 1.0;
    const double bmag = std::max(std::abs(st.b(0, 0)), 1e-3);
    const double umax = 2.0 * scale * (1.0 + std::abs(st.alpha(0, 0))) / bmag;
    return OracleGrids{GridRange{-umax, umax, u_count}, GridRange{r0, 16.0 * r0, 33},
                       GridRange{-12.0 * scale, 12.0 * scale, 241}};
}

/// Closed-loop policy reading actions off the oracle tables; tracks r by the
/// same disturbance recovery the Bayes policy uses.
class GridOraclePolicy final : public Policy {
public:
    explicit GridOraclePolicy(std::shared_ptr<const GridOracle> oracle)
        : oracle_(std::move(oracle)), r_(oracle_->scenario().prior.rbar(0)) {}

    Vector act(int n, const Vector& x) override {
        n_ = n;
        x_ = x;
        u_ = Vector::Constant(1, oracle_->lookup_action(n, x(0), r_));
        return u_;
    }

    void observe(const Vector& x_next) override {
        const StageData st = effective_stage(oracle_->scenario(), n_);
        const Vector v = recover_disturbance(x_next, x_, u_, st, 1);
        r_ = std::max(r_, v(0));
    }

private:
    std::shared_ptr<const GridOracle> oracle_;
    double r_;
    int n_ = 0;
    Vector x_, u_;
};

inline std::shared_ptr<const GridOracle> grid_oracle(const Scenario& sc, GridRange u_grid,
                                                     GridRange r_grid, GridRange x_grid,
                                                     GridOracleOptions opts = {}) {
    return std::make_shared<const GridOracle>(sc, u_grid, r_grid, x_grid, opts);
}

inline std::unique_ptr<Policy> grid_oracle_policy(std::shared_ptr<const GridOracle> oracle) {
    return std::make_unique<GridOraclePolicy>(std::move(oracle));
}

}  // namespace bayesctl
