#pragma once

// Closed-loop Monte Carlo: rollouts of a policy against sampled parameters,
// horizons and disturbances, and seeded risk estimation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "bayesctl/controller.hpp"
#include "bayesctl/errors.hpp"
#include "bayesctl/linalg.hpp"
#include "bayesctl/scenario.hpp"

namespace bayesctl {

struct Trajectory {
    std::vector<Vector> states;        // x_0 .. x_N
    std::vector<Vector> controls;      // u_0 .. u_N
    std::vector<Vector> disturbances;  // v_0 .. v_{N-1}
    Vector lambda;
    int horizon = 0;
    double loss = 0.0;
    double projection_residual = 0.0;  // largest |I x_{n+1} - rhs|, r > m only
};

struct SimReport {
    double mean_loss = 0.0;
    double std_error = 0.0;
    std::int64_t replications = 0;
    std::uint64_t seed = 0;
};

/// splitmix64 finalizer; stream seeds depend only on (seed, replication).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replication) {
    return mix64(mix64(seed) ^ mix64(replication + 0x632be59bd9b4e019ULL));
}

/// Pareto(beta, r) by inversion.
inline double sample_pareto(double beta, double r, Rng& rng) {
    const double u = 1.0 - uniform01(rng);  // (0, 1]
    return r * std::pow(u, -1.0 / beta);
}

inline Vector sample_lambda(const PriorSpec& prior, Rng& rng) {
    Vector lambda = Vector::Zero(prior.beta.size());
    for (int i = 0; i < prior.k; ++i) lambda(i) = sample_pareto(prior.beta(i), prior.rbar(i), rng);
    return lambda;
}

/// One closed-loop path. `fixed_lambda` pins the parameter (risk at a given
/// lambda); otherwise it is drawn from the prior. Draw order: lambda, N,
/// then one disturbance vector per transition.
inline Trajectory rollout(const Scenario& sc, Policy& policy, Rng& rng,
                          const std::optional<Vector>& fixed_lambda = std::nullopt) {
    const int m = sc.m;
    Trajectory tr;
    tr.lambda = fixed_lambda ? *fixed_lambda : sample_lambda(sc.prior, rng);
    if (tr.lambda.size() != m) throw InvalidInput("rollout: lambda must have length m");
    tr.horizon = sample_horizon(sc.horizon, rng);
    const Matrix lead = embedding(sc.r, sc.m);

    Vector x = sc.x0;
    Vector y(2 * m);
    for (int n = 0;; ++n) {
        const StageData& st = sc.stages[static_cast<std::size_t>(n)];
        const Vector u = policy.act(n, x);
        y << x, tr.lambda;
        tr.loss += y.dot(st.s * y) + u.dot(st.k * u);
        tr.states.push_back(x);
        tr.controls.push_back(u);
        if (n == tr.horizon) break;

        Vector v = Vector::Zero(m);
        for (int i = 0; i < sc.prior.k; ++i) v(i) = tr.lambda(i) * uniform01(rng);
        const Vector rhs = st.alpha * x + st.b * u + st.c * v;
        Vector x_next = sc.generalized() ? Vector(lead.transpose() * rhs) : rhs;
        if (sc.generalized())
            tr.projection_residual = std::max(tr.projection_residual, (lead * x_next - rhs).norm());
        tr.disturbances.push_back(v);
        policy.observe(x_next);
        x = std::move(x_next);
    }
    return tr;
}

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Mean and standard error of the realized loss over `reps` rollouts.
/// Replication i always uses stream_seed(seed, i), and losses are reduced in
/// replication order, so the report does not depend on `workers`.
inline SimReport estimate_risk(const Scenario& sc, const PolicyFactory& factory, std::int64_t reps,
                               std::uint64_t seed, int workers = 1,
                               const std::optional<Vector>& fixed_lambda = std::nullopt) {
    if (reps < 2) throw InvalidInput("estimate_risk: need at least 2 replications");
    workers = std::max(1, workers);
    std::vector<double> losses(static_cast<std::size_t>(reps));

    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run_range = [&](std::int64_t begin, std::int64_t end) {
        try {
            for (std::int64_t i = begin; i < end; ++i) {
                Rng rng(stream_seed(seed, static_cast<std::uint64_t>(i)));
                auto policy = factory();
                losses[static_cast<std::size_t>(i)] = rollout(sc, *policy, rng, fixed_lambda).loss;
            }
        } catch (...) {
            const std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };

    if (workers == 1) {
        run_range(0, reps);
    } else {
        std::vector<std::thread> pool;
        const std::int64_t chunk = (reps + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::int64_t begin = w * chunk;
            const std::int64_t end = std::min(reps, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    double sum = 0.0;
    for (double l : losses) sum += l;
    const double mean = sum / static_cast<double>(reps);
    double ss = 0.0;
    for (double l : losses) ss += (l - mean) * (l - mean);
    const double var = ss / static_cast<double>(reps - 1);
    return SimReport{mean, std::sqrt(var / static_cast<double>(reps)), reps, seed};
}

/// Factory for fresh Bayes policies sharing one set of coefficients.
inline PolicyFactory bayes_policy_factory(std::shared_ptr<const Scenario> sc,
                                          std::shared_ptr<const RiskCoeffs> rc,
                                          std::optional<double> theta = std::nullopt,
                                          Tolerance tol = {}) {
    return [sc, rc, theta, tol] { return make_policy(sc, rc, theta, tol); };
}

inline PolicyFactory zero_policy_factory(int m) {
    return [m] { return std::make_unique<ZeroPolicy>(m); };
}

}  // namespace bayesctl
