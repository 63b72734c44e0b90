#pragma once

#include <random>
#include <string>
#include <vector>

#include "bayesctl/linalg.hpp"
#include "bayesctl/scenario.hpp"

namespace bayesctl::testing {

inline std::string scenario_path(const std::string& name) {
    return std::string(BAYESCTL_SCENARIO_DIR) + "/" + name;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

inline Vector random_vector(std::mt19937_64& rng, int n) { return random_matrix(rng, n, 1); }

/// rows x cols with the requested rank (product of two random factors).
inline Matrix random_rank(std::mt19937_64& rng, int rows, int cols, int rank) {
    if (rank == 0) return Matrix::Zero(rows, cols);
    return random_matrix(rng, rows, rank) * random_matrix(rng, rank, cols);
}

inline Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
inline Vector v1(double v) { return Vector::Constant(1, v); }

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : rows) {
        Eigen::Index j = 0;
        for (double x : row) m(i, j++) = x;
        ++i;
    }
    return m;
}

inline Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

/// Scalar scenario with identical stages.
struct ScalarSpec {
    double alpha = 1.0, b = 1.0, c = 1.0, k = 1.0;
    double sxx = 1.0, sxl = 0.0, sll = 0.0;
    double beta = 3.0, r = 1.0, x0 = 0.0;
    std::vector<double> probs{0.0, 1.0};
};

inline Scenario scalar_scenario(const ScalarSpec& p) {
    Scenario sc;
    sc.m = sc.r = 1;
    sc.horizon.probs = p.probs;
    for (std::size_t n = 0; n < p.probs.size(); ++n)
        sc.stages.push_back(StageData{m1(p.alpha), m1(p.b), m1(p.c),
                                      mat({{p.sxx, p.sxl}, {p.sxl, p.sll}}), m1(p.k)});
    sc.prior = PriorSpec{v1(p.beta), v1(p.r), 1};
    sc.x0 = v1(p.x0);
    validate(sc);
    return sc;
}

/// The single-step instance with a closed-form answer.
inline Scenario one_step_scenario() { return scalar_scenario(ScalarSpec{}); }

/// Random scalar instance with a moderately heavy but finite-variance prior.
inline Scenario random_scalar_scenario(std::mt19937_64& rng, int max_stage) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    ScalarSpec p;
    p.alpha = in(0.5, 1.2);
    p.b = in(0.5, 1.5);
    p.c = in(0.5, 1.5);
    p.k = in(0.2, 2.0);
    p.sxx = in(0.5, 2.0);
    p.sll = in(0.1, 1.0);
    p.sxl = in(-0.5, 0.5) * std::sqrt(p.sxx * p.sll);
    p.beta = in(6.0, 10.0);
    p.r = in(0.5, 1.5);
    p.x0 = in(-1.0, 1.0);
    p.probs.assign(static_cast<std::size_t>(max_stage + 1), 0.0);
    double total = 0.0;
    for (auto& q : p.probs) total += (q = in(0.1, 1.0));
    for (auto& q : p.probs) q /= total;
    double s = 0.0;
    for (int i = 0; i < max_stage; ++i) s += p.probs[static_cast<std::size_t>(i)];
    p.probs.back() = 1.0 - s;
    return scalar_scenario(p);
}

}  // namespace bayesctl::testing
