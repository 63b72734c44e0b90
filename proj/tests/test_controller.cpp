#include <gtest/gtest.h>

#include <memory>
#include <random>

#include "bayesctl/controller.hpp"
#include "bayesctl/simulation.hpp"
#include "test_support.hpp"

using namespace bayesctl;
using namespace bayesctl::testing;

TEST(ClassifyCase, Examples) {
    EXPECT_EQ(classify_case(Matrix::Identity(2, 2), vec({1, 1})), CaseTag::FullRankSquare);
    EXPECT_EQ(classify_case(mat({{1}, {1}}), vec({1, 1})), CaseTag::TallFullRankConsistent);
    EXPECT_EQ(classify_case(mat({{1}, {1}}), vec({1, -1})), CaseTag::TallFullRankInconsistent);
    EXPECT_EQ(classify_case(mat({{1, 0}, {0, 0}}), vec({1, 1})), CaseTag::RankDeficientRegularized);
    EXPECT_EQ(classify_case(mat({{1, 0}, {0, 0}}), vec({1, 0})), CaseTag::RankDeficientRegularized);
    EXPECT_EQ(classify_case(mat({{1, 1}}), v1(2)), CaseTag::WideFullRankMinNorm);
    EXPECT_THROW(classify_case(Matrix::Identity(2, 2), v1(1)), InvalidInput);
}

TEST(BayesControl, Examples) {
    const ControlDecision sq = bayes_control(mat({{2, 0}, {0, 4}}), vec({2, 2}));
    EXPECT_NEAR(sq.u(0), 1.0, 1e-15);
    EXPECT_NEAR(sq.u(1), 0.5, 1e-15);
    EXPECT_FALSE(sq.theta_used.has_value());

    const ControlDecision tall = bayes_control(mat({{1}, {1}}), vec({1, -1}));
    EXPECT_EQ(tall.tag, CaseTag::TallFullRankInconsistent);
    EXPECT_NEAR(tall.u(0), 0.0, 1e-15);
    EXPECT_NEAR(tall.residual, std::sqrt(2.0), 1e-15);

    const ControlDecision wide = bayes_control(mat({{1, 1}}), v1(2));
    EXPECT_NEAR(wide.u(0), 1.0, 1e-15);
    EXPECT_NEAR(wide.u(1), 1.0, 1e-15);

    const ControlDecision reg = bayes_control(mat({{1, 0}, {0, 0}}), vec({1, 1}));
    ASSERT_TRUE(reg.theta_used.has_value());
    EXPECT_NEAR(*reg.theta_used, 2e-6, 1e-20);
    EXPECT_NEAR(reg.u(0), 1.0, 1e-9);
    EXPECT_EQ(reg.u(1), 0.0);

    const ControlDecision zero = bayes_control(Matrix::Zero(2, 2), vec({1, 1}));
    EXPECT_EQ(zero.tag, CaseTag::RankDeficientRegularized);
    EXPECT_TRUE(zero.u.isZero(0.0));
}

TEST(BayesControl, RejectsBadInput) {
    EXPECT_THROW(bayes_control(Matrix(0, 0), Vector(0)), InvalidInput);
    Matrix k = Matrix::Identity(2, 2);
    k(1, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(bayes_control(k, vec({1, 1})), InvalidInput);
    EXPECT_THROW(bayes_control(mat({{1, 0}, {0, 0}}), vec({1, 1}), {}, 0.0), InvalidInput);
}

TEST(Properties, SquareFormulasAgree) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 6;
        const Matrix k = random_matrix(rng, n, n) + 3.0 * Matrix::Identity(n, n);
        const Vector l = random_vector(rng, n);
        const ControlDecision d = bayes_control(k, l);
        ASSERT_EQ(d.tag, CaseTag::FullRankSquare);
        const Vector ls = (k.transpose() * k).llt().solve(k.transpose() * l);
        const Vector mn = k.transpose() * (k * k.transpose()).llt().solve(l);
        EXPECT_LE((d.u - ls).norm(), 1e-9 * (1 + d.u.norm()));
        EXPECT_LE((d.u - mn).norm(), 1e-9 * (1 + d.u.norm()));
        EXPECT_LE((d.u - pinv(k) * l).norm(), 1e-9 * (1 + d.u.norm()));
        EXPECT_LE(d.residual, 1e-9 * (1 + l.norm()));
    }
}

TEST(Properties, TallResidualIsMinimal) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int cols = 1 + trial % 3, rows = cols + 1 + trial % 3;
        const Matrix k = random_matrix(rng, rows, cols);
        const Vector l = random_vector(rng, rows);
        const ControlDecision d = bayes_control(k, l);
        ASSERT_EQ(d.tag, CaseTag::TallFullRankInconsistent);
        for (int j = 0; j < 50; ++j) {
            const Vector w = random_vector(rng, cols);
            EXPECT_GE((k * w - l).norm(), d.residual - 1e-9);
        }
        // Normal equations hold at the solution.
        EXPECT_LE((k.transpose() * (k * d.u - l)).norm(), 1e-9 * (1 + l.norm()));
    }
}

TEST(Properties, TallConsistentIsExact) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const int cols = 1 + trial % 3, rows = cols + 2;
        const Matrix k = random_matrix(rng, rows, cols);
        const Vector u = random_vector(rng, cols);
        const ControlDecision d = bayes_control(k, k * u);
        ASSERT_EQ(d.tag, CaseTag::TallFullRankConsistent);
        EXPECT_LE((d.u - u).norm(), 1e-9 * (1 + u.norm()));
    }
}

TEST(Properties, WideSolutionHasMinimumNorm) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int rows = 1 + trial % 3, cols = rows + 1 + trial % 3;
        const Matrix k = random_matrix(rng, rows, cols);
        const Vector l = random_vector(rng, rows);
        const ControlDecision d = bayes_control(k, l);
        ASSERT_EQ(d.tag, CaseTag::WideFullRankMinNorm);
        EXPECT_LE(d.residual, 1e-9 * (1 + l.norm()));
        const Eigen::FullPivLU<Matrix> lu(k);
        const Matrix null = lu.kernel();
        for (int j = 0; j < 50; ++j) {
            const Vector other = d.u + null * random_vector(rng, static_cast<int>(null.cols()));
            EXPECT_GE(other.norm(), d.u.norm() - 1e-12);
        }
        // Orthogonal to the null space.
        EXPECT_LE((null.transpose() * d.u).norm(), 1e-9 * (1 + d.u.norm()));
    }
}

TEST(Properties, RegularizedControlApproachesPseudoinverse) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const int rows = 2 + trial % 4, cols = 2 + (trial / 4) % 4;
        const Matrix k = random_rank(rng, rows, cols, 1);
        const Vector l = k * random_vector(rng, cols);
        const Vector target = pinv(k) * l;
        const ControlDecision coarse = bayes_control(k, l, {}, 1e-3);
        const ControlDecision fine = bayes_control(k, l, {}, 1e-4);
        ASSERT_EQ(fine.tag, CaseTag::RankDeficientRegularized);
        EXPECT_LE((fine.u - target).norm(), (coarse.u - target).norm() + 1e-15);
        EXPECT_LE((bayes_control(k, l).u - target).norm(), 1e-9 * (1 + target.norm()));
    }
}

TEST(BayesPolicy, ZeroCostActsWithZero) {
    ScalarSpec p;
    p.sxx = 0.0;
    p.probs = {0.0, 0.0, 1.0};
    p.x0 = 0.7;
    auto sc = std::make_shared<const Scenario>(scalar_scenario(p));
    auto rc = std::make_shared<const RiskCoeffs>(backward_coefficients(*sc, ConstantsMode::Derived));
    auto policy = make_policy(sc, rc);
    Rng rng(1);
    const Trajectory tr = rollout(*sc, *policy, rng);
    for (const Vector& u : tr.controls) EXPECT_EQ(u(0), 0.0);
}

TEST(BayesPolicy, FirstActionOnAnalyticInstance) {
    auto sc = std::make_shared<const Scenario>(one_step_scenario());
    auto rc = std::make_shared<const RiskCoeffs>(backward_coefficients(*sc, ConstantsMode::Derived));
    BayesPolicy policy(sc, rc);
    EXPECT_NEAR(policy.act(0, sc->x0)(0), -0.375, 1e-12);
    ASSERT_TRUE(policy.last_decision().has_value());
    EXPECT_EQ(policy.last_decision()->tag, CaseTag::FullRankSquare);
    policy.observe(v1(-0.375 + 0.5));
    EXPECT_EQ(policy.filter().beta(0), 4.0);
    EXPECT_EQ(policy.filter().r(0), 1.0);
    EXPECT_EQ(policy.act(1, v1(0.125))(0), 0.0);
    EXPECT_THROW(policy.act(0, sc->x0), InvalidInput);
}

TEST(BayesPolicy, DeterministicGivenSeed) {
    auto sc = std::make_shared<const Scenario>(load_scenario(scenario_path("two_state_random_horizon.json")));
    auto rc = std::make_shared<const RiskCoeffs>(backward_coefficients(*sc, ConstantsMode::Derived));
    auto p1 = make_policy(sc, rc);
    auto p2 = make_policy(sc, rc);
    Rng a(77), b(77);
    const Trajectory t1 = rollout(*sc, *p1, a);
    const Trajectory t2 = rollout(*sc, *p2, b);
    ASSERT_EQ(t1.controls.size(), t2.controls.size());
    for (std::size_t n = 0; n < t1.controls.size(); ++n) EXPECT_EQ(t1.controls[n], t2.controls[n]);
    EXPECT_EQ(t1.loss, t2.loss);
}

TEST(BayesControl, RoundoffSingularValuesAreNotAmplified) {
    // Rank one with L outside the column space: the computed second singular
    // value is roundoff, not signal.
    const Matrix k = mat({{1, 2}, {2, 4}, {0, 0}});
    const Vector l = vec({1, 0, 1});
    const ControlDecision d = bayes_control(k, l);
    EXPECT_EQ(d.tag, CaseTag::RankDeficientRegularized);
    EXPECT_LE((d.u - pinv(k) * l).norm(), 1e-9);
}
