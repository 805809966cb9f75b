#include "decomp/convex_solver.hpp"
#include "decomp/rounding.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace decomp;
using decomp::testing::check_gradient;
using decomp::testing::random_matrix;

TEST(HomotopySchedule, Validation) {
    HomotopySchedule s;
    EXPECT_NO_THROW(s.validate());
    s.etas = {0.0, 0.5, 0.5, 1.0};
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.etas = {0.1, 1.0};
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.etas = {0.0, 0.9};
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.etas = {0.0, 1.0};
    s.iters_per_stage = 0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(RoundNormFactorization, RankOneKeepsDirection) {
    Vector u(4), v(3);
    u << 1.0, -0.5, 0.0, 2.0;
    v << 0.3, 1.0, -1.0;
    const Matrix x = u * v.transpose();
    HomotopySchedule sched;
    sched.etas = {0.0, 1.0};
    const RoundedFactorization r = round_norm_factorization(x, u, 0.5, 1e-6, sched);
    ASSERT_EQ(r.U.cols(), 1);
    const double cosine = std::abs(r.U.col(0).dot(u)) / (r.U.norm() * u.norm());
    EXPECT_GE(cosine, 1.0 - 1e-6);
    EXPECT_LE(r.residual, 1e-8 * x.norm());
    // The single-atom factorization cost is the mixed column norm times ‖v‖.
    const double expected = std::sqrt(mixed_column_norm_sq(u, 0.5)) * v.norm();
    const Factorization f{r.U, r.V};
    EXPECT_NEAR(factorization_cost(f, NormSpec::mixed(0.5)), expected, 1e-6 * expected);
}

TEST(RoundNormFactorization, EtaZeroStageIsTheLowerBound) {
    RngStream rng(41);
    const Matrix x = random_matrix(rng, 5, 4);
    const double nu = 0.4;
    const NormBound lb = norm_lower_bound_solution(x, nu);
    EXPECT_NEAR(NormObjective(x, nu, 0.0, 0.0).evaluate(lb.U), lb.value, 1e-12 * lb.value);
    // Descending the eta = 0 objective from the lower-bound factor gains nothing.
    DescentOptions opt;
    const DescentResult d = minimize_lbfgs(NormObjective(x, nu, lb.eps, 0.0), lb.U, opt);
    EXPECT_NEAR(NormObjective(x, nu, 0.0, 0.0).evaluate(d.x), lb.value, 1e-6 * lb.value);
}

TEST(RoundNormFactorization, SandwichAndExactFactorization) {
    RngStream rng(42);
    for (int t = 0; t < 8; ++t) {
        const Matrix x = random_matrix(rng, 6, 5);
        const double nu = 0.25 * (1 + t % 3);
        const NormBound lb = norm_lower_bound_solution(x, nu);
        const RoundedFactorization r = round_norm_factorization(x, lb.U, nu, lb.eps);
        EXPECT_LE(r.residual, 1e-8 * x.norm());
        const double cost = factorization_cost(Factorization{r.U, r.V}, NormSpec::mixed(nu));
        EXPECT_LE(lb.value, cost + 1e-6);
        EXPECT_LE(cost, r.objective + 1e-9 * r.objective);
        EXPECT_LE(r.objective, r.objective_start);
    }
}

TEST(RoundNormFactorization, TraceCaseAgreesWithLowerBound) {
    RngStream rng(43);
    for (int t = 0; t < 4; ++t) {
        const Matrix x = random_matrix(rng, 6, 5);
        const NormBound lb = norm_lower_bound_solution(x, 1.0);
        const RoundedFactorization r = round_norm_factorization(x, lb.U, 1.0, lb.eps);
        const double cost = factorization_cost(Factorization{r.U, r.V}, NormSpec::mixed(1.0));
        EXPECT_NEAR(cost, lb.value, 1e-3 * lb.value);
    }
}

TEST(RoundNormFactorization, NotWorseThanMultiStartDescent) {
    RngStream rng(44);
    const Matrix x = random_matrix(rng, 5, 4);
    const double nu = 0.5;
    const NormBound lb = norm_lower_bound_solution(x, nu);
    const RoundedFactorization r = round_norm_factorization(x, lb.U, nu, lb.eps);
    const NormObjective exact(x, nu, 0.0, 1.0);
    double best = std::numeric_limits<double>::infinity();
    DescentOptions opt;
    opt.max_iter = 2000;
    for (int s = 0; s < 20; ++s) {
        const Matrix u0 = random_matrix(rng, 5, 5);
        const DescentResult d = minimize_lbfgs(NormObjective(x, nu, lb.eps, 1.0), u0, opt);
        best = std::min(best, exact.evaluate(d.x));
    }
    EXPECT_LE(r.objective, best + 1e-6 * best);
}

TEST(RoundNormFactorization, StageObjectiveGradients) {
    RngStream rng(45);
    for (double eta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const Matrix x = random_matrix(rng, 5, 4);
        const Matrix u = random_matrix(rng, 5, 6);
        const NormObjective obj(x, 0.3, 1e-2, eta);
        Matrix g;
        obj.evaluate(u, &g);
        const auto chk =
            check_gradient([&](const Matrix &z) { return obj.evaluate(z); }, u, g, rng, 50, 1e-5);
        EXPECT_LE(chk.worst_relative, 1e-5);
    }
}

TEST(RoundNormFactorization, RejectsSingularStart) {
    RngStream rng(46);
    const Matrix x = random_matrix(rng, 4, 3);
    EXPECT_THROW(round_norm_factorization(x, Matrix::Zero(4, 2), 0.5, 1e-4), ConvergenceError);
    EXPECT_THROW(round_norm_factorization(x, Matrix::Ones(3, 2), 0.5, 1e-4),
                 std::invalid_argument);
    EXPECT_THROW(round_norm_factorization(x, Matrix::Ones(4, 2), 0.5, 0.0),
                 std::invalid_argument);
}

TEST(RoundEstimation, LargeLambdaStaysAtZero) {
    RngStream rng(47);
    const Matrix y = random_matrix(rng, 10, 5);
    const double lambda = 2.0 * singular_values(y)(0) / 50.0;
    const ConvexSolution s = solve_estimation(y, lambda, 0.3);
    const RoundedEstimate r = round_estimation(y, lambda, 0.3, s.U, s.eps);
    EXPECT_LE(r.X.norm(), 1e-8 * y.norm());
}

TEST(RoundEstimation, TraceCaseLeavesTheConvexSolution) {
    RngStream rng(48);
    const Matrix y = random_matrix(rng, 12, 6);
    const double lambda = 0.4 * singular_values(y)(0) / 72.0;
    const ConvexSolution s = solve_estimation(y, lambda, 1.0);
    const RoundedEstimate r = round_estimation(y, lambda, 1.0, s.U, s.eps);
    EXPECT_LE((r.X - s.X).norm(), 1e-6 * s.X.norm());
    EXPECT_NEAR(r.objective, s.objective, 1e-8 * s.objective);
}

TEST(RoundEstimation, ObjectiveDoesNotIncreaseAndFactorsAreConsistent) {
    RngStream rng(49);
    for (int t = 0; t < 5; ++t) {
        const Matrix y = random_matrix(rng, 15, 6);
        const double lambda = (0.1 + 0.3 * rng.uniform()) * singular_values(y)(0) / 90.0;
        const double nu = 0.25 * t;
        const ConvexSolution s = solve_estimation(y, lambda, nu);
        const RoundedEstimate r = round_estimation(y, lambda, nu, s.U, s.eps);
        EXPECT_LE(r.objective, r.objective_start);
        EXPECT_LE((r.X - r.U * r.V.transpose()).norm(), 1e-12 * std::max(1.0, r.X.norm()));
        // The convex objective lower-bounds the rounded nonconvex one.
        EXPECT_GE(r.objective, s.objective - 1e-6 * s.objective);
        for (Index m = 0; m < r.U.cols(); ++m)
            EXPECT_GT(r.U.col(m).norm(), 0.0);
    }
}

TEST(RoundEstimation, StageObjectiveGradients) {
    RngStream rng(50);
    for (double eta : {0.25, 0.75}) {
        const Matrix y = random_matrix(rng, 6, 4);
        const Matrix u = random_matrix(rng, 6, 3);
        const EstimationObjective obj(y, 0.02, 0.6, 1e-2, eta);
        Matrix g;
        obj.evaluate(u, &g);
        const auto chk =
            check_gradient([&](const Matrix &z) { return obj.evaluate(z); }, u, g, rng, 50, 1e-5);
        EXPECT_LE(chk.worst_relative, 1e-5);
    }
}
