#include "decomp/noconv.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace decomp;
using decomp::testing::random_matrix;

TEST(NoConv, LargeLambdaShrinksToZero) {
    RngStream rng(61);
    const Matrix y = random_matrix(rng, 8, 5);
    const NoConvResult r = noconv_solve(y, 1e3, 3);
    EXPECT_LE(r.U.norm(), 1e-8);
    EXPECT_LE(r.V.norm(), 1e-8);
    EXPECT_NEAR(r.objective, y.squaredNorm() / 80.0, 1e-8);
}

TEST(NoConv, RecoversNoiselessOneSparseData) {
    RngStream rng(62);
    const Index n = 60, p = 8, m = 4;
    Matrix v = random_matrix(rng, p, m);
    v.colwise().normalize();
    Matrix u = Matrix::Zero(n, m);
    for (Index i = 0; i < n; ++i)
        u(i, static_cast<Index>(rng.uniform_index(m))) = rng.normal();
    const Matrix y = u * v.transpose();
    AltMinConfig cfg;
    cfg.restarts = 10;
    cfg.max_sweeps = 3000;
    cfg.tol = 1e-10;
    const NoConvResult r = noconv_solve(y, 1e-6, m, cfg);
    EXPECT_LE((r.X - y).norm(), 1e-2 * y.norm());
}

TEST(NoConv, BeatsRandomFactorPairs) {
    RngStream rng(63);
    const Matrix y = random_matrix(rng, 4, 3);
    const double lambda = 0.05;
    const NoConvResult r = noconv_solve(y, lambda, 2);
    for (int s = 0; s < 100; ++s) {
        const Matrix u = random_matrix(rng, 4, 2), v = random_matrix(rng, 3, 2);
        EXPECT_LE(r.objective, noconv_objective(y, lambda, u, v));
    }
}

TEST(NoConv, ObjectiveNonincreasingAcrossSweeps) {
    RngStream rng(64);
    const Matrix y = random_matrix(rng, 20, 6);
    AltMinConfig cfg;
    cfg.restarts = 1;
    const NoConvResult r = noconv_solve(y, 0.01, 5, cfg);
    ASSERT_GE(r.history.size(), 2u);
    for (std::size_t i = 1; i < r.history.size(); ++i)
        EXPECT_LE(r.history[i], r.history[i - 1] * (1 + 1e-15));
    EXPECT_DOUBLE_EQ(r.history.back(), r.objective);
}

TEST(NoConv, VStepIsOptimal) {
    RngStream rng(65);
    const Matrix y = random_matrix(rng, 15, 5);
    const double lambda = 0.02;
    const NoConvResult r = noconv_solve(y, lambda, 4);
    const double np = 75.0;
    const Matrix grad_v = (r.V * r.U.transpose() - y.transpose()) * r.U / np + lambda * r.V;
    const double scale = (y.transpose() * r.U).norm() / np + lambda * r.V.norm();
    EXPECT_LE(grad_v.norm(), 1e-8 * std::max(scale, 1e-300));
    EXPECT_LE((r.X - r.U * r.V.transpose()).norm(), 1e-14);
}

TEST(NoConv, DeterministicAndValidated) {
    RngStream rng(66);
    const Matrix y = random_matrix(rng, 10, 4);
    AltMinConfig cfg;
    cfg.seed = 9;
    const NoConvResult a = noconv_solve(y, 0.01, 3, cfg), b = noconv_solve(y, 0.01, 3, cfg);
    EXPECT_EQ(a.X, b.X);
    EXPECT_EQ(a.best_restart, b.best_restart);
    EXPECT_THROW(noconv_solve(y, 0.01, 0), std::invalid_argument);
    EXPECT_THROW(noconv_solve(y, -1.0, 2), std::invalid_argument);
    cfg.restarts = 0;
    EXPECT_THROW(noconv_solve(y, 0.01, 2, cfg), std::invalid_argument);
}

TEST(NoConv, UStepProxMatchesBruteForceColumnMinimizer) {
    // One prox step on a single column equals the minimizer of the local
    // quadratic model plus the squared-ℓ1 term, checked by random search.
    RngStream rng(67);
    const Vector z = random_matrix(rng, 6, 1);
    const double gamma = 0.7;
    const Vector x = prox_squared_l1(z, gamma);
    auto f = [&](const Vector &w) {
        return 0.5 * (w - z).squaredNorm() + 0.5 * gamma * std::pow(w.cwiseAbs().sum(), 2);
    };
    for (int s = 0; s < 500; ++s) {
        const Vector w = x + 0.1 * Vector(random_matrix(rng, 6, 1));
        EXPECT_LE(f(x), f(w) + 1e-12);
    }
}
