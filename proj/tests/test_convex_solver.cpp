#include "decomp/closed_form.hpp"
#include "decomp/convex_solver.hpp"
#include "test_support.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

using namespace decomp;
using decomp::testing::check_gradient;
using decomp::testing::random_matrix;
using decomp::testing::with_singular_values;

namespace {

double closed_form_trace_objective(const Matrix &y, double lambda) {
    const double np = static_cast<double>(y.size());
    const Matrix x = svt(y, lambda * np);
    return (y - x).squaredNorm() / (2.0 * np) + lambda * singular_values(x).sum();
}

// Optimal factor of the ν = 1 problem: A = L diag((σ - c)+) Lᵀ.
Matrix trace_optimal_factor(const Matrix &y, double lambda) {
    const double c = lambda * static_cast<double>(y.size());
    const SvdResult s = svd(y);
    const Vector d = (s.singular_values.array() - c).max(0.0).sqrt().matrix();
    return s.left_vectors * d.asDiagonal();
}

// Accelerated projected gradient over the PSD cone on the smoothed G(A),
// with no low-rank parametrization.
Matrix psd_projected_gradient(const Matrix &y, double lambda, double nu, double eps, int iters) {
    const Index n = y.rows();
    const double c = lambda * static_cast<double>(y.size());
    const Matrix yyt = y * y.transpose();
    const double lipschitz =
        0.5 * lambda * ((1.0 - nu) / eps + 2.0 * yyt.norm() / (c * c * c));
    const double step = 1.0 / lipschitz;
    auto project = [](const Matrix &m) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
        return Matrix(eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
                      eig.eigenvectors().transpose());
    };
    Matrix a = Matrix::Zero(n, n), z = a;
    double theta = 1.0;
    for (int k = 0; k < iters; ++k) {
        Matrix r = z;
        r.diagonal().array() += c;
        const Matrix rinv = r.inverse();
        Matrix d;
        f_penalty_smoothed(z, nu, eps, &d);
        const Matrix g = 0.5 * lambda * (d - rinv * yyt * rinv);
        const Matrix next = project(z - step * g);
        const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
        z = next + ((theta - 1.0) / theta_next) * (next - a);
        a = next;
        theta = theta_next;
    }
    return a;
}

double g_of_a(const Matrix &y, const Matrix &a, double lambda, double nu) {
    const double np = static_cast<double>(y.size());
    Matrix r = a / (lambda * np);
    r.diagonal().array() += 1.0;
    return (y.transpose() * r.inverse() * y).trace() / (2.0 * np) + 0.5 * lambda * f_penalty(a, nu);
}

} // namespace

TEST(SolveEstimation, ZeroData) {
    const ConvexSolution s = solve_estimation(Matrix::Zero(5, 3), 0.1, 0.5);
    EXPECT_EQ(s.A.norm(), 0.0);
    EXPECT_EQ(s.X.norm(), 0.0);
    EXPECT_EQ(s.objective, 0.0);
    EXPECT_TRUE(s.certified_global);
    EXPECT_EQ(s.size(), 1);
    EXPECT_EQ(s.rank_estimate, 0);
}

TEST(SolveEstimation, TraceCaseMatchesSvt) {
    RngStream rng(21);
    for (int t = 0; t < 5; ++t) {
        const Matrix y = random_matrix(rng, 20, 10);
        const double lambda = (0.2 + 0.6 * rng.uniform()) * singular_values(y)(0) / 200.0;
        SolverConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(t);
        const ConvexSolution s = solve_estimation(y, lambda, 1.0, cfg);
        const Matrix xs = svt(y, lambda * 200.0);
        EXPECT_LE((s.X - xs).norm(), 1e-4 * xs.norm());
        const double opt = closed_form_trace_objective(y, lambda);
        EXPECT_NEAR(s.objective, opt, 1e-4 * opt);
        EXPECT_TRUE(s.certified_global);
    }
}

TEST(SolveEstimation, SolutionInvariants) {
    RngStream rng(22);
    const Matrix y = random_matrix(rng, 12, 6);
    const ConvexSolution s = solve_estimation(y, 0.02, 0.5);
    EXPECT_LE((s.A - s.U * s.U.transpose()).norm(), 1e-10 * std::max(1.0, s.A.norm()));
    EXPECT_LE((s.X - s.U * s.V.transpose()).norm(), 1e-12 * std::max(1.0, s.X.norm()));
    EXPECT_EQ(s.V.rows(), 6);
    EXPECT_EQ(s.V.cols(), s.size());
    if (s.certified_global)
        EXPECT_LT(s.rank_estimate, s.size());
}

TEST(SolveEstimation, ThreeByThreeMatchesFullMatrixOracle) {
    RngStream rng(23);
    for (int t = 0; t < 3; ++t) {
        const Matrix y = random_matrix(rng, 3, 3);
        const double lambda = 0.05;
        const ConvexSolution s = solve_estimation(y, lambda, 0.5);
        const Matrix a = psd_projected_gradient(y, lambda, 0.5, 1e-6, 100000);
        const double oracle = g_of_a(y, a, lambda, 0.5);
        EXPECT_NEAR(s.objective, oracle, 1e-3 * oracle);
        // The factored solver should not be beaten by the oracle beyond its smoothing bias.
        EXPECT_LE(s.objective, oracle + 1e-5);
    }
}

TEST(SolveEstimation, RejectsBadArguments) {
    const Matrix y = Matrix::Ones(3, 2);
    EXPECT_THROW(solve_estimation(y, 0.0, 0.5), std::invalid_argument);
    EXPECT_THROW(solve_estimation(y, 0.1, 1.5), std::invalid_argument);
    SolverConfig cfg;
    cfg.m_init = 4;
    EXPECT_THROW(solve_estimation(y, 0.1, 0.5, cfg), std::invalid_argument);
    cfg = {};
    cfg.eps = -1.0;
    EXPECT_THROW(solve_estimation(y, 0.1, 0.5, cfg), std::invalid_argument);
    Matrix bad = y;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(solve_estimation(bad, 0.1, 0.5), std::invalid_argument);
}

TEST(EstimationObjective, GradientMatchesFiniteDifferences) {
    RngStream rng(24);
    for (double eta : {0.0, 0.5, 1.0})
        for (int t = 0; t < 4; ++t) {
            const Matrix y = random_matrix(rng, 7, 5);
            const Matrix u = random_matrix(rng, 7, 3);
            const double nu = rng.uniform();
            const EstimationObjective obj(y, 0.01 + 0.05 * rng.uniform(), nu, 0.1, eta);
            Matrix g;
            obj.evaluate(u, &g);
            const auto chk = check_gradient([&](const Matrix &z) { return obj.evaluate(z); }, u,
                                            g, rng, 50, 1e-5);
            EXPECT_LE(chk.worst_relative, 1e-5) << "eta=" << eta;
        }
}

TEST(EstimationObjective, GradientWrtAMatchesFiniteDifferences) {
    RngStream rng(25);
    const Matrix y = random_matrix(rng, 5, 4);
    const Matrix u = random_matrix(rng, 5, 2);
    const double lambda = 0.03, nu = 0.4, eps = 0.1;
    const EstimationObjective obj(y, lambda, nu, eps);
    const Matrix ga = obj.gradient_wrt_a(u);
    const double c = lambda * 20.0;
    auto g_of = [&](const Matrix &a) {
        Matrix r = a;
        r.diagonal().array() += c;
        return 0.5 * lambda * ((y.transpose() * r.inverse() * y).trace() +
                               f_penalty_smoothed(a, nu, eps));
    };
    const Matrix a = u * u.transpose();
    for (Index i = 0; i < 5; ++i)
        for (Index j = i; j < 5; ++j) {
            Matrix e = Matrix::Zero(5, 5);
            e(i, j) = e(j, i) = 1.0;
            const double h = 1e-5;
            const double fd = (g_of(a + h * e) - g_of(a - h * e)) / (2 * h);
            const double analytic = i == j ? ga(i, i) : 2.0 * ga(i, j);
            EXPECT_NEAR(fd, analytic, 1e-6 * std::max(1.0, std::abs(analytic)));
        }
}

TEST(EstimationObjective, InvariantUnderRightRotation) {
    RngStream rng(26);
    const Matrix y = random_matrix(rng, 6, 4);
    const Matrix u = random_matrix(rng, 6, 3);
    const Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, 3, 3));
    const Matrix q = qr.householderQ();
    const EstimationObjective obj(y, 0.05, 0.7, 0.0);
    const double a = obj.evaluate(u), b = obj.evaluate(u * q);
    EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a)));
}

TEST(NormObjective, GradientMatchesFiniteDifferences) {
    RngStream rng(27);
    for (double eta : {0.0, 0.3, 1.0})
        for (int t = 0; t < 4; ++t) {
            const Matrix x = random_matrix(rng, 5, 4);
            const Matrix u = random_matrix(rng, 5, 5);
            const NormObjective obj(x, rng.uniform(), 0.1, eta);
            Matrix g;
            obj.evaluate(u, &g);
            const auto chk = check_gradient([&](const Matrix &z) { return obj.evaluate(z); }, u,
                                            g, rng, 50, 1e-5);
            EXPECT_LE(chk.worst_relative, 1e-5) << "eta=" << eta;
        }
}

TEST(Lbfgs, ObjectiveIsNonincreasing) {
    RngStream rng(28);
    const Matrix y = random_matrix(rng, 10, 6);
    const EstimationObjective obj(y, 0.01, 0.3, 1e-3);
    DescentOptions opt;
    opt.keep_history = true;
    opt.max_iter = 300;
    const DescentResult r = minimize_lbfgs(obj, random_matrix(rng, 10, 4), opt);
    ASSERT_GE(r.history.size(), 2u);
    for (std::size_t i = 1; i < r.history.size(); ++i)
        EXPECT_LE(r.history[i], r.history[i - 1]);
}

TEST(Lbfgs, QuadraticConverges) {
    Matrix target(2, 2);
    target << 1, -2, 3, 0.5;
    auto f = [&](const Matrix &x, Matrix &g) {
        g = x - target;
        g.col(1) *= 100.0;
        return 0.5 * (x - target).col(0).squaredNorm() + 50.0 * (x - target).col(1).squaredNorm();
    };
    const DescentResult r = minimize_lbfgs(f, Matrix::Zero(2, 2), DescentOptions{});
    EXPECT_EQ(r.status, DescentStatus::Converged);
    EXPECT_LE((r.x - target).norm(), 1e-7);
}

TEST(CertifyGlobal, ZeroColumnAtTraceOptimum) {
    RngStream rng(29);
    Vector sv(4);
    sv << 5, 3, 0.5, 0.2;
    const Matrix y = with_singular_values(rng, 8, 5, sv);
    const double lambda = 1.0 / 40.0; // c = 1: two singular values survive
    Matrix u = trace_optimal_factor(y, lambda).leftCols(2);
    Matrix padded = Matrix::Zero(8, 3);
    padded.leftCols(2) = u;
    const EstimationObjective obj(y, lambda, 1.0, 0.0);
    const Certificate c = certify_global(padded, obj.gradient_wrt_a(padded), SolverConfig{});
    EXPECT_TRUE(c.certified);
    EXPECT_EQ(c.rank_estimate, 2);
}

TEST(CertifyGlobal, FullRankSingleColumnFails) {
    RngStream rng(30);
    Vector sv(3);
    sv << 5, 4, 0.1;
    const Matrix y = with_singular_values(rng, 8, 5, sv);
    const double lambda = 1.0 / 40.0;
    SolverConfig cfg;
    cfg.m_max = 1;
    const ConvexSolution s = solve_estimation(y, lambda, 1.0, cfg);
    EXPECT_EQ(s.size(), 1);
    EXPECT_FALSE(s.certified_global);
    const EstimationObjective obj(y, lambda, 1.0, 0.0);
    EXPECT_FALSE(certify_global(s.U, obj.gradient_wrt_a(s.U), cfg).certified);
}

TEST(CertifyGlobal, ZeroFactorWithPsdGradient) {
    RngStream rng(31);
    const Matrix y = random_matrix(rng, 6, 4);
    const double lambda = 2.0 * singular_values(y)(0) / 24.0;
    const Matrix u = Matrix::Zero(6, 1);
    const EstimationObjective obj(y, lambda, 0.5, 0.0);
    const Certificate c = certify_global(u, obj.gradient_wrt_a(u), SolverConfig{});
    EXPECT_TRUE(c.certified);
    EXPECT_EQ(c.rank_estimate, 0);
}

TEST(GrowAndSolve, StopsOneColumnPastTheTraceRank) {
    RngStream rng(32);
    for (Index r = 1; r <= 3; ++r) {
        Vector sv = Vector::Constant(5, 0.3);
        for (Index k = 0; k < r; ++k)
            sv(k) = 4.0 + k;
        const Matrix y = with_singular_values(rng, 12, 5, sv);
        const double lambda = 1.0 / 60.0; // threshold 1
        SolverConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(r);
        const ConvexSolution s = grow_and_solve(y, lambda, 1.0, cfg);
        EXPECT_TRUE(s.certified_global);
        EXPECT_EQ(s.size(), r + 1);
        EXPECT_EQ(s.rank_estimate, r);
    }
}

TEST(GrowAndSolve, LargeLambdaCertifiesZero) {
    RngStream rng(33);
    const Matrix y = random_matrix(rng, 10, 4);
    const double lambda = 1.5 * singular_values(y)(0) / 40.0;
    for (double nu : {0.0, 0.5, 1.0}) {
        const ConvexSolution s = grow_and_solve(y, lambda, nu, SolverConfig{});
        EXPECT_TRUE(s.certified_global);
        EXPECT_EQ(s.size(), 1);
        EXPECT_LE(s.X.norm(), 1e-6 * y.norm());
    }
}

TEST(GrowAndSolve, WarmStartReproducesSolution) {
    RngStream rng(34);
    const Matrix y = random_matrix(rng, 10, 5);
    const double lambda = 0.3 * singular_values(y)(0) / 50.0;
    const ConvexSolution cold = solve_estimation(y, lambda, 0.5);
    const ConvexSolution warm = grow_and_solve(y, lambda, 0.5, SolverConfig{}, cold.U);
    EXPECT_NEAR(warm.objective, cold.objective, 1e-6 * cold.objective);
    EXPECT_THROW(grow_and_solve(y, lambda, 0.5, SolverConfig{}, Matrix::Zero(3, 1)),
                 std::invalid_argument);
}

TEST(NormLowerBound, TraceNormIsTight) {
    RngStream rng(35);
    for (int t = 0; t < 5; ++t) {
        const Matrix x = random_matrix(rng, 6, 4);
        const double tn = singular_values(x).sum();
        EXPECT_NEAR(norm_lower_bound(x, 1.0), tn, 1e-3 * tn);
    }
}

TEST(NormLowerBound, RankOneAndZero) {
    Vector u(3), v(2);
    u << 1, -2, 2;
    v << 3, 4;
    EXPECT_NEAR(norm_lower_bound(u * v.transpose(), 1.0), 15.0, 1.5e-2);
    EXPECT_EQ(norm_lower_bound(Matrix::Zero(3, 2), 0.5), 0.0);
}

TEST(NormLowerBound, BelowEveryFactorizationCost) {
    RngStream rng(36);
    for (int t = 0; t < 10; ++t) {
        const double nu = rng.uniform();
        const Factorization f{random_matrix(rng, 5, 3), random_matrix(rng, 4, 3)};
        const double lb = norm_lower_bound(f.product(), nu);
        EXPECT_LE(lb, factorization_cost(f, NormSpec::mixed(nu)) + 1e-6);
    }
}

TEST(NormLowerBound, BetweenEntrywiseAndTraceBounds) {
    // F(A) >= ν tr A gives a bound at least sqrt(ν) times the trace norm, and
    // the mixed column norm never exceeds the ℓ1 norm, so the ℓ1/ℓ2 norm is an upper bound.
    RngStream rng(37);
    for (int t = 0; t < 5; ++t) {
        const Matrix x = random_matrix(rng, 5, 4);
        const double nu = rng.uniform();
        const double lb = norm_lower_bound(x, nu);
        EXPECT_GE(lb, std::sqrt(nu) * singular_values(x).sum() - 1e-6);
        EXPECT_LE(lb, decomposition_norm_closed(x, NormSpec::row_l2()) + 1e-6);
    }
}
