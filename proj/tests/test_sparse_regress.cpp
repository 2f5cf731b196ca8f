#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "synthcombo/sparse_regress.hpp"

using namespace synthcombo;

namespace {

RegressionSample full_cube_sample(int p, const SparseFourierVector& alpha) {
    RegressionSample s{p, {}, {}};
    for (Mask x = 0; x < (Mask{1} << p); ++x) {
        s.combos.push_back(x);
        s.outcomes.push_back(alpha.evaluate_mask(x));
    }
    return s;
}

RegressionSample random_sample(int p, std::size_t n, const SparseFourierVector& alpha, double sigma, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Mask> pick(0, low_bits(p));
    std::normal_distribution<double> nd(0.0, sigma);
    RegressionSample s{p, {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
        const Mask x = pick(rng);
        s.combos.push_back(x);
        s.outcomes.push_back(alpha.evaluate_mask(x) + (sigma > 0 ? nd(rng) : 0.0));
    }
    return s;
}

SparseFourierVector random_sparse(int p, int s, unsigned seed, double lo = 1.0, double hi = 2.0) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Mask> pick(0, low_bits(p));
    std::uniform_real_distribution<double> mag(lo, hi);
    SparseFourierVector a(p);
    while (static_cast<int>(a.nnz()) < s) {
        const Mask k = pick(rng);
        if (a.get(k) == 0.0) a.set(k, (rng() & 1U ? 1.0 : -1.0) * mag(rng));
    }
    return a;
}

// Independent KKT oracle: builds each character column from scratch and
// returns the worst violation of the Lasso subgradient conditions over all
// 2^p coordinates.
double kkt_violation(const RegressionSample& s, const SparseFourierVector& a, double lambda) {
    const std::size_t n = s.size();
    std::vector<double> fitted(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& [k, v] : a.entries()) {
            int prod = 1;
            for (int j = 0; j < s.p; ++j)
                if ((k >> j) & 1U) prod *= ((s.combos[i] >> j) & 1U) ? 1 : -1;
            fitted[i] += v * prod;
        }
    double worst = 0.0;
    for (Mask k = 0; k < (Mask{1} << s.p); ++k) {
        double grad = 0.0;  // (2/n) chi_k^T (chi a - Y)
        for (std::size_t i = 0; i < n; ++i) {
            int prod = 1;
            for (int j = 0; j < s.p; ++j)
                if ((k >> j) & 1U) prod *= ((s.combos[i] >> j) & 1U) ? 1 : -1;
            grad += prod * (fitted[i] - s.outcomes[i]);
        }
        grad *= 2.0 / static_cast<double>(n);
        const double coef = a.get(k);
        const double viol = coef != 0.0 ? std::abs(grad + lambda * (coef > 0 ? 1.0 : -1.0))
                                        : std::max(0.0, std::abs(grad) - lambda);
        worst = std::max(worst, viol);
    }
    return worst;
}

}  // namespace

TEST(Lasso, ZeroOutcomesGiveZeroFit) {
    RegressionSample s{4, {1, 2, 3, 9}, {0, 0, 0, 0}};
    const auto fit = lasso_fit(s, 0.1);
    EXPECT_TRUE(fit.alpha_hat.empty());
    EXPECT_EQ(fit.objective, 0.0);
    EXPECT_TRUE(fit.converged);
}

TEST(Lasso, SoftThresholdOnFullCube) {
    const int p = 6;
    const Mask s0 = 0b101001;
    const auto sample = full_cube_sample(p, SparseFourierVector(p, {{s0, 2.0}}));
    for (double lambda : {0.0, 0.3, 1.0, 3.9, 4.0, 6.0}) {
        const auto fit = lasso_fit(sample, lambda);
        EXPECT_NEAR(fit.alpha_hat.get(s0), std::max(0.0, 2.0 - lambda / 2.0), 1e-10) << lambda;
        for (const auto& [k, v] : fit.alpha_hat.entries())
            if (k != s0) EXPECT_NEAR(v, 0.0, 1e-10);
    }
}

TEST(Lasso, KktConditionsOnRandomInstances) {
    for (unsigned seed = 0; seed < 6; ++seed) {
        const auto alpha = random_sparse(8, 5, seed);
        const auto sample = random_sample(8, 60, alpha, 0.3, 1000 + seed);
        const double lambda = 0.05 + 0.1 * seed;
        const auto fit = lasso_fit(sample, lambda);
        EXPECT_TRUE(fit.converged);
        EXPECT_LE(kkt_violation(sample, fit.alpha_hat, lambda), 1e-6) << "seed " << seed;
    }
}

TEST(Lasso, ObjectiveNonIncreasingAcrossSweeps) {
    const auto alpha = random_sparse(9, 8, 3);
    const auto sample = random_sample(9, 120, alpha, 0.5, 4);
    const auto fit = lasso_fit(sample, 0.02);
    ASSERT_GT(fit.objective_trace.size(), 1U);
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
        EXPECT_LE(fit.objective_trace[i], fit.objective_trace[i - 1] + 1e-12);
}

TEST(Lasso, WarmStartReachesSameOptimum) {
    const auto alpha = random_sparse(8, 6, 21);
    const auto sample = random_sample(8, 150, alpha, 0.2, 22);
    const auto cold = lasso_fit(sample, 0.05);
    const auto warm_from = lasso_fit(sample, 0.5);
    const auto warm = lasso_fit(sample, 0.05, {}, &warm_from.alpha_hat);
    EXPECT_NEAR(cold.objective, warm.objective, 1e-9);
}

TEST(Lasso, RejectsInvalidInput) {
    RegressionSample s{3, {1, 2}, {1.0, 2.0}};
    EXPECT_THROW(lasso_fit(s, -1.0), DataError);
    s.outcomes[1] = std::nan("");
    EXPECT_THROW(lasso_fit(s, 0.1), DataError);
    RegressionSample empty{3, {}, {}};
    EXPECT_THROW(lasso_fit(empty, 0.1), DataError);
}

TEST(Lasso, LambdaMaxZeroesEverything) {
    const auto alpha = random_sparse(7, 4, 9);
    const auto sample = random_sample(7, 80, alpha, 0.1, 10);
    const double top = lasso_lambda_max(sample);
    EXPECT_TRUE(lasso_fit(sample, top * 1.0001).alpha_hat.empty());
    EXPECT_FALSE(lasso_fit(sample, top * 0.9).alpha_hat.empty());
}

TEST(Lasso, DefaultLambdaFormula) {
    EXPECT_DOUBLE_EQ(lasso_lambda_default(640, 10, 1.0), 0.5);
    EXPECT_NEAR(lasso_lambda_default(1280, 10, 1.0), 0.5 / std::sqrt(2.0), 1e-15);
    EXPECT_LT(lasso_lambda_default(100000000, 10, 1.0), 2e-3);
    EXPECT_THROW(lasso_lambda_default(0, 10, 1.0), DataError);
}

TEST(LassoCv, SingleLambdaGrid) {
    const auto sample = random_sample(6, 40, random_sparse(6, 3, 1), 0.2, 2);
    const std::vector<double> grid{0.37};
    EXPECT_EQ(lasso_cv(sample, grid, 5, 0).best_lambda, 0.37);
}

TEST(LassoCv, PrefersSmallPenaltyOnNoiselessSignal) {
    const auto sample = random_sample(7, 200, random_sparse(7, 4, 5), 0.0, 6);
    const std::vector<double> grid{1e3, 1e-4};
    const auto cv = lasso_cv(sample, grid, 5, 1);
    EXPECT_EQ(cv.best_lambda, 1e-4);
    EXPECT_LT(cv.mean_errors[1], cv.mean_errors[0]);
}

TEST(LassoCv, DeterministicAndValidated) {
    const auto sample = random_sample(6, 50, random_sparse(6, 3, 7), 0.5, 8);
    const std::vector<double> grid{0.5, 0.1, 0.01};
    const auto a = lasso_cv(sample, grid, 4, 42);
    const auto b = lasso_cv(sample, grid, 4, 42);
    EXPECT_EQ(a.fold_errors, b.fold_errors);
    EXPECT_EQ(fold_assignment(50, 4, 42), fold_assignment(50, 4, 42));
    EXPECT_NE(fold_assignment(50, 4, 42), fold_assignment(50, 4, 43));
    EXPECT_THROW(lasso_cv(sample, std::vector<double>{}, 4, 0), DataError);
    EXPECT_THROW(lasso_cv(sample, grid, 1, 0), DataError);
}

TEST(LassoCv, TiesBreakTowardLargerLambda) {
    RegressionSample s{3, {0, 1, 2, 3, 4, 5}, {0, 0, 0, 0, 0, 0}};
    const std::vector<double> grid{0.1, 0.5, 0.2};
    EXPECT_EQ(lasso_cv(s, grid, 3, 0).best_lambda, 0.5);
}

TEST(SelectRidge, ClosedFormOnFullCube) {
    const int p = 5;
    const Mask s0 = 0b01101;
    const auto sample = full_cube_sample(p, SparseFourierVector(p, {{s0, 2.0}}));
    const auto fit = select_ridge_fit(sample, 0.5);
    ASSERT_EQ(fit.support, std::vector<Mask>{s0});
    const double n = 32.0;
    EXPECT_NEAR(fit.coeffs(0), 2.0 * n * n / (n * n + 1.0), 1e-12);
    EXPECT_NEAR(fit.gram(0, 0), 1.0, 1e-15);
}

TEST(SelectRidge, ZeroOutcomesGiveEmptySupport) {
    RegressionSample s{4, {1, 5, 7, 9, 12}, {0, 0, 0, 0, 0}};
    const auto fit = select_ridge_fit(s, 0.1);
    EXPECT_TRUE(fit.support.empty());
    const auto pi = sr_predict_interval(fit, Mask{3});
    EXPECT_EQ(pi.point, 0.0);
    EXPECT_EQ(pi.std_err, 0.0);
}

TEST(SelectRidge, GramIsIdentityOnRegularFraction) {
    // Half-fraction {x : chi_[p](x) = +1}: characters of degree <= 2 remain
    // orthogonal because their pairwise products never equal chi_[p].
    const int p = 8;
    RegressionSample s{p, {}, {}};
    SparseFourierVector alpha(p, {{0, 1.0}, {0b1, 1.5}, {0b110, -2.0}, {0b10000000, 1.2}});
    for (Mask x = 0; x < 256; ++x)
        if (character_sign(low_bits(p), x) == 1) {
            s.combos.push_back(x);
            s.outcomes.push_back(alpha.evaluate_mask(x));
        }
    // On this fraction chi_S and chi_{[p] \ S} coincide up to sign, so the
    // support is fixed rather than selected.
    const auto fit = ridge_on_support(s, alpha.support());
    EXPECT_TRUE(fit.gram.isApprox(Eigen::MatrixXd::Identity(4, 4), 1e-14));
    // K = I and k = 4: std_err = sqrt(noise_var * 4 / n).
    const auto pi = sr_predict_interval(fit, Mask{77});
    EXPECT_NEAR(pi.std_err, std::sqrt(fit.noise_var * 4.0 / 128.0), 1e-15);
}

TEST(SelectRidge, NoiselessShrinkageBound) {
    const int p = 7;
    const auto alpha = random_sparse(p, 5, 31);
    const auto sample = full_cube_sample(p, alpha);
    const auto fit = ridge_on_support(sample, alpha.support());
    const double n = 128.0;
    for (Mask x = 0; x < 128; ++x) {
        EXPECT_LE(std::abs(fit.predict_mask(x) - alpha.evaluate_mask(x)), 2.0 / n);
        const auto pi = sr_predict_interval(fit, x);
        EXPECT_EQ(pi.point, fit.as_sparse().evaluate_mask(x));
    }
}

TEST(SelectRidge, ZeroNoiseGivesZeroWidth) {
    const int p = 6;
    const auto alpha = random_sparse(p, 3, 2);
    auto fit = ridge_on_support(full_cube_sample(p, alpha), alpha.support());
    fit.noise_var = 0.0;
    const auto pi = sr_predict_interval(fit, Mask{9}, 0.9);
    EXPECT_EQ(pi.half_width(), 0.0);
    EXPECT_EQ(pi.lower(), pi.upper());
    EXPECT_THROW(sr_predict_interval(fit, Mask{9}, 1.0), DataError);
}

TEST(SelectRidge, CoverageOnBalancedDesign) {
    // Full-cube design, Gaussian noise sigma = 1; nominal 95% intervals.
    const int p = 6;
    const auto alpha = random_sparse(p, 4, 77, 1.5, 2.5);
    const auto truth = full_cube_sample(p, alpha);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd;
    int covered = 0, total = 0;
    const std::vector<Mask> queries{0, 5, 17, 42, 63};
    for (int rep = 0; rep < 500; ++rep) {
        auto s = truth;
        for (double& y : s.outcomes) y += nd(rng);
        const auto fit = select_ridge_fit(s, lasso_lambda_default(s.size(), p, 1.0));
        for (Mask q : queries) {
            covered += sr_predict_interval(fit, q).covers(alpha.evaluate_mask(q));
            ++total;
        }
    }
    const double coverage = static_cast<double>(covered) / total;
    EXPECT_GE(coverage, 0.93);
    EXPECT_LE(coverage, 0.97);
}

TEST(SelectRidge, ColumnImbalanceChecker) {
    std::vector<Mask> cube(64);
    for (Mask x = 0; x < 64; ++x) cube[x] = x;
    EXPECT_EQ(design_column_imbalance(6, cube), 0.0);
    const std::vector<Mask> single{5};
    EXPECT_EQ(design_column_imbalance(6, single), 1.0);
}
