#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "synthcombo/estimator.hpp"

using namespace synthcombo;

namespace {

SparseFourierVector random_sparse(int p, int s, std::mt19937_64& rng) {
    std::uniform_int_distribution<Mask> pick(0, low_bits(p));
    std::normal_distribution<double> nd;
    SparseFourierVector a(p);
    while (static_cast<int>(a.nnz()) < s) a.set(pick(rng), nd(rng) + (nd(rng) > 0 ? 1.0 : -1.0));
    return a;
}

std::vector<Mask> random_combos(int p, std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<Mask> pick(0, low_bits(p));
    std::vector<Mask> out(n);
    for (auto& c : out) c = pick(rng);
    return out;
}

std::vector<Mask> full_cube(int p) {
    std::vector<Mask> out;
    for (Mask x = 0; x <= low_bits(p); ++x) out.push_back(x);
    return out;
}

void observe(Panel& panel, int u, const SparseFourierVector& a, const std::vector<Mask>& combos, double sigma,
             std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, sigma);
    for (Mask c : combos) panel.add(u, c, a.evaluate_mask(c) + (sigma > 0 ? nd(rng) : 0.0));
}

EstimatorConfig exact_config() {
    EstimatorConfig cfg;
    cfg.lambda = 1e-9;
    cfg.lasso.tol = 1e-16;
    cfg.lasso.max_sweeps = 5000;
    return cfg;
}

// Two types at p = 6: four full-cube donors (two per type, scaled), and
// non-donors mixing the types observed on 12 random combinations.
struct TwoTypeInstance {
    Panel panel;
    std::vector<SparseFourierVector> alphas;
};

TwoTypeInstance two_type_instance(unsigned seed) {
    std::mt19937_64 rng(seed);
    const int p = 6;
    const auto t1 = random_sparse(p, 4, rng);
    const auto t2 = random_sparse(p, 4, rng);
    auto scaled = [&](double a, double b) {
        SparseFourierVector v(p);
        for (const auto& [k, x] : t1.entries()) v.add(k, a * x);
        for (const auto& [k, x] : t2.entries()) v.add(k, b * x);
        return v;
    };
    TwoTypeInstance inst;
    inst.alphas = {scaled(1, 0), scaled(0, 1), scaled(2, 0), scaled(0, 0.5), scaled(0.3, 0.7), scaled(1.5, -0.5),
                   scaled(-1, 2)};
    inst.panel = Panel(p, inst.alphas.size());
    for (int u = 0; u < 4; ++u) observe(inst.panel, u, inst.alphas[static_cast<std::size_t>(u)], full_cube(p), 0.0, rng);
    for (int u = 4; u < 7; ++u)
        observe(inst.panel, u, inst.alphas[static_cast<std::size_t>(u)], random_combos(p, 12, rng), 0.0, rng);
    return inst;
}

}  // namespace

TEST(Panel, ValidationAndParsing) {
    Panel panel(3, 2);
    panel.add(0, 7, 1.0);
    EXPECT_NO_THROW(panel.validate());
    panel.combos[1].push_back(8);
    panel.outcomes[1].push_back(0.0);
    EXPECT_THROW(panel.validate(), DataError);
    EXPECT_THROW(panel.add(2, 0, 1.0), DataError);
    EXPECT_EQ(parse_horizontal("select-ridge"), Horizontal::select_ridge);
    EXPECT_THROW(parse_horizontal("forest"), DataError);
}

TEST(DonorSelect, MinObsAndThreshold) {
    std::mt19937_64 rng(1);
    const int p = 6;
    Panel panel(p, 3);
    const auto a = random_sparse(p, 3, rng);
    observe(panel, 0, a, random_combos(p, 60, rng), 0.0, rng);
    observe(panel, 1, a, random_combos(p, 60, rng), 0.0, rng);
    observe(panel, 2, a, random_combos(p, 4, rng), 0.0, rng);
    EstimatorConfig cfg;
    cfg.min_obs = 10;
    const auto sel = donor_select(panel, cfg);
    EXPECT_EQ(sel.donors, (std::vector<int>{0, 1}));
    EXPECT_TRUE(std::isnan(sel.cv_error[2]));

    cfg.donor_threshold = 1e-30;
    EXPECT_THROW(donor_select(panel, cfg), DataError);

    cfg.min_obs = 0;  // mean count is 41.3, so unit 2 stays out
    cfg.donor_threshold = std::numeric_limits<double>::infinity();
    EXPECT_EQ(donor_select(panel, cfg).min_obs, 42);
}

TEST(DonorSelect, NoiselessSparseUnitQualifies) {
    const int p = 8, s = 4;
    int included = 0;
    for (unsigned seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(40 + seed);
        Panel panel(p, 1);
        observe(panel, 0, random_sparse(p, s, rng), random_combos(p, 8 * s * p, rng), 0.0, rng);
        EstimatorConfig cfg;
        cfg.donor_threshold = 1e-2;
        cfg.seed = seed;
        try {
            included += static_cast<int>(donor_select(panel, cfg).donors.size());
        } catch (const DataError&) {
        }
    }
    EXPECT_EQ(included, 5);
}

TEST(Fit, AllDonorsMeansNoTransfer) {
    std::mt19937_64 rng(2);
    const int p = 5;
    Panel panel(p, 3);
    for (int u = 0; u < 3; ++u) observe(panel, u, random_sparse(p, 3, rng), full_cube(p), 0.0, rng);
    const auto model = fit(panel, exact_config());
    EXPECT_EQ(model.donor_ids.size(), 3U);
    EXPECT_TRUE(model.transferred_units().empty());
    EXPECT_TRUE(model.rejected_units().empty());
}

TEST(Fit, DonorPredictionDelegatesToLasso) {
    std::mt19937_64 rng(3);
    const int p = 6;
    Panel panel(p, 1);
    observe(panel, 0, random_sparse(p, 5, rng), random_combos(p, 80, rng), 0.3, rng);
    EstimatorConfig cfg;
    cfg.lambda = 0.05;
    const auto model = fit(panel, cfg);
    const auto direct = lasso_fit(panel.unit_sample(0), 0.05, kPipelineLasso);
    for (Mask x = 0; x < 64; ++x) EXPECT_EQ(model.predict(0, x), direct.alpha_hat.evaluate_mask(x));
}

TEST(Fit, NoiselessTwoTypeRecoveryIsExact) {
    for (unsigned seed = 0; seed < 3; ++seed) {
        const auto inst = two_type_instance(100 + seed);
        auto cfg = exact_config();
        cfg.min_obs = 64;
        const auto model = fit(inst.panel, cfg);
        ASSERT_EQ(model.donor_ids, (std::vector<int>{0, 1, 2, 3}));
        EXPECT_EQ(model.transferred_units(), (std::vector<int>{4, 5, 6}));
        for (int u = 0; u < 7; ++u)
            for (Mask x = 0; x < 64; ++x)
                ASSERT_NEAR(model.predict(u, x), inst.alphas[static_cast<std::size_t>(u)].evaluate_mask(x), 1e-6)
                    << "unit " << u << " combo " << x;
    }
}

TEST(Fit, UnitOutsideDonorSpanIsRejected) {
    auto inst = two_type_instance(7);
    std::mt19937_64 rng(77);
    // A fresh type the donors cannot express, observed on 20 combinations.
    SparseFourierVector other(6, {{0b101010, 3.0}, {0b010101, -2.0}, {0b111000, 2.5}});
    inst.panel.combos.emplace_back();
    inst.panel.outcomes.emplace_back();
    observe(inst.panel, 7, other, random_combos(6, 20, rng), 0.0, rng);
    auto cfg = exact_config();
    cfg.min_obs = 64;
    const auto model = fit(inst.panel, cfg);
    EXPECT_EQ(model.rejected_units(), (std::vector<int>{7}));
    EXPECT_THROW((void)model.predict(7, 0), DataError);
    EXPECT_GT(model.transfers[7].cv_error, model.vertical_threshold);
}

TEST(Fit, DeterministicAndIsolated) {
    std::mt19937_64 rng(5);
    const int p = 7;
    Panel panel(p, 6);
    const auto a = random_sparse(p, 4, rng);
    const auto b = random_sparse(p, 4, rng);
    for (int u = 0; u < 3; ++u) observe(panel, u, u % 2 ? a : b, random_combos(p, 120, rng), 0.2, rng);
    for (int u = 3; u < 6; ++u) observe(panel, u, u % 2 ? a : b, random_combos(p, 20, rng), 0.2, rng);
    EstimatorConfig cfg;
    cfg.seed = 9;
    cfg.vertical_threshold = 1e9;
    const auto m1 = fit(panel, cfg);
    cfg.threads = 3;
    const auto m2 = fit(panel, cfg);
    for (int u = 0; u < 6; ++u)
        for (Mask x = 0; x < 128; x += 5) ASSERT_EQ(m1.predict(u, x), m2.predict(u, x));

    // Changing non-donor data leaves donor models untouched.
    Panel other = panel;
    for (double& y : other.outcomes[4]) y += 1.0;
    const auto m3 = fit(other, cfg);
    ASSERT_EQ(m1.donor_ids, m3.donor_ids);
    for (int u : m1.donor_ids)
        for (Mask x = 0; x < 128; x += 3) ASSERT_EQ(m1.predict(u, x), m3.predict(u, x));
}

TEST(Intervals, RequireSelectRidge) {
    const auto inst = two_type_instance(11);
    auto cfg = exact_config();
    cfg.min_obs = 64;
    const auto model = fit(inst.panel, cfg);
    EXPECT_THROW((void)model.predict_interval(0, 3), DataError);
}

TEST(Intervals, OneHotZeroNoiseAndMonotone) {
    std::mt19937_64 rng(12);
    const int p = 6;
    Panel panel(p, 3);
    const auto a = random_sparse(p, 3, rng);
    const auto b = random_sparse(p, 3, rng);
    observe(panel, 0, a, full_cube(p), 0.5, rng);
    observe(panel, 1, b, full_cube(p), 0.5, rng);
    observe(panel, 2, a, random_combos(p, 15, rng), 0.5, rng);
    EstimatorConfig cfg;
    cfg.horizontal = Horizontal::select_ridge;
    cfg.min_obs = 64;
    cfg.vertical_threshold = 1e9;
    auto model = fit(panel, cfg);
    // Force one-hot weights on donor 0.
    model.transfers[2].weights.weights = Eigen::Vector2d(1.0, 0.0);
    for (Mask x = 0; x < 64; x += 7) {
        const auto d = model.predict_interval(0, x);
        const auto t = model.predict_interval(2, x);
        EXPECT_DOUBLE_EQ(t.point, d.point);
        EXPECT_DOUBLE_EQ(t.std_err, d.std_err);
    }
    model.transfers[2].weights.weights = Eigen::Vector2d(0.7, -0.4);
    const double base = model.predict_interval(2, 9).std_err;
    model.donors[1].sr->noise_var *= 2.0;
    EXPECT_GE(model.predict_interval(2, 9).std_err, base);
    for (auto& d : model.donors) d.sr->noise_var = 0.0;
    EXPECT_EQ(model.predict_interval(2, 9).half_width(), 0.0);
    EXPECT_EQ(model.predict_interval(0, 9).half_width(), 0.0);
}

TEST(Identification, FullCubeAlwaysFeasible) {
    std::mt19937_64 rng(13);
    const auto a = random_sparse(5, 4, rng);
    for (Mask q = 0; q < 32; ++q) {
        const auto r = identification_oracle({a}, {full_cube(5)}, 0, q);
        ASSERT_TRUE(r.feasible && r.horizontal);
        ASSERT_NEAR(r.value, a.evaluate_mask(q), 1e-10);
    }
}

TEST(Identification, RandomRankTwoReconstruction) {
    for (unsigned seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(200 + seed);
        const int p = 6;
        const auto t1 = random_sparse(p, 3, rng);
        const auto t2 = random_sparse(p, 3, rng);
        std::vector<SparseFourierVector> alphas;
        std::vector<std::vector<Mask>> observed;
        for (int u = 0; u < 5; ++u) {
            SparseFourierVector v(p);
            const double c1 = u == 1 ? 0.0 : 1.0 + u, c2 = u == 0 ? 0.0 : 0.5 * u - 1.0;
            for (const auto& [k, x] : t1.entries()) v.add(k, c1 * x);
            for (const auto& [k, x] : t2.entries()) v.add(k, c2 * x);
            alphas.push_back(v);
            observed.push_back(u < 2 ? random_combos(p, 40, rng) : random_combos(p, 2, rng));
        }
        for (int u = 0; u < 5; ++u)
            for (Mask q = 0; q < 64; q += 3) {
                const auto r = identification_oracle(alphas, observed, u, q);
                if (u < 2) ASSERT_TRUE(r.feasible);
                if (r.feasible) ASSERT_NEAR(r.value, alphas[static_cast<std::size_t>(u)].evaluate_mask(q), 1e-8);
            }
    }
}

TEST(Identification, InfeasibleWhenNothingIdentifies) {
    SparseFourierVector a(3, {{0b001, 1.0}, {0b010, 1.0}});
    const auto r = identification_oracle({a}, {{0b000}}, 0, 0b001);
    EXPECT_FALSE(r.feasible);
    EXPECT_FALSE(r.reason.empty());
}
