#include <gtest/gtest.h>

#include <bit>
#include <set>

#include "synthcombo/perm_pipeline.hpp"

using namespace synthcombo;

namespace {

// Pair characters that never close a triangle of items, so the coefficients
// stay identifiable on the p! image points.
SparseFourierVector ranking_alpha(double scale) {
    return SparseFourierVector(10, {{0, 1.0 * scale},
                                    {1U << 0, 0.8 * scale},
                                    {1U << 7, -0.6 * scale},
                                    {(1U << 0) | (1U << 7), 0.5 * scale},
                                    {1U << 9, 0.3 * scale}});
}

EstimatorConfig exact_config() {
    EstimatorConfig cfg;
    cfg.horizontal = Horizontal::lasso;
    cfg.lambda = 1e-10;
    cfg.lasso.tol = 1e-14;
    cfg.lasso.max_sweeps = 100000;
    return cfg;
}

}  // namespace

TEST(PermEncoding, IdentityReverseAndAdjacentSwaps) {
    for (int p = 2; p <= 6; ++p) {
        EXPECT_EQ(permutation_combo(Permutation::identity(p)), 0U);
        auto rev = Permutation::identity(p).ranks;
        std::reverse(rev.begin(), rev.end());
        EXPECT_EQ(permutation_combo(Permutation(rev)), low_bits(pair_count(p)));
        for (const auto& t : all_permutations(p)) {
            const Mask base = permutation_combo(t);
            for (int k = 1; k < p; ++k) {
                // Exchange the items ranked k and k + 1.
                auto r = t.ranks;
                for (int& v : r) v = v == k ? k + 1 : (v == k + 1 ? k : v);
                EXPECT_EQ(std::popcount(base ^ permutation_combo(Permutation(r))), 1);
            }
        }
    }
}

TEST(PermEncoding, InjectiveExhaustively) {
    for (int p = 1; p <= 6; ++p) {
        std::set<Mask> seen;
        const auto all = all_permutations(p);
        for (const auto& t : all) seen.insert(permutation_combo(t));
        EXPECT_EQ(seen.size(), all.size());
    }
    EXPECT_EQ(all_permutations(5).size(), 120U);
    EXPECT_THROW((void)permutation_combo(Permutation::identity(9)), DataError);
}

TEST(PermEncoding, ConvertedPanelMatchesEncoding) {
    PermPanel pp(4, 2);
    pp.add(0, Permutation({2, 1, 3, 4}), 1.5);
    pp.add(1, Permutation::identity(4), -2.0);
    EXPECT_THROW(pp.add(1, Permutation::identity(3), 0.0), DataError);
    const Panel panel = perm_to_combination_panel(pp);
    EXPECT_EQ(panel.p, 6);
    EXPECT_EQ(panel.combos[0], std::vector<Mask>{1U});
    EXPECT_EQ(panel.combos[1], std::vector<Mask>{0U});
    EXPECT_EQ(panel.outcomes[0], std::vector<double>{1.5});
    PermPanel big(9, 1);
    EXPECT_THROW((void)perm_to_combination_panel(big), DataError);
}

TEST(PermSampler, UniformOverRankings) {
    Rng rng = make_rng(3, {stream::kPattern});
    std::vector<int> counts(6, 0);
    const auto all = all_permutations(3);
    for (int i = 0; i < 6000; ++i) {
        const auto t = uniform_permutation(3, rng);
        ++counts[static_cast<std::size_t>(std::find(all.begin(), all.end(), t) - all.begin())];
    }
    for (int c : counts) EXPECT_NEAR(c / 6000.0, 1.0 / 6.0, 0.025);
}

TEST(PermFit, FullEnumerationLassoIsExact) {
    const auto alpha = ranking_alpha(1.0);
    std::vector<Mask> combos;
    std::vector<double> ys;
    for (const auto& t : all_permutations(5)) {
        combos.push_back(permutation_combo(t));
        ys.push_back(alpha.evaluate_mask(combos.back()));
    }
    const auto cfg = exact_config();
    const auto fit = lasso_fit(RegressionSample{10, combos, ys}, cfg.lambda, cfg.lasso);
    for (Mask k = 0; k < 1024; ++k) EXPECT_NEAR(fit.alpha_hat.get(k), alpha.get(k), 1e-8);
}

TEST(PermFit, DonorAndTransferPredictionsAreExact) {
    PermPanel pp(5, 2);
    const auto a0 = ranking_alpha(1.0), a1 = ranking_alpha(2.0);
    const auto all = all_permutations(5);
    for (const auto& t : all) pp.add(0, t, a0.evaluate_mask(permutation_combo(t)));
    for (std::size_t i = 0; i < all.size(); i += 6) pp.add(1, all[i], a1.evaluate_mask(permutation_combo(all[i])));
    const auto model = perm_fit(pp, exact_config());
    EXPECT_EQ(model.model.donor_ids, std::vector<int>{0});
    for (const auto& t : all) {
        EXPECT_NEAR(perm_predict(model, 0, t), a0.evaluate_mask(permutation_combo(t)), 1e-8);
        EXPECT_NEAR(perm_predict(model, 1, t), a1.evaluate_mask(permutation_combo(t)), 1e-8);
    }
    EXPECT_THROW((void)model.predict(0, Permutation::identity(4)), DataError);
}

TEST(PermFit, IdentificationOracleOnEncodedData) {
    const std::vector<SparseFourierVector> alphas{ranking_alpha(1.0), ranking_alpha(-0.5)};
    std::vector<Mask> full, few;
    for (const auto& t : all_permutations(5)) full.push_back(permutation_combo(t));
    few = {full[0], full[1]};
    const std::vector<std::vector<Mask>> observed{full, few};
    for (Mask q : {full[7], full[63], full[119]}) {
        const auto a = identification_oracle(alphas, observed, 0, q);
        ASSERT_TRUE(a.feasible);
        EXPECT_NEAR(a.value, alphas[0].evaluate_mask(q), 1e-8);
        const auto b = identification_oracle(alphas, observed, 1, q);
        ASSERT_TRUE(b.feasible);
        EXPECT_NEAR(b.value, alphas[1].evaluate_mask(q), 1e-8);
    }
}

TEST(PermFit, NonDonorErrorShrinksWithDonorData) {
    SimConfig sc;
    sc.n_units = 10;
    sc.p = pair_count(5);
    sc.r = 2;
    sc.base_nnz = 3;
    sc.snr = 4.0;
    const auto all = all_permutations(5);
    std::vector<double> mse;
    for (std::size_t donor_obs : {60U, 480U}) {
        double total = 0.0;
        for (std::uint64_t seed = 0; seed < 2; ++seed) {
            sc.seed = seed;
            const auto truth = gen_truth(sc);
            std::vector<std::size_t> counts(10, donor_obs / 3);
            for (int u = 0; u < 5; ++u) counts[static_cast<std::size_t>(u)] = donor_obs;
            const auto pp = simulate_rankings(truth, 5, counts, seed);
            EstimatorConfig cfg;
            cfg.horizontal = Horizontal::lasso;
            cfg.min_obs = static_cast<int>(donor_obs);
            cfg.vertical_threshold = std::numeric_limits<double>::infinity();
            cfg.seed = seed;
            const auto model = perm_fit(pp, cfg);
            for (int u = 5; u < 10; ++u)
                for (const auto& t : all) {
                    const double d = model.predict(u, t) - truth.expected(u, permutation_combo(t));
                    total += d * d / (2.0 * 5.0 * 120.0);
                }
        }
        mse.push_back(total);
    }
    EXPECT_LT(mse[1], 0.5 * mse[0]);
}
