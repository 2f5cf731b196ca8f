#pragma once

// Rankings of p items run through the combination estimator by way of the
// pairwise-comparison encoding: p(p-1)/2 pseudo-interventions, bit k set
// when the k-th pair (in lexicographic order) is inverted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "synthcombo/errors.hpp"
#include "synthcombo/estimator.hpp"
#include "synthcombo/hypercube.hpp"
#include "synthcombo/random.hpp"
#include "synthcombo/simdata.hpp"

namespace synthcombo {

inline constexpr int kMaxPermutationItems = 8;  // 28 pairs fit in a Mask

inline Mask permutation_combo(const Permutation& t) {
    detail::require(t.p() <= kMaxPermutationItems,
                    "permutation of " + std::to_string(t.p()) + " items needs " + std::to_string(pair_count(t.p())) +
                        " pair bits; at most " + std::to_string(kMaxInterventions) + " are supported");
    const auto v = encode_permutation(t);
    Mask m = 0;
    for (std::size_t k = 0; k < v.size(); ++k)
        if (v[k] > 0) m |= Mask{1} << k;
    return m;
}

struct PermPanel {
    int p = 2;
    std::vector<std::vector<Permutation>> perms;
    std::vector<std::vector<double>> outcomes;

    PermPanel() = default;
    PermPanel(int p_, std::size_t n_units) : p(p_), perms(n_units), outcomes(n_units) {}

    [[nodiscard]] int n_units() const { return static_cast<int>(perms.size()); }

    void add(int u, Permutation t, double y) {
        detail::require(u >= 0 && u < n_units(), "ranking panel: unit " + std::to_string(u) + " out of range");
        detail::require(t.p() == p, "ranking panel: ranking has " + std::to_string(t.p()) + " items, expected " +
                                        std::to_string(p));
        perms[static_cast<std::size_t>(u)].push_back(std::move(t));
        outcomes[static_cast<std::size_t>(u)].push_back(y);
    }

    void validate() const {
        detail::require(p >= 2 && p <= kMaxPermutationItems,
                        "ranking panel: p = " + std::to_string(p) + " outside [2, " +
                            std::to_string(kMaxPermutationItems) + "]");
        detail::require(perms.size() == outcomes.size(), "ranking panel: unit count mismatch");
        for (std::size_t u = 0; u < perms.size(); ++u) {
            detail::require(perms[u].size() == outcomes[u].size(),
                            "ranking panel: unit " + std::to_string(u) + " length mismatch");
            for (std::size_t i = 0; i < perms[u].size(); ++i) {
                detail::require(perms[u][i].p() == p, "ranking panel: unit " + std::to_string(u) + " has a ranking of the wrong length");
                detail::require(std::isfinite(outcomes[u][i]),
                                "ranking panel: unit " + std::to_string(u) + " has a non-finite outcome");
            }
        }
    }
};

inline Panel perm_to_combination_panel(const PermPanel& pp) {
    pp.validate();
    Panel out(pair_count(pp.p), pp.perms.size());
    for (int u = 0; u < pp.n_units(); ++u) {
        const auto& ps = pp.perms[static_cast<std::size_t>(u)];
        for (std::size_t i = 0; i < ps.size(); ++i)
            out.add(u, permutation_combo(ps[i]), pp.outcomes[static_cast<std::size_t>(u)][i]);
    }
    return out;
}

struct PermModel {
    int p = 2;
    FittedSynthCombo model;

    [[nodiscard]] double predict(int unit, const Permutation& t) const {
        detail::require(t.p() == p, "query ranking has " + std::to_string(t.p()) + " items, model has " + std::to_string(p));
        return model.predict(unit, permutation_combo(t));
    }
};

inline PermModel perm_fit(const PermPanel& pp, const EstimatorConfig& cfg) {
    return PermModel{pp.p, fit(perm_to_combination_panel(pp), cfg)};
}

inline double perm_predict(const PermModel& m, int unit, const Permutation& t) { return m.predict(unit, t); }

/// Uniform over S_p (Fisher-Yates on the identity), which is not the same as
/// uniform over the hypercube: only p! of the 2^{p(p-1)/2} points are images.
inline Permutation uniform_permutation(int p, Rng& rng) {
    auto r = Permutation::identity(p).ranks;
    shuffle_in_place(r, rng);
    return Permutation(std::move(r));
}

/// All p! rankings in lexicographic order of the rank vector.
inline std::vector<Permutation> all_permutations(int p) {
    detail::require(p >= 1 && p <= kMaxPermutationItems, "all_permutations: p outside [1, 8]");
    std::vector<Permutation> out;
    auto r = Permutation::identity(p).ranks;
    do out.emplace_back(r);
    while (std::next_permutation(r.begin(), r.end()));
    return out;
}

/// Observes each unit under uniformly drawn rankings. `truth` lives on the
/// p(p-1)/2-dimensional pair cube; noise is N(0, sigma_u^2).
inline PermPanel simulate_rankings(const GroundTruth& truth, int p, const std::vector<std::size_t>& counts,
                                   std::uint64_t seed) {
    detail::require(truth.p == pair_count(p), "ranking truth must be over p(p-1)/2 pair coordinates");
    detail::require(counts.size() == truth.alphas.size(), "ranking simulation: one count per unit required");
    PermPanel pp(p, counts.size());
    for (std::size_t u = 0; u < counts.size(); ++u) {
        Rng pick = make_rng(seed, {stream::kPattern, u});
        Rng noise = make_rng(seed, {stream::kNoise, u});
        for (std::size_t i = 0; i < counts[u]; ++i) {
            auto t = uniform_permutation(p, pick);
            const double y = truth.expected(static_cast<int>(u), permutation_combo(t)) +
                             truth.sigmas[u] * standard_normal(noise);
            pp.add(static_cast<int>(u), std::move(t), y);
        }
    }
    return pp;
}

}  // namespace synthcombo
