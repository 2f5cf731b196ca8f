#pragma once

// Synthetic panels: r sparse base coefficient vectors, every other unit a
// Dirichlet mixture of them, Gaussian noise at a target signal-to-noise
// ratio, and either a confounded, a uniform or a designed observation
// pattern.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthcombo/design.hpp"
#include "synthcombo/errors.hpp"
#include "synthcombo/estimator.hpp"
#include "synthcombo/hypercube.hpp"
#include "synthcombo/random.hpp"

namespace synthcombo {

enum class Pattern { confounded, design, uniform };

inline Pattern parse_pattern(const std::string& s) {
    if (s == "confounded" || s == "observational") return Pattern::confounded;
    if (s == "design") return Pattern::design;
    if (s == "uniform") return Pattern::uniform;
    detail::fail_data("unknown observation pattern '" + s + "' (expected confounded, design or uniform)");
}

inline std::string to_string(Pattern p) {
    switch (p) {
        case Pattern::confounded: return "confounded";
        case Pattern::design: return "design";
        case Pattern::uniform: return "uniform";
    }
    return "confounded";
}

struct SimConfig {
    int n_units = 100;
    int p = 10;
    int r = 3;
    double snr = 1.0;
    bool per_unit_snr = false;
    Pattern pattern = Pattern::confounded;
    int base_nnz = 0;          // 0: ceil(p^{3/2})
    int n_donors = 0;          // 0: 2r
    int donor_obs = 0;         // 0: ceil(2 p^{5/2})
    int nondonor_obs = 0;      // 0: 2 r^4
    std::uint64_t seed = 0;

    [[nodiscard]] int resolved_base_nnz() const {
        return base_nnz > 0 ? base_nnz : static_cast<int>(std::ceil(std::pow(static_cast<double>(p), 1.5) - 1e-9));
    }
    [[nodiscard]] int resolved_donors() const { return n_donors > 0 ? n_donors : 2 * r; }
    [[nodiscard]] int resolved_donor_obs() const {
        return donor_obs > 0 ? donor_obs : static_cast<int>(std::ceil(2.0 * std::pow(static_cast<double>(p), 2.5) - 1e-9));
    }
    [[nodiscard]] int resolved_nondonor_obs() const { return nondonor_obs > 0 ? nondonor_obs : 2 * r * r * r * r; }

    void validate_truth() const {
        detail::require(p >= 1 && p <= 20, "simulate: p outside [1, 20]");
        detail::require(r >= 1 && r <= n_units, "simulate: need 1 <= r <= N");
        detail::require(snr > 0.0 && std::isfinite(snr), "simulate: snr must be > 0");
        const std::uint64_t cube = std::uint64_t{1} << p;
        detail::require(static_cast<std::uint64_t>(resolved_base_nnz()) * static_cast<std::uint64_t>(r) <= cube,
                        "simulate: r * base_nnz exceeds 2^p");
    }

    void validate() const {
        validate_truth();
        const std::uint64_t cube = std::uint64_t{1} << p;
        detail::require(resolved_donors() <= n_units, "simulate: more donors than units");
        detail::require(static_cast<std::uint64_t>(resolved_donor_obs()) <= cube, "simulate: donor observations exceed 2^p");
        detail::require(static_cast<std::uint64_t>(resolved_nondonor_obs()) <= cube,
                        "simulate: non-donor observations exceed 2^p");
    }
};

struct GroundTruth {
    int p = 1;
    int r = 1;
    int s = 0;  // largest per-unit support
    std::vector<SparseFourierVector> alphas;
    std::vector<double> sigmas;  // per-unit noise std

    [[nodiscard]] double expected(int unit, Mask combo) const {
        return alphas[static_cast<std::size_t>(unit)].evaluate_mask(combo);
    }
};

/// Base units 0..r-1 get base_nnz random nonzeros with N(0,1) values; unit n
/// >= r is sum_i B_{n,i} alpha_i with B_n ~ Dirichlet(1). Noise variance is
/// the mean signal variance over units divided by snr (or per unit).
inline GroundTruth gen_truth(const SimConfig& cfg) {
    cfg.validate_truth();
    GroundTruth t;
    t.p = cfg.p;
    t.r = cfg.r;
    const std::uint64_t cube = std::uint64_t{1} << cfg.p;
    const auto nnz = static_cast<std::uint64_t>(cfg.resolved_base_nnz());
    for (int i = 0; i < cfg.r; ++i) {
        Rng rng = make_rng(cfg.seed, {stream::kTruth, 1, static_cast<std::uint64_t>(i)});
        SparseFourierVector a(cfg.p);
        for (auto k : sample_without_replacement(cube, nnz, rng)) {
            double v = 0.0;
            while (v == 0.0) v = standard_normal(rng);
            a.set(static_cast<Mask>(k), v);
        }
        t.alphas.push_back(std::move(a));
    }
    for (int n = cfg.r; n < cfg.n_units; ++n) {
        Rng rng = make_rng(cfg.seed, {stream::kTruth, 2, static_cast<std::uint64_t>(n)});
        const auto b = dirichlet_flat(static_cast<std::size_t>(cfg.r), rng);
        SparseFourierVector a(cfg.p);
        for (int i = 0; i < cfg.r; ++i)
            for (const auto& [k, v] : t.alphas[static_cast<std::size_t>(i)].entries()) a.add(k, b[static_cast<std::size_t>(i)] * v);
        t.alphas.push_back(std::move(a));
    }
    double total = 0.0;
    for (const auto& a : t.alphas) {
        total += a.variance();
        t.s = std::max(t.s, static_cast<int>(a.nnz()));
    }
    const double global = std::sqrt(total / static_cast<double>(t.alphas.size()) / cfg.snr);
    for (const auto& a : t.alphas) t.sigmas.push_back(cfg.per_unit_snr ? std::sqrt(a.variance() / cfg.snr) : global);
    return t;
}

/// Expected outcome of every combination for one unit (p <= 20).
inline std::vector<double> expected_cube(const GroundTruth& t, int unit) {
    return evaluate_cube(t.alphas[static_cast<std::size_t>(unit)]);
}

/// `count` distinct combinations drawn successively with probability
/// proportional to |E[Y]|, each with fresh noise.
inline std::vector<std::pair<Mask, double>> confounded_sampler(const GroundTruth& t, int unit, std::size_t count,
                                                              std::uint64_t seed) {
    detail::require(t.p <= 20, "confounded sampler: p must be <= 20");
    detail::require(count <= (std::size_t{1} << t.p), "confounded sampler: count exceeds 2^p");
    auto weights = expected_cube(t, unit);
    double total = 0.0;
    for (double& w : weights) {
        w = std::abs(w);
        total += w;
    }
    if (!(total > 0.0)) detail::fail_data("confounded sampler: unit " + std::to_string(unit) + " has an all-zero outcome function");
    for (double& w : weights) w /= total;
    Rng pick = make_rng(seed, {stream::kPattern, static_cast<std::uint64_t>(unit)});
    auto chosen = weighted_sample_without_replacement(weights, count, pick);
    std::sort(chosen.begin(), chosen.end());
    Rng noise = make_rng(seed, {stream::kNoise, static_cast<std::uint64_t>(unit)});
    std::vector<std::pair<Mask, double>> out;
    out.reserve(chosen.size());
    const double sigma = t.sigmas[static_cast<std::size_t>(unit)];
    for (std::size_t c : chosen) {
        const auto m = static_cast<Mask>(c);
        out.emplace_back(m, t.expected(unit, m) + sigma * standard_normal(noise));
    }
    return out;
}

struct SimRealization {
    Panel panel;
    std::vector<int> donor_units;  // units given the larger observation budget
    std::optional<DesignPlan> plan;
};

/// Noisy outcomes for fixed per-unit combination lists.
inline Panel observe_panel(const GroundTruth& t, const std::vector<std::vector<Mask>>& combos, std::uint64_t seed) {
    detail::require(combos.size() == t.alphas.size(), "observe: unit count mismatch");
    Panel panel(t.p, combos.size());
    for (std::size_t u = 0; u < combos.size(); ++u) {
        Rng noise = make_rng(seed, {stream::kNoise, static_cast<std::uint64_t>(u)});
        for (Mask c : combos[u]) panel.add(static_cast<int>(u), c, t.expected(static_cast<int>(u), c) + t.sigmas[u] * standard_normal(noise));
    }
    return panel;
}

inline SimRealization realize_panel(const GroundTruth& t, const DesignPlan& plan, std::uint64_t seed) {
    detail::require(plan.params.p == t.p, "realize: plan p differs from truth");
    detail::require(plan.params.n_units == static_cast<int>(t.alphas.size()), "realize: plan N differs from truth");
    std::vector<std::vector<Mask>> combos(t.alphas.size());
    for (std::size_t u = 0; u < combos.size(); ++u)
        combos[u] = plan.is_donor(static_cast<int>(u)) ? plan.donor_combos : plan.nondonor_combos;
    SimRealization out;
    out.panel = observe_panel(t, combos, seed);
    out.donor_units = plan.donor_ids;
    out.plan = plan;
    return out;
}

/// Confounded or uniform pattern with the configured budgets; design uses
/// the simulation-preset plan.
inline SimRealization realize_panel(const GroundTruth& t, const SimConfig& cfg) {
    cfg.validate();
    if (cfg.pattern == Pattern::design) {
        DesignParams prm;
        prm.n_units = cfg.n_units;
        prm.p = cfg.p;
        prm.r = cfg.r;
        prm.s = std::max(t.s, 1);
        prm.sims_preset = true;
        auto plan = design_sample(prm, substream(cfg.seed, {stream::kDesign}));
        // Honour budget overrides on top of the preset.
        if (cfg.n_donors > 0 || cfg.donor_obs > 0 || cfg.nondonor_obs > 0) {
            const std::uint64_t cube = std::uint64_t{1} << cfg.p;
            Rng units = make_rng(cfg.seed, {stream::kDesign, 11});
            plan.donor_ids.clear();
            for (auto u : sample_without_replacement(static_cast<std::uint64_t>(cfg.n_units),
                                                     static_cast<std::uint64_t>(cfg.resolved_donors()), units))
                plan.donor_ids.push_back(static_cast<int>(u));
            Rng dc = make_rng(cfg.seed, {stream::kDesign, 12});
            plan.donor_combos.clear();
            for (auto c : sample_without_replacement(cube, static_cast<std::uint64_t>(cfg.resolved_donor_obs()), dc))
                plan.donor_combos.push_back(static_cast<Mask>(c));
            Rng nc = make_rng(cfg.seed, {stream::kDesign, 13});
            plan.nondonor_combos.clear();
            for (auto c : sample_without_replacement(cube, static_cast<std::uint64_t>(cfg.resolved_nondonor_obs()), nc))
                plan.nondonor_combos.push_back(static_cast<Mask>(c));
        }
        return realize_panel(t, plan, cfg.seed);
    }
    SimRealization out;
    Rng units = make_rng(cfg.seed, {stream::kDonors});
    for (auto u : sample_without_replacement(static_cast<std::uint64_t>(cfg.n_units),
                                             static_cast<std::uint64_t>(cfg.resolved_donors()), units))
        out.donor_units.push_back(static_cast<int>(u));
    const std::uint64_t cube = std::uint64_t{1} << cfg.p;
    out.panel = Panel(cfg.p, static_cast<std::size_t>(cfg.n_units));
    for (int u = 0; u < cfg.n_units; ++u) {
        const bool donor = std::binary_search(out.donor_units.begin(), out.donor_units.end(), u);
        const auto count = static_cast<std::size_t>(donor ? cfg.resolved_donor_obs() : cfg.resolved_nondonor_obs());
        if (cfg.pattern == Pattern::confounded) {
            for (const auto& [c, y] : confounded_sampler(t, u, count, cfg.seed)) out.panel.add(u, c, y);
        } else {
            Rng pick = make_rng(cfg.seed, {stream::kPattern, static_cast<std::uint64_t>(u)});
            Rng noise = make_rng(cfg.seed, {stream::kNoise, static_cast<std::uint64_t>(u)});
            for (auto c : sample_without_replacement(cube, count, pick)) {
                const auto m = static_cast<Mask>(c);
                out.panel.add(u, m, t.expected(u, m) + t.sigmas[static_cast<std::size_t>(u)] * standard_normal(noise));
            }
        }
    }
    return out;
}

}  // namespace synthcombo
