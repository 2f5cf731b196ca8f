#pragma once

// Experiment design: random donor units share one random set of
// combinations, all other units share another. Also checkers for the
// conditions such a design is meant to produce.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "synthcombo/errors.hpp"
#include "synthcombo/hypercube.hpp"
#include "synthcombo/pcr.hpp"
#include "synthcombo/random.hpp"
#include "synthcombo/sparse_regress.hpp"

namespace synthcombo {

struct DesignParams {
    int n_units = 0;
    int p = 1;
    int r = 1;
    int s = 1;
    double gamma = 0.1;
    double delta = 0.5;
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;
    bool sims_preset = false;  // sizes from the simulation study instead of the bounds

    void validate() const {
        detail::require(p >= 1 && p <= kMaxInterventions, "design: p outside [1, 30]");
        detail::require(n_units >= 1, "design: N must be >= 1");
        detail::require(r >= 1 && s >= 1, "design: r and s must be >= 1");
        detail::require(gamma > 0.0 && gamma < 1.0, "design: gamma outside (0, 1)");
        detail::require(delta > 0.0, "design: delta must be > 0");
        detail::require(c1 > 0.0 && c2 > 0.0 && c3 > 0.0, "design: constants must be > 0");
    }
};

struct DesignSizes {
    std::uint64_t donors = 0;
    std::uint64_t donor_combos = 0;
    std::uint64_t nondonor_combos = 0;
};

namespace detail {
inline std::uint64_t ceil_size(double x) {
    require(std::isfinite(x) && x < 1e18, "design: size overflow");
    return static_cast<std::uint64_t>(std::ceil(x - 1e-9));
}
}  // namespace detail

/// Theory mode: |I| = c1 r log(rs/gamma), |Pi_I| = c2 r^3 s^2 log(|I| 2^p / gamma) / delta^2,
/// |Pi_N| = c3 max(r log(|I|/gamma), r^4/delta^4), each rounded up.
/// Simulation preset: |I| = 2r, |Pi_I| = 2 p^{5/2}, |Pi_N| = 2 r^4.
inline DesignSizes design_sizes(const DesignParams& prm) {
    prm.validate();
    DesignSizes z;
    const double r = prm.r, s = prm.s, p = prm.p;
    if (prm.sims_preset) {
        z.donors = static_cast<std::uint64_t>(2 * prm.r);
        z.donor_combos = detail::ceil_size(2.0 * std::pow(p, 2.5));
        z.nondonor_combos = static_cast<std::uint64_t>(2.0 * std::pow(r, 4));
        return z;
    }
    z.donors = detail::ceil_size(prm.c1 * r * std::log(r * s / prm.gamma));
    z.donors = std::max<std::uint64_t>(z.donors, 1);
    const double di = static_cast<double>(z.donors);
    z.donor_combos = detail::ceil_size(prm.c2 * r * r * r * s * s * (std::log(di / prm.gamma) + p * std::log(2.0)) /
                                       (prm.delta * prm.delta));
    z.nondonor_combos = detail::ceil_size(prm.c3 * std::max(r * std::log(di / prm.gamma), std::pow(r / prm.delta, 4)));
    return z;
}

struct DesignPlan {
    DesignParams params;
    std::vector<int> donor_ids;         // sorted
    std::vector<Mask> donor_combos;     // sorted, shared by all donors
    std::vector<Mask> nondonor_combos;  // sorted, shared by all other units
    std::uint64_t seed = 0;

    [[nodiscard]] bool is_donor(int u) const { return std::binary_search(donor_ids.begin(), donor_ids.end(), u); }
};

inline DesignPlan design_sample(const DesignParams& prm, std::uint64_t seed) {
    const auto z = design_sizes(prm);
    const std::uint64_t cube = std::uint64_t{1} << prm.p;
    if (z.donors > static_cast<std::uint64_t>(prm.n_units))
        detail::fail_data("design: " + std::to_string(z.donors) + " donor units required but N = " + std::to_string(prm.n_units));
    if (z.donor_combos > cube)
        detail::fail_data("design: " + std::to_string(z.donor_combos) + " donor combinations required but 2^p = " +
                          std::to_string(cube));
    if (z.nondonor_combos > cube)
        detail::fail_data("design: " + std::to_string(z.nondonor_combos) + " non-donor combinations required but 2^p = " +
                          std::to_string(cube));
    DesignPlan plan;
    plan.params = prm;
    plan.seed = seed;
    Rng units = make_rng(seed, {stream::kDesign, 1});
    for (auto u : sample_without_replacement(static_cast<std::uint64_t>(prm.n_units), z.donors, units))
        plan.donor_ids.push_back(static_cast<int>(u));
    Rng dc = make_rng(seed, {stream::kDesign, 2});
    for (auto c : sample_without_replacement(cube, z.donor_combos, dc)) plan.donor_combos.push_back(static_cast<Mask>(c));
    Rng nc = make_rng(seed, {stream::kDesign, 3});
    for (auto c : sample_without_replacement(cube, z.nondonor_combos, nc)) plan.nondonor_combos.push_back(static_cast<Mask>(c));
    return plan;
}

// ---------------------------------------------------------------------------
// Checkers

inline constexpr double kSpanTolerance = 1e-8;

/// Smallest singular value of the |combos| x |support| restricted character
/// matrix; +infinity for an empty support.
inline double restricted_min_singular(const std::vector<Mask>& support, const std::vector<Mask>& combos) {
    if (support.empty()) return std::numeric_limits<double>::infinity();
    if (combos.size() < support.size()) return 0.0;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(combos.size()), static_cast<Eigen::Index>(support.size()));
    for (std::size_t i = 0; i < combos.size(); ++i)
        for (std::size_t j = 0; j < support.size(); ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = character_sign(support[j], combos[i]);
    const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(x).singularValues();
    return sv(sv.size() - 1);
}

inline std::vector<double> check_horizontal_span(const std::vector<std::vector<Mask>>& supports,
                                                 const std::vector<Mask>& donor_combos) {
    std::vector<double> out;
    out.reserve(supports.size());
    for (const auto& s : supports) out.push_back(restricted_min_singular(s, donor_combos));
    return out;
}

enum class IncoherenceMode { exact, monte_carlo };

struct IncoherenceCheck {
    double estimate = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

/// Max over distinct S, T of |(1/n) sum_i chi_S(pi_i) chi_T(pi_i)|; the
/// diagonal of the normalised Gram matrix is exactly 1. Since
/// chi_S chi_T = chi_{S xor T}, the exact value is the largest nonempty
/// coefficient of one transform of the combination histogram.
inline IncoherenceCheck check_incoherence(int p, const std::vector<Mask>& combos, int s, IncoherenceMode mode,
                                          double c_prime = 1.0, std::uint64_t mc_pairs = 20000, std::uint64_t seed = 0) {
    detail::require(!combos.empty(), "incoherence: no combinations");
    detail::require(s >= 1, "incoherence: s must be >= 1");
    IncoherenceCheck out;
    out.threshold = c_prime / s;
    if (mode == IncoherenceMode::exact) {
        detail::require(p <= kMaxTransformDim, "incoherence: exact mode supports p <= 24");
        out.estimate = design_column_imbalance(p, combos);
    } else {
        Rng rng = make_rng(seed, {stream::kDesign, 4});
        const std::uint64_t cube = std::uint64_t{1} << p;
        for (std::uint64_t k = 0; k < mc_pairs; ++k) {
            const Mask a = static_cast<Mask>(uniform_below(rng, cube));
            Mask b = static_cast<Mask>(uniform_below(rng, cube - 1));
            if (b >= a) ++b;  // distinct pair
            const Mask u = a ^ b;
            double acc = 0.0;
            for (Mask c : combos) acc += character_sign(u, c);
            out.estimate = std::max(out.estimate, std::abs(acc) / static_cast<double>(combos.size()));
        }
    }
    out.pass = out.estimate <= out.threshold;
    return out;
}

struct SpectrumCheck {
    std::vector<double> singvals;
    int rank = 0;
    double ratio = 0.0;           // s_r / s_1
    double frobenius_mass = 0.0;  // ||M||_F^2 / (rows * cols)
    double max_residual = 0.0;    // over query rows, relative to the row norm
    bool spectrum_pass = false;
    bool subspace_pass = false;
};

/// `panel` is the noiseless |Pi_N| x |I| donor outcome matrix, `queries` has
/// one row E[Y_I(pi)] per query combination. The spectrum passes when the
/// numerical rank equals r and s_r / s_1 >= min_ratio; the subspace check
/// passes when every query row lies in the panel's row space.
inline SpectrumCheck check_spectrum_and_subspace(const Eigen::MatrixXd& panel, const Eigen::MatrixXd& queries, int r,
                                                 double min_ratio = 0.1, double residual_tol = 1e-6) {
    detail::require(panel.rows() > 0 && panel.cols() > 0, "spectrum check: empty panel");
    detail::require(queries.rows() == 0 || queries.cols() == panel.cols(), "spectrum check: query width mismatch");
    const PanelSvd svd(panel);
    if (svd.effective_rank() == 0) detail::fail_numerical("spectrum check: zero panel");
    SpectrumCheck out;
    out.singvals.assign(svd.s.data(), svd.s.data() + svd.s.size());
    out.rank = svd.effective_rank();
    const int rr = std::min<int>(r, static_cast<int>(svd.s.size()));
    out.ratio = svd.s(rr - 1) / svd.s(0);
    out.frobenius_mass = panel.squaredNorm() / static_cast<double>(panel.rows() * panel.cols());
    out.spectrum_pass = out.rank == r && out.ratio >= min_ratio;
    const Eigen::MatrixXd v = svd.v.leftCols(out.rank);
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const Eigen::VectorXd q = queries.row(i).transpose();
        const double norm = q.norm();
        if (norm == 0.0) continue;
        out.max_residual = std::max(out.max_residual, (q - v * (v.transpose() * q)).norm() / norm);
    }
    out.subspace_pass = out.max_residual < residual_tol;
    return out;
}

struct AssumptionReport {
    std::vector<double> horizontal_smin;
    bool horizontal_pass = false;
    IncoherenceCheck incoherence;
    SpectrumCheck spectrum;

    [[nodiscard]] bool all_pass() const {
        return horizontal_pass && incoherence.pass && spectrum.spectrum_pass && spectrum.subspace_pass;
    }
};

struct AssessOptions {
    IncoherenceMode incoherence_mode = IncoherenceMode::exact;
    double c_prime = 1.0;
    double min_ratio = 0.1;
    std::size_t max_queries = 4096;  // full cube when it fits, else a seeded sample
    std::uint64_t seed = 0;
};

/// Runs all checkers for a plan against known coefficients (simulation or
/// oracle mode). The sparsity used for the incoherence threshold is the
/// largest donor support.
inline AssumptionReport assess_plan(const DesignPlan& plan, const std::vector<SparseFourierVector>& alphas,
                                    const AssessOptions& opts = {}) {
    detail::require(!plan.donor_ids.empty(), "assess: plan has no donors");
    const int p = plan.params.p;
    AssumptionReport rep;
    std::vector<std::vector<Mask>> supports;
    int s_max = 1;
    for (int u : plan.donor_ids) {
        detail::require(static_cast<std::size_t>(u) < alphas.size(), "assess: donor id beyond coefficient list");
        supports.push_back(alphas[static_cast<std::size_t>(u)].support());
        s_max = std::max<int>(s_max, static_cast<int>(supports.back().size()));
    }
    rep.horizontal_smin = check_horizontal_span(supports, plan.donor_combos);
    rep.horizontal_pass = std::all_of(rep.horizontal_smin.begin(), rep.horizontal_smin.end(),
                                      [](double v) { return v > kSpanTolerance; });
    rep.incoherence = check_incoherence(p, plan.donor_combos, s_max, opts.incoherence_mode, opts.c_prime, 20000, opts.seed);

    const auto ni = static_cast<Eigen::Index>(plan.donor_ids.size());
    Eigen::MatrixXd panel(static_cast<Eigen::Index>(plan.nondonor_combos.size()), ni);
    for (std::size_t i = 0; i < plan.nondonor_combos.size(); ++i)
        for (Eigen::Index k = 0; k < ni; ++k)
            panel(static_cast<Eigen::Index>(i), k) =
                alphas[static_cast<std::size_t>(plan.donor_ids[static_cast<std::size_t>(k)])].evaluate_mask(plan.nondonor_combos[i]);
    std::vector<Mask> qs;
    const std::uint64_t cube = std::uint64_t{1} << p;
    if (cube <= opts.max_queries) {
        for (std::uint64_t x = 0; x < cube; ++x) qs.push_back(static_cast<Mask>(x));
    } else {
        Rng rng = make_rng(opts.seed, {stream::kDesign, 5});
        for (auto x : sample_without_replacement(cube, opts.max_queries, rng)) qs.push_back(static_cast<Mask>(x));
    }
    Eigen::MatrixXd queries(static_cast<Eigen::Index>(qs.size()), ni);
    for (std::size_t i = 0; i < qs.size(); ++i)
        for (Eigen::Index k = 0; k < ni; ++k)
            queries(static_cast<Eigen::Index>(i), k) =
                alphas[static_cast<std::size_t>(plan.donor_ids[static_cast<std::size_t>(k)])].evaluate_mask(qs[i]);
    // Rank target: rank of the donors' coefficient matrix.
    std::vector<Mask> keys;
    for (const auto& s : supports) keys.insert(keys.end(), s.begin(), s.end());
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    int r = 0;
    if (!keys.empty()) {
        Eigen::MatrixXd coef(ni, static_cast<Eigen::Index>(keys.size()));
        for (Eigen::Index k = 0; k < ni; ++k)
            for (std::size_t j = 0; j < keys.size(); ++j)
                coef(k, static_cast<Eigen::Index>(j)) = alphas[static_cast<std::size_t>(plan.donor_ids[static_cast<std::size_t>(k)])].get(keys[j]);
        r = PanelSvd(coef).effective_rank();
    }
    rep.spectrum = check_spectrum_and_subspace(panel, queries, std::max(r, 1), opts.min_ratio);
    return rep;
}

// ---------------------------------------------------------------------------
// Heuristic for unknown rank: add candidate donors one at a time (rows of
// `outcomes`, in the order given) until the numerical rank of the stacked
// rows has not changed for `patience` consecutive additions.

struct SequentialResult {
    int donors_used = 0;
    int rank = 0;
    bool stabilised = false;
};

inline SequentialResult sequential_donor_heuristic(const Eigen::MatrixXd& outcomes, int patience = 3,
                                                   double rel_tol = 1e-8) {
    detail::require(outcomes.rows() > 0 && outcomes.cols() > 0, "sequential heuristic: empty outcome matrix");
    detail::require(patience >= 1, "sequential heuristic: patience must be >= 1");
    SequentialResult res;
    int unchanged = 0;
    for (Eigen::Index k = 1; k <= outcomes.rows(); ++k) {
        const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(outcomes.topRows(k)).singularValues();
        int rank = 0;
        while (rank < sv.size() && sv(0) > 0.0 && sv(rank) > rel_tol * sv(0)) ++rank;
        unchanged = (rank == res.rank) ? unchanged + 1 : 0;
        res.rank = rank;
        res.donors_used = static_cast<int>(k);
        if (unchanged >= patience) {
            res.stabilised = true;
            break;
        }
    }
    return res;
}

}  // namespace synthcombo
