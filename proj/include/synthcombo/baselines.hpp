#pragma once

// Comparators: a separate Lasso per unit with no sharing across units, and
// nuclear-norm matrix completion (SoftImpute) with a hard-rank variant
// (iterative SVD). Plus the MSE used to compare everything against truth.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "synthcombo/errors.hpp"
#include "synthcombo/estimator.hpp"
#include "synthcombo/hypercube.hpp"
#include "synthcombo/parallel.hpp"
#include "synthcombo/random.hpp"
#include "synthcombo/simdata.hpp"
#include "synthcombo/sparse_regress.hpp"

namespace synthcombo {

struct PerUnitLassoOptions {
    double lambda = 0.0;  // > 0: fixed; 0: per-unit CV
    int lambda_grid = 12;
    double lambda_min_ratio = 0.0;  // 0: 1e-2 when n < 2^p, else 1e-4
    int cv_folds = 5;
    std::uint64_t seed = 0;
    int threads = 1;
    LassoOptions lasso = kPipelineLasso;
};

struct PerUnitLasso {
    std::vector<SparseFourierVector> models;
    std::vector<double> lambdas;

    [[nodiscard]] double predict(int unit, Mask combo) const {
        return models[static_cast<std::size_t>(unit)].evaluate_mask(combo);
    }
};

inline PerUnitLasso perunit_lasso(const Panel& panel, const PerUnitLassoOptions& opts = {}) {
    panel.validate();
    const auto n = static_cast<std::size_t>(panel.n_units());
    for (int u = 0; u < panel.n_units(); ++u)
        detail::require(panel.observations(u) >= 1, "per-unit lasso: unit " + std::to_string(u) + " has no observations");
    PerUnitLasso out;
    out.models.assign(n, SparseFourierVector(panel.p));
    out.lambdas.assign(n, 0.0);
    parallel_for(n, opts.threads, [&](std::size_t i) {
        const int u = static_cast<int>(i);
        const auto sample = panel.unit_sample(u);
        double lambda = opts.lambda;
        if (lambda <= 0.0) {
            const auto grid = lasso_lambda_grid(sample, opts.lambda_grid, opts.lambda_min_ratio);
            const int folds = std::min<int>(opts.cv_folds, static_cast<int>(sample.size()));
            lambda = folds >= 2
                         ? lasso_cv(sample, grid, folds, substream(opts.seed, {stream::kFolds, i}), opts.lasso).best_lambda
                         : grid[grid.size() / 2];
        }
        out.lambdas[i] = lambda;
        out.models[i] = lasso_fit(sample, lambda, opts.lasso).alpha_hat;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Matrix completion

struct CompletionProblem {
    Eigen::MatrixXd values;  // entries outside the mask are ignored
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
    double lambda = 0.0;
    int max_rank = 0;        // 0: no cap
    bool hard_rank = false;  // rank-max_rank truncation instead of shrinkage
    double tol = 1e-4;
    int max_iter = 500;

    void validate() const {
        detail::require(values.rows() == mask.rows() && values.cols() == mask.cols(), "completion: mask shape mismatch");
        detail::require(mask.count() > 0, "completion: no observed entries");
        detail::require(lambda >= 0.0 && std::isfinite(lambda), "completion: lambda must be finite and >= 0");
        detail::require(!hard_rank || max_rank >= 1, "completion: hard-rank mode needs max_rank >= 1");
        detail::require(max_rank >= 0 && max_iter >= 1 && tol > 0.0, "completion: invalid iteration settings");
    }
};

struct CompletionResult {
    Eigen::MatrixXd z;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;
};

namespace detail {
inline double completion_objective(const CompletionProblem& prob, const Eigen::MatrixXd& z, double nuclear) {
    const Eigen::MatrixXd diff = prob.mask.select(prob.values - z, Eigen::MatrixXd::Zero(z.rows(), z.cols()));
    return 0.5 * diff.squaredNorm() + (prob.hard_rank ? 0.0 : prob.lambda * nuclear);
}
}  // namespace detail

/// Iterates Z <- shrink(P_obs(Y) + P_miss(Z)) from Z = 0 until the relative
/// squared change drops below tol. Shrink soft-thresholds singular values by
/// lambda (capped at max_rank), or in hard-rank mode keeps the top max_rank.
/// The observed-entry objective never increases; a violation is an error.
inline CompletionResult soft_impute(const CompletionProblem& prob) {
    prob.validate();
    CompletionResult res;
    res.z = Eigen::MatrixXd::Zero(prob.values.rows(), prob.values.cols());
    double prev_obj = detail::completion_objective(prob, res.z, 0.0);
    res.objective_trace.push_back(prev_obj);
    for (int it = 1; it <= prob.max_iter; ++it) {
        const Eigen::MatrixXd filled = prob.mask.select(prob.values, res.z);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Eigen::VectorXd s = svd.singularValues();
        if (prob.hard_rank) {
            for (Eigen::Index k = prob.max_rank; k < s.size(); ++k) s(k) = 0.0;
        } else {
            s = (s.array() - prob.lambda).max(0.0);
            if (prob.max_rank > 0)
                for (Eigen::Index k = prob.max_rank; k < s.size(); ++k) s(k) = 0.0;
        }
        const Eigen::MatrixXd next = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
        const double denom = std::max(res.z.squaredNorm(), std::numeric_limits<double>::min());
        const double change = (next - res.z).squaredNorm() / denom;
        res.z = next;
        res.iterations = it;
        const double obj = detail::completion_objective(prob, res.z, s.sum());
        res.objective_trace.push_back(obj);
        // The rank cap on top of shrinkage is not a proximal step, so only
        // the uncapped soft mode and pure hard mode are monotone.
        const bool monotone = prob.hard_rank || prob.max_rank == 0;
        if (monotone && obj > prev_obj * (1.0 + 1e-9) + 1e-12)
            detail::fail_numerical("soft-impute: objective increased at iteration " + std::to_string(it));
        prev_obj = obj;
        if (change < prob.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

/// Completion over the combinations observed anywhere plus `extra`.
struct CompletedPanel {
    std::vector<Mask> universe;  // sorted
    CompletionResult result;

    [[nodiscard]] double predict(int unit, Mask combo) const {
        const auto it = std::lower_bound(universe.begin(), universe.end(), combo);
        detail::require(it != universe.end() && *it == combo,
                        "completion: combination " + std::to_string(combo) + " is outside the completion universe");
        return result.z(unit, static_cast<Eigen::Index>(it - universe.begin()));
    }
};

struct SoftImputeOptions {
    double lambda = 0.0;     // 0: top singular value of the zero-filled matrix / 50
    int max_rank = 0;
    bool hard_rank = false;
    double tol = 1e-4;
    int max_iter = 500;
};

inline CompletedPanel soft_impute_panel(const Panel& panel, const std::vector<Mask>& extra, const SoftImputeOptions& opts) {
    panel.validate();
    CompletedPanel out;
    for (const auto& cs : panel.combos) out.universe.insert(out.universe.end(), cs.begin(), cs.end());
    out.universe.insert(out.universe.end(), extra.begin(), extra.end());
    std::sort(out.universe.begin(), out.universe.end());
    out.universe.erase(std::unique(out.universe.begin(), out.universe.end()), out.universe.end());
    const auto rows = static_cast<Eigen::Index>(panel.n_units());
    const auto cols = static_cast<Eigen::Index>(out.universe.size());
    CompletionProblem prob;
    prob.values = Eigen::MatrixXd::Zero(rows, cols);
    prob.mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(rows, cols);
    for (int u = 0; u < panel.n_units(); ++u)
        for (std::size_t i = 0; i < panel.observations(u); ++i) {
            const auto j = static_cast<Eigen::Index>(
                std::lower_bound(out.universe.begin(), out.universe.end(), panel.combos[static_cast<std::size_t>(u)][i]) -
                out.universe.begin());
            prob.values(u, j) += panel.outcomes[static_cast<std::size_t>(u)][i];
            counts(u, j) += 1.0;
            prob.mask(u, j) = true;
        }
    prob.values = prob.mask.select(prob.values.cwiseQuotient(counts.cwiseMax(1.0)), prob.values);
    prob.lambda = opts.lambda > 0.0 ? opts.lambda : Eigen::BDCSVD<Eigen::MatrixXd>(prob.values).singularValues()(0) / 50.0;
    prob.max_rank = opts.max_rank;
    prob.hard_rank = opts.hard_rank;
    prob.tol = opts.tol;
    prob.max_iter = opts.max_iter;
    out.result = soft_impute(prob);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

using Predictor = std::function<double(int, Mask)>;

struct MseReport {
    std::vector<double> per_unit;  // aligned with the evaluated units
    std::vector<int> units;
    double aggregate = 0.0;        // mean over all evaluated cells
};

/// Evaluation combinations: the full cube for p <= 14, otherwise a seeded
/// uniform sample of 4096 distinct combinations.
inline std::vector<Mask> evaluation_combos(int p, std::uint64_t seed, std::size_t sample = 4096) {
    std::vector<Mask> out;
    if (p <= 14) {
        for (Mask x = 0; x <= low_bits(p); ++x) out.push_back(x);
        return out;
    }
    Rng rng = make_rng(seed, {stream::kEvaluation});
    for (auto x : sample_without_replacement(std::uint64_t{1} << p, sample, rng)) out.push_back(static_cast<Mask>(x));
    return out;
}

inline MseReport evaluate_mse(const Predictor& predict, const GroundTruth& truth, const std::vector<Mask>& combos,
                              std::vector<int> units = {}) {
    detail::require(!combos.empty(), "evaluate: no combinations");
    if (units.empty())
        for (int u = 0; u < static_cast<int>(truth.alphas.size()); ++u) units.push_back(u);
    MseReport rep;
    rep.units = units;
    double total = 0.0;
    for (int u : units) {
        double sse = 0.0;
        for (Mask c : combos) {
            const double d = predict(u, c) - truth.expected(u, c);
            sse += d * d;
        }
        rep.per_unit.push_back(sse / static_cast<double>(combos.size()));
        total += sse;
    }
    rep.aggregate = total / static_cast<double>(units.size() * combos.size());
    return rep;
}

// ---------------------------------------------------------------------------
// Method comparison on one simulated panel

struct MethodResult {
    std::string method;  // synthcombo, lasso or softimpute
    double mse = 0.0;
};

/// Simulates one panel from `sim` and scores each method against the truth
/// over evaluation_combos. SynthCombo keeps every unit (infinite vertical
/// threshold) so all methods answer for the same cells; soft-impute is given
/// the true rank as its cap.
inline std::vector<MethodResult> compare_methods(const SimConfig& sim, const std::vector<std::string>& methods,
                                                 EstimatorConfig est, int threads = 1) {
    const auto truth = gen_truth(sim);
    const auto real = realize_panel(truth, sim);
    const auto combos = evaluation_combos(sim.p, sim.seed);
    std::vector<MethodResult> out;
    for (const auto& m : methods) {
        double mse = 0.0;
        if (m == "synthcombo") {
            est.vertical_threshold = std::numeric_limits<double>::infinity();
            est.seed = sim.seed;
            est.threads = threads;
            const auto model = fit(real.panel, est);
            mse = evaluate_mse([&](int u, Mask c) { return model.predict(u, c); }, truth, combos).aggregate;
        } else if (m == "lasso") {
            PerUnitLassoOptions opts;
            opts.seed = sim.seed;
            opts.threads = threads;
            const auto base = perunit_lasso(real.panel, opts);
            mse = evaluate_mse([&](int u, Mask c) { return base.predict(u, c); }, truth, combos).aggregate;
        } else if (m == "softimpute") {
            SoftImputeOptions opts;
            opts.max_rank = sim.r;
            const auto done = soft_impute_panel(real.panel, combos, opts);
            mse = evaluate_mse([&](int u, Mask c) { return done.predict(u, c); }, truth, combos).aggregate;
        } else {
            detail::fail_data("unknown method '" + m + "' (expected synthcombo, lasso or softimpute)");
        }
        out.push_back({m, mse});
    }
    return out;
}

}  // namespace synthcombo
