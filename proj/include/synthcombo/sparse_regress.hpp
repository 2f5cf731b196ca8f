#pragma once

// Horizontal regression over Fourier characters: a matrix-free coordinate
// descent Lasso with an active-set outer loop, cross-validated penalty
// selection, and the two-stage Select+Ridge estimator with Gaussian
// prediction intervals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "synthcombo/errors.hpp"
#include "synthcombo/hypercube.hpp"
#include "synthcombo/random.hpp"
#include "synthcombo/stats.hpp"

namespace synthcombo {

/// Observed (combination, outcome) rows of one unit. Duplicate combinations
/// are allowed and act as repeated measurements.
struct RegressionSample {
    int p = 1;
    std::vector<Mask> combos;
    std::vector<double> outcomes;

    [[nodiscard]] std::size_t size() const { return combos.size(); }

    void validate() const {
        detail::require(p >= 1 && p <= kMaxInterventions, "regression sample: p outside [1, 30]");
        detail::require(combos.size() == outcomes.size(), "regression sample: combos/outcomes length mismatch");
        detail::require(!combos.empty(), "regression sample is empty");
        const Mask mask = low_bits(p);
        for (std::size_t i = 0; i < combos.size(); ++i) {
            detail::require((combos[i] & ~mask) == 0, "regression sample: combination " + std::to_string(combos[i]) +
                                                          " at row " + std::to_string(i) + " exceeds 2^p - 1");
            detail::require(std::isfinite(outcomes[i]), "regression sample: non-finite outcome at row " +
                                                            std::to_string(i));
        }
    }

    [[nodiscard]] RegressionSample subset(std::span<const std::size_t> rows) const {
        RegressionSample out{p, {}, {}};
        out.combos.reserve(rows.size());
        out.outcomes.reserve(rows.size());
        for (std::size_t r : rows) {
            out.combos.push_back(combos[r]);
            out.outcomes.push_back(outcomes[r]);
        }
        return out;
    }
};

struct LassoOptions {
    int max_sweeps = 1000;  // total coordinate-descent sweeps
    double tol = 1e-8;      // max coefficient change per sweep, relative to the outcome RMS
    double kkt_tol = 1e-9;  // slack when screening inactive coordinates
};

/// Solver settings for the estimator and baselines, where the fit feeds a
/// cross-validated prediction rather than a KKT check.
inline constexpr LassoOptions kPipelineLasso{1000, 1e-6, 1e-9};

struct LassoFit {
    SparseFourierVector alpha_hat;
    double lambda = 0.0;
    double objective = 0.0;
    int sweeps = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // after every sweep
};

namespace detail {

/// (1/n) chi_S^T r for every subset S, through one Walsh-Hadamard butterfly
/// over the residual histogram.
inline std::vector<double> all_correlations(int p, std::span<const Mask> combos, std::span<const double> resid) {
    std::vector<double> hist(std::size_t{1} << p, 0.0);
    for (std::size_t i = 0; i < combos.size(); ++i) hist[combos[i]] += resid[i];
    hadamard_butterfly(hist);
    const double inv_n = 1.0 / static_cast<double>(combos.size());
    for (std::size_t s = 0; s < hist.size(); ++s)
        hist[s] *= (std::popcount(s) & 1U) ? -inv_n : inv_n;
    return hist;
}

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

}  // namespace detail

/// Smallest penalty at which the all-zero coefficient vector is optimal.
inline double lasso_lambda_max(const RegressionSample& sample) {
    sample.validate();
    detail::require(sample.p <= kMaxTransformDim, "lasso: p exceeds 24");
    const auto g = detail::all_correlations(sample.p, sample.combos, sample.outcomes);
    double m = 0.0;
    for (double v : g) m = std::max(m, std::abs(v));
    return 2.0 * m;
}

/// Minimises (1/n)||Y - chi alpha||^2 + lambda ||alpha||_1 over all 2^p
/// coefficients. `warm` seeds the coefficients (e.g. along a lambda path).
inline LassoFit lasso_fit(const RegressionSample& sample, double lambda, const LassoOptions& opts = {},
                          const SparseFourierVector* warm = nullptr) {
    sample.validate();
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "lasso: lambda must be finite and >= 0");
    detail::require(sample.p <= kMaxTransformDim, "lasso: p exceeds 24");
    const int p = sample.p;
    const std::size_t n = sample.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double half_lambda = 0.5 * lambda;
    double y_ms = 0.0;
    for (double y : sample.outcomes) y_ms += y * y;
    const double tol = opts.tol * std::max(std::sqrt(y_ms * inv_n), std::numeric_limits<double>::min());

    // Gram entries of character columns: (1/n) chi_j^T chi_k = gram[j ^ k].
    const std::vector<double> ones(n, 1.0);
    const auto gram = detail::all_correlations(p, sample.combos, ones);

    std::vector<Mask> active;
    std::vector<double> coef;
    std::vector<double> grad;  // (1/n) chi_a^T resid for active a
    std::vector<char> is_active(std::size_t{1} << p, 0);

    auto activate = [&](Mask s, double value) {
        is_active[s] = 1;
        active.push_back(s);
        coef.push_back(value);
        grad.push_back(0.0);
    };
    if (warm != nullptr) {
        detail::require(warm->p() == p, "lasso: warm start dimension mismatch");
        for (const auto& [s, v] : warm->entries()) activate(s, v);
    }

    std::vector<double> resid(n);
    auto refresh_residual = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            double fitted = 0.0;
            for (std::size_t a = 0; a < active.size(); ++a)
                if (coef[a] != 0.0) fitted += character_sign(active[a], sample.combos[i]) * coef[a];
            resid[i] = sample.outcomes[i] - fitted;
        }
    };
    auto l1 = [&] {
        double t = 0.0;
        for (double c : coef) t += std::abs(c);
        return t;
    };

    LassoFit fit;
    fit.lambda = lambda;
    bool converged = false;
    int sweeps = 0;
    while (sweeps < opts.max_sweeps) {
        refresh_residual();
        // Screen every coordinate against the zero-coefficient KKT condition.
        const auto g = detail::all_correlations(p, sample.combos, resid);
        std::vector<std::pair<double, Mask>> violators;
        for (std::size_t s = 0; s < g.size(); ++s) {
            if (!is_active[s] && std::abs(g[s]) > half_lambda + opts.kkt_tol)
                violators.emplace_back(std::abs(g[s]), static_cast<Mask>(s));
        }
        if (violators.empty() && fit.sweeps > 0) {
            converged = true;
            break;
        }
        const std::size_t batch = std::max<std::size_t>(16, active.size());
        if (violators.size() > batch) {
            std::partial_sort(violators.begin(), violators.begin() + static_cast<std::ptrdiff_t>(batch),
                              violators.end(), [](const auto& a, const auto& b) {
                                  return a.first != b.first ? a.first > b.first : a.second < b.second;
                              });
            violators.resize(batch);
        }
        std::sort(violators.begin(), violators.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
        for (const auto& v : violators) activate(v.second, 0.0);
        for (std::size_t a = 0; a < active.size(); ++a) grad[a] = g[active[a]];
        const std::size_t m = active.size();
        std::vector<double> block(m * m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) block[a * m + b] = gram[active[a] ^ active[b]];

        // Coordinate descent restricted to the active set, in Gram form.
        double rss = 0.0;
        for (double r : resid) rss += r * r;
        rss *= inv_n;
        bool inner_converged = false;
        double prev_obj = rss + lambda * l1();
        while (sweeps < opts.max_sweeps) {
            double max_change = 0.0;
            for (std::size_t a = 0; a < m; ++a) {
                const double old = coef[a];
                const double updated = detail::soft_threshold(old + grad[a], half_lambda);
                const double delta = updated - old;
                if (delta == 0.0) continue;
                rss += delta * delta - 2.0 * delta * grad[a];
                coef[a] = updated;
                const double* row = block.data() + a * m;
                for (std::size_t b = 0; b < m; ++b) grad[b] -= row[b] * delta;
                max_change = std::max(max_change, std::abs(delta));
            }
            ++sweeps;
            ++fit.sweeps;
            const double obj = rss + lambda * l1();
            fit.objective_trace.push_back(obj);
            if (obj > prev_obj + 1e-10 * std::max(1.0, std::abs(prev_obj)))
                detail::fail_numerical("lasso: objective increased during coordinate descent");
            prev_obj = obj;
            if (max_change < tol) {
                inner_converged = true;
                break;
            }
        }
        if (!inner_converged) break;

        // Drop coordinates that settled at zero so the active set stays small.
        std::size_t keep = 0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            if (coef[a] != 0.0) {
                active[keep] = active[a];
                coef[keep] = coef[a];
                grad[keep] = grad[a];
                ++keep;
            } else {
                is_active[active[a]] = 0;
            }
        }
        active.resize(keep);
        coef.resize(keep);
        grad.resize(keep);
    }

    refresh_residual();
    fit.alpha_hat = SparseFourierVector(p);
    for (std::size_t a = 0; a < active.size(); ++a)
        if (coef[a] != 0.0) fit.alpha_hat.set(active[a], coef[a]);
    double rss = 0.0;
    for (double r : resid) rss += r * r;
    fit.objective = rss * inv_n + lambda * l1();
    fit.converged = converged;
    return fit;
}

/// Fits along a descending penalty sequence with warm starts.
inline std::vector<LassoFit> lasso_path(const RegressionSample& sample, std::span<const double> lambdas,
                                        const LassoOptions& opts = {}) {
    std::vector<LassoFit> fits;
    fits.reserve(lambdas.size());
    const SparseFourierVector* warm = nullptr;
    for (double lam : lambdas) {
        fits.push_back(lasso_fit(sample, lam, opts, warm));
        warm = &fits.back().alpha_hat;
    }
    return fits;
}

/// c * sigma_hat * sqrt(p / n).
inline double lasso_lambda_default(std::size_t n, int p, double sigma_hat, double c = 4.0) {
    detail::require(n >= 1, "lasso_lambda_default: n must be >= 1");
    return c * sigma_hat * std::sqrt(static_cast<double>(p) / static_cast<double>(n));
}

/// Geometric grid from lambda_max down to lambda_max * min_ratio, descending.
/// min_ratio 0 picks 1e-2 when n < 2^p and 1e-4 otherwise.
inline std::vector<double> lasso_lambda_grid(const RegressionSample& sample, int count = 12, double min_ratio = 0.0) {
    detail::require(count >= 1, "lambda grid needs at least one value");
    detail::require(min_ratio >= 0.0 && min_ratio < 1.0, "lambda grid: min_ratio must lie in [0, 1)");
    if (min_ratio == 0.0) min_ratio = sample.size() < (std::size_t{1} << sample.p) ? 1e-2 : 1e-4;
    double top = lasso_lambda_max(sample);
    if (top <= 0.0) top = 1.0;
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        grid[static_cast<std::size_t>(i)] = top * std::pow(min_ratio, t);
    }
    return grid;
}

struct LassoCvResult {
    double best_lambda = 0.0;
    double best_error = 0.0;
    std::vector<double> lambdas;                   // as supplied
    std::vector<double> mean_errors;               // aligned with lambdas
    std::vector<std::vector<double>> fold_errors;  // [fold][lambda]
};

/// k-fold cross-validation over a penalty grid. Ties go to the larger lambda.
inline LassoCvResult lasso_cv(const RegressionSample& sample, std::span<const double> lambda_grid, int k_folds,
                              std::uint64_t seed, const LassoOptions& opts = {}) {
    sample.validate();
    detail::require(!lambda_grid.empty(), "lasso_cv: lambda grid is empty");
    detail::require(k_folds >= 2, "lasso_cv: need at least 2 folds");
    detail::require(sample.size() >= static_cast<std::size_t>(k_folds), "lasso_cv: fewer samples than folds");
    for (double l : lambda_grid) detail::require(std::isfinite(l) && l >= 0.0, "lasso_cv: invalid lambda in grid");

    // Walk the grid from the largest lambda down for warm starts.
    std::vector<std::size_t> order(lambda_grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambda_grid[a] > lambda_grid[b]; });
    std::vector<double> sorted(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = lambda_grid[order[i]];

    const auto fold = fold_assignment(sample.size(), k_folds, seed);
    LassoCvResult res;
    res.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
    res.fold_errors.assign(static_cast<std::size_t>(k_folds), std::vector<double>(lambda_grid.size(), 0.0));
    for (int f = 0; f < k_folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < sample.size(); ++i) (fold[i] == f ? test : train).push_back(i);
        const auto tr = sample.subset(train);
        const auto fits = lasso_path(tr, sorted, opts);
        for (std::size_t j = 0; j < fits.size(); ++j) {
            double err = 0.0;
            for (std::size_t t : test) {
                const double d = sample.outcomes[t] - fits[j].alpha_hat.evaluate_mask(sample.combos[t]);
                err += d * d;
            }
            res.fold_errors[static_cast<std::size_t>(f)][order[j]] = err / static_cast<double>(test.size());
        }
    }
    res.mean_errors.assign(lambda_grid.size(), 0.0);
    for (const auto& fe : res.fold_errors)
        for (std::size_t j = 0; j < fe.size(); ++j) res.mean_errors[j] += fe[j] / k_folds;

    std::size_t best = 0;
    for (std::size_t j = 1; j < lambda_grid.size(); ++j) {
        const double e = res.mean_errors[j];
        const double b = res.mean_errors[best];
        if (e < b || (e == b && lambda_grid[j] > lambda_grid[best])) best = j;
    }
    res.best_lambda = lambda_grid[best];
    res.best_error = res.mean_errors[best];
    return res;
}

/// Max over nonempty S of |(1/n) sum_i chi_S(pi_i)|: how far the design is
/// from having every character column sum to zero.
inline double design_column_imbalance(int p, std::span<const Mask> combos) {
    detail::require(!combos.empty(), "design_column_imbalance: no combinations");
    detail::require(p <= kMaxTransformDim, "design_column_imbalance: p exceeds 24");
    std::vector<double> ones(combos.size(), 1.0);
    const auto g = detail::all_correlations(p, combos, ones);
    double m = 0.0;
    for (std::size_t s = 1; s < g.size(); ++s) m = std::max(m, std::abs(g[s]));
    return m;
}

// ---------------------------------------------------------------------------
// Select + Ridge

struct PredictionInterval {
    double point = 0.0;
    double std_err = 0.0;
    double level = 0.95;

    [[nodiscard]] double half_width() const { return two_sided_z(level) * std_err; }
    [[nodiscard]] double lower() const { return point - half_width(); }
    [[nodiscard]] double upper() const { return point + half_width(); }
    [[nodiscard]] bool covers(double value) const { return std::abs(value - point) <= half_width(); }
};

struct SelectRidgeFit {
    int p = 1;
    std::vector<Mask> support;  // sorted, duplicate-free
    Eigen::VectorXd coeffs;     // ridge coefficients on `support`
    Eigen::MatrixXd gram;       // chi_S^T chi_S / n
    double noise_var = 0.0;
    std::size_t n = 0;
    double lambda = 0.0;

    [[nodiscard]] SparseFourierVector as_sparse() const {
        SparseFourierVector out(p);
        for (std::size_t k = 0; k < support.size(); ++k) out.set(support[k], coeffs(static_cast<Eigen::Index>(k)));
        return out;
    }

    [[nodiscard]] double predict_mask(Mask combo) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k)
            acc += coeffs(static_cast<Eigen::Index>(k)) * character_sign(support[k], combo);
        return acc;
    }
};

/// Builds the ridge stage on a given support. Exposed separately so an
/// externally chosen support can be refit.
inline SelectRidgeFit ridge_on_support(const RegressionSample& sample, std::vector<Mask> support, double lambda = 0.0) {
    sample.validate();
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    const auto n = static_cast<Eigen::Index>(sample.size());
    const auto k = static_cast<Eigen::Index>(support.size());
    const double dn = static_cast<double>(n);

    SelectRidgeFit fit;
    fit.p = sample.p;
    fit.support = std::move(support);
    fit.n = sample.size();
    fit.lambda = lambda;

    Eigen::Map<const Eigen::VectorXd> y(sample.outcomes.data(), n);
    Eigen::MatrixXd x(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            x(i, j) = character_sign(fit.support[static_cast<std::size_t>(j)], sample.combos[static_cast<std::size_t>(i)]);

    if (k == 0) {
        fit.coeffs = Eigen::VectorXd(0);
        fit.gram = Eigen::MatrixXd(0, 0);
        fit.noise_var = y.squaredNorm() / std::max(1.0, dn);
        return fit;
    }
    const Eigen::MatrixXd xtx = x.transpose() * x;
    Eigen::MatrixXd system = xtx;
    system.diagonal().array() += 1.0 / dn;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    if (ldlt.info() != Eigen::Success) detail::fail_numerical("select-ridge: ridge system factorisation failed");
    fit.coeffs = ldlt.solve(x.transpose() * y);
    fit.gram = xtx / dn;
    const double rss = (y - x * fit.coeffs).squaredNorm();
    fit.noise_var = rss / std::max(1.0, dn - static_cast<double>(k));
    return fit;
}

/// Lasso support selection followed by ridge with penalty 1/n on the
/// selected characters.
inline SelectRidgeFit select_ridge_fit(const RegressionSample& sample, double lambda_for_selection,
                                       const LassoOptions& opts = {}) {
    const auto lasso = lasso_fit(sample, lambda_for_selection, opts);
    return ridge_on_support(sample, lasso.alpha_hat.support(), lambda_for_selection);
}

/// Point prediction and plug-in standard error
/// sqrt(noise_var * x^T K^{-1} x / n), x the characters of the support at c.
inline PredictionInterval sr_predict_interval(const SelectRidgeFit& fit, Mask combo, double level = 0.95) {
    detail::require(level > 0.0 && level < 1.0, "prediction interval level outside (0, 1)");
    PredictionInterval out;
    out.level = level;
    const double dn = static_cast<double>(std::max<std::size_t>(fit.n, 1));
    if (fit.support.empty()) {
        out.point = 0.0;
        out.std_err = std::sqrt(fit.noise_var / dn);
        return out;
    }
    const auto k = static_cast<Eigen::Index>(fit.support.size());
    Eigen::VectorXd x(k);
    for (Eigen::Index j = 0; j < k; ++j) x(j) = character_sign(fit.support[static_cast<std::size_t>(j)], combo);
    out.point = fit.coeffs.dot(x);

    double quad = std::numeric_limits<double>::quiet_NaN();
    const double scale = std::max(1.0, fit.gram.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 6; ++attempt) {
        Eigen::MatrixXd g = fit.gram;
        if (attempt > 0) g.diagonal().array() += scale * std::pow(10.0, -14 + 2 * attempt);
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        if (llt.info() == Eigen::Success) {
            quad = x.dot(llt.solve(x));
            if (std::isfinite(quad) && quad >= 0.0) break;
        }
    }
    if (!(std::isfinite(quad) && quad >= 0.0)) detail::fail_numerical("select-ridge: Gram matrix is singular");
    out.std_err = std::sqrt(fit.noise_var * quad / dn);
    return out;
}

inline PredictionInterval sr_predict_interval(const SelectRidgeFit& fit, const Combination& c, double level = 0.95) {
    detail::require(c.p == fit.p, "sr_predict_interval: dimension mismatch");
    return sr_predict_interval(fit, c.bits, level);
}

}  // namespace synthcombo
