#pragma once

// The Synthetic Combinations pipeline: donors are chosen by per-unit
// cross-validation of a horizontal regression, every donor's outcome
// function is learned over the whole cube, and each remaining unit is
// expressed through donors by principal component regression on the
// combinations it was observed under.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "synthcombo/cart.hpp"
#include "synthcombo/errors.hpp"
#include "synthcombo/hypercube.hpp"
#include "synthcombo/parallel.hpp"
#include "synthcombo/pcr.hpp"
#include "synthcombo/random.hpp"
#include "synthcombo/sparse_regress.hpp"
#include "synthcombo/stats.hpp"

namespace synthcombo {

/// Units x observed (combination, outcome) pairs. Repeated combinations
/// within a unit are separate measurements.
struct Panel {
    int p = 1;
    std::vector<std::vector<Mask>> combos;
    std::vector<std::vector<double>> outcomes;

    Panel() = default;
    Panel(int p_, std::size_t n_units) : p(p_), combos(n_units), outcomes(n_units) {}

    [[nodiscard]] int n_units() const { return static_cast<int>(combos.size()); }
    [[nodiscard]] std::size_t observations(int u) const { return combos[static_cast<std::size_t>(u)].size(); }

    [[nodiscard]] std::size_t total_observations() const {
        std::size_t t = 0;
        for (const auto& c : combos) t += c.size();
        return t;
    }

    void add(int u, Mask combo, double outcome) {
        detail::require(u >= 0 && u < n_units(), "panel: unit " + std::to_string(u) + " out of range");
        combos[static_cast<std::size_t>(u)].push_back(combo);
        outcomes[static_cast<std::size_t>(u)].push_back(outcome);
    }

    void validate() const {
        detail::require(p >= 1 && p <= kMaxInterventions, "panel: p outside [1, 30]");
        detail::require(combos.size() == outcomes.size(), "panel: combos/outcomes unit count mismatch");
        const Mask mask = low_bits(p);
        for (std::size_t u = 0; u < combos.size(); ++u) {
            detail::require(combos[u].size() == outcomes[u].size(), "panel: unit " + std::to_string(u) + " length mismatch");
            for (std::size_t i = 0; i < combos[u].size(); ++i) {
                detail::require((combos[u][i] & ~mask) == 0, "panel: unit " + std::to_string(u) + " combination " +
                                                                 std::to_string(combos[u][i]) + " exceeds 2^p - 1");
                detail::require(std::isfinite(outcomes[u][i]),
                                "panel: unit " + std::to_string(u) + " has a non-finite outcome");
            }
        }
    }

    [[nodiscard]] RegressionSample unit_sample(int u) const {
        return RegressionSample{p, combos[static_cast<std::size_t>(u)], outcomes[static_cast<std::size_t>(u)]};
    }
};

enum class Horizontal { lasso, cart, select_ridge };

inline Horizontal parse_horizontal(const std::string& s) {
    if (s == "lasso") return Horizontal::lasso;
    if (s == "cart") return Horizontal::cart;
    if (s == "select-ridge") return Horizontal::select_ridge;
    detail::fail_data("unknown horizontal method '" + s + "' (expected lasso, cart or select-ridge)");
}

inline std::string to_string(Horizontal h) {
    switch (h) {
        case Horizontal::lasso: return "lasso";
        case Horizontal::cart: return "cart";
        case Horizontal::select_ridge: return "select-ridge";
    }
    return "lasso";
}

struct EstimatorConfig {
    Horizontal horizontal = Horizontal::lasso;
    double lambda = 0.0;  // > 0: fixed penalty; 0: chosen per donor by CV
    int lambda_grid = 12;
    double lambda_min_ratio = 0.0;  // 0: 1e-2 when n < 2^p, else 1e-4
    int cv_folds = 5;
    int cart_nodes = 16;
    double donor_threshold = std::numeric_limits<double>::infinity();
    int min_obs = 0;                  // 0: at least the mean observation count per unit
    double vertical_threshold = 0.0;  // 0: 4x the median donor CV error
    KappaOptions kappa;
    std::vector<int> donors;  // explicit donor set; skips threshold screening
    std::uint64_t seed = 0;
    int threads = 1;
    LassoOptions lasso = kPipelineLasso;

    void validate() const {
        detail::require(lambda >= 0.0 && std::isfinite(lambda), "config: lambda must be finite and >= 0");
        detail::require(lambda_grid >= 1, "config: lambda grid needs at least one value");
        detail::require(cv_folds >= 2, "config: cv folds must be >= 2");
        detail::require(cart_nodes >= 1, "config: cart nodes must be >= 1");
        detail::require(donor_threshold > 0.0, "config: donor threshold must be > 0");
        detail::require(min_obs == 0 || min_obs >= cv_folds, "config: min_obs must be >= cv folds");
        detail::require(vertical_threshold >= 0.0, "config: vertical threshold must be >= 0");
        detail::require(kappa.folds >= 2, "config: kappa folds must be >= 2");
    }
};

/// A donor's horizontal model.
struct DonorModel {
    int unit = -1;
    Horizontal method = Horizontal::lasso;
    SparseFourierVector coeffs;
    double lambda = 0.0;
    double cv_error = 0.0;
    std::optional<SelectRidgeFit> sr;  // select-ridge only

    [[nodiscard]] double predict(Mask combo) const { return coeffs.evaluate_mask(combo); }
};

enum class UnitRole { donor, transferred, rejected };

inline std::string to_string(UnitRole r) {
    switch (r) {
        case UnitRole::donor: return "donor";
        case UnitRole::transferred: return "transferred";
        case UnitRole::rejected: return "rejected";
    }
    return "rejected";
}

struct UnitTransfer {
    TransferWeights weights;
    int kappa = 0;
    double cv_error = std::numeric_limits<double>::infinity();
    std::string reason;  // why the unit was rejected, empty otherwise
};

struct DonorSelection {
    std::vector<int> donors;
    std::vector<double> cv_error;  // per unit, NaN if not evaluated
    std::vector<double> lambda;    // per unit penalty chosen by CV, NaN if not evaluated
    int min_obs = 0;
};

namespace detail {

inline int resolve_min_obs(const Panel& panel, const EstimatorConfig& cfg) {
    if (cfg.min_obs > 0) return cfg.min_obs;
    if (panel.n_units() == 0) return cfg.cv_folds;
    const double mean = static_cast<double>(panel.total_observations()) / panel.n_units();
    return std::max(cfg.cv_folds, static_cast<int>(std::ceil(mean - 1e-9)));
}

struct HorizontalCv {
    double error = std::numeric_limits<double>::infinity();
    double lambda = 0.0;
};

inline HorizontalCv horizontal_cv(const RegressionSample& sample, const EstimatorConfig& cfg, int unit) {
    const std::uint64_t fold_seed = substream(cfg.seed, {stream::kFolds, static_cast<std::uint64_t>(unit)});
    HorizontalCv out;
    if (cfg.horizontal == Horizontal::cart) {
        const auto fold = fold_assignment(sample.size(), cfg.cv_folds, fold_seed);
        double sse = 0.0;
        for (int f = 0; f < cfg.cv_folds; ++f) {
            std::vector<std::size_t> train, test;
            for (std::size_t i = 0; i < sample.size(); ++i) (fold[i] == f ? test : train).push_back(i);
            if (train.size() < 2 || test.empty()) continue;
            const auto model = cart_fit(sample.subset(train), cfg.cart_nodes,
                                        substream(cfg.seed, {stream::kCartSplit, static_cast<std::uint64_t>(unit),
                                                             static_cast<std::uint64_t>(f) + 1}));
            for (std::size_t t : test) {
                const double d = sample.outcomes[t] - model.predict_mask(sample.combos[t]);
                sse += d * d;
            }
        }
        out.error = sse / static_cast<double>(sample.size());
        return out;
    }
    const std::vector<double> grid =
        cfg.lambda > 0.0 ? std::vector<double>{cfg.lambda} : lasso_lambda_grid(sample, cfg.lambda_grid, cfg.lambda_min_ratio);
    const auto cv = lasso_cv(sample, grid, cfg.cv_folds, fold_seed, cfg.lasso);
    out.error = cv.best_error;
    out.lambda = cv.best_lambda;
    return out;
}

inline DonorModel fit_horizontal(const RegressionSample& sample, const EstimatorConfig& cfg, int unit, double lambda) {
    DonorModel m;
    m.unit = unit;
    m.method = cfg.horizontal;
    m.lambda = lambda;
    switch (cfg.horizontal) {
        case Horizontal::lasso: m.coeffs = lasso_fit(sample, lambda, cfg.lasso).alpha_hat; break;
        case Horizontal::cart:
            m.coeffs = cart_fit(sample, cfg.cart_nodes,
                                substream(cfg.seed, {stream::kCartSplit, static_cast<std::uint64_t>(unit)}))
                           .coeffs;
            break;
        case Horizontal::select_ridge:
            m.sr = select_ridge_fit(sample, lambda, cfg.lasso);
            m.coeffs = m.sr->as_sparse();
            break;
    }
    return m;
}

}  // namespace detail

/// Runs horizontal CV for every unit with at least min_obs observations and
/// keeps those whose CV error is within the threshold. An explicit donor list
/// in the config replaces screening.
inline DonorSelection donor_select(const Panel& panel, const EstimatorConfig& cfg) {
    panel.validate();
    cfg.validate();
    DonorSelection sel;
    const auto n = static_cast<std::size_t>(panel.n_units());
    sel.cv_error.assign(n, std::numeric_limits<double>::quiet_NaN());
    sel.lambda.assign(n, std::numeric_limits<double>::quiet_NaN());
    sel.min_obs = detail::resolve_min_obs(panel, cfg);

    std::vector<int> candidates;
    if (!cfg.donors.empty()) {
        for (int u : cfg.donors) {
            detail::require(u >= 0 && u < panel.n_units(), "donor id " + std::to_string(u) + " out of range");
            detail::require(panel.observations(u) >= static_cast<std::size_t>(cfg.cv_folds),
                            "donor " + std::to_string(u) + " has fewer observations than cv folds");
            candidates.push_back(u);
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    } else {
        for (int u = 0; u < panel.n_units(); ++u)
            if (panel.observations(u) >= static_cast<std::size_t>(sel.min_obs)) candidates.push_back(u);
    }

    parallel_for(candidates.size(), cfg.threads, [&](std::size_t i) {
        const int u = candidates[i];
        const auto cv = detail::horizontal_cv(panel.unit_sample(u), cfg, u);
        sel.cv_error[static_cast<std::size_t>(u)] = cv.error;
        sel.lambda[static_cast<std::size_t>(u)] = cv.lambda;
    });

    for (int u : candidates) {
        if (!cfg.donors.empty() || sel.cv_error[static_cast<std::size_t>(u)] <= cfg.donor_threshold)
            sel.donors.push_back(u);
    }
    if (sel.donors.empty())
        detail::fail_data("no unit qualifies as a donor (min_obs " + std::to_string(sel.min_obs) + ", threshold " +
                          std::to_string(cfg.donor_threshold) + ")");
    return sel;
}

class FittedSynthCombo {
public:
    int p = 1;
    EstimatorConfig config;
    std::vector<int> donor_ids;
    std::vector<DonorModel> donors;  // aligned with donor_ids
    std::vector<UnitRole> roles;     // per unit
    std::vector<UnitTransfer> transfers;  // per unit; meaningful for non-donors
    std::vector<double> unit_cv_error;    // horizontal CV error per unit, NaN if not evaluated
    double vertical_threshold = 0.0;

    [[nodiscard]] int n_units() const { return static_cast<int>(roles.size()); }

    [[nodiscard]] std::vector<int> rejected_units() const {
        std::vector<int> out;
        for (int u = 0; u < n_units(); ++u)
            if (roles[static_cast<std::size_t>(u)] == UnitRole::rejected) out.push_back(u);
        return out;
    }

    [[nodiscard]] std::vector<int> transferred_units() const {
        std::vector<int> out;
        for (int u = 0; u < n_units(); ++u)
            if (roles[static_cast<std::size_t>(u)] == UnitRole::transferred) out.push_back(u);
        return out;
    }

    /// Donor predictions at one combination, in donor_ids order.
    [[nodiscard]] Eigen::VectorXd donor_predictions(Mask combo) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(donors.size()));
        for (std::size_t k = 0; k < donors.size(); ++k) v(static_cast<Eigen::Index>(k)) = donors[k].predict(combo);
        return v;
    }

    [[nodiscard]] int donor_index(int unit) const {
        const auto it = std::lower_bound(donor_ids.begin(), donor_ids.end(), unit);
        return (it != donor_ids.end() && *it == unit) ? static_cast<int>(it - donor_ids.begin()) : -1;
    }

    [[nodiscard]] double predict(int unit, Mask combo) const {
        check_query(unit, combo);
        const double v = roles[static_cast<std::size_t>(unit)] == UnitRole::donor
                             ? donors[static_cast<std::size_t>(donor_index(unit))].predict(combo)
                             : pcr_predict(donor_predictions(combo), transfers[static_cast<std::size_t>(unit)].weights);
        if (!std::isfinite(v)) detail::fail_numerical("non-finite prediction for unit " + std::to_string(unit));
        return v;
    }

    /// Donors: the select-ridge interval. Other units: the weighted donor
    /// prediction with std_err^2 = sum_u (w_u se_u)^2.
    [[nodiscard]] PredictionInterval predict_interval(int unit, Mask combo, double level = 0.95) const {
        check_query(unit, combo);
        if (config.horizontal != Horizontal::select_ridge)
            detail::fail_data("confidence intervals need the select-ridge horizontal method (model uses " +
                              to_string(config.horizontal) + ")");
        if (roles[static_cast<std::size_t>(unit)] == UnitRole::donor)
            return sr_predict_interval(*donors[static_cast<std::size_t>(donor_index(unit))].sr, combo, level);
        const auto& w = transfers[static_cast<std::size_t>(unit)].weights.weights;
        PredictionInterval out;
        out.level = level;
        double var = 0.0;
        for (std::size_t k = 0; k < donors.size(); ++k) {
            const auto iv = sr_predict_interval(*donors[k].sr, combo, level);
            const double wk = w(static_cast<Eigen::Index>(k));
            out.point += wk * iv.point;
            var += wk * wk * iv.std_err * iv.std_err;
        }
        out.std_err = std::sqrt(var);
        return out;
    }

private:
    void check_query(int unit, Mask combo) const {
        detail::require(unit >= 0 && unit < n_units(), "unknown unit " + std::to_string(unit));
        detail::require((combo & ~low_bits(p)) == 0, "query combination " + std::to_string(combo) + " exceeds 2^p - 1");
        if (roles[static_cast<std::size_t>(unit)] == UnitRole::rejected)
            detail::fail_data("unit " + std::to_string(unit) + " was rejected by the vertical check (" +
                              transfers[static_cast<std::size_t>(unit)].reason + ")");
    }
};

namespace detail {

/// Donor panel for one target: rows are the target's observed combinations.
inline Eigen::MatrixXd donor_panel_matrix(const FittedSynthCombo& model, std::span<const Mask> combos) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(combos.size()), static_cast<Eigen::Index>(model.donors.size()));
    for (std::size_t i = 0; i < combos.size(); ++i)
        for (std::size_t k = 0; k < model.donors.size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = model.donors[k].predict(combos[i]);
    if (!m.allFinite()) fail_numerical("donor panel has non-finite predictions");
    return m;
}

inline UnitTransfer transfer_unit(const FittedSynthCombo& model, const Panel& panel, int unit) {
    UnitTransfer t;
    const auto& combos = panel.combos[static_cast<std::size_t>(unit)];
    const auto& ys = panel.outcomes[static_cast<std::size_t>(unit)];
    if (combos.size() < 2) {
        t.reason = "fewer than 2 observations";
        return t;
    }
    const Eigen::MatrixXd a = donor_panel_matrix(model, combos);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    const int max_k = static_cast<int>(std::min(a.rows(), a.cols()));
    KappaOptions ko = model.config.kappa;
    ko.seed = substream(model.config.seed, {stream::kFolds, static_cast<std::uint64_t>(unit), 0x9c7});
    const auto curve = pcr_cv_curve(a, y, max_k, ko.folds, ko.seed);
    int kappa = 1;
    if (ko.method == KappaMethod::cv) {
        const double best = *std::min_element(curve.begin(), curve.end());
        while (kappa < max_k && curve[static_cast<std::size_t>(kappa - 1)] > best + 1e-9 * best + 1e-14) ++kappa;
    } else {
        kappa = kappa_select(a, y, ko);
    }
    t.kappa = kappa;
    t.cv_error = curve[static_cast<std::size_t>(kappa - 1)];
    t.weights = pcr_fit(a, y, kappa);
    return t;
}

}  // namespace detail

/// Step 1 fits every donor horizontally; step 2 transfers every other unit
/// through PCR once all donors are done. Units whose PCR CV error exceeds
/// the vertical threshold are rejected and get no predictions.
inline FittedSynthCombo fit(const Panel& panel, const EstimatorConfig& cfg) {
    const DonorSelection sel = donor_select(panel, cfg);
    FittedSynthCombo model;
    model.p = panel.p;
    model.config = cfg;
    model.donor_ids = sel.donors;
    model.unit_cv_error = sel.cv_error;
    model.roles.assign(static_cast<std::size_t>(panel.n_units()), UnitRole::transferred);
    model.transfers.assign(static_cast<std::size_t>(panel.n_units()), UnitTransfer{});
    model.donors.resize(sel.donors.size());

    parallel_for(sel.donors.size(), cfg.threads, [&](std::size_t k) {
        const int u = sel.donors[k];
        model.donors[k] = detail::fit_horizontal(panel.unit_sample(u), cfg, u, sel.lambda[static_cast<std::size_t>(u)]);
        model.donors[k].cv_error = sel.cv_error[static_cast<std::size_t>(u)];
    });
    for (int u : sel.donors) model.roles[static_cast<std::size_t>(u)] = UnitRole::donor;

    if (cfg.vertical_threshold > 0.0) {
        model.vertical_threshold = cfg.vertical_threshold;
    } else {
        std::vector<double> errs;
        for (int u : sel.donors) errs.push_back(sel.cv_error[static_cast<std::size_t>(u)]);
        double sq = 0.0;
        for (const auto& ys : panel.outcomes)
            for (double y : ys) sq += y * y;
        const double floor = 1e-8 * sq / static_cast<double>(std::max<std::size_t>(1, panel.total_observations())) + 1e-12;
        model.vertical_threshold = std::max(4.0 * median(errs), floor);
    }

    std::vector<int> targets;
    for (int u = 0; u < panel.n_units(); ++u)
        if (model.roles[static_cast<std::size_t>(u)] != UnitRole::donor) targets.push_back(u);
    parallel_for(targets.size(), cfg.threads, [&](std::size_t i) {
        const int u = targets[i];
        model.transfers[static_cast<std::size_t>(u)] = detail::transfer_unit(model, panel, u);
    });
    for (int u : targets) {
        auto& t = model.transfers[static_cast<std::size_t>(u)];
        if (!t.reason.empty()) {
            model.roles[static_cast<std::size_t>(u)] = UnitRole::rejected;
        } else if (!(t.cv_error <= model.vertical_threshold)) {
            t.reason = "PCR CV error " + std::to_string(t.cv_error) + " exceeds threshold " +
                       std::to_string(model.vertical_threshold);
            model.roles[static_cast<std::size_t>(u)] = UnitRole::rejected;
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Identification oracle for small noiseless instances.

struct IdentificationResult {
    bool feasible = false;
    bool horizontal = false;  // the unit's own observations identify the query
    double value = 0.0;
    std::vector<int> donors;  // units with horizontal identification at the query
    std::string reason;
};

namespace detail {

// Coefficients beta with X^T beta = target by least squares, and the
// relative residual.
inline std::pair<Eigen::VectorXd, double> span_solve(const Eigen::MatrixXd& rows, const Eigen::VectorXd& target) {
    if (target.size() == 0) return {Eigen::VectorXd::Zero(rows.rows()), 0.0};
    if (rows.rows() == 0) return {Eigen::VectorXd(0), target.norm() > 0.0 ? 1.0 : 0.0};
    const Eigen::MatrixXd xt = rows.transpose();
    const Eigen::VectorXd beta = xt.completeOrthogonalDecomposition().solve(target);
    const double resid = (xt * beta - target).norm() / std::max(1.0, target.norm());
    return {beta, resid};
}

inline Eigen::MatrixXd restricted_characters(const std::vector<Mask>& support, std::span<const Mask> combos) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(combos.size()), static_cast<Eigen::Index>(support.size()));
    for (std::size_t i = 0; i < combos.size(); ++i)
        for (std::size_t j = 0; j < support.size(); ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = character_sign(support[j], combos[i]);
    return x;
}

// Expresses E[Y_u(query)] through u's own observed expected outcomes if the
// restricted character at the query lies in the span of the observed ones.
inline std::optional<double> horizontal_value(const SparseFourierVector& alpha, std::span<const Mask> observed,
                                              Mask query, double tol) {
    const auto support = alpha.support();
    const Eigen::MatrixXd rows = restricted_characters(support, observed);
    const Eigen::VectorXd target = restricted_characters(support, std::span<const Mask>(&query, 1)).row(0).transpose();
    const auto [beta, resid] = span_solve(rows, target);
    if (resid > tol) return std::nullopt;
    double v = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) v += beta(static_cast<Eigen::Index>(i)) * alpha.evaluate_mask(observed[i]);
    return v;
}

}  // namespace detail

/// Checks whether E[Y_unit(query)] is determined by noiseless observed
/// outcomes: directly via the unit's own observations, or by expressing the
/// unit's coefficients through units that are themselves horizontally
/// identified at the query. When feasible, the value is rebuilt from
/// observed expected outcomes only.
inline IdentificationResult identification_oracle(const std::vector<SparseFourierVector>& alphas,
                                                  const std::vector<std::vector<Mask>>& observed, int unit, Mask query,
                                                  double tol = 1e-8) {
    detail::require(alphas.size() == observed.size(), "identification: alphas/observed size mismatch");
    detail::require(unit >= 0 && static_cast<std::size_t>(unit) < alphas.size(), "identification: unit out of range");
    detail::require(alphas.size() <= 20, "identification oracle handles at most 20 units");
    const int p = alphas[static_cast<std::size_t>(unit)].p();
    detail::require(p <= 10, "identification oracle handles p <= 10");
    detail::require((query & ~low_bits(p)) == 0, "identification: query exceeds 2^p - 1");

    IdentificationResult res;
    std::vector<double> donor_values;
    for (std::size_t u = 0; u < alphas.size(); ++u) {
        const auto v = detail::horizontal_value(alphas[u], observed[u], query, tol);
        if (!v) continue;
        res.donors.push_back(static_cast<int>(u));
        donor_values.push_back(*v);
        if (static_cast<int>(u) == unit) {
            res.feasible = res.horizontal = true;
            res.value = *v;
        }
    }
    if (res.horizontal) return res;

    std::vector<int> others;
    std::vector<double> other_values;
    for (std::size_t k = 0; k < res.donors.size(); ++k) {
        others.push_back(res.donors[k]);
        other_values.push_back(donor_values[k]);
    }
    if (others.empty()) {
        res.reason = "no unit is horizontally identified at the query";
        return res;
    }
    // Linear span inclusion over the union support.
    std::vector<Mask> keys;
    for (const auto& a : alphas)
        for (Mask s : a.support()) keys.push_back(s);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(others.size()), static_cast<Eigen::Index>(keys.size()));
    for (std::size_t k = 0; k < others.size(); ++k)
        for (std::size_t j = 0; j < keys.size(); ++j)
            rows(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = alphas[static_cast<std::size_t>(others[k])].get(keys[j]);
    Eigen::VectorXd target(static_cast<Eigen::Index>(keys.size()));
    for (std::size_t j = 0; j < keys.size(); ++j) target(static_cast<Eigen::Index>(j)) = alphas[static_cast<std::size_t>(unit)].get(keys[j]);
    const auto [w, resid] = detail::span_solve(rows, target);
    if (resid > tol) {
        res.reason = "coefficients are outside the span of identified units";
        return res;
    }
    res.feasible = true;
    for (std::size_t k = 0; k < others.size(); ++k) res.value += w(static_cast<Eigen::Index>(k)) * other_values[k];
    return res;
}

}  // namespace synthcombo
