#pragma once

// Vertical regression: principal component regression of a target unit's
// observed outcomes on the donors' predicted outcomes at the same
// combinations.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "synthcombo/errors.hpp"
#include "synthcombo/random.hpp"

namespace synthcombo {

inline constexpr double kRankFloor = 1e-10;

/// Rows are the target's observed combinations (in its order), columns are
/// donors.
struct DonorPanel {
    std::vector<int> donors;
    Eigen::MatrixXd matrix;

    void validate() const {
        detail::require(matrix.rows() > 0 && matrix.cols() > 0, "donor panel is empty");
        detail::require(static_cast<std::size_t>(matrix.cols()) == donors.size(), "donor panel: column count != donor count");
        detail::require(matrix.allFinite(), "donor panel has non-finite entries");
    }
};

struct TransferWeights {
    Eigen::VectorXd weights;
    int rank = 0;
    std::vector<double> singvals;  // retained
    std::vector<double> spectrum;  // all singular values
};

struct PanelSvd {
    Eigen::MatrixXd u;
    Eigen::VectorXd s;
    Eigen::MatrixXd v;

    explicit PanelSvd(const Eigen::MatrixXd& m) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        u = svd.matrixU();
        s = svd.singularValues();
        v = svd.matrixV();
    }

    /// Number of singular values above the relative floor.
    [[nodiscard]] int effective_rank() const {
        if (s.size() == 0 || !(s(0) > 0.0)) return 0;
        int r = 0;
        while (r < s.size() && s(r) > kRankFloor * s(0)) ++r;
        return r;
    }

    /// sum_{l < kappa} s_l^-1 v_l u_l^T y, truncated at the effective rank.
    [[nodiscard]] Eigen::VectorXd weights(const Eigen::VectorXd& y, int kappa) const {
        const int r = std::min(kappa, effective_rank());
        const Eigen::VectorXd proj = u.leftCols(r).transpose() * y;
        return v.leftCols(r) * proj.cwiseQuotient(s.head(r));
    }
};

inline TransferWeights pcr_fit(const Eigen::MatrixXd& panel, const Eigen::VectorXd& target, int kappa) {
    detail::require(panel.rows() > 0 && panel.cols() > 0, "pcr_fit: empty panel");
    detail::require(target.size() == panel.rows(), "pcr_fit: target length " + std::to_string(target.size()) +
                                                       " != panel rows " + std::to_string(panel.rows()));
    const int max_k = static_cast<int>(std::min(panel.rows(), panel.cols()));
    detail::require(kappa >= 1 && kappa <= max_k,
                    "pcr_fit: kappa " + std::to_string(kappa) + " outside [1, " + std::to_string(max_k) + "]");
    detail::require(panel.allFinite() && target.allFinite(), "pcr_fit: non-finite input");
    const PanelSvd svd(panel);
    const int r = std::min(kappa, svd.effective_rank());
    if (r == 0) detail::fail_numerical("pcr_fit: donor panel has rank 0");
    TransferWeights w;
    w.weights = svd.weights(target, r);
    w.rank = r;
    w.spectrum.assign(svd.s.data(), svd.s.data() + svd.s.size());
    w.singvals.assign(svd.s.data(), svd.s.data() + r);
    return w;
}

inline TransferWeights pcr_fit(const DonorPanel& panel, const Eigen::VectorXd& target, int kappa) {
    panel.validate();
    return pcr_fit(panel.matrix, target, kappa);
}

inline double pcr_predict(const Eigen::VectorXd& donor_predictions, const TransferWeights& w) {
    detail::require(donor_predictions.size() == w.weights.size(),
                    "pcr_predict: " + std::to_string(donor_predictions.size()) + " donor predictions for " +
                        std::to_string(w.weights.size()) + " weights");
    return donor_predictions.dot(w.weights);
}

enum class KappaMethod { cv, elbow, fixed };

inline KappaMethod parse_kappa_method(const std::string& s) {
    if (s == "cv") return KappaMethod::cv;
    if (s == "elbow") return KappaMethod::elbow;
    if (s == "fixed") return KappaMethod::fixed;
    detail::fail_data("unknown kappa method '" + s + "' (expected cv, elbow or fixed)");
}

inline std::string to_string(KappaMethod m) {
    switch (m) {
        case KappaMethod::cv: return "cv";
        case KappaMethod::elbow: return "elbow";
        case KappaMethod::fixed: return "fixed";
    }
    return "cv";
}

struct KappaOptions {
    KappaMethod method = KappaMethod::cv;
    int fixed = 1;  // used by KappaMethod::fixed, clamped to min(rows, cols)
    int folds = 5;
    std::uint64_t seed = 0;
};

/// Index (1-based) maximizing s_l / s_{l+1}; a value below the rank floor
/// counts as an infinite gap.
inline int kappa_elbow(const Eigen::VectorXd& s) {
    if (s.size() == 0 || !(s(0) > 0.0)) return 1;
    const int r = [&] {
        int k = 0;
        while (k < s.size() && s(k) > kRankFloor * s(0)) ++k;
        return k;
    }();
    if (r < s.size()) return std::max(r, 1);
    int best = 1;
    double best_ratio = 0.0;
    for (int l = 0; l + 1 < s.size(); ++l) {
        const double ratio = s(l) / s(l + 1);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = l + 1;
        }
    }
    return best;
}

/// Held-out MSE for every kappa in [1, max_kappa] under k-fold CV over rows.
inline std::vector<double> pcr_cv_curve(const Eigen::MatrixXd& panel, const Eigen::VectorXd& target, int max_kappa,
                                        int folds, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(panel.rows());
    folds = std::min<int>(folds, static_cast<int>(n));
    detail::require(folds >= 2, "pcr cv: need at least 2 rows");
    const auto fold = fold_assignment(n, folds, seed);
    std::vector<double> sse(static_cast<std::size_t>(max_kappa), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        const Eigen::MatrixXd a = panel(train, Eigen::all);
        const Eigen::VectorXd y = target(train);
        const Eigen::MatrixXd at = panel(test, Eigen::all);
        const Eigen::VectorXd yt = target(test);
        const PanelSvd svd(a);
        const int r = svd.effective_rank();
        // Fitted test predictions accumulate one component at a time.
        Eigen::VectorXd pred = Eigen::VectorXd::Zero(yt.size());
        const Eigen::VectorXd proj = svd.u.transpose() * y;
        for (int k = 1; k <= max_kappa; ++k) {
            if (k <= r) pred += (at * svd.v.col(k - 1)) * (proj(k - 1) / svd.s(k - 1));
            sse[static_cast<std::size_t>(k - 1)] += (yt - pred).squaredNorm();
        }
    }
    for (double& v : sse) v /= static_cast<double>(n);
    return sse;
}

/// Smallest kappa attaining the minimal CV error (up to rounding).
inline int kappa_select(const Eigen::MatrixXd& panel, const Eigen::VectorXd& target, const KappaOptions& opts) {
    detail::require(panel.rows() > 0 && panel.cols() > 0, "kappa_select: empty panel");
    const int max_k = static_cast<int>(std::min(panel.rows(), panel.cols()));
    switch (opts.method) {
        case KappaMethod::fixed:
            detail::require(opts.fixed >= 1, "kappa_select: fixed kappa must be >= 1");
            return std::min(opts.fixed, max_k);
        case KappaMethod::elbow:
            return std::min(kappa_elbow(PanelSvd(panel).s), max_k);
        case KappaMethod::cv: {
            if (panel.rows() < 2) return 1;
            const auto curve = pcr_cv_curve(panel, target, max_k, opts.folds, opts.seed);
            const double best = *std::min_element(curve.begin(), curve.end());
            const double tol = 1e-9 * best + 1e-14;
            for (std::size_t k = 0; k < curve.size(); ++k)
                if (curve[k] <= best + tol) return static_cast<int>(k) + 1;
            return max_k;
        }
    }
    return 1;
}

/// Held-out MSE at one kappa (used for vertical rejection).
inline double pcr_cv_error(const Eigen::MatrixXd& panel, const Eigen::VectorXd& target, int kappa, int folds,
                           std::uint64_t seed) {
    if (panel.rows() < 2) return std::numeric_limits<double>::infinity();
    const auto curve = pcr_cv_curve(panel, target, kappa, folds, seed);
    return curve.back();
}

struct SpectrumReport {
    std::vector<double> singvals;
    std::vector<double> ratio_to_top;     // s_k / s_1 for k = 1..
    std::vector<double> energy_fraction;  // sum_{l<=k} s_l^2 / sum s_l^2
    double frobenius_mass = 0.0;          // ||M||_F^2 / (rows * cols)
};

inline SpectrumReport diagnostics(const Eigen::MatrixXd& panel) {
    detail::require(panel.rows() > 0 && panel.cols() > 0, "diagnostics: empty panel");
    const Eigen::VectorXd s = Eigen::BDCSVD<Eigen::MatrixXd>(panel).singularValues();
    SpectrumReport rep;
    rep.singvals.assign(s.data(), s.data() + s.size());
    const double total = s.squaredNorm();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        rep.ratio_to_top.push_back(s(0) > 0.0 ? s(k) / s(0) : 0.0);
        acc += s(k) * s(k);
        rep.energy_fraction.push_back(total > 0.0 ? acc / total : 0.0);
    }
    rep.frobenius_mass = panel.squaredNorm() / static_cast<double>(panel.rows() * panel.cols());
    return rep;
}

}  // namespace synthcombo
