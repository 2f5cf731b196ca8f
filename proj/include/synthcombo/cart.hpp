#pragma once

// CART horizontal regression for k-Junta outcome functions. A greedy tree is
// grown on one half of a unit's observations to select relevant features;
// the Fourier coefficients over those features are then estimated as
// empirical inner products on the other half.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "synthcombo/errors.hpp"
#include "synthcombo/hypercube.hpp"
#include "synthcombo/random.hpp"
#include "synthcombo/sparse_regress.hpp"

namespace synthcombo {

inline constexpr int kMaxCartFeatures = 20;

struct CartNode {
    std::vector<std::size_t> rows;  // indices into the grown-on sample
    double mean = 0.0;
    double sse = 0.0;
    int depth = 0;
    Mask path_features = 0;  // features split on between the root and here
    int feature = -1;        // split feature, -1 for a leaf
    int child_pos = -1;      // x_feature = +1
    int child_neg = -1;      // x_feature = -1
    std::size_t created = 0;

    [[nodiscard]] bool is_leaf() const { return feature < 0; }
};

struct CartTree {
    int p = 1;
    int max_leaves = 1;
    std::vector<CartNode> nodes;  // nodes[0] is the root

    [[nodiscard]] std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const CartNode& n) { return n.is_leaf(); }));
    }

    [[nodiscard]] std::size_t internal_count() const { return nodes.size() - leaf_count(); }

    [[nodiscard]] Mask used_features() const {
        Mask m = 0;
        for (const auto& n : nodes)
            if (!n.is_leaf()) m |= Mask{1} << n.feature;
        return m;
    }

    [[nodiscard]] const CartNode& leaf_for(Mask combo) const {
        const CartNode* node = &nodes.front();
        while (!node->is_leaf())
            node = &nodes[static_cast<std::size_t>(((combo >> node->feature) & 1U) ? node->child_pos : node->child_neg)];
        return *node;
    }

    /// Leaf-only averaging.
    [[nodiscard]] double predict(Mask combo) const { return leaf_for(combo).mean; }
};

namespace detail {

struct NodeStats {
    double mean = 0.0;
    double sse = 0.0;
};

inline NodeStats node_stats(const RegressionSample& s, std::span<const std::size_t> rows) {
    NodeStats st;
    if (rows.empty()) return st;
    for (std::size_t r : rows) st.mean += s.outcomes[r];
    st.mean /= static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        const double d = s.outcomes[r] - st.mean;
        st.sse += d * d;
    }
    return st;
}

// SSE(t) - SSE(t_{j,+1}) - SSE(t_{j,-1}), from responses centred at the node
// mean so the result does not depend on the response offset.
inline double sse_reduction(const RegressionSample& s, std::span<const std::size_t> rows, int j, double node_mean) {
    double sum_pos = 0.0, sum_neg = 0.0;
    std::size_t cnt_pos = 0, cnt_neg = 0;
    for (std::size_t r : rows) {
        const double d = s.outcomes[r] - node_mean;
        if ((s.combos[r] >> j) & 1U) {
            sum_pos += d;
            ++cnt_pos;
        } else {
            sum_neg += d;
            ++cnt_neg;
        }
    }
    double red = 0.0;
    if (cnt_pos > 0) red += sum_pos * sum_pos / static_cast<double>(cnt_pos);
    if (cnt_neg > 0) red += sum_neg * sum_neg / static_cast<double>(cnt_neg);
    return std::max(0.0, red);
}

}  // namespace detail

/// (1/N(t)) [SSE(t) - SSE(t_{j,+1}) - SSE(t_{j,-1})] for the node holding
/// `rows`. Empty children contribute zero.
inline double impurity_decrease(const RegressionSample& sample, std::span<const std::size_t> rows, int feature) {
    detail::require(!rows.empty(), "impurity_decrease: empty node");
    detail::require(feature >= 0 && feature < sample.p, "impurity_decrease: feature outside [0, p)");
    const auto st = detail::node_stats(sample, rows);
    return detail::sse_reduction(sample, rows, feature, st.mean) / static_cast<double>(rows.size());
}

/// Best-first greedy growth up to `max_leaves` cells. Each step splits the
/// leaf/feature pair with the largest total SSE reduction N(t)*Delta(t, j)
/// (ties: lowest feature, then oldest leaf). When no split reduces SSE, an
/// impure leaf shallower than log2(max_leaves) may still split on its lowest
/// unused feature, which lets pure interactions be discovered.
inline CartTree cart_grow(const RegressionSample& sample, std::span<const std::size_t> rows, int max_leaves) {
    detail::require(max_leaves >= 1, "cart_grow: max_leaves must be >= 1");
    detail::require(!rows.empty(), "cart_grow: empty sample");
    CartTree tree;
    tree.p = sample.p;
    tree.max_leaves = max_leaves;

    CartNode root;
    root.rows.assign(rows.begin(), rows.end());
    const auto st = detail::node_stats(sample, root.rows);
    root.mean = st.mean;
    root.sse = st.sse;
    tree.nodes.push_back(std::move(root));

    const double zero_gain_eps = 1e-12 * std::max(1.0, tree.nodes[0].sse);
    const int zero_gain_depth = static_cast<int>(std::floor(std::log2(static_cast<double>(max_leaves)) + 1e-9));
    std::size_t leaves = 1;
    std::size_t clock = 1;

    while (leaves < static_cast<std::size_t>(max_leaves)) {
        int best_node = -1, best_feature = -1;
        double best_gain = 0.0;
        int fallback_node = -1, fallback_feature = -1;
        for (std::size_t idx = 0; idx < tree.nodes.size(); ++idx) {
            const CartNode& node = tree.nodes[idx];
            if (!node.is_leaf() || node.rows.size() < 2 || node.sse <= zero_gain_eps) continue;
            for (int j = 0; j < sample.p; ++j) {
                if ((node.path_features >> j) & 1U) continue;
                const double gain = detail::sse_reduction(sample, node.rows, j, node.mean);
                const bool better = gain > best_gain + zero_gain_eps ||
                                    (best_node >= 0 && std::abs(gain - best_gain) <= zero_gain_eps &&
                                     (j < best_feature ||
                                      (j == best_feature && node.created < tree.nodes[static_cast<std::size_t>(best_node)].created)));
                if (gain > zero_gain_eps && better) {
                    best_gain = gain;
                    best_node = static_cast<int>(idx);
                    best_feature = j;
                }
                if (fallback_node < 0 && node.depth < zero_gain_depth) {
                    fallback_node = static_cast<int>(idx);
                    fallback_feature = j;
                }
            }
        }
        if (best_node < 0) {
            if (fallback_node < 0) break;
            best_node = fallback_node;
            best_feature = fallback_feature;
        }

        CartNode pos, neg;
        const CartNode& parent = tree.nodes[static_cast<std::size_t>(best_node)];
        for (std::size_t r : parent.rows) (((sample.combos[r] >> best_feature) & 1U) ? pos : neg).rows.push_back(r);
        for (CartNode* child : {&pos, &neg}) {
            const auto cs = detail::node_stats(sample, child->rows);
            child->mean = cs.mean;
            child->sse = cs.sse;
            child->depth = parent.depth + 1;
            child->path_features = parent.path_features | (Mask{1} << best_feature);
            child->created = clock++;
        }
        const int pos_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(std::move(pos));
        tree.nodes.push_back(std::move(neg));
        CartNode& split = tree.nodes[static_cast<std::size_t>(best_node)];
        split.feature = best_feature;
        split.child_pos = pos_idx;
        split.child_neg = pos_idx + 1;
        ++leaves;
    }
    return tree;
}

inline CartTree cart_grow(const RegressionSample& sample, int max_leaves) {
    sample.validate();
    std::vector<std::size_t> rows(sample.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return cart_grow(sample, rows, max_leaves);
}

struct CartModel {
    int p = 1;
    Mask selected = 0;  // features appearing in the tree
    SparseFourierVector coeffs;
    std::vector<std::size_t> half_a;  // rows used to grow the tree
    std::vector<std::size_t> half_b;  // rows used to estimate coefficients
    CartTree tree;

    [[nodiscard]] double predict_mask(Mask combo) const { return coeffs.evaluate_mask(combo); }

    [[nodiscard]] std::vector<int> selected_features() const {
        std::vector<int> out;
        for (int j = 0; j < p; ++j)
            if ((selected >> j) & 1U) out.push_back(j);
        return out;
    }
};

/// Grows on rows `half_a`, then for every S within the selected features sets
/// alpha_S to the mean of Y * chi_S over rows `half_b`.
inline CartModel cart_fit_halves(const RegressionSample& sample, std::vector<std::size_t> half_a,
                                 std::vector<std::size_t> half_b, int max_leaves) {
    sample.validate();
    detail::require(!half_a.empty() && !half_b.empty(), "cart_fit: both halves must be nonempty");
    CartModel model;
    model.p = sample.p;
    model.tree = cart_grow(sample, half_a, max_leaves);
    model.selected = model.tree.used_features();
    if (std::popcount(model.selected) > kMaxCartFeatures)
        detail::fail_data("cart_fit: " + std::to_string(std::popcount(model.selected)) +
                          " selected features exceed 20; reduce --cart-nodes");
    model.coeffs = SparseFourierVector(sample.p);
    const double inv_b = 1.0 / static_cast<double>(half_b.size());
    // Enumerate every submask of the selected features, including the empty set.
    Mask sub = model.selected;
    while (true) {
        double acc = 0.0;
        for (std::size_t r : half_b) acc += sample.outcomes[r] * character_sign(sub, sample.combos[r]);
        model.coeffs.set(sub, acc * inv_b);
        if (sub == 0) break;
        sub = (sub - 1) & model.selected;
    }
    model.half_a = std::move(half_a);
    model.half_b = std::move(half_b);
    return model;
}

/// Seeded equal split (the first half receives the extra row when odd).
inline CartModel cart_fit(const RegressionSample& sample, int max_leaves, std::uint64_t seed) {
    sample.validate();
    detail::require(sample.size() >= 2, "cart_fit: need at least 2 samples");
    std::vector<std::size_t> order(sample.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, {stream::kCartSplit, sample.size()});
    shuffle_in_place(order, rng);
    const std::size_t na = (order.size() + 1) / 2;
    std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(na));
    std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(na), order.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return cart_fit_halves(sample, std::move(a), std::move(b), max_leaves);
}

}  // namespace synthcombo
