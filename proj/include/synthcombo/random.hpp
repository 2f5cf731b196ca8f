#pragma once

// Seeded randomness. All streams derive from one root seed through named
// substreams so results do not depend on evaluation order or thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>
#include <vector>

namespace synthcombo {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for the substream identified by `path` under `root`.
inline std::uint64_t substream(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(root);
    for (std::uint64_t v : path) s = splitmix64(s ^ splitmix64(v + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    return Rng(substream(root, path));
}

// Stream tags, so that unrelated consumers of one root never collide.
namespace stream {
inline constexpr std::uint64_t kFolds = 1;
inline constexpr std::uint64_t kCartSplit = 2;
inline constexpr std::uint64_t kTruth = 3;
inline constexpr std::uint64_t kPattern = 4;
inline constexpr std::uint64_t kNoise = 5;
inline constexpr std::uint64_t kDesign = 6;
inline constexpr std::uint64_t kEvaluation = 7;
inline constexpr std::uint64_t kDonors = 8;
}  // namespace stream

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

/// Uniform integer in [0, n).
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

/// Fisher-Yates shuffle with our own index draws (std::shuffle is not
/// specified to be reproducible across standard libraries).
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

/// k distinct values from [0, n), sorted ascending (Floyd's algorithm).
inline std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k, Rng& rng) {
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(k) * 2);
    for (std::uint64_t j = n - k; j < n; ++j) {
        const std::uint64_t t = uniform_below(rng, j + 1);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
}

/// Symmetric Dirichlet(1) draw of dimension k.
inline std::vector<double> dirichlet_flat(std::size_t k, Rng& rng) {
    std::vector<double> g(k);
    double total = 0.0;
    for (double& x : g) {
        x = -std::log1p(-uniform01(rng));  // Gamma(1) == Exp(1)
        total += x;
    }
    for (double& x : g) x /= total;
    return g;
}

/// Successive weighted draws without replacement (each draw proportional to
/// the remaining weights), via Gumbel top-k keys. Zero-weight items are only
/// taken once every positive-weight item is exhausted, in random order.
inline std::vector<std::size_t> weighted_sample_without_replacement(const std::vector<double>& weights,
                                                                    std::size_t count, Rng& rng) {
    struct Keyed {
        bool positive;
        double key;
        std::size_t index;
    };
    std::vector<Keyed> keyed(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double u = uniform01(rng);
        const double gumbel = -std::log(-std::log(std::max(u, std::numeric_limits<double>::min())));
        const bool pos = weights[i] > 0.0;
        keyed[i] = {pos, pos ? std::log(weights[i]) + gumbel : gumbel, i};
    }
    auto better = [](const Keyed& a, const Keyed& b) {
        if (a.positive != b.positive) return a.positive;
        if (a.key != b.key) return a.key > b.key;
        return a.index < b.index;
    };
    count = std::min(count, keyed.size());
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end(), better);
    std::vector<std::size_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = keyed[i].index;
    return out;
}

/// Balanced k-fold labels for n items: a seeded shuffle, then round-robin.
inline std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, {stream::kFolds, n, static_cast<std::uint64_t>(k)});
    shuffle_in_place(order, rng);
    std::vector<int> fold(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    return fold;
}

}  // namespace synthcombo
