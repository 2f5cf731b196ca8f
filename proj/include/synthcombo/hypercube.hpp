#pragma once

// Boolean-hypercube substrate: combination and subset bitmasks, parity
// characters, sparse Fourier vectors, the fast Walsh-Hadamard transform, and
// the pairwise-comparison encoding of permutations.
//
// Conventions: intervention i (0-based) is bit i of a mask. A combination
// encodes to x in {-1,+1}^p with x_i = +1 iff bit i is set, and the character
// of subset S is chi_S(x) = prod_{i in S} x_i = (-1)^{|S \ pi|}. Dense
// coefficient vectors are indexed by the subset bitmask.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "synthcombo/errors.hpp"

namespace synthcombo {

using Mask = std::uint32_t;

inline constexpr int kMaxInterventions = 30;
inline constexpr int kMaxTransformDim = 24;

inline constexpr Mask low_bits(int p) {
    return p >= 32 ? ~Mask{0} : ((Mask{1} << p) - 1U);
}

/// +1 or -1: the character chi_subset evaluated at the combination `combo`.
inline constexpr int character_sign(Mask subset, Mask combo) {
    return 1 - 2 * static_cast<int>(std::popcount(subset & ~combo) & 1U);
}

namespace detail {

template <typename Tag>
struct BitSet {
    int p = 0;
    Mask bits = 0;

    constexpr BitSet() = default;

    constexpr BitSet(int p_, Mask bits_) : p(p_), bits(bits_) {
        require(p_ >= 1 && p_ <= kMaxInterventions,
                "intervention count p=" + std::to_string(p_) + " outside [1, 30]");
        require((bits_ & ~low_bits(p_)) == 0,
                "mask " + std::to_string(bits_) + " uses bits beyond p=" + std::to_string(p_));
    }

    /// Builds from 0-based member indices.
    static BitSet from_members(int p_, std::initializer_list<int> members) {
        Mask m = 0;
        for (int i : members) {
            require(i >= 0 && i < p_, "member index " + std::to_string(i) + " outside [0, p)");
            m |= Mask{1} << i;
        }
        return BitSet(p_, m);
    }

    [[nodiscard]] constexpr bool contains(int i) const { return ((bits >> i) & 1U) != 0; }
    [[nodiscard]] constexpr int size() const { return std::popcount(bits); }

    friend constexpr bool operator==(const BitSet&, const BitSet&) = default;
    friend constexpr auto operator<=>(const BitSet&, const BitSet&) = default;
};

struct CombinationTag {};
struct SubsetTag {};

}  // namespace detail

/// A subset pi of the p interventions.
using Combination = detail::BitSet<detail::CombinationTag>;
/// A subset S of [p] indexing the character chi_S.
using SubsetId = detail::BitSet<detail::SubsetTag>;

/// v(pi): entry i is +1 iff intervention i is in pi.
inline std::vector<int> encode_combination(const Combination& c) {
    std::vector<int> v(static_cast<std::size_t>(c.p));
    for (int i = 0; i < c.p; ++i) v[static_cast<std::size_t>(i)] = c.contains(i) ? 1 : -1;
    return v;
}

inline int character_value(const SubsetId& s, const Combination& c) {
    detail::require(s.p == c.p, "character_value: subset has p=" + std::to_string(s.p) +
                                    " but combination has p=" + std::to_string(c.p));
    return character_sign(s.bits, c.bits);
}

/// Sparse map from subset bitmask to coefficient. Entries are kept sorted by
/// key with no duplicates and no stored zeros.
class SparseFourierVector {
public:
    using Entry = std::pair<Mask, double>;

    SparseFourierVector() = default;

    explicit SparseFourierVector(int p) : p_(p) {
        detail::require(p >= 1 && p <= kMaxInterventions, "SparseFourierVector: p outside [1, 30]");
    }

    SparseFourierVector(int p, std::vector<Entry> entries) : SparseFourierVector(p) {
        for (const auto& [k, v] : entries) add(k, v);
    }

    /// Keeps entries with |value| > drop_below.
    static SparseFourierVector from_dense(int p, std::span<const double> dense, double drop_below = 0.0) {
        detail::require(dense.size() == (std::size_t{1} << p), "from_dense: length must be 2^p");
        SparseFourierVector out(p);
        for (std::size_t s = 0; s < dense.size(); ++s) {
            if (std::abs(dense[s]) > drop_below) out.entries_.emplace_back(static_cast<Mask>(s), dense[s]);
        }
        return out;
    }

    [[nodiscard]] int p() const { return p_; }
    [[nodiscard]] std::size_t nnz() const { return entries_.size(); }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }

    [[nodiscard]] double get(Mask subset) const {
        auto it = find(subset);
        return (it != entries_.end() && it->first == subset) ? it->second : 0.0;
    }

    /// Sets the coefficient; a zero value removes the entry.
    void set(Mask subset, double value) {
        check_key(subset);
        auto it = find(subset);
        const bool present = it != entries_.end() && it->first == subset;
        if (value == 0.0) {
            if (present) entries_.erase(it);
        } else if (present) {
            it->second = value;
        } else {
            entries_.insert(it, {subset, value});
        }
    }

    void add(Mask subset, double delta) { set(subset, get(subset) + delta); }

    [[nodiscard]] std::vector<Mask> support() const {
        std::vector<Mask> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.first);
        return out;
    }

    [[nodiscard]] std::vector<double> to_dense() const {
        detail::require(p_ <= kMaxTransformDim, "to_dense: p too large");
        std::vector<double> out(std::size_t{1} << p_, 0.0);
        for (const auto& [k, v] : entries_) out[k] = v;
        return out;
    }

    /// Sum of squared coefficients over nonempty subsets; the variance of the
    /// represented function under the uniform distribution on the cube.
    [[nodiscard]] double variance() const {
        double acc = 0.0;
        for (const auto& [k, v] : entries_)
            if (k != 0) acc += v * v;
        return acc;
    }

    [[nodiscard]] double evaluate_mask(Mask combo) const {
        double acc = 0.0;
        for (const auto& [k, v] : entries_) acc += v * character_sign(k, combo);
        return acc;
    }

    friend bool operator==(const SparseFourierVector&, const SparseFourierVector&) = default;

private:
    std::vector<Entry>::iterator find(Mask subset) {
        return std::lower_bound(entries_.begin(), entries_.end(), subset,
                                [](const Entry& e, Mask k) { return e.first < k; });
    }
    [[nodiscard]] std::vector<Entry>::const_iterator find(Mask subset) const {
        return std::lower_bound(entries_.begin(), entries_.end(), subset,
                                [](const Entry& e, Mask k) { return e.first < k; });
    }
    void check_key(Mask subset) const {
        detail::require((subset & ~low_bits(p_)) == 0, "subset key uses bits beyond p");
    }

    int p_ = 1;
    std::vector<Entry> entries_;
};

inline double evaluate(const SparseFourierVector& alpha, const Combination& c) {
    detail::require(alpha.p() == c.p, "evaluate: dimension mismatch");
    return alpha.evaluate_mask(c.bits);
}

/// Unnormalised in-place butterfly: out[S] = sum_x in[x] (-1)^{|S & x|}.
inline void hadamard_butterfly(std::span<double> data) {
    const std::size_t n = data.size();
    for (std::size_t h = 1; h < n; h <<= 1) {
        for (std::size_t i = 0; i < n; i += h << 1) {
            for (std::size_t j = i; j < i + h; ++j) {
                const double a = data[j];
                const double b = data[j + h];
                data[j] = a + b;
                data[j + h] = a - b;
            }
        }
    }
}

namespace detail {

inline int log2_exact(std::size_t n) {
    require(n >= 2 && std::has_single_bit(n), "transform length " + std::to_string(n) +
                                                  " is not a power of two >= 2");
    const int p = std::countr_zero(n);
    require(p <= kMaxTransformDim, "transform dimension p=" + std::to_string(p) + " exceeds 24");
    return p;
}

// Our characters carry an extra (-1)^{|S|} relative to the butterfly kernel.
inline void flip_odd_subsets(std::span<double> data) {
    for (std::size_t s = 0; s < data.size(); ++s)
        if (std::popcount(s) & 1U) data[s] = -data[s];
}

}  // namespace detail

/// alpha_S = 2^{-p} sum_x f(x) chi_S(x), with f indexed by combination mask.
inline std::vector<double> wht_forward(std::span<const double> values) {
    const int p = detail::log2_exact(values.size());
    std::vector<double> out(values.begin(), values.end());
    hadamard_butterfly(out);
    detail::flip_odd_subsets(out);
    const double scale = std::ldexp(1.0, -p);
    for (double& v : out) v *= scale;
    return out;
}

/// f(x) = sum_S alpha_S chi_S(x).
inline std::vector<double> wht_inverse(std::span<const double> coeffs) {
    detail::log2_exact(coeffs.size());
    std::vector<double> out(coeffs.begin(), coeffs.end());
    detail::flip_odd_subsets(out);
    hadamard_butterfly(out);
    return out;
}

/// Values of alpha at every combination of the cube, indexed by mask.
inline std::vector<double> evaluate_cube(const SparseFourierVector& alpha) {
    return wht_inverse(alpha.to_dense());
}

/// A ranking of p items; ranks[i] is the (1-based) rank of item i.
struct Permutation {
    std::vector<int> ranks;

    Permutation() = default;
    explicit Permutation(std::vector<int> r) : ranks(std::move(r)) {
        const int p = static_cast<int>(ranks.size());
        detail::require(p >= 1, "permutation must have at least one item");
        std::vector<bool> seen(ranks.size(), false);
        for (int v : ranks) {
            detail::require(v >= 1 && v <= p && !seen[static_cast<std::size_t>(v - 1)],
                            "ranks are not a permutation of 1.." + std::to_string(p));
            seen[static_cast<std::size_t>(v - 1)] = true;
        }
    }

    static Permutation identity(int p) {
        std::vector<int> r(static_cast<std::size_t>(p));
        for (int i = 0; i < p; ++i) r[static_cast<std::size_t>(i)] = i + 1;
        return Permutation(std::move(r));
    }

    [[nodiscard]] int p() const { return static_cast<int>(ranks.size()); }

    friend bool operator==(const Permutation&, const Permutation&) = default;
};

inline constexpr int pair_count(int p) { return p * (p - 1) / 2; }

/// Pairwise-comparison encoding: one coordinate per pair (i, j), i < j, in
/// lexicographic order; +1 if tau(i) > tau(j), else -1.
inline std::vector<int> encode_permutation(const Permutation& t) {
    const int p = t.p();
    std::vector<int> v;
    v.reserve(static_cast<std::size_t>(pair_count(p)));
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            v.push_back(t.ranks[static_cast<std::size_t>(i)] > t.ranks[static_cast<std::size_t>(j)] ? 1 : -1);
    return v;
}

}  // namespace synthcombo
