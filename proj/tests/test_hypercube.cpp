#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "synthcombo/hypercube.hpp"

using namespace synthcombo;

namespace {

// Direct O(4^p) transform: alpha_S = 2^-p sum_x f(x) prod_{i in S} x_i,
// computed from the +-1 vector v(pi) rather than from bit tricks.
std::vector<double> direct_transform(int p, const std::vector<double>& f) {
    const std::size_t n = std::size_t{1} << p;
    std::vector<double> out(n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
            const auto v = encode_combination(Combination(p, static_cast<Mask>(x)));
            int prod = 1;
            for (int i = 0; i < p; ++i)
                if ((s >> i) & 1U) prod *= v[static_cast<std::size_t>(i)];
            acc += f[x] * prod;
        }
        out[s] = acc / static_cast<double>(n);
    }
    return out;
}

std::vector<double> random_function(int p, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> f(std::size_t{1} << p);
    for (double& v : f) v = nd(rng);
    return f;
}

// 1-based member list, as written in the examples.
Combination combo1(int p, std::initializer_list<int> members) {
    Mask m = 0;
    for (int i : members) m |= Mask{1} << (i - 1);
    return Combination(p, m);
}

SubsetId subset1(int p, std::initializer_list<int> members) {
    Mask m = 0;
    for (int i : members) m |= Mask{1} << (i - 1);
    return SubsetId(p, m);
}

}  // namespace

TEST(Hypercube, EncodeCombinationExamples) {
    EXPECT_EQ(encode_combination(combo1(3, {})), (std::vector<int>{-1, -1, -1}));
    EXPECT_EQ(encode_combination(combo1(3, {1, 2, 3})), (std::vector<int>{1, 1, 1}));
    EXPECT_EQ(encode_combination(combo1(4, {2, 4})), (std::vector<int>{-1, 1, -1, 1}));
}

TEST(Hypercube, RejectsOutOfRangeMasks) {
    EXPECT_THROW(Combination(3, 8), DataError);
    EXPECT_THROW(Combination(0, 0), DataError);
    EXPECT_THROW(Combination(31, 0), DataError);
    EXPECT_NO_THROW(Combination(30, low_bits(30)));
}

TEST(Hypercube, CharacterValueExamples) {
    for (Mask x = 0; x < 8; ++x) EXPECT_EQ(character_value(SubsetId(3, 0), Combination(3, x)), 1);
    // S = {1,2}, v = (-1,-1,+1): (-1)(-1) = +1
    EXPECT_EQ(character_value(subset1(3, {1, 2}), combo1(3, {3})), 1);
    EXPECT_EQ(character_value(subset1(3, {1, 2}), combo1(3, {1, 3})), -1);
    EXPECT_THROW(character_value(SubsetId(3, 1), Combination(4, 1)), DataError);
}

TEST(Hypercube, CharacterMatchesProductOfSigns) {
    const int p = 6;
    for (Mask s = 0; s < 64; ++s)
        for (Mask x = 0; x < 64; ++x) {
            const auto v = encode_combination(Combination(p, x));
            int prod = 1;
            for (int i = 0; i < p; ++i)
                if ((s >> i) & 1U) prod *= v[static_cast<std::size_t>(i)];
            ASSERT_EQ(character_value(SubsetId(p, s), Combination(p, x)), prod);
        }
}

TEST(Hypercube, OrthonormalityExactInIntegers) {
    for (int p = 1; p <= 8; ++p) {
        const Mask n = Mask{1} << p;
        for (Mask s = 0; s < n; ++s)
            for (Mask t = 0; t < n; ++t) {
                long long acc = 0;
                for (Mask x = 0; x < n; ++x) acc += character_sign(s, x) * character_sign(t, x);
                ASSERT_EQ(acc, s == t ? static_cast<long long>(n) : 0LL) << "p=" << p << " s=" << s << " t=" << t;
            }
    }
}

TEST(Hypercube, EvaluateExamples) {
    SparseFourierVector empty(3);
    EXPECT_EQ(evaluate(empty, Combination(3, 5)), 0.0);

    SparseFourierVector constant(3, {{0, 3.5}});
    for (Mask x = 0; x < 8; ++x) EXPECT_EQ(evaluate(constant, Combination(3, x)), 3.5);

    SparseFourierVector a(2, {{subset1(2, {1}).bits, 2.0}, {subset1(2, {1, 2}).bits, -1.0}});
    EXPECT_DOUBLE_EQ(evaluate(a, combo1(2, {1})), 3.0);

    EXPECT_THROW(evaluate(a, Combination(3, 0)), DataError);
}

TEST(Hypercube, SparseVectorInvariants) {
    SparseFourierVector v(4);
    v.set(3, 1.0);
    v.set(1, 2.0);
    v.set(3, 0.0);
    v.add(7, 0.5);
    v.add(7, -0.5);
    EXPECT_EQ(v.nnz(), 1U);
    EXPECT_EQ(v.get(1), 2.0);
    EXPECT_THROW(v.set(16, 1.0), DataError);
    SparseFourierVector w(4, {{9, 1.0}, {2, 1.0}, {9, 1.0}});
    ASSERT_EQ(w.nnz(), 2U);
    EXPECT_EQ(w.entries()[0].first, 2U);
    EXPECT_EQ(w.get(9), 2.0);
}

TEST(Hypercube, WhtConstantAndCharacter) {
    const int p = 5;
    std::vector<double> f(32, 2.25);
    auto a = wht_forward(f);
    EXPECT_DOUBLE_EQ(a[0], 2.25);
    for (std::size_t s = 1; s < a.size(); ++s) EXPECT_EQ(a[s], 0.0);

    const Mask s0 = 0b10110;
    for (Mask x = 0; x < 32; ++x) f[x] = character_sign(s0, x);
    a = wht_forward(f);
    for (std::size_t s = 0; s < a.size(); ++s) EXPECT_DOUBLE_EQ(a[s], s == s0 ? 1.0 : 0.0);
    (void)p;
}

TEST(Hypercube, WhtMatchesDirectSummation) {
    const int p = 6;
    const auto f = random_function(p, 11);
    const auto fast = wht_forward(f);
    const auto slow = direct_transform(p, f);
    for (std::size_t s = 0; s < fast.size(); ++s) EXPECT_NEAR(fast[s], slow[s], 1e-12);
}

TEST(Hypercube, WhtRejectsBadLengths) {
    std::vector<double> f(12, 1.0);
    EXPECT_THROW(wht_forward(f), DataError);
    std::vector<double> one(1, 1.0);
    EXPECT_THROW(wht_forward(one), DataError);
}

TEST(Hypercube, WhtRoundtripAndParseval) {
    for (int p : {1, 3, 8, 14}) {
        const auto f = random_function(p, 100 + static_cast<unsigned>(p));
        const auto a = wht_forward(f);
        const auto back = wht_inverse(a);
        double energy_f = 0.0, energy_a = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            ASSERT_NEAR(back[i], f[i], 1e-12);
            energy_f += f[i] * f[i];
            energy_a += a[i] * a[i];
        }
        EXPECT_NEAR(energy_f / static_cast<double>(f.size()), energy_a, 1e-10);
    }
}

TEST(Hypercube, EvaluateAgreesWithTransform) {
    for (int p : {2, 7, 10}) {
        const auto f = random_function(p, 7 + static_cast<unsigned>(p));
        const auto alpha = SparseFourierVector::from_dense(p, wht_forward(f));
        for (Mask x = 0; x < (Mask{1} << p); ++x) ASSERT_NEAR(evaluate(alpha, Combination(p, x)), f[x], 1e-10);
        const auto cube = evaluate_cube(alpha);
        for (Mask x = 0; x < (Mask{1} << p); ++x) ASSERT_NEAR(cube[x], f[x], 1e-10);
    }
}

TEST(Hypercube, PermutationEncodingExamples) {
    EXPECT_EQ(encode_permutation(Permutation::identity(4)), (std::vector<int>(6, -1)));
    EXPECT_EQ(encode_permutation(Permutation({4, 3, 2, 1})), (std::vector<int>(6, 1)));
    // Pairs (1,2),(1,3),(1,4),(2,3),(2,4),(3,4).
    EXPECT_EQ(encode_permutation(Permutation({1, 3, 4, 2})), (std::vector<int>{-1, -1, -1, -1, 1, 1}));
    EXPECT_THROW(Permutation({1, 1, 2}), DataError);
    EXPECT_THROW(Permutation({0, 1, 2}), DataError);
}

TEST(Hypercube, PermutationEncodingProperties) {
    for (int p = 1; p <= 6; ++p) {
        std::vector<int> r(static_cast<std::size_t>(p));
        std::iota(r.begin(), r.end(), 1);
        std::set<std::vector<int>> seen;
        do {
            const Permutation t(r);
            const auto v = encode_permutation(t);
            ASSERT_EQ(v.size(), static_cast<std::size_t>(p * (p - 1) / 2));
            ASSERT_TRUE(seen.insert(v).second);
            // Reversing ranks (tau(i) -> p + 1 - tau(i)) flips every comparison.
            std::vector<int> rev(r.size());
            for (std::size_t i = 0; i < r.size(); ++i) rev[i] = p + 1 - r[i];
            const auto w = encode_permutation(Permutation(rev));
            for (std::size_t k = 0; k < v.size(); ++k) ASSERT_EQ(w[k], -v[k]);
        } while (std::next_permutation(r.begin(), r.end()));
    }
}
