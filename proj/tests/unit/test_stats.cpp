#include "doctest.h"

#include "tracelens/error.hpp"
#include "tracelens/random.hpp"
#include "tracelens/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

using namespace tracelens;
using namespace tracelens::stats;
using doctest::Approx;

namespace {

std::vector<double> draw(Rng& rng, std::size_t n, int levels) {
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng.integer(0, levels));
    return v;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Two-sided p = 2 * min(lower, upper) tail of the first sample's rank sum,
// enumerating every assignment of the pooled midranks.
double brute_mwu_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = average_ranks(pooled);
    const std::size_t n = pooled.size();
    const std::size_t m = a.size();
    double observed = 0;
    for (std::size_t i = 0; i < m; ++i) observed += ranks[i];

    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(m), true);
    double lower = 0, upper = 0, total = 0;
    do {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pick[i]) s += ranks[i];
        }
        total += 1;
        if (s <= observed + 1e-9) lower += 1;
        if (s >= observed - 1e-9) upper += 1;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

} // namespace

TEST_CASE("mean and standard deviations") {
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    CHECK(mean(v) == 5.0);
    CHECK(population_std(v) == Approx(2.0));
    CHECK(sample_std(v) == Approx(std::sqrt(32.0 / 7.0)));
    const std::vector<double> one{3};
    CHECK(sample_std(one) == 0.0);
}

TEST_CASE("average ranks share ties") {
    const std::vector<double> v{10, 20, 20, 5};
    CHECK(average_ranks(v) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("scott bin width") {
    std::vector<double> v(1000);
    Rng rng(1);
    for (auto& x : v) x = rng.normal();
    const double sigma = sample_std(v);
    CHECK(scott_bin_width(v) == Approx(3.49 * sigma / 10.0).epsilon(1e-12));

    // n = 8 with sample std 2: symmetric values around 0
    const double s = 2.0 * std::sqrt(7.0 / 8.0);
    const std::vector<double> eight{-s, -s, -s, -s, s, s, s, s};
    CHECK(sample_std(eight) == Approx(2.0));
    CHECK(scott_bin_width(eight) == Approx(3.49));

    const std::vector<double> flat{4, 4, 4};
    CHECK_THROWS_AS(scott_bin_width(flat), DegenerateError);
    const std::vector<double> single{1};
    CHECK_THROWS_AS(scott_bin_width(single), PreconditionError);
}

TEST_CASE("binning spec") {
    CHECK(BinningSpec(0.25).bin_count() == 4);
    CHECK(BinningSpec(0.3).bin_count() == 4);
    CHECK(BinningSpec(5.0).bin_count() == 1);
    CHECK_THROWS(BinningSpec(0.0));
    CHECK_THROWS(BinningSpec(-1.0));
}

TEST_CASE("shannon entropy examples") {
    const std::vector<double> flat{5, 5, 5, 5};
    CHECK(shannon_entropy(flat, BinningSpec(0.1)) == 0.0);

    // normalized to 0, 1/3, 2/3, 1 with width 0.3: bins 0, 1, 2, 3
    const std::vector<double> four{0, 1, 2, 3};
    CHECK(shannon_entropy(four, BinningSpec(0.3)) == Approx(2.0));

    const std::vector<double> eight{0, 0.1, 0.2, 0.1, 0.3, 0.0, 1.0, 0.9};
    const double want = -(0.75 * std::log2(0.75) + 0.25 * std::log2(0.25));
    CHECK(shannon_entropy(eight, BinningSpec(0.5)) == Approx(want));
    CHECK(want == Approx(0.811).epsilon(1e-3));
}

TEST_CASE("entropy is bounded by occupied bins") {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        const auto v = draw(rng, 2 + rng.index(60), 20);
        const BinningSpec spec(0.02 + rng.uniform() * 0.5);
        const double h = shannon_entropy(v, spec);
        CHECK(h >= 0.0);
        CHECK(h <= std::log2(static_cast<double>(spec.bin_count())) + 1e-12);
        CHECK(h <= std::log2(static_cast<double>(v.size())) + 1e-12);
    }
}

TEST_CASE("coefficient of variation") {
    const std::vector<double> same{7, 7, 7};
    CHECK(coefficient_of_variation(same) == 0.0);
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    CHECK(coefficient_of_variation(v) == Approx(0.4));
    const std::vector<double> zeros{0, 0, 0};
    CHECK_THROWS_AS(coefficient_of_variation(zeros), DegenerateError);
}

TEST_CASE("spearman rho") {
    const std::vector<double> x{1, 2, 3};
    CHECK(spearman_rho(x, std::vector<double>{10, 20, 30}) == Approx(1.0));
    CHECK(spearman_rho(x, std::vector<double>{30, 20, 10}) == Approx(-1.0));

    // ranks of x: 1, 2.5, 2.5, 4; ranks of y: 1, 3, 2, 4
    const std::vector<double> rx{1, 2.5, 2.5, 4};
    const std::vector<double> ry{1, 3, 2, 4};
    CHECK(spearman_rho(std::vector<double>{1, 2, 2, 4}, std::vector<double>{1, 3, 2, 4}) ==
          Approx(pearson(rx, ry)).epsilon(1e-12));

    CHECK_THROWS_AS(spearman_rho(x, std::vector<double>{1, 1, 1}), DegenerateError);
}

TEST_CASE("spearman rho is invariant under increasing transforms") {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 3 + rng.index(40);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform(-5, 5);
            y[i] = x[i] + rng.normal();
        }
        std::vector<double> fx(n), gy(n);
        for (std::size_t i = 0; i < n; ++i) {
            fx[i] = std::exp(x[i]);
            gy[i] = y[i] * y[i] * y[i] + 7.0;
        }
        const double r = spearman_rho(x, y);
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
        CHECK(spearman_rho(fx, gy) == Approx(r).epsilon(1e-12));
    }
}

TEST_CASE("mann whitney examples") {
    const std::vector<double> a{1, 2, 3, 4, 5};
    const auto same = mann_whitney_u(a, a);
    CHECK(same.u == 12.5);
    CHECK(same.p_two_sided == Approx(1.0));

    const auto r = mann_whitney_u(std::vector<double>{1, 2}, std::vector<double>{3, 4});
    CHECK(r.exact);
    CHECK(r.p_two_sided == Approx(2.0 / 6.0).epsilon(1e-12));

    std::vector<double> lo(30), hi(30);
    std::iota(lo.begin(), lo.end(), 1.0);
    std::iota(hi.begin(), hi.end(), 31.0);
    const auto sep = mann_whitney_u(lo, hi);
    CHECK_FALSE(sep.exact);
    CHECK(sep.p_two_sided < 0.01);
    CHECK(sep.u == 0.0);
}

TEST_CASE("mann whitney exact p matches enumeration") {
    Rng rng(21);
    for (int t = 0; t < 40; ++t) {
        const std::size_t na = 1 + rng.index(7);
        const std::size_t nb = 1 + rng.index(7);
        const auto a = draw(rng, na, 6);
        const auto b = draw(rng, nb, 6);
        const auto r = mann_whitney_u(a, b);
        REQUIRE(r.exact);
        CHECK(r.p_two_sided == Approx(brute_mwu_p(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("mann whitney symmetry and range") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const auto a = draw(rng, 1 + rng.index(40), 50);
        const auto b = draw(rng, 1 + rng.index(40), 50);
        const auto ab = mann_whitney_u(a, b);
        const auto ba = mann_whitney_u(b, a);
        CHECK(ab.p_two_sided == Approx(ba.p_two_sided).epsilon(1e-12));
        CHECK(ab.u + ba.u == Approx(static_cast<double>(a.size() * b.size())));
        CHECK(ab.p_two_sided >= 0.0);
        CHECK(ab.p_two_sided <= 1.0);
    }
}

TEST_CASE("cliffs delta") {
    const std::vector<double> a{1, 2, 3};
    const auto z = cliffs_delta(a, a);
    CHECK(z.delta == 0.0);
    CHECK(z.effect_class == EffectClass::Negligible);

    const auto full = cliffs_delta(std::vector<double>{3, 4}, std::vector<double>{1, 2});
    CHECK(full.delta == 1.0);
    CHECK(full.effect_class == EffectClass::Large);

    const auto mixed = cliffs_delta(std::vector<double>{1, 3}, std::vector<double>{2, 4});
    CHECK(mixed.delta == -0.5);
    CHECK(mixed.effect_class == EffectClass::Large);
}

TEST_CASE("effect class thresholds") {
    CHECK(classify_delta(0.0) == EffectClass::Negligible);
    CHECK(classify_delta(0.1469) == EffectClass::Negligible);
    CHECK(classify_delta(0.147) == EffectClass::Small);
    CHECK(classify_delta(-0.2) == EffectClass::Small);
    CHECK(classify_delta(0.33) == EffectClass::Medium);
    CHECK(classify_delta(0.4739) == EffectClass::Medium);
    CHECK(classify_delta(0.474) == EffectClass::Large);
    CHECK(classify_delta(-1.0) == EffectClass::Large);
    for (auto c : {EffectClass::Negligible, EffectClass::Small, EffectClass::Medium, EffectClass::Large}) {
        CHECK(effect_class_from_string(to_string(c)) == c);
    }
}

TEST_CASE("quartiles") {
    const auto q = quartiles(std::vector<double>{8, 7, 6, 5, 4, 3, 2, 1});
    CHECK(q.q1 == Approx(2.75));
    CHECK(q.q3 == Approx(6.25));
    const auto c = quartiles(std::vector<double>{4, 4, 4, 4, 4});
    CHECK(c.q1 == 4.0);
    CHECK(c.q3 == 4.0);
    const auto s = quartiles(std::vector<double>{1, 2, 3, 4});
    CHECK(s.q1 == Approx(1.75));
    CHECK(s.q3 == Approx(3.25));
    CHECK_THROWS_AS(quartiles(std::vector<double>{1, 2, 3}), PreconditionError);
}

TEST_CASE("zscore filter") {
    const std::vector<double> flat{2, 2, 2, 2};
    CHECK(zscore_filter(flat, 3.0).size() == 4);
    const std::vector<double> spike{0, 0, 0, 0, 100};
    CHECK(zscore_filter(spike, 1.0) == std::vector<std::size_t>{0, 1, 2, 3});
    Rng rng(9);
    const auto v = draw(rng, 50, 1000);
    CHECK(zscore_filter(v, std::numeric_limits<double>::infinity()).size() == 50);
}

TEST_CASE("required sample size") {
    CHECK(required_sample_size(2500, 0.95, 0.05) == 333);
    CHECK(required_sample_size(1000000000, 0.95, 0.05) == 385);
    std::int64_t prev = 0;
    for (double conf : {0.5, 0.8, 0.9, 0.95, 0.99, 0.999, 0.999999}) {
        const auto n = required_sample_size(500, conf, 0.05);
        CHECK(n <= 500);
        CHECK(n >= prev);
        prev = n;
    }
}

TEST_CASE("mann whitney calibration under the null") {
    Rng rng(2024);
    int rejections = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> a(30), b(30);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        if (mann_whitney_u(a, b).p_two_sided < 0.05) ++rejections;
    }
    CHECK(rejections >= 30);
    CHECK(rejections <= 70);
}
