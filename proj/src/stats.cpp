#include "tracelens/stats.hpp"

#include "tracelens/error.hpp"
#include "tracelens/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace tracelens::stats {

double mean(std::span<const double> values) {
    if (values.empty()) {
        throw PreconditionError("mean of empty vector");
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

namespace {

double sum_sq_dev(std::span<const double> values, double m) {
    double ss = 0.0;
    for (double v : values) {
        const double d = v - m;
        ss += d * d;
    }
    return ss;
}

} // namespace

double sample_std(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    return std::sqrt(sum_sq_dev(values, m) / static_cast<double>(values.size() - 1));
}

double population_std(std::span<const double> values) {
    const double m = mean(values);
    return std::sqrt(sum_sq_dev(values, m) / static_cast<double>(values.size()));
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

BinningSpec::BinningSpec(double width) : bin_width(width) {
    if (!(width > 0.0) || !std::isfinite(width)) {
        throw PreconditionError("bin width must be positive and finite");
    }
}

std::size_t BinningSpec::bin_count() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(1.0 / bin_width)));
}

double scott_bin_width(std::span<const double> values) {
    if (values.size() < 2) {
        throw PreconditionError("scott_bin_width needs at least 2 values");
    }
    const double sigma = sample_std(values);
    if (sigma == 0.0) {
        throw DegenerateError("scott_bin_width: constant input");
    }
    return 3.49 * sigma * std::pow(static_cast<double>(values.size()), -1.0 / 3.0);
}

double shannon_entropy(std::span<const double> values, const BinningSpec& spec) {
    if (values.empty()) {
        throw PreconditionError("shannon_entropy of empty vector");
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (range == 0.0) return 0.0;

    const std::size_t bins = spec.bin_count();
    std::vector<std::size_t> counts(bins, 0);
    for (double v : values) {
        const double x = (v - lo) / range;
        auto k = static_cast<std::size_t>(std::floor(x / spec.bin_width));
        counts[std::min(k, bins - 1)] += 1;
    }
    const double n = static_cast<double>(values.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

double coefficient_of_variation(std::span<const double> values) {
    if (values.size() < 2) {
        throw PreconditionError("coefficient_of_variation needs at least 2 values");
    }
    const double m = mean(values);
    if (m == 0.0) {
        throw DegenerateError("coefficient_of_variation: zero mean");
    }
    return population_std(values) / m;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw PreconditionError("spearman_rho: length mismatch");
    }
    if (x.size() < 3) {
        throw PreconditionError("spearman_rho needs at least 3 pairs");
    }
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double mx = mean(rx);
    const double my = mean(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateError("spearman_rho: zero rank variance");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Exact two-sided p for the doubled (mid)rank sum of a subset of size m drawn
// from `doubled_ranks`, given the observed doubled sum.
double exact_rank_sum_p(const std::vector<std::int64_t>& doubled_ranks, std::size_t m, std::int64_t observed) {
    std::int64_t total_sum = 0;
    for (auto r : doubled_ranks) total_sum += r;
    const auto max_sum = static_cast<std::size_t>(total_sum);

    // ways[k][s]: subsets of size k with doubled rank sum s. Counts stay below
    // 2^53 for every (n, m) allowed by mwu_exact_limit, so doubles are exact.
    std::vector<std::vector<double>> ways(m + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t i = 0; i < doubled_ranks.size(); ++i) {
        const auto r = static_cast<std::size_t>(doubled_ranks[i]);
        reach += r;
        for (std::size_t k = std::min(m, i + 1); k >= 1; --k) {
            auto& dst = ways[k];
            const auto& src = ways[k - 1];
            for (std::size_t s = std::min(reach, max_sum); s >= r; --s) {
                dst[s] += src[s - r];
                if (s == r) break;
            }
        }
    }
    double total = 0.0, lower = 0.0, upper = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
        const double w = ways[m][s];
        if (w == 0.0) continue;
        total += w;
        if (static_cast<std::int64_t>(s) <= observed) lower += w;
        if (static_cast<std::int64_t>(s) >= observed) upper += w;
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

} // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw PreconditionError("mann_whitney_u needs two non-empty samples");
    }
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    std::vector<double> pooled;
    pooled.reserve(na + nb);
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = average_ranks(pooled);

    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranks[i];
    const double dna = static_cast<double>(na);
    const double dnb = static_cast<double>(nb);

    MannWhitneyResult out;
    out.u = rank_sum_a - dna * (dna + 1.0) / 2.0;

    if (na * nb <= mwu_exact_limit) {
        // Midranks are multiples of 1/2; doubling keeps the DP on integers.
        std::vector<std::int64_t> doubled(ranks.size());
        for (std::size_t i = 0; i < ranks.size(); ++i) doubled[i] = std::llround(2.0 * ranks[i]);
        const bool use_a = na <= nb;
        std::int64_t observed = 0;
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            if ((i < na) == use_a) observed += doubled[i];
        }
        out.p_two_sided = exact_rank_sum_p(doubled, use_a ? na : nb, observed);
        out.exact = true;
        return out;
    }

    // Tie correction sum of (t^3 - t) over tie groups.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double n = dna + dnb;
    const double mu = dna * dnb / 2.0;
    const double var = dna * dnb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
        out.p_two_sided = 1.0;
        return out;
    }
    const double z = std::max(0.0, std::fabs(out.u - mu) - 0.5) / std::sqrt(var);
    out.p_two_sided = std::min(1.0, 2.0 * special::normal_sf(z));
    return out;
}

std::string_view to_string(EffectClass c) {
    switch (c) {
    case EffectClass::Negligible: return "negligible";
    case EffectClass::Small: return "small";
    case EffectClass::Medium: return "medium";
    case EffectClass::Large: return "large";
    }
    return "negligible";
}

EffectClass effect_class_from_string(std::string_view s) {
    if (s == "negligible") return EffectClass::Negligible;
    if (s == "small") return EffectClass::Small;
    if (s == "medium") return EffectClass::Medium;
    if (s == "large") return EffectClass::Large;
    throw ParseError("unknown effect class '" + std::string(s) + "'");
}

EffectClass classify_delta(double delta) {
    const double m = std::fabs(delta);
    if (m < 0.147) return EffectClass::Negligible;
    if (m < 0.33) return EffectClass::Small;
    if (m < 0.474) return EffectClass::Medium;
    return EffectClass::Large;
}

EffectSize cliffs_delta(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw PreconditionError("cliffs_delta needs two non-empty samples");
    }
    std::vector<double> sorted_b(b.begin(), b.end());
    std::sort(sorted_b.begin(), sorted_b.end());
    std::int64_t greater = 0;
    std::int64_t less = 0;
    for (double x : a) {
        const auto lo = std::lower_bound(sorted_b.begin(), sorted_b.end(), x);
        const auto hi = std::upper_bound(lo, sorted_b.end(), x);
        greater += lo - sorted_b.begin();
        less += sorted_b.end() - hi;
    }
    EffectSize es;
    es.delta = static_cast<double>(greater - less) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    es.effect_class = classify_delta(es.delta);
    return es;
}

double quantile(std::span<const double> values, double p) {
    if (values.empty()) {
        throw PreconditionError("quantile of empty vector");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::span<const double> values) {
    if (values.size() < 4) {
        throw PreconditionError("quartiles need at least 4 values");
    }
    return {quantile(values, 0.25), quantile(values, 0.75)};
}

std::vector<std::size_t> zscore_filter(std::span<const double> values, double limit) {
    std::vector<std::size_t> kept;
    if (values.empty()) return kept;
    const double m = mean(values);
    const double sd = sample_std(values);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (sd == 0.0 || std::fabs((values[i] - m) / sd) <= limit) kept.push_back(i);
    }
    return kept;
}

std::int64_t required_sample_size(std::int64_t population, double confidence, double margin) {
    if (population <= 0) {
        throw PreconditionError("population must be positive");
    }
    if (!(confidence > 0.0 && confidence < 1.0) || !(margin > 0.0 && margin < 1.0)) {
        throw PreconditionError("confidence and margin must lie in (0, 1)");
    }
    const double z = special::normal_quantile(1.0 - (1.0 - confidence) / 2.0);
    const double n0 = z * z * 0.25 / (margin * margin);
    const double big_n = static_cast<double>(population);
    const double n = n0 / (1.0 + n0 / big_n);
    return std::min(population, static_cast<std::int64_t>(std::ceil(n)));
}

} // namespace tracelens::stats
