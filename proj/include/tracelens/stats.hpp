#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace tracelens::stats {

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator). Zero for n < 2.
double sample_std(std::span<const double> values);
// Population standard deviation (n denominator).
double population_std(std::span<const double> values);

// 1-based ranks with ties sharing the average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Fixed-width bins over the min-max normalized domain [0, 1].
struct BinningSpec {
    double bin_width{1.0};

    explicit BinningSpec(double width);
    std::size_t bin_count() const;
};

// Scott's rule h = 3.49 * sigma * n^(-1/3), sigma the sample std.
// Throws DegenerateError for constant input, PreconditionError for n < 2.
double scott_bin_width(std::span<const double> values);

// Shannon entropy in bits of the binned, min-max normalized values.
// Constant input has entropy 0.
double shannon_entropy(std::span<const double> values, const BinningSpec& spec);

// Population std / mean. Throws DegenerateError when the mean is zero.
double coefficient_of_variation(std::span<const double> values);

// Pearson correlation of average ranks. Throws DegenerateError when either
// rank vector has zero variance.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct MannWhitneyResult {
    double u{0.0};  // U statistic of the first sample
    double p_two_sided{1.0};
    bool exact{false};
};

// Largest |a|*|b| for which the exact permutation distribution is used.
inline constexpr std::size_t mwu_exact_limit = 400;

// Two-sided Mann-Whitney U test. Uses the exact permutation distribution of
// the (mid)rank sum for small samples, otherwise the normal approximation
// with tie and continuity corrections.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

enum class EffectClass { Negligible = 0, Small = 1, Medium = 2, Large = 3 };

std::string_view to_string(EffectClass c);
EffectClass effect_class_from_string(std::string_view s);
// |delta| < 0.147 Negligible, < 0.33 Small, < 0.474 Medium, else Large.
EffectClass classify_delta(double delta);

struct EffectSize {
    double delta{0.0};
    EffectClass effect_class{EffectClass::Negligible};
};

// Cliff's delta: P(a > b) - P(a < b) over all pairs.
EffectSize cliffs_delta(std::span<const double> a, std::span<const double> b);

struct Quartiles {
    double q1{0.0};
    double q3{0.0};
};

// Linear-interpolation quantile on sorted data (position p * (n - 1)).
double quantile(std::span<const double> values, double p);
// Throws PreconditionError for fewer than 4 values.
Quartiles quartiles(std::span<const double> values);

// Indices i with |(v_i - mean) / sample_std| <= limit. All retained if std is 0.
std::vector<std::size_t> zscore_filter(std::span<const double> values, double limit);

// Cochran sample size for a proportion (p = 0.5) with finite-population
// correction: n0 = z^2 / (4 e^2), n = ceil(N n0 / (N + n0)).
std::int64_t required_sample_size(std::int64_t population, double confidence, double margin);

} // namespace tracelens::stats
