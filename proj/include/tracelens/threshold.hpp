#pragma once

#include "tracelens/trace_model.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace tracelens::threshold {

inline constexpr double default_span = 0.75;

struct LoessResult {
    std::vector<double> values;
    bool passthrough{false};  // input shorter than 4, returned unchanged
};

// Local linear regression at each index x = 0..n-1 with tricube weights over
// the ceil(span * n) nearest neighbours. Single pass, no robustness steps.
LoessResult loess_smooth(std::span<const double> y, double span = default_span);

// Central differences inside, one-sided at the ends, unit spacing.
std::vector<double> first_derivative(std::span<const double> y);

struct TwoClusterSplit {
    std::size_t breakpoint{0};  // last index of the first cluster
    double wcss{0.0};
};

// Optimal split of the sequence (in its given order) into two contiguous
// clusters minimizing total within-cluster sum of squares. Ties resolve to
// the smallest breakpoint. Throws DegenerateError if all values are equal.
TwoClusterSplit ckmeans_1d_two(std::span<const double> values);

struct ThresholdResult {
    std::vector<FunctionId> sorted_function_order;  // descending by score
    std::vector<double> sorted_scores;
    std::vector<double> smoothed;
    std::vector<double> derivative;
    std::size_t breakpoint_index{0};
    FunctionSet sensitive;
    bool degenerate{false};
    bool smoothing_passthrough{false};
};

// Sorts functions by descending score (ties by name), smooths the curve,
// clusters |first derivative| into two contiguous groups and returns the
// steep high-score prefix [0, breakpoint] as the sensitive set.
// Throws PreconditionError for fewer than 4 functions or non-finite scores.
ThresholdResult find_threshold(const std::map<FunctionId, double>& scores, double span = default_span);

} // namespace tracelens::threshold
