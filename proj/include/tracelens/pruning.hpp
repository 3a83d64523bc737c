#pragma once

#include "tracelens/static_features.hpp"
#include "tracelens/threshold.hpp"
#include "tracelens/trace_model.hpp"

#include "json.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tracelens::pruning {

enum class CriterionId {
    Entropy,
    Cov,
    EntropyCovUnion,
    EntropyWithCR,
    CovWithCR,
    EntropyCovUnionWithCR,
    PerfCorrelations,
    FeatureSignificance,
    AllDynamicUnion,
    StaPerfSens,
};

inline constexpr std::array<CriterionId, 10> all_criteria = {
    CriterionId::Entropy,          CriterionId::Cov,
    CriterionId::EntropyCovUnion,  CriterionId::EntropyWithCR,
    CriterionId::CovWithCR,        CriterionId::EntropyCovUnionWithCR,
    CriterionId::PerfCorrelations, CriterionId::FeatureSignificance,
    CriterionId::AllDynamicUnion,  CriterionId::StaPerfSens,
};

// Stable machine names: entropy, cov, entropy_cov, entropy_cr, cov_cr,
// entropy_cov_cr, perf_corr, feature_sig, all_dynamic, staperfsens.
std::string_view to_string(CriterionId c);
// Column header used in the summary table ("Entropy", "CoV", ...).
std::string_view display_name(CriterionId c);
CriterionId criterion_from_string(std::string_view s);

struct PruningResult {
    CriterionId criterion{CriterionId::Entropy};
    std::map<FunctionId, double> scores;  // empty for pure set operations
    FunctionSet sensitive;
    nlohmann::json provenance = nlohmann::json::object();
    // Identity of the dataset the result was computed on (program/version/runs).
    std::string dataset_key;
};

struct PruningOptions {
    double span{threshold::default_span};
    double rho_cutoff{0.7};
    double alpha{0.05};  // feature-significance level
};

std::string dataset_key(const TraceDataset& dataset);

PruningResult prune_entropy(const TraceDataset& dataset, const PruningOptions& opts = {});
PruningResult prune_cov(const TraceDataset& dataset, const PruningOptions& opts = {});

// Throws ValidationError if the results come from different datasets.
PruningResult union_sets(const PruningResult& a, const PruningResult& b, CriterionId as);

// Average-linkage agglomerative clustering on a symmetric distance matrix;
// clusters merge while their mean pairwise distance is <= cut. Returns
// cluster labels (0-based, in order of first member).
std::vector<std::size_t> average_linkage_clusters(const std::vector<std::vector<double>>& distance, double cut);

// Groups candidates whose self-time series correlate with |rho| >= rho_cutoff
// and keeps the highest-CoV member of each group (ties by name).
FunctionSet correlation_removal(const TraceDataset& dataset, const FunctionSet& candidates, double rho_cutoff,
                                nlohmann::json* provenance = nullptr);

PruningResult prune_perf_correlations(const TraceDataset& dataset, const PruningOptions& opts = {});

// Per-coefficient F-test on an OLS fit of total time against all call
// frequencies; collinear columns are dropped first, in name order.
PruningResult prune_feature_significance(const TraceDataset& dataset, const PruningOptions& opts = {});

PruningResult prune_all_dynamic(const TraceDataset& dataset, const PruningOptions& opts = {});

// Weights for loc, loops, nested_loops, calls, recursion, branches, params.
using StaticWeights = std::array<double, 7>;
inline constexpr StaticWeights uniform_static_weights = {1.0 / 7, 1.0 / 7, 1.0 / 7, 1.0 / 7,
                                                         1.0 / 7, 1.0 / 7, 1.0 / 7};

// Weighted sum of features min-max normalized across the given functions.
// Throws DegenerateError for fewer than two functions.
std::map<FunctionId, double> staperfsens_scores(std::span<const StaticFeatures> features,
                                                const StaticWeights& weights = uniform_static_weights);

// Static criterion; only functions present in `dataset` are scored.
PruningResult prune_staperfsens(const TraceDataset& dataset, std::span<const StaticFeatures> features,
                                const StaticWeights& weights = uniform_static_weights,
                                const PruningOptions& opts = {});

// Dispatches any dynamic criterion; StaPerfSens needs `features`.
PruningResult run_criterion(CriterionId criterion, const TraceDataset& dataset, const PruningOptions& opts = {},
                            std::span<const StaticFeatures> features = {});

nlohmann::json result_to_json(const PruningResult& result);
PruningResult result_from_json(const nlohmann::json& doc);

} // namespace tracelens::pruning
