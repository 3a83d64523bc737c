#pragma once

#include "tracelens/modeling.hpp"
#include "tracelens/pruning.hpp"
#include "tracelens/stats.hpp"
#include "tracelens/trace_model.hpp"

#include "json.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tracelens::detect {

enum class Decision { Regression, NoRegression };
enum class Method { ModelBased, DirectComparison };

std::string_view to_string(Decision d);
std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

inline constexpr double significance_level = 0.05;

struct DetectionVerdict {
    double p_value{1.0};
    stats::EffectSize effect;  // new vs old: positive delta means the new version is slower
    Decision decision{Decision::NoRegression};
    Method method{Method::ModelBased};
};

// Regression iff p < 0.05 and the effect class is at least Small.
Decision decide(double p_value, const stats::EffectSize& effect);

// Both models predict on the same evaluation runs, each from its own
// features (missing columns zero-filled).
DetectionVerdict detect_model_based(const modeling::PerfModel& model_old, const modeling::PerfModel& model_new,
                                    const TraceDataset& eval);
DetectionVerdict detect_model_based(const modeling::PerfModel& model_old, const modeling::PerfModel& model_new,
                                    const modeling::FeatureTable& eval);

DetectionVerdict detect_direct(std::span<const double> times_old, std::span<const double> times_new);

struct InjectionPlan {
    std::vector<FunctionId> low;
    std::vector<FunctionId> medium;
    std::vector<FunctionId> high;
    // Bands that had fewer than per_cluster candidates.
    std::vector<std::string> underfilled;
    double q1{0.0};
    double q3{0.0};
    std::vector<FunctionId> excluded_outliers;

    std::vector<FunctionId> all() const;
};

// Bands by average call frequency: below Q1, Q1..Q3, above Q3, after z-score
// outlier removal (limit 3); per_cluster functions drawn from each band.
InjectionPlan select_injection_spots(const TraceDataset& dataset, std::size_t per_cluster = 5,
                                     std::uint64_t seed = 0);

struct CampaignOptions {
    pruning::PruningOptions pruning;
    modeling::BuildOptions build;
    bool model_based{true};
    bool direct{true};
};

struct CampaignRow {
    std::string variant;
    std::optional<DetectionVerdict> model_based;
    std::optional<DetectionVerdict> direct;
};

// Table-style counts: p >= 0.05 or negligible effect, then Small/Medium/Large.
struct Tally {
    std::size_t not_significant{0};
    std::size_t small{0};
    std::size_t medium{0};
    std::size_t large{0};
    std::size_t total{0};

    void add(const DetectionVerdict& v);
    std::size_t flagged() const { return small + medium + large; }
};

struct CampaignReport {
    std::string program;
    std::string criterion;
    modeling::ModelSpec base_spec;
    std::vector<FunctionId> features;
    std::vector<CampaignRow> rows;
    std::optional<Tally> model_tally;
    std::optional<Tally> direct_tally;
};

// Prunes the base version with `criterion`, selects a model spec on the base
// version, refits that spec per variant, and compares each variant against the
// base with the enabled methods.
CampaignReport run_detection_campaign(const TraceDataset& base, std::span<const TraceDataset> variants,
                                      pruning::CriterionId criterion, std::span<const modeling::ModelSpec> specs,
                                      std::uint64_t seed, const CampaignOptions& opts = {},
                                      std::span<const pruning::StaticFeatures> features = {});

nlohmann::json verdict_to_json(const DetectionVerdict& v);
nlohmann::json tally_to_json(const Tally& t);
nlohmann::json plan_to_json(const InjectionPlan& plan);
nlohmann::json campaign_to_json(const CampaignReport& report);

} // namespace tracelens::detect
