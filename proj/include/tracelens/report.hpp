#pragma once

#include "tracelens/detect.hpp"
#include "tracelens/modeling.hpp"
#include "tracelens/pruning.hpp"

#include "json.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tracelens::report {

// Traced-function counts per criterion next to the full function count.
nlohmann::json pruning_table_json(const std::string& program, std::size_t full,
                                  std::span<const pruning::PruningResult> results);
std::string pruning_table_markdown(const nlohmann::json& table);

struct ModelRow {
    std::string label;  // criterion name, or "full"
    std::size_t features{0};
    modeling::Metrics test;
    modeling::Metrics cv;
    std::string spec;
};

nlohmann::json model_table_json(const std::string& program, std::span<const ModelRow> rows);
std::string model_table_markdown(const nlohmann::json& table);

std::string campaign_markdown(const nlohmann::json& campaign);

struct CriterionAssessment {
    pruning::CriterionId criterion{pruning::CriterionId::Entropy};
    std::size_t traced{0};
    modeling::Metrics test;
    std::string spec;
    std::int64_t events{0};
    double reduction{0.0};  // 1 - events / full-tracing events
    double balance{0.0};    // (r2 - full r2) + reduction
};

struct Assessment {
    std::string program;
    std::size_t functions{0};
    modeling::Metrics full_test;
    std::string full_spec;
    std::int64_t full_events{0};
    std::vector<CriterionAssessment> criteria;
    std::optional<pruning::CriterionId> best_accuracy;
    std::optional<pruning::CriterionId> least_overhead;
    std::optional<pruning::CriterionId> best_balance;
    std::vector<std::string> failures;  // "criterion: reason" for criteria that could not run
};

// Prunes `prune_data` with each criterion, builds an optimized model on
// `model_data` per sensitive set plus a full-tracing model, counts traced
// events on `model_data`, and ranks the criteria by accuracy, overhead and
// balance. Criteria that fail are listed, not fatal.
Assessment assess_criteria(const TraceDataset& prune_data, const TraceDataset& model_data,
                           std::span<const pruning::CriterionId> criteria,
                           std::span<const modeling::ModelSpec> specs, std::uint64_t seed,
                           const pruning::PruningOptions& opts = {},
                           std::span<const pruning::StaticFeatures> features = {});

nlohmann::json assessment_to_json(const Assessment& a);
std::string assessment_markdown(const nlohmann::json& doc);

// Picks the renderer from the document's "kind" field.
std::string render_markdown(const nlohmann::json& doc);

} // namespace tracelens::report
