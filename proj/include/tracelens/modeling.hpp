#pragma once

#include "tracelens/trace_model.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tracelens::modeling {

enum class ModelFamily { Ols, Ridge, BayesianRidge, KnnRegressor, RegressionTree };

// ols, ridge, bayesian_ridge, knn, tree
std::string_view to_string(ModelFamily f);
ModelFamily family_from_string(std::string_view s);

// Hyperparameter keys: "lambda" (Ridge), "k" (Knn), "max_depth" (tree).
struct ModelSpec {
    ModelFamily family{ModelFamily::Ols};
    std::map<std::string, double> hyperparams;
    std::uint64_t seed{0};

    double param(const std::string& key, double fallback) const;
    // Throws ValidationError on out-of-range hyperparameters.
    void validate() const;
    std::string label() const;
};

struct Metrics {
    double r2{0.0};
    double mae{0.0};
    double rmse{0.0};
    // Set when the evaluation response has zero variance; r2 is then 0.
    bool degenerate{false};
};

// Response in seconds; x is runs x features of call frequencies.
struct FeatureTable {
    std::vector<FunctionId> functions;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

// Columns follow `functions`; functions absent from the dataset are zero-filled.
FeatureTable feature_table(const TraceDataset& dataset, std::span<const FunctionId> functions);
FeatureTable feature_table(const TraceDataset& dataset);

struct TreeNode {
    int feature{-1};  // -1 marks a leaf
    double threshold{0.0};
    int left{-1};
    int right{-1};
    double value{0.0};
};

struct FittedParams {
    bool constant{false};
    double intercept{0.0};
    Eigen::VectorXd coef;  // linear families
    double alpha{0.0};     // BayesianRidge noise precision
    double lambda{0.0};    // BayesianRidge weight precision
    int iterations{0};
    Eigen::VectorXd x_min;  // Knn scaling
    Eigen::VectorXd x_range;
    Eigen::MatrixXd train_x;  // Knn, scaled
    Eigen::VectorXd train_y;
    std::vector<TreeNode> nodes;
};

struct PerfModel {
    ModelSpec spec;
    std::vector<FunctionId> feature_functions;
    FittedParams params;
    Metrics train_metrics;
    Metrics test_metrics;

    // `x` columns must follow feature_functions.
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd predict(const TraceDataset& dataset) const;
};

Metrics metrics_for(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual);

PerfModel fit(const ModelSpec& spec, const FeatureTable& data);
Metrics evaluate(const PerfModel& model, const FeatureTable& data);
Metrics evaluate(const PerfModel& model, const TraceDataset& dataset);

// Seeded shuffle, then the first floor(fraction * runs) rows train.
std::pair<TraceDataset, TraceDataset> split_train_test(const TraceDataset& dataset, double train_fraction,
                                                       std::uint64_t seed);

FeatureTable rows(const FeatureTable& data, std::span<const std::size_t> index);

// Mean of per-fold held-out metrics; fold of row i is its shuffled position mod k.
Metrics cross_validate(const ModelSpec& spec, const FeatureTable& data, std::size_t k_folds, std::uint64_t seed);

// Candidate specs after grid expansion: a family's grid is swept unless the
// spec pins that hyperparameter.
std::vector<ModelSpec> expand_grid(std::span<const ModelSpec> specs);
std::vector<ModelSpec> default_model_zoo(std::uint64_t seed);

struct RankedSpec {
    ModelSpec spec;
    Metrics cv;
};

struct Selection {
    PerfModel model;  // winner refitted on all rows of `data`
    Metrics cv;
    std::vector<RankedSpec> ranking;  // best first
};

Selection select_best(std::span<const ModelSpec> specs, const FeatureTable& data, std::size_t k_folds,
                      std::uint64_t seed);

struct BuildOptions {
    double train_fraction{0.8};
    std::size_t k_folds{10};
};

struct BuildResult {
    PerfModel model;  // carries train and held-out test metrics
    Metrics cv;
    std::vector<RankedSpec> ranking;
    std::size_t train_runs{0};
    std::size_t test_runs{0};
};

// Split, select by cross-validation on the training part, score on the rest.
BuildResult build_model(const TraceDataset& dataset, std::span<const FunctionId> functions,
                        std::span<const ModelSpec> specs, std::uint64_t seed, const BuildOptions& opts = {});

nlohmann::json metrics_to_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const PerfModel& model);
PerfModel model_from_json(const nlohmann::json& doc);

inline constexpr std::string_view model_schema = "tracelens.perf_model/1";

} // namespace tracelens::modeling
