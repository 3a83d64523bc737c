#include "tracelens/detect.hpp"

#include "tracelens/error.hpp"
#include "tracelens/ingest.hpp"
#include "tracelens/random.hpp"

#include <algorithm>
#include <numeric>

namespace tracelens::detect {

using nlohmann::json;

std::string_view to_string(Decision d) { return d == Decision::Regression ? "regression" : "no_regression"; }

std::string_view to_string(Method m) { return m == Method::ModelBased ? "model" : "direct"; }

Method method_from_string(std::string_view s) {
    if (s == "model") return Method::ModelBased;
    if (s == "direct") return Method::DirectComparison;
    throw ParseError("unknown detection method '" + std::string(s) + "' (expected model or direct)");
}

Decision decide(double p_value, const stats::EffectSize& effect) {
    const bool significant = p_value < significance_level;
    return significant && effect.effect_class != stats::EffectClass::Negligible ? Decision::Regression
                                                                                : Decision::NoRegression;
}

namespace {

DetectionVerdict verdict(std::span<const double> old_values, std::span<const double> new_values, Method method) {
    if (old_values.empty() || new_values.empty()) {
        throw PreconditionError("detection needs non-empty samples for both versions");
    }
    DetectionVerdict v;
    v.method = method;
    v.p_value = stats::mann_whitney_u(old_values, new_values).p_two_sided;
    v.effect = stats::cliffs_delta(new_values, old_values);
    v.decision = decide(v.p_value, v.effect);
    return v;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

DetectionVerdict detect_model_based(const modeling::PerfModel& model_old, const modeling::PerfModel& model_new,
                                    const TraceDataset& eval) {
    if (eval.run_count() == 0) throw PreconditionError("evaluation set is empty");
    const auto p_old = to_vector(model_old.predict(eval));
    const auto p_new = to_vector(model_new.predict(eval));
    return verdict(p_old, p_new, Method::ModelBased);
}

DetectionVerdict detect_model_based(const modeling::PerfModel& model_old, const modeling::PerfModel& model_new,
                                    const modeling::FeatureTable& eval) {
    if (eval.x.rows() == 0) throw PreconditionError("evaluation set is empty");
    auto aligned = [&](const modeling::PerfModel& m) {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(eval.x.rows(), static_cast<Eigen::Index>(m.feature_functions.size()));
        for (std::size_t j = 0; j < m.feature_functions.size(); ++j) {
            const auto it = std::find(eval.functions.begin(), eval.functions.end(), m.feature_functions[j]);
            if (it != eval.functions.end()) {
                x.col(static_cast<Eigen::Index>(j)) = eval.x.col(it - eval.functions.begin());
            }
        }
        return to_vector(m.predict(x));
    };
    return verdict(aligned(model_old), aligned(model_new), Method::ModelBased);
}

DetectionVerdict detect_direct(std::span<const double> times_old, std::span<const double> times_new) {
    return verdict(times_old, times_new, Method::DirectComparison);
}

std::vector<FunctionId> InjectionPlan::all() const {
    std::vector<FunctionId> out = low;
    out.insert(out.end(), medium.begin(), medium.end());
    out.insert(out.end(), high.begin(), high.end());
    return out;
}

InjectionPlan select_injection_spots(const TraceDataset& dataset, std::size_t per_cluster, std::uint64_t seed) {
    if (per_cluster == 0) throw PreconditionError("per_cluster must be >= 1");
    const auto& fns = dataset.function_index();
    std::vector<double> avg(fns.size());
    for (std::size_t c = 0; c < fns.size(); ++c) {
        const auto calls = dataset.calls(c);
        avg[c] = static_cast<double>(std::accumulate(calls.begin(), calls.end(), std::int64_t{0})) /
                 static_cast<double>(dataset.run_count());
    }

    InjectionPlan plan;
    std::vector<std::size_t> kept;
    if (fns.size() >= 2 && std::any_of(avg.begin(), avg.end(), [&](double a) { return a != avg[0]; })) {
        kept = stats::zscore_filter(avg, 3.0);
    } else {
        kept.resize(fns.size());
        std::iota(kept.begin(), kept.end(), std::size_t{0});
    }
    std::vector<bool> is_kept(fns.size(), false);
    for (std::size_t i : kept) is_kept[i] = true;
    for (std::size_t c = 0; c < fns.size(); ++c) {
        if (!is_kept[c]) plan.excluded_outliers.push_back(fns[c]);
    }

    std::vector<double> kept_avg;
    for (std::size_t i : kept) kept_avg.push_back(avg[i]);
    if (kept_avg.size() >= 4) {
        const auto q = stats::quartiles(kept_avg);
        plan.q1 = q.q1;
        plan.q3 = q.q3;
    } else if (!kept_avg.empty()) {
        plan.q1 = stats::quantile(kept_avg, 0.25);
        plan.q3 = stats::quantile(kept_avg, 0.75);
    }

    std::vector<FunctionId> bands[3];
    for (std::size_t i : kept) {
        const int band = avg[i] < plan.q1 ? 0 : (avg[i] > plan.q3 ? 2 : 1);
        bands[band].push_back(fns[i]);
    }
    Rng rng(seed);
    const char* names[3] = {"low", "medium", "high"};
    std::vector<FunctionId>* out[3] = {&plan.low, &plan.medium, &plan.high};
    for (int b = 0; b < 3; ++b) {
        auto& band = bands[b];
        rng.shuffle(band);
        if (band.size() < per_cluster) {
            plan.underfilled.emplace_back(names[b]);
        } else {
            band.resize(per_cluster);
        }
        std::sort(band.begin(), band.end());
        *out[b] = std::move(band);
    }
    return plan;
}

void Tally::add(const DetectionVerdict& v) {
    ++total;
    if (v.p_value >= significance_level) {
        ++not_significant;
        return;
    }
    switch (v.effect.effect_class) {
    case stats::EffectClass::Negligible: ++not_significant; break;
    case stats::EffectClass::Small: ++small; break;
    case stats::EffectClass::Medium: ++medium; break;
    case stats::EffectClass::Large: ++large; break;
    }
}

CampaignReport run_detection_campaign(const TraceDataset& base, std::span<const TraceDataset> variants,
                                      pruning::CriterionId criterion, std::span<const modeling::ModelSpec> specs,
                                      std::uint64_t seed, const CampaignOptions& opts,
                                      std::span<const pruning::StaticFeatures> features) {
    for (const auto& v : variants) {
        if (v.program() != base.program()) {
            throw ValidationError("variant '" + v.version() + "' is from program '" + v.program() + "', base is '" +
                                  base.program() + "'");
        }
    }
    CampaignReport report;
    report.program = base.program();
    report.criterion = std::string(pruning::to_string(criterion));
    if (opts.model_based) {
        report.model_tally = Tally{};
    }
    if (opts.direct) {
        report.direct_tally = Tally{};
    }

    std::optional<modeling::PerfModel> base_model;
    if (opts.model_based) {
        const auto prepared = ingest::preprocess(base).dataset;
        const auto pruned = pruning::run_criterion(criterion, prepared, opts.pruning, features);
        report.features.assign(pruned.sensitive.begin(), pruned.sensitive.end());
        auto built = modeling::build_model(base, report.features, specs, seed, opts.build);
        report.base_spec = built.model.spec;
        base_model = std::move(built.model);
    }

    const auto base_times = base.response_seconds();
    for (const auto& variant : variants) {
        CampaignRow row;
        row.variant = variant.version();
        if (base_model) {
            const auto [train, test] = modeling::split_train_test(variant, opts.build.train_fraction, seed);
            const auto model_new = modeling::fit(report.base_spec, modeling::feature_table(train, report.features));
            row.model_based = detect_model_based(*base_model, model_new, variant);
            report.model_tally->add(*row.model_based);
        }
        if (opts.direct) {
            const auto times = variant.response_seconds();
            row.direct = detect_direct(base_times, times);
            report.direct_tally->add(*row.direct);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

json verdict_to_json(const DetectionVerdict& v) {
    return {{"method", to_string(v.method)},
            {"p_value", v.p_value},
            {"delta", v.effect.delta},
            {"effect", stats::to_string(v.effect.effect_class)},
            {"decision", to_string(v.decision)}};
}

json tally_to_json(const Tally& t) {
    return {{"not_significant_or_negligible", t.not_significant},
            {"small", t.small},
            {"medium", t.medium},
            {"large", t.large},
            {"flagged", t.flagged()},
            {"total", t.total}};
}

json plan_to_json(const InjectionPlan& plan) {
    auto names = [](const std::vector<FunctionId>& v) {
        json a = json::array();
        for (const auto& f : v) a.push_back(f.name);
        return a;
    };
    return {{"low", names(plan.low)},
            {"medium", names(plan.medium)},
            {"high", names(plan.high)},
            {"q1", plan.q1},
            {"q3", plan.q3},
            {"underfilled", plan.underfilled},
            {"excluded_outliers", names(plan.excluded_outliers)}};
}

json campaign_to_json(const CampaignReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row = {{"variant", r.variant}};
        if (r.model_based) row["model"] = verdict_to_json(*r.model_based);
        if (r.direct) row["direct"] = verdict_to_json(*r.direct);
        rows.push_back(std::move(row));
    }
    json features = json::array();
    for (const auto& f : report.features) features.push_back(f.name);
    json doc = {{"kind", "campaign"}, {"program", report.program}, {"criterion", report.criterion}, {"rows", std::move(rows)}};
    if (report.model_tally) {
        doc["model_spec"] = modeling::spec_to_json(report.base_spec);
        doc["features"] = std::move(features);
        doc["model_tally"] = tally_to_json(*report.model_tally);
    }
    if (report.direct_tally) doc["direct_tally"] = tally_to_json(*report.direct_tally);
    return doc;
}

} // namespace tracelens::detect
