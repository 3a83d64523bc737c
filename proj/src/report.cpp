#include "tracelens/report.hpp"

#include "tracelens/error.hpp"
#include "tracelens/simulate.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace tracelens::report {

using nlohmann::json;

namespace {

constexpr std::string_view desk_scale_note =
    "Values come from this dataset; they are not expected to match published benchmark numbers.";

std::string percent(double fraction) { return fmt::format("{:.1f}%", 100.0 * fraction); }

} // namespace

json pruning_table_json(const std::string& program, std::size_t full, std::span<const pruning::PruningResult> results) {
    json columns = json::array();
    for (const auto& r : results) {
        columns.push_back({{"criterion", pruning::to_string(r.criterion)},
                           {"label", pruning::display_name(r.criterion)},
                           {"count", r.sensitive.size()},
                           {"percent", full == 0 ? 0.0 : 100.0 * static_cast<double>(r.sensitive.size()) /
                                                             static_cast<double>(full)}});
    }
    return {{"kind", "pruning_table"}, {"program", program}, {"full", full}, {"criteria", std::move(columns)}};
}

std::string pruning_table_markdown(const json& table) {
    std::string head = "| Program | Full |";
    std::string rule = "|---|---:|";
    std::string row = fmt::format("| {} | {} |", table.at("program").get<std::string>(), table.at("full").get<std::size_t>());
    for (const auto& c : table.at("criteria")) {
        head += fmt::format(" {} |", c.at("label").get<std::string>());
        rule += "---:|";
        row += fmt::format(" {} ({:.1f}%) |", c.at("count").get<std::size_t>(), c.at("percent").get<double>());
    }
    return fmt::format("## Traced functions per criterion\n\n{}\n\n{}\n{}\n{}\n", desk_scale_note, head, rule, row);
}

json model_table_json(const std::string& program, std::span<const ModelRow> rows) {
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"label", r.label},
                       {"features", r.features},
                       {"spec", r.spec},
                       {"test", modeling::metrics_to_json(r.test)},
                       {"cv", modeling::metrics_to_json(r.cv)}});
    }
    return {{"kind", "model_table"}, {"program", program}, {"rows", std::move(out)}};
}

std::string model_table_markdown(const json& table) {
    std::string out = fmt::format("## Model accuracy ({})\n\n{}\n\n", table.at("program").get<std::string>(),
                                  desk_scale_note);
    out += "| Tracing | Functions | Model | MAE (s) | RMSE (s) | R2 | CV R2 |\n";
    out += "|---|---:|---|---:|---:|---:|---:|\n";
    for (const auto& r : table.at("rows")) {
        const auto& t = r.at("test");
        out += fmt::format("| {} | {} | {} | {:.6f} | {:.6f} | {:.3f} | {:.3f} |\n", r.at("label").get<std::string>(),
                           r.at("features").get<std::size_t>(), r.at("spec").get<std::string>(),
                           t.at("mae").get<double>(), t.at("rmse").get<double>(), t.at("r2").get<double>(),
                           r.at("cv").at("r2").get<double>());
    }
    return out;
}

namespace {

std::string tally_cell(const json& t) {
    const auto total = t.at("total").get<std::size_t>();
    return fmt::format("{}/{} | {}/{} | {}/{} | {}/{}", t.at("not_significant_or_negligible").get<std::size_t>(),
                       total, t.at("small").get<std::size_t>(), total, t.at("medium").get<std::size_t>(), total,
                       t.at("large").get<std::size_t>(), total);
}

std::string verdict_cell(const json& v) {
    const std::string effect = v.at("effect").get<std::string>();
    const char tag = effect.empty() ? '?' : static_cast<char>(std::toupper(static_cast<unsigned char>(effect[0])));
    return fmt::format("{:.3f} {}. [{:.3f}] {}", v.at("p_value").get<double>(), tag, v.at("delta").get<double>(),
                       v.at("decision").get<std::string>());
}

} // namespace

std::string campaign_markdown(const json& campaign) {
    std::string out = fmt::format("## Regression detection ({}, criterion {})\n\n{}\n\n",
                                  campaign.at("program").get<std::string>(),
                                  campaign.at("criterion").get<std::string>(), desk_scale_note);
    out += "| Method | P>0.05 or ES=N | ES=S | ES=M | ES=L |\n|---|---:|---:|---:|---:|\n";
    if (campaign.contains("model_tally")) out += "| Performance Model | " + tally_cell(campaign["model_tally"]) + " |\n";
    if (campaign.contains("direct_tally")) out += "| Direct Comparison | " + tally_cell(campaign["direct_tally"]) + " |\n";
    out += "\n| Variant | Performance Model | Direct Comparison |\n|---|---|---|\n";
    for (const auto& r : campaign.at("rows")) {
        out += fmt::format("| {} | {} | {} |\n", r.at("variant").get<std::string>(),
                           r.contains("model") ? verdict_cell(r["model"]) : "-",
                           r.contains("direct") ? verdict_cell(r["direct"]) : "-");
    }
    return out;
}

Assessment assess_criteria(const TraceDataset& prune_data, const TraceDataset& model_data,
                           std::span<const pruning::CriterionId> criteria, std::span<const modeling::ModelSpec> specs,
                           std::uint64_t seed, const pruning::PruningOptions& opts,
                           std::span<const pruning::StaticFeatures> features) {
    Assessment a;
    a.program = model_data.program();
    a.functions = model_data.function_count();
    const auto& all = model_data.function_index();
    const FunctionSet all_set(all.begin(), all.end());
    a.full_events = simulate::estimate_overhead(model_data, all_set, 1.0).events;
    const auto full = modeling::build_model(model_data, all, specs, seed);
    a.full_test = full.model.test_metrics;
    a.full_spec = full.model.spec.label();

    for (const auto c : criteria) {
        try {
            const auto pruned = pruning::run_criterion(c, prune_data, opts, features);
            FunctionSet traced;
            for (const auto& f : pruned.sensitive) {
                if (model_data.contains(f)) traced.insert(f);
            }
            const std::vector<FunctionId> cols(traced.begin(), traced.end());
            const auto built = modeling::build_model(model_data, cols, specs, seed);
            CriterionAssessment ca;
            ca.criterion = c;
            ca.traced = traced.size();
            ca.test = built.model.test_metrics;
            ca.spec = built.model.spec.label();
            ca.events = simulate::estimate_overhead(model_data, traced, 1.0).events;
            ca.reduction = a.full_events == 0 ? 0.0
                                              : 1.0 - static_cast<double>(ca.events) / static_cast<double>(a.full_events);
            ca.balance = (ca.test.r2 - a.full_test.r2) + ca.reduction;
            a.criteria.push_back(ca);
        } catch (const Error& e) {
            a.failures.push_back(std::string(pruning::to_string(c)) + ": " + e.what());
        }
    }

    // Ties keep the earlier criterion.
    for (const auto& ca : a.criteria) {
        auto pick = [&](std::optional<pruning::CriterionId>& slot, auto better) {
            if (!slot) {
                slot = ca.criterion;
                return;
            }
            const auto& cur = *std::find_if(a.criteria.begin(), a.criteria.end(),
                                            [&](const CriterionAssessment& x) { return x.criterion == *slot; });
            if (better(ca, cur)) slot = ca.criterion;
        };
        if (ca.traced == 0) continue;
        pick(a.best_accuracy, [](const auto& x, const auto& y) { return x.test.r2 > y.test.r2; });
        pick(a.least_overhead, [](const auto& x, const auto& y) { return x.events < y.events; });
        pick(a.best_balance, [](const auto& x, const auto& y) { return x.balance > y.balance; });
    }
    return a;
}

json assessment_to_json(const Assessment& a) {
    json rows = json::array();
    for (const auto& c : a.criteria) {
        rows.push_back({{"criterion", pruning::to_string(c.criterion)},
                        {"label", pruning::display_name(c.criterion)},
                        {"traced", c.traced},
                        {"spec", c.spec},
                        {"test", modeling::metrics_to_json(c.test)},
                        {"events", c.events},
                        {"reduction", c.reduction},
                        {"balance", c.balance}});
    }
    auto name = [](const std::optional<pruning::CriterionId>& c) -> json {
        return c ? json(pruning::to_string(*c)) : json(nullptr);
    };
    return {{"kind", "assessment"},
            {"program", a.program},
            {"functions", a.functions},
            {"full", {{"spec", a.full_spec}, {"test", modeling::metrics_to_json(a.full_test)}, {"events", a.full_events}}},
            {"criteria", std::move(rows)},
            {"best_accuracy", name(a.best_accuracy)},
            {"least_overhead", name(a.least_overhead)},
            {"best_balance", name(a.best_balance)},
            {"failures", a.failures}};
}

std::string assessment_markdown(const json& doc) {
    const auto& full = doc.at("full");
    std::string out = fmt::format("## Criterion ranking ({})\n\n{}\n\n", doc.at("program").get<std::string>(),
                                  desk_scale_note);
    out += "| Criterion | Traced | Model | R2 | MAE (s) | Events | Reduction | Balance |\n";
    out += "|---|---:|---|---:|---:|---:|---:|---:|\n";
    out += fmt::format("| Full | {} | {} | {:.3f} | {:.6f} | {} | - | - |\n", doc.at("functions").get<std::size_t>(),
                       full.at("spec").get<std::string>(), full.at("test").at("r2").get<double>(),
                       full.at("test").at("mae").get<double>(), full.at("events").get<std::int64_t>());
    for (const auto& c : doc.at("criteria")) {
        out += fmt::format("| {} | {} | {} | {:.3f} | {:.6f} | {} | {} | {:.3f} |\n", c.at("label").get<std::string>(),
                           c.at("traced").get<std::size_t>(), c.at("spec").get<std::string>(),
                           c.at("test").at("r2").get<double>(), c.at("test").at("mae").get<double>(),
                           c.at("events").get<std::int64_t>(), percent(c.at("reduction").get<double>()),
                           c.at("balance").get<double>());
    }
    auto line = [&](const char* what, const char* key) {
        const auto& v = doc.at(key);
        return fmt::format("- {}: {}\n", what, v.is_null() ? std::string("none") : v.get<std::string>());
    };
    out += "\n" + line("Highest accuracy", "best_accuracy") + line("Lowest overhead", "least_overhead") +
           line("Best balance", "best_balance");
    for (const auto& f : doc.at("failures")) out += fmt::format("- Not assessed: {}\n", f.get<std::string>());
    return out;
}

std::string render_markdown(const json& doc) {
    const std::string kind = doc.value("kind", std::string{});
    if (kind == "pruning_table") return pruning_table_markdown(doc);
    if (kind == "model_table") return model_table_markdown(doc);
    if (kind == "campaign") return campaign_markdown(doc);
    if (kind == "assessment") return assessment_markdown(doc);
    throw ParseError("cannot render document of kind '" + kind + "'");
}

} // namespace tracelens::report
