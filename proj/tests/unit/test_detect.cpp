#include "doctest.h"

#include "tracelens/detect.hpp"
#include "tracelens/error.hpp"
#include "tracelens/ingest.hpp"
#include "tracelens/random.hpp"
#include "tracelens/simulate.hpp"

#include <algorithm>
#include <cmath>

using namespace tracelens;
using namespace tracelens::detect;
using doctest::Approx;

namespace {

// Function i is called i + 1 times in every run.
TraceDataset ladder(std::size_t functions, std::size_t runs = 3) {
    std::vector<RunRecord> out;
    for (std::size_t r = 0; r < runs; ++r) {
        RunRecord run;
        run.input_id = std::to_string(r);
        for (std::size_t i = 0; i < functions; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "f%03zu", i + 1);
            const auto c = static_cast<std::int64_t>(i + 1);
            run.entries[FunctionId(buf)] = {c, c};
        }
        out.push_back(run);
    }
    return dataset_from_runs(out, "p", "v");
}

double avg_calls(const TraceDataset& ds, const FunctionId& f) {
    const auto c = ds.calls(ds.column(f));
    return static_cast<double>(std::accumulate(c.begin(), c.end(), std::int64_t{0})) / static_cast<double>(c.size());
}

modeling::PerfModel ols(const TraceDataset& ds, const std::vector<FunctionId>& cols) {
    return modeling::fit(modeling::ModelSpec{}, modeling::feature_table(ds, cols));
}

} // namespace

TEST_CASE("decision rule") {
    CHECK(decide(0.845, {-0.020, stats::classify_delta(-0.020)}) == Decision::NoRegression);
    CHECK(stats::classify_delta(-0.020) == stats::EffectClass::Negligible);
    const stats::EffectSize large{0.5, stats::classify_delta(0.5)};
    CHECK(large.effect_class == stats::EffectClass::Large);
    CHECK(decide(0.01, large) == Decision::Regression);
    CHECK(decide(0.05, large) == Decision::NoRegression);
    CHECK(decide(0.01, {0.1, stats::EffectClass::Negligible}) == Decision::NoRegression);
    CHECK(decide(0.049, {-0.2, stats::EffectClass::Small}) == Decision::Regression);
    CHECK(method_from_string(to_string(Method::ModelBased)) == Method::ModelBased);
    CHECK(method_from_string(to_string(Method::DirectComparison)) == Method::DirectComparison);
    CHECK(to_string(Decision::NoRegression) == "no_regression");
}

TEST_CASE("direct comparison") {
    Rng rng(1);
    std::vector<double> old(40);
    for (auto& v : old) v = 1.0 + 0.01 * rng.normal();
    const auto same = detect_direct(old, old);
    CHECK(same.decision == Decision::NoRegression);
    CHECK(same.effect.delta == 0.0);
    CHECK(same.method == Method::DirectComparison);

    std::vector<double> slow(old);
    for (auto& v : slow) v += 1.0;
    const auto r = detect_direct(old, slow);
    CHECK(r.decision == Decision::Regression);
    CHECK(r.effect.delta == 1.0);
    CHECK(r.p_value < 1e-6);

    const auto swapped = detect_direct(slow, old);
    CHECK(swapped.effect.delta == -r.effect.delta);
    CHECK(swapped.p_value == Approx(r.p_value));
    CHECK_THROWS_AS(detect_direct(old, std::vector<double>{}), PreconditionError);
}

TEST_CASE("evidence flips sign when versions swap") {
    Rng rng(2);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> a(5 + rng.index(40)), b(5 + rng.index(40));
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal() + 0.3;
        const auto ab = detect_direct(a, b);
        const auto ba = detect_direct(b, a);
        CHECK(ab.effect.delta == -ba.effect.delta);
        CHECK(ab.p_value == Approx(ba.p_value).epsilon(1e-12));
    }
}

TEST_CASE("identical models never flag a regression") {
    const auto sc = simulate::reference_scenario();
    const auto ds = simulate::generate_dataset(sc, 120, 5);
    const auto cols = ds.function_index();
    const auto m = ols(ds, cols);
    const auto v = detect_model_based(m, m, ds);
    CHECK(v.decision == Decision::NoRegression);
    CHECK(v.effect.delta == 0.0);
    CHECK(v.p_value == Approx(1.0));
    const auto t = detect_model_based(m, m, modeling::feature_table(ds));
    CHECK(t.decision == Decision::NoRegression);
}

TEST_CASE("model verdict aligns columns by name") {
    const auto sc = simulate::reference_scenario();
    const auto ds = simulate::generate_dataset(sc, 100, 6);
    std::vector<FunctionId> cols{FunctionId("kernel::stencil"), FunctionId("mesh::refine")};
    const auto m = ols(ds, cols);
    const auto by_dataset = detect_model_based(m, m, ds);
    std::vector<FunctionId> reversed(cols.rbegin(), cols.rend());
    const auto by_table = detect_model_based(m, m, modeling::feature_table(ds, reversed));
    CHECK(by_table.p_value == by_dataset.p_value);
}

TEST_CASE("injection spots on evenly spread frequencies") {
    const auto ds = ladder(100);
    const auto plan = select_injection_spots(ds, 5, 3);
    CHECK(plan.q1 == Approx(25.75));
    CHECK(plan.q3 == Approx(75.25));
    CHECK(plan.low.size() == 5);
    CHECK(plan.medium.size() == 5);
    CHECK(plan.high.size() == 5);
    CHECK(plan.underfilled.empty());
    for (const auto& f : plan.low) CHECK(avg_calls(ds, f) < 25.75);
    for (const auto& f : plan.medium) {
        CHECK(avg_calls(ds, f) >= 25.75);
        CHECK(avg_calls(ds, f) <= 75.25);
    }
    for (const auto& f : plan.high) CHECK(avg_calls(ds, f) > 75.25);
    const auto all = plan.all();
    CHECK(std::set<FunctionId>(all.begin(), all.end()).size() == 15);

    const auto again = select_injection_spots(ds, 5, 3);
    CHECK(again.all() == all);
    CHECK(select_injection_spots(ds, 5, 4).all() != all);
}

TEST_CASE("small programs under-fill a band") {
    const auto plan = select_injection_spots(ladder(10), 5, 1);
    CHECK_FALSE(plan.underfilled.empty());
    CHECK(plan.low.size() < 5);
    CHECK(plan.all().size() < 15);
    CHECK_THROWS_AS(select_injection_spots(ladder(10), 0, 1), PreconditionError);
}

TEST_CASE("z-score outliers are excluded from the bands") {
    std::vector<RunRecord> runs(1);
    runs[0].input_id = "r";
    for (int i = 0; i < 30; ++i) runs[0].entries[FunctionId("f" + std::to_string(i))] = {10 + i % 3, 1};
    runs[0].entries[FunctionId("huge")] = {100000, 1};
    const auto plan = select_injection_spots(dataset_from_runs(runs, "p", "v"), 5, 1);
    CHECK(plan.excluded_outliers == std::vector<FunctionId>{FunctionId("huge")});
}

TEST_CASE("tally columns") {
    Tally t;
    t.add({0.3, {0.6, stats::EffectClass::Large}, Decision::NoRegression, Method::ModelBased});
    t.add({0.01, {0.1, stats::EffectClass::Negligible}, Decision::NoRegression, Method::ModelBased});
    t.add({0.01, {0.2, stats::EffectClass::Small}, Decision::Regression, Method::ModelBased});
    t.add({0.01, {0.4, stats::EffectClass::Medium}, Decision::Regression, Method::ModelBased});
    t.add({0.0, {0.9, stats::EffectClass::Large}, Decision::Regression, Method::ModelBased});
    CHECK(t.not_significant == 2);
    CHECK(t.small == 1);
    CHECK(t.medium == 1);
    CHECK(t.large == 1);
    CHECK(t.total == 5);
    CHECK(t.flagged() == 3);
    const auto j = tally_to_json(t);
    CHECK(j.at("total") == 5);
}

TEST_CASE("model verdict grows with the injected delay") {
    const auto sc = simulate::reference_scenario();
    const auto base = simulate::generate_dataset(sc, 200, 31);
    const auto truth = simulate::ground_truth(sc);
    const std::vector<FunctionId> cols(truth.begin(), truth.end());
    const auto m_old = ols(base, cols);
    double prev = -1.0;
    for (std::int64_t delay : {0, 200, 500, 1000, 2000, 5000, 10000}) {
        const auto variant = simulate::generate_dataset(simulate::inject_delay(sc, FunctionId("kernel::reduce"), delay), 200, 31);
        const auto v = detect_model_based(m_old, ols(variant, cols), base);
        CHECK(std::fabs(v.effect.delta) >= prev - 1e-12);
        prev = std::fabs(v.effect.delta);
    }
    CHECK(prev > 0.147);
}

TEST_CASE("campaign shape") {
    const auto sc = simulate::reference_scenario();
    const auto base = simulate::generate_dataset(sc, 150, 11);
    const auto specs = std::vector<modeling::ModelSpec>{modeling::ModelSpec{}};

    const auto empty = run_detection_campaign(base, std::span<const TraceDataset>{}, pruning::CriterionId::Cov, specs, 1);
    CHECK(empty.rows.empty());
    REQUIRE(empty.model_tally);
    CHECK(empty.model_tally->total == 0);

    std::vector<TraceDataset> variants{simulate::generate_dataset(sc, 150, 12, "clean"),
                                       simulate::generate_dataset(simulate::inject_delay(sc, FunctionId("kernel::stencil"), 5000),
                                                                  150, 12, "stencil")};
    const auto report = run_detection_campaign(base, variants, pruning::CriterionId::Cov, specs, 1);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].variant == "clean");
    CHECK(report.rows[0].model_based->decision == Decision::NoRegression);
    CHECK(report.rows[0].direct->decision == Decision::NoRegression);
    CHECK(report.rows[1].model_based->decision == Decision::Regression);
    CHECK(report.model_tally->total == 2);
    const auto doc = campaign_to_json(report);
    CHECK(doc.at("kind") == "campaign");
    CHECK(doc.dump() == campaign_to_json(run_detection_campaign(base, variants, pruning::CriterionId::Cov, specs, 1)).dump());

    CampaignOptions direct_only;
    direct_only.model_based = false;
    const auto d = run_detection_campaign(base, variants, pruning::CriterionId::Cov, specs, 1, direct_only);
    CHECK_FALSE(d.model_tally);
    CHECK_FALSE(d.rows[0].model_based);
    CHECK(d.rows[0].direct);

    std::vector<RunRecord> other_runs = base.runs();
    const auto other = dataset_from_runs(other_runs, "other", "x");
    CHECK_THROWS_AS(run_detection_campaign(base, std::span(&other, 1), pruning::CriterionId::Cov, specs, 1),
                    ValidationError);
}
