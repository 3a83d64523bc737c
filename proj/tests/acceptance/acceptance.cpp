// Acceptance checks: one PASS/FAIL line per criterion.

#include "tracelens/detect.hpp"
#include "tracelens/ingest.hpp"
#include "tracelens/modeling.hpp"
#include "tracelens/pruning.hpp"
#include "tracelens/random.hpp"
#include "tracelens/report.hpp"
#include "tracelens/simulate.hpp"
#include "tracelens/stats.hpp"
#include "tracelens/threshold.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace tracelens;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass{false};
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Shared state between criteria 8 through 11.
struct Reference {
    simulate::Scenario scenario = simulate::reference_scenario();
    std::optional<TraceDataset> pruned_on;
    std::optional<report::Assessment> assessment;
};

Reference ref;

// 1
Outcome sample_size() {
    const auto t0 = Clock::now();
    const auto n = stats::required_sample_size(2500, 0.95, 0.05);
    const double ms = seconds_since(t0) * 1e3;
    return {n == 333 && ms < 1.0, fmt::format("n = {}, {:.4f} ms", n, ms)};
}

// 2
Outcome union_identity() {
    pruning::PruningResult e, c;
    e.dataset_key = c.dataset_key = "638.imagick@fixture";
    for (int i = 0; i < 46; ++i) e.sensitive.insert(FunctionId(fmt::format("imagick::fn_{:03}", i)));
    for (int i = 34; i < 61; ++i) c.sensitive.insert(FunctionId(fmt::format("imagick::fn_{:03}", i)));
    std::size_t both = 0;
    for (const auto& f : e.sensitive) both += c.sensitive.count(f);
    const auto u = pruning::union_sets(e, c, pruning::CriterionId::EntropyCovUnion);
    const bool ok = e.sensitive.size() == 46 && c.sensitive.size() == 27 && both == 12 && u.sensitive.size() == 61;
    return {ok, fmt::format("|E|={} |C|={} |E&C|={} -> |E|C|={}", e.sensitive.size(), c.sensitive.size(), both,
                            u.sensitive.size())};
}

double sse(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    double m = 0;
    for (std::size_t i = lo; i < hi; ++i) m += v[i];
    m /= static_cast<double>(hi - lo);
    double s = 0;
    for (std::size_t i = lo; i < hi; ++i) s += (v[i] - m) * (v[i] - m);
    return s;
}

// 3
Outcome ckmeans_oracle() {
    const auto t0 = Clock::now();
    Rng rng(3);
    std::size_t checked = 0, bad = 0;
    double worst = 0;
    while (checked < 100) {
        const std::size_t n = 2 + rng.index(199);
        std::vector<double> v(n);
        const double gap = rng.uniform(0, 20);
        for (auto& x : v) x = rng.uniform() < 0.3 ? gap + rng.uniform(0, 5) : rng.uniform(0, 5);
        std::sort(v.begin(), v.end());
        if (v.front() == v.back()) continue;
        double best = sse(v, 0, 1) + sse(v, 1, n);
        for (std::size_t k = 1; k + 1 < n; ++k) best = std::min(best, sse(v, 0, k + 1) + sse(v, k + 1, n));
        const double got = threshold::ckmeans_1d_two(v).wcss;
        const double scale = std::max(best, 1e-12 * sse(v, 0, n));
        const double rel = std::fabs(got - best) / scale;
        worst = std::max(worst, rel);
        if (rel > 1e-9) ++bad;
        ++checked;
    }
    const double s = seconds_since(t0);
    return {bad == 0 && s < 1.0, fmt::format("{} vectors, worst rel err {:.2e}, {:.3f} s", checked, worst, s)};
}

struct Enumeration {
    const std::vector<std::int64_t>* ranks;
    std::int64_t observed;
    double lower{0}, upper{0}, total{0};

    void walk(std::size_t i, std::size_t left, std::int64_t sum) {
        if (left == 0) {
            total += 1;
            if (sum <= observed) lower += 1;
            if (sum >= observed) upper += 1;
            return;
        }
        if (ranks->size() - i < left) return;
        walk(i + 1, left - 1, sum + (*ranks)[i]);
        walk(i + 1, left, sum);
    }
};

// 4
Outcome mwu_exact_oracle() {
    const auto t0 = Clock::now();
    std::size_t cases = 0, bad = 0;
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(Rng::mix(4, seed));
        for (std::size_t na = 1; na <= 100; ++na) {
            for (std::size_t nb = 1; na * nb <= 100; ++nb) {
                std::vector<double> a(na), b(nb);
                const auto levels = static_cast<std::int64_t>(1 + rng.index(12));
                for (auto& x : a) x = static_cast<double>(rng.integer(0, levels));
                for (auto& x : b) x = static_cast<double>(rng.integer(0, levels));
                std::vector<double> pooled(a);
                pooled.insert(pooled.end(), b.begin(), b.end());
                const auto ranks = stats::average_ranks(pooled);
                std::vector<std::int64_t> doubled(ranks.size());
                std::int64_t obs = 0;
                for (std::size_t i = 0; i < ranks.size(); ++i) {
                    doubled[i] = std::llround(2.0 * ranks[i]);
                    if (i < na) obs += doubled[i];
                }
                Enumeration e{&doubled, obs};
                e.walk(0, na, 0);
                const double want = std::min(1.0, 2.0 * std::min(e.lower, e.upper) / e.total);
                const auto got = stats::mann_whitney_u(a, b);
                const double err = std::fabs(got.p_two_sided - want);
                worst = std::max(worst, err);
                if (!got.exact || err > 1e-12) ++bad;
                ++cases;
            }
        }
    }
    const double s = seconds_since(t0);
    return {bad == 0 && s < 10.0, fmt::format("{} cases, worst abs err {:.2e}, {:.2f} s", cases, worst, s)};
}

// 5
Outcome cliffs_brute_force() {
    Rng rng(5);
    std::size_t bad = 0;
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
        std::vector<double> a(1 + rng.index(60)), b(1 + rng.index(60));
        for (auto& x : a) x = static_cast<double>(rng.integer(0, 30));
        for (auto& x : b) x = static_cast<double>(rng.integer(0, 30)) + (t % 3);
        std::int64_t gt = 0, lt = 0;
        for (double x : a) {
            for (double y : b) {
                gt += x > y;
                lt += x < y;
            }
        }
        const double want = static_cast<double>(gt - lt) / static_cast<double>(a.size() * b.size());
        const auto ab = stats::cliffs_delta(a, b);
        const auto ba = stats::cliffs_delta(b, a);
        worst = std::max(worst, std::fabs(ab.delta - want));
        if (std::fabs(ab.delta - want) > 1e-12 || ab.delta != -ba.delta) ++bad;
    }
    return {bad == 0, fmt::format("200 pairs, worst abs err {:.2e}, antisymmetry violations {}", worst, bad)};
}

// 6
Outcome mwu_calibration() {
    Rng rng(6);
    int rejections = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> a(30), b(30);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        rejections += stats::mann_whitney_u(a, b).p_two_sided < 0.05;
    }
    const double rate = rejections / 1000.0;
    return {rate >= 0.03 && rate <= 0.07, fmt::format("rejection rate {:.3f}", rate)};
}

// 7
Outcome threshold_scale() {
    Rng rng(7);
    std::size_t mismatches = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 4 + rng.index(97);
        std::map<FunctionId, double> s;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = rng.uniform() < 0.25 ? rng.uniform(2, 10) : rng.uniform(0, 1.5);
            s[FunctionId(fmt::format("fn{:03}", i))] = v;
        }
        const auto base = threshold::find_threshold(s).sensitive;
        for (double c : {0.001, 1000.0}) {
            auto scaled = s;
            for (auto& [f, v] : scaled) v *= c;
            mismatches += threshold::find_threshold(scaled).sensitive != base;
        }
    }
    return {mismatches == 0, fmt::format("50 maps x 2 scales, mismatches {}", mismatches)};
}

struct Recovery {
    std::size_t selected{0};
    double recall{0}, precision{0};
};

Recovery score(const FunctionSet& got, const FunctionSet& truth) {
    std::size_t tp = 0;
    for (const auto& f : got) tp += truth.count(f);
    return {got.size(), truth.empty() ? 0.0 : double(tp) / double(truth.size()), got.empty() ? 0.0 : double(tp) / double(got.size())};
}

// 8
Outcome pruning_recovery() {
    const auto t0 = Clock::now();
    const auto& sc = ref.scenario;
    const auto raw = simulate::generate_dataset(sc, sc.runs, sc.seed);
    ref.pruned_on = ingest::preprocess(raw).dataset;
    const auto truth = simulate::ground_truth(sc);
    const auto e = score(pruning::prune_entropy(*ref.pruned_on).sensitive, truth);
    const auto c = score(pruning::prune_cov(*ref.pruned_on).sensitive, truth);
    const auto a = score(pruning::prune_all_dynamic(*ref.pruned_on).sensitive, truth);
    const double s = seconds_since(t0);
    const bool ok = sc.functions.size() == 50 && truth.size() == 8 && sc.runs == 2500 && e.recall >= 0.75 &&
                    e.precision >= 0.5 && c.recall >= 0.75 && c.precision >= 0.5 && a.recall >= 0.9 && s < 60.0;
    return {ok, fmt::format("{} functions after preprocessing; entropy {} sel R={:.3f} P={:.3f}; cov {} sel R={:.3f} "
                            "P={:.3f}; all-dynamic {} sel R={:.3f}; {:.2f} s",
                            ref.pruned_on->function_count(), e.selected, e.recall, e.precision, c.selected, c.recall,
                            c.precision, a.selected, a.recall, s)};
}

// 9
Outcome model_accuracy() {
    if (!ref.pruned_on) return {false, "reference pruning dataset unavailable"};
    const auto t0 = Clock::now();
    const auto fresh = simulate::generate_dataset(ref.scenario, 333, 2025, "fresh");
    const auto features = simulate::synthetic_static_features(ref.scenario, 1);
    const std::vector<pruning::CriterionId> crits(pruning::all_criteria.begin(), pruning::all_criteria.end());
    ref.assessment = report::assess_criteria(*ref.pruned_on, fresh, crits, modeling::default_model_zoo(1), 1, {}, features);
    const auto& a = *ref.assessment;
    const double s = seconds_since(t0);
    if (!a.best_accuracy) return {false, "no criterion produced a model"};
    const auto& best = *std::find_if(a.criteria.begin(), a.criteria.end(),
                                     [&](const auto& c) { return c.criterion == *a.best_accuracy; });
    const bool ok = best.test.r2 >= 0.95 && best.test.r2 >= a.full_test.r2 - 0.02 && s < 60.0;
    return {ok, fmt::format("best optimized {} ({}) R2={:.4f}; full tracing ({}) R2={:.4f}; {} failures; {:.2f} s",
                            pruning::to_string(best.criterion), best.spec, best.test.r2, a.full_spec, a.full_test.r2,
                            a.failures.size(), s)};
}

// 10
Outcome overhead_reduction() {
    if (!ref.assessment || !ref.assessment->best_balance) return {false, "assessment unavailable"};
    const auto& a = *ref.assessment;
    const auto& best = *std::find_if(a.criteria.begin(), a.criteria.end(),
                                     [&](const auto& c) { return c.criterion == *a.best_balance; });
    const auto fresh = simulate::generate_dataset(ref.scenario, 333, 2025, "fresh");
    const auto truth = simulate::ground_truth(ref.scenario);
    const FunctionSet all(fresh.function_index().begin(), fresh.function_index().end());
    FunctionSet insensitive;
    for (const auto& f : all) {
        if (!truth.count(f)) insensitive.insert(f);
    }
    const double share = double(simulate::estimate_overhead(fresh, insensitive, 1).events) /
                         double(simulate::estimate_overhead(fresh, all, 1).events);
    const bool ok = share >= 0.85 && best.reduction >= 0.80;
    return {ok, fmt::format("insensitive event share {:.1f}%; best-balance criterion {} traces {} functions, events "
                            "{} of {} ({:.1f}% reduction)",
                            100 * share, pruning::to_string(best.criterion), best.traced, best.events, a.full_events,
                            100 * best.reduction)};
}

// 11
Outcome detection_campaign() {
    const auto t0 = Clock::now();
    const auto& sc = ref.scenario;
    const auto crit = ref.assessment && ref.assessment->best_balance ? *ref.assessment->best_balance
                                                                     : pruning::CriterionId::Cov;
    const auto base = simulate::generate_dataset(sc, 333, 99, "base");
    const auto plan = detect::select_injection_spots(base, 5, 99);
    std::vector<TraceDataset> variants;
    for (const auto& f : plan.all()) {
        variants.push_back(simulate::generate_dataset(simulate::inject_delay(sc, f, 5000), 333, 100, "inject:" + f.name));
    }
    const std::size_t injected = variants.size();
    variants.push_back(simulate::generate_dataset(sc, 333, 100, "clean"));
    const auto confounded = simulate::confounded_variant(sc, FunctionId("mesh::refine"), 5000);
    variants.push_back(simulate::generate_dataset(confounded, 333, 100, "confounded:mesh::refine"));

    const auto rep = detect::run_detection_campaign(base, variants, crit, modeling::default_model_zoo(99), 99);
    std::size_t flagged = 0, direct_flagged = 0;
    for (std::size_t i = 0; i < injected; ++i) {
        flagged += rep.rows[i].model_based->decision == detect::Decision::Regression;
        direct_flagged += rep.rows[i].direct->decision == detect::Decision::Regression;
    }
    const auto& clean = rep.rows[injected];
    const auto& conf = rep.rows[injected + 1];
    const bool clean_ok = clean.model_based->decision == detect::Decision::NoRegression &&
                          clean.direct->decision == detect::Decision::NoRegression;
    const bool conf_ok = conf.model_based->decision == detect::Decision::Regression &&
                         conf.direct->decision == detect::Decision::NoRegression;
    const double s = seconds_since(t0);
    const bool ok = injected == 15 && flagged >= 14 && clean_ok && conf_ok && s < 300.0;
    return {ok, fmt::format("criterion {}; model-based flagged {}/{} (direct {}/{}); clean model p={:.3f} direct "
                            "p={:.3f}; confounded model p={:.2e} d={:.3f}, direct p={:.3f} d={:.3f}; {:.1f} s",
                            pruning::to_string(crit), flagged, injected, direct_flagged, injected,
                            clean.model_based->p_value, clean.direct->p_value, conf.model_based->p_value,
                            conf.model_based->effect.delta, conf.direct->p_value, conf.direct->effect.delta, s)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI with `args`, writing stdout to `log`; returns the exit status.
int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = fmt::format("\"{}\" {} > \"{}\" 2>&1", TRACELENS_CLI, args, log.string());
    return std::system(cmd.c_str());
}

// 12
Outcome cli_determinism() {
    const auto t0 = Clock::now();
    const fs::path root = fs::temp_directory_path() / "tracelens_acceptance_cli";
    fs::remove_all(root);
    fs::create_directories(root);

    const auto raw = simulate::generate_dataset(ref.scenario, 60, 8, "v1");
    ingest::save_dataset_dir(raw, root / "raw");

    struct Step {
        std::string name;
        std::string args;  // {out} is replaced by the run's output directory
    };
    const std::vector<Step> steps{
        {"simulate", "simulate --reference --runs 333 --seed 2025 --inject-plan --confound mesh::refine --out {out}"},
        {"ingest", "ingest --dataset " + (root / "raw").string() + " --program reference --out {out}/dataset.json"},
        {"prune", "prune --dataset {sim}/base.json --all --static-features {sim}/static_features.csv --out {out}"},
        {"model", "model --dataset {sim}/base.json --criterion cov --criterion entropy --full --seed 7 --out {out}"},
        {"spots", "spots --dataset {sim}/base.json --seed 3 --out {out}"},
        {"detect", "detect --dataset {sim}/base.json --variant {sim}/inject_00.json --variant {sim}/confounded_00.json "
                   "--criterion cov --seed 5 --out {out}"},
        {"report", "report --dataset {sim}/base.json --model-dataset {sim}/base.json --static-features "
                   "{sim}/static_features.csv --out {out}"},
    };

    std::vector<std::string> problems;
    std::size_t files = 0;
    const fs::path sim = root / "A" / "simulate";
    for (const auto& step : steps) {
        std::map<std::string, std::string> json_files[2];
        std::string stdout_text[2];
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path out = root / (rep == 0 ? "A" : "B") / step.name;
            fs::create_directories(out);
            std::string args = step.args;
            for (const auto& [key, value] : {std::pair<std::string, std::string>{"{out}", out.string()},
                                             {"{sim}", sim.string()}}) {
                for (auto pos = args.find(key); pos != std::string::npos; pos = args.find(key)) args.replace(pos, key.size(), value);
            }
            const fs::path log = root / fmt::format("{}_{}.log", step.name, rep);
            if (run_cli(args, log) != 0) {
                problems.push_back(step.name + " exited non-zero: " + slurp(log).substr(0, 200));
                break;
            }
            stdout_text[rep] = slurp(log);
            for (const auto& e : fs::recursive_directory_iterator(out)) {
                if (e.path().extension() == ".json") json_files[rep][fs::relative(e.path(), out).string()] = slurp(e.path());
            }
        }
        if (json_files[0].empty()) {
            problems.push_back(step.name + " wrote no JSON");
            continue;
        }
        if (json_files[0] != json_files[1] || stdout_text[0] != stdout_text[1]) {
            problems.push_back(step.name + " output differs between runs");
        }
        files += json_files[0].size();
    }
    const fs::path rendered = root / "A" / "report" / "assessment.json";
    if (fs::exists(rendered)) {
        std::string outs[2];
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path log = root / fmt::format("render_{}.log", rep);
            if (run_cli("report --input " + rendered.string() + " --format md", log) != 0) problems.push_back("report --input failed");
            outs[rep] = slurp(log);
        }
        if (outs[0] != outs[1]) problems.push_back("report --input output differs");
    }
    const double s = seconds_since(t0);
    std::string detail = fmt::format("{} commands, {} JSON files compared byte-for-byte, {:.1f} s", steps.size(), files, s);
    for (const auto& p : problems) detail += "; " + p;
    return {problems.empty(), detail};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"sample size formula", sample_size},
        {"union identity", union_identity},
        {"ckmeans exhaustive oracle", ckmeans_oracle},
        {"mann-whitney exact enumeration", mwu_exact_oracle},
        {"cliff's delta brute force", cliffs_brute_force},
        {"mann-whitney calibration", mwu_calibration},
        {"threshold scale invariance", threshold_scale},
        {"simulator pruning recovery", pruning_recovery},
        {"optimized model accuracy", model_accuracy},
        {"tracing overhead reduction", overhead_reduction},
        {"regression detection campaign", detection_campaign},
        {"cli determinism", cli_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s #%zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
