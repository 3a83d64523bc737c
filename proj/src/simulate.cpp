#include "tracelens/simulate.hpp"

#include "tracelens/error.hpp"
#include "tracelens/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace tracelens::simulate {

using nlohmann::json;

std::string_view to_string(TimeKind k) {
    switch (k) {
    case TimeKind::Constant: return "constant";
    case TimeKind::Jitter: return "jitter";
    case TimeKind::InputScaled: return "input_scaled";
    }
    return "unknown";
}

TimeKind time_kind_from_string(std::string_view s) {
    if (s == "constant") return TimeKind::Constant;
    if (s == "jitter") return TimeKind::Jitter;
    if (s == "input_scaled") return TimeKind::InputScaled;
    throw ParseError("unknown time kind '" + std::string(s) + "'");
}

double TimeModel::per_call_ns(double w, double z) const {
    double t = c;
    switch (kind) {
    case TimeKind::Constant: break;
    case TimeKind::Jitter: t += spread * z; break;
    case TimeKind::InputScaled: t += spread * w; break;
    }
    return std::max(t, 0.0);
}

void Scenario::validate() const {
    if (functions.size() < 4) throw ValidationError("scenario needs at least 4 functions");
    if (!(w_min <= w_max)) throw ValidationError("input_range must satisfy min <= max");
    if (!(cost_per_event_ns > 0.0)) throw ValidationError("cost_per_event_ns must be positive");
    if (!(global_noise_ns >= 0.0)) throw ValidationError("global_noise_ns must be >= 0");
    std::set<FunctionId> names;
    bool any_sensitive = false, any_insensitive = false;
    for (const auto& f : functions) {
        const std::string& n = f.id.name;
        if (n.empty()) throw ValidationError("scenario function with empty name");
        if (!names.insert(f.id).second) throw ValidationError("duplicate scenario function '" + n + "'");
        if (f.freq.noise < 0) throw ValidationError(n + ": freq noise must be >= 0");
        if (!(f.freq.noise_prob >= 0.0 && f.freq.noise_prob <= 1.0)) {
            throw ValidationError(n + ": freq noise_prob must lie in [0, 1]");
        }
        if (!(f.time.c >= 0.0)) throw ValidationError(n + ": per-call time must be >= 0");
        if (f.time.kind == TimeKind::Jitter && !(f.time.spread >= 0.0)) {
            throw ValidationError(n + ": jitter sigma must be >= 0");
        }
        if (f.sensitive && f.time.kind == TimeKind::Constant && f.freq.slope == 0.0) {
            throw ValidationError(n + ": constant time with zero frequency slope cannot be sensitive");
        }
        (f.sensitive ? any_sensitive : any_insensitive) = true;
    }
    if (!any_sensitive || !any_insensitive) {
        throw ValidationError("scenario needs at least one sensitive and one insensitive function");
    }
}

const SyntheticFunction& Scenario::function(const FunctionId& f) const {
    for (const auto& fn : functions) {
        if (fn.id == f) return fn;
    }
    throw NotFoundError("function '" + f.name + "' not in scenario '" + name + "'");
}

FunctionSet ground_truth(const Scenario& scenario) {
    FunctionSet out;
    for (const auto& f : scenario.functions) {
        if (f.sensitive) out.insert(f.id);
    }
    return out;
}

TraceDataset generate_dataset(const Scenario& scenario, std::size_t n_runs, std::uint64_t seed,
                              const std::string& version) {
    scenario.validate();
    if (n_runs < 1) throw PreconditionError("generate_dataset needs n_runs >= 1");
    Rng inputs(seed);
    Rng timing(Rng::mix(scenario.noise_seed, seed));

    std::vector<RunRecord> runs;
    runs.reserve(n_runs);
    char id[32];
    for (std::size_t r = 0; r < n_runs; ++r) {
        const double w = inputs.uniform(scenario.w_min, scenario.w_max);
        RunRecord run;
        std::snprintf(id, sizeof id, "run_%05zu", r);
        run.input_id = id;
        std::int64_t sum = 0;
        for (const auto& f : scenario.functions) {
            const double u = inputs.uniform();
            const std::int64_t jitter = inputs.integer(-f.freq.noise, f.freq.noise);
            const double z = timing.normal();
            std::int64_t calls = std::llround(f.freq.base + f.freq.slope * w);
            if (u < f.freq.noise_prob) calls += jitter;
            calls = std::max<std::int64_t>(calls, 0);
            const auto self = std::llround(static_cast<double>(calls) * f.time.per_call_ns(w, z));
            run.entries[f.id] = {calls, self};
            sum += self;
        }
        run.total_time_ns = sum + std::llround(timing.uniform(0.0, scenario.global_noise_ns));
        runs.push_back(std::move(run));
    }
    return dataset_from_runs(std::move(runs), scenario.name, version);
}

Scenario inject_delay(const Scenario& scenario, const FunctionId& target, std::int64_t delay_ns_per_call) {
    if (delay_ns_per_call < 0) throw ValidationError("delay must be >= 0 ns per call");
    Scenario out = scenario;
    for (auto& f : out.functions) {
        if (f.id == target) {
            f.time.c += static_cast<double>(delay_ns_per_call);
            return out;
        }
    }
    throw NotFoundError("injection target '" + target.name + "' not in scenario '" + scenario.name + "'");
}

OverheadEstimate estimate_overhead(const TraceDataset& dataset, const FunctionSet& traced,
                                   double cost_per_event_ns) {
    OverheadEstimate e;
    for (const auto& f : traced) {
        if (!dataset.contains(f)) {
            throw PreconditionError("traced function '" + f.name + "' is not in the dataset");
        }
        for (std::int64_t c : dataset.calls(dataset.column(f))) e.events += c;
    }
    e.overhead_ns = static_cast<double>(e.events) * cost_per_event_ns;
    return e;
}

double expected_total_ns(const Scenario& scenario, double w) {
    double total = 0.5 * scenario.global_noise_ns;
    for (const auto& f : scenario.functions) {
        const double calls = std::max(0.0, f.freq.base + f.freq.slope * w);
        total += calls * f.time.per_call_ns(w, 0.0);
    }
    return total;
}

namespace {

double mean_expected_total(const Scenario& s) {
    constexpr int steps = 256;
    double sum = 0.0;
    for (int i = 0; i < steps; ++i) {
        const double w = s.w_min + (s.w_max - s.w_min) * (i + 0.5) / steps;
        sum += expected_total_ns(s, w);
    }
    return sum / steps;
}

} // namespace

Scenario confounded_variant(const Scenario& scenario, const FunctionId& target, std::int64_t delay_ns_per_call) {
    const double goal = mean_expected_total(scenario);
    Scenario delayed = inject_delay(scenario, target, delay_ns_per_call);
    const double width = scenario.w_max - scenario.w_min;
    auto shifted = [&](double shift) {
        Scenario s = delayed;
        s.w_min = scenario.w_min - shift;
        s.w_max = s.w_min + width;
        return s;
    };
    double lo = 0.0, hi = std::max(width, 1.0);
    if (mean_expected_total(shifted(hi)) > goal) {
        throw DegenerateError("input shift cannot offset the injected delay");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mean_expected_total(shifted(mid)) > goal ? lo : hi) = mid;
    }
    Scenario out = shifted(0.5 * (lo + hi));
    out.name = scenario.name;
    return out;
}

Scenario reference_scenario() {
    Scenario s;
    s.name = "reference";
    s.w_min = 1.0;
    s.w_max = 10.0;
    s.noise_seed = 7;
    s.cost_per_event_ns = 50.0;
    s.global_noise_ns = 2000.0;
    s.runs = 2500;
    s.seed = 2024;

    auto add = [&](std::string name, FreqModel freq, TimeModel time, bool sensitive) {
        s.functions.push_back({FunctionId(std::move(name)), freq, time, sensitive});
    };
    add("mesh::refine", {10, 3, 3}, {TimeKind::Jitter, 2000, 10}, true);
    add("solver::iterate", {20, 4, 2}, {TimeKind::Constant, 1500, 0}, true);
    add("solver::precondition", {15, 3, 3}, {TimeKind::InputScaled, 1200, 40}, true);
    add("io::read_block", {40, 8, 3}, {TimeKind::Jitter, 600, 5}, true);
    add("kernel::stencil", {80, 20, 4}, {TimeKind::Constant, 250, 0}, true);
    add("kernel::reduce", {30, 6, 2}, {TimeKind::Constant, 400, 0}, true);
    add("hash::probe", {150, 40, 6}, {TimeKind::Jitter, 60, 1}, true);
    add("sort::partition", {12, 3, 3}, {TimeKind::InputScaled, 900, 30}, true);

    add("alloc::malloc_small", {6000, 0, 0}, {TimeKind::Constant, 40, 0}, false);
    add("str::compare", {4000, 0, 0}, {TimeKind::Constant, 30, 0}, false);
    add("log::should_log", {8000, 0, 0}, {TimeKind::Constant, 5, 0}, false);
    add("vec::push_back", {5000, 0, 0}, {TimeKind::Constant, 20, 0}, false);

    char name[48];
    for (int i = 0; i < 18; ++i) {
        std::snprintf(name, sizeof name, "init::stage_%02d", i);
        add(name, {10.0 + 5.0 * i, 0, 0}, {TimeKind::Constant, 100.0 + 25.0 * i, 0}, false);
    }
    for (int i = 0; i < 20; ++i) {
        std::snprintf(name, sizeof name, "util::helper_%02d", i);
        add(name, {10.0 + 13.0 * i, 0, 25, 0.02}, {TimeKind::Constant, 50.0 + 8.0 * i, 0}, false);
    }
    return s;
}

std::vector<pruning::StaticFeatures> synthetic_static_features(const Scenario& scenario, std::uint64_t seed) {
    std::vector<pruning::StaticFeatures> out;
    std::uint64_t i = 0;
    for (const auto& f : scenario.functions) {
        Rng rng(Rng::mix(seed, i++));
        pruning::StaticFeatures sf;
        sf.function = f.id;
        if (f.sensitive) {
            sf.loc = rng.integer(40, 200);
            sf.loops = rng.integer(1, 4);
            sf.nested_loops = rng.integer(0, sf.loops - 1);
            sf.calls = rng.integer(3, 15);
            sf.is_recursive = rng.uniform() < 0.1;
            sf.branches = rng.integer(4, 20);
            sf.params = rng.integer(2, 6);
        } else {
            sf.loc = rng.integer(3, 40);
            sf.loops = rng.integer(0, 1);
            sf.calls = rng.integer(0, 4);
            sf.branches = rng.integer(0, 4);
            sf.params = rng.integer(0, 3);
        }
        out.push_back(std::move(sf));
    }
    return out;
}

json scenario_to_json(const Scenario& s) {
    json fns = json::array();
    for (const auto& f : s.functions) {
        json params = json::array({f.time.c});
        if (f.time.kind != TimeKind::Constant) params.push_back(f.time.spread);
        fns.push_back({{"name", f.id.name},
                       {"freq",
                        {{"base", f.freq.base},
                         {"slope", f.freq.slope},
                         {"noise", f.freq.noise},
                         {"noise_prob", f.freq.noise_prob}}},
                       {"time", {{"kind", to_string(f.time.kind)}, {"params", std::move(params)}}},
                       {"sensitive", f.sensitive}});
    }
    return {{"name", s.name},
            {"runs", s.runs},
            {"seed", s.seed},
            {"noise_seed", s.noise_seed},
            {"input_range", {s.w_min, s.w_max}},
            {"cost_per_event_ns", s.cost_per_event_ns},
            {"global_noise_ns", s.global_noise_ns},
            {"functions", std::move(fns)}};
}

Scenario scenario_from_json(const json& doc) {
    try {
        Scenario s;
        s.name = doc.value("name", std::string("synthetic"));
        s.runs = doc.value("runs", std::size_t{100});
        s.seed = doc.value("seed", std::uint64_t{0});
        s.noise_seed = doc.value("noise_seed", std::uint64_t{0});
        const auto& range = doc.at("input_range");
        if (!range.is_array() || range.size() != 2) throw ParseError("input_range must be [min, max]");
        s.w_min = range[0].get<double>();
        s.w_max = range[1].get<double>();
        s.cost_per_event_ns = doc.value("cost_per_event_ns", 1.0);
        s.global_noise_ns = doc.value("global_noise_ns", 0.0);
        for (const auto& f : doc.at("functions")) {
            SyntheticFunction fn;
            fn.id = FunctionId(f.at("name").get<std::string>());
            const auto& freq = f.at("freq");
            fn.freq.base = freq.value("base", 0.0);
            fn.freq.slope = freq.value("slope", 0.0);
            fn.freq.noise = freq.value("noise", std::int64_t{0});
            fn.freq.noise_prob = freq.value("noise_prob", 1.0);
            const auto& time = f.at("time");
            fn.time.kind = time_kind_from_string(time.at("kind").get<std::string>());
            const auto params = time.at("params").get<std::vector<double>>();
            const std::size_t want = fn.time.kind == TimeKind::Constant ? 1 : 2;
            if (params.size() != want) {
                throw ParseError(fn.id.name + ": time kind '" + std::string(to_string(fn.time.kind)) + "' takes " +
                                 std::to_string(want) + " params");
            }
            fn.time.c = params[0];
            if (want == 2) fn.time.spread = params[1];
            fn.sensitive = f.value("sensitive", false);
            s.functions.push_back(std::move(fn));
        }
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("scenario JSON: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw NotFoundError("cannot open scenario file " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    try {
        return scenario_from_json(doc);
    } catch (const Error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
}

} // namespace tracelens::simulate
