#include "tracelens/detect.hpp"
#include "tracelens/error.hpp"
#include "tracelens/ingest.hpp"
#include "tracelens/modeling.hpp"
#include "tracelens/pruning.hpp"
#include "tracelens/report.hpp"
#include "tracelens/simulate.hpp"
#include "tracelens/static_features.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tracelens;

namespace {

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot write " + file.string());
    out << text;
    spdlog::debug("wrote {}", file.string());
}

void write_json(const fs::path& file, const json& doc) { write_text(file, doc.dump(2) + "\n"); }

json read_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw NotFoundError("cannot open " + file.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
}

// Writes <stem>.json and <stem>.md under `out` when given; prints one of them.
void emit(const json& doc, const std::string& markdown, const std::string& out, const std::string& stem,
          const std::string& format) {
    if (!out.empty()) {
        write_json(fs::path(out) / (stem + ".json"), doc);
        write_text(fs::path(out) / (stem + ".md"), markdown);
    }
    if (format == "md") {
        std::cout << markdown;
    } else {
        std::cout << doc.dump(2) << "\n";
    }
}

std::vector<pruning::StaticFeatures> load_features(const std::string& csv, const std::vector<std::string>& sources) {
    std::vector<pruning::StaticFeatures> out;
    if (!csv.empty()) out = pruning::load_static_features_csv(csv);
    for (const auto& src : sources) {
        std::ifstream in(src);
        if (!in) throw NotFoundError("cannot open source file " + src);
        std::stringstream buf;
        buf << in.rdbuf();
        try {
            auto found = pruning::extract_static_features(buf.str());
            out.insert(out.end(), found.begin(), found.end());
        } catch (const ParseError& e) {
            throw ParseError(src + ": " + e.what());
        }
    }
    return out;
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
    }
    return s;
}

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("tracelens");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("TRACELENS_LOG")) {
        const auto level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string(env) != "off") {
            spdlog::warn("TRACELENS_LOG='{}' is not a log level; keeping warn", env);
        } else {
            spdlog::set_level(level);
        }
    }
}

const std::vector<std::string> formats = {"json", "md"};

struct Common {
    std::string out;
    std::string format{"json"};
};

void add_output(CLI::App* cmd, Common& c, const std::string& out_help) {
    cmd->add_option("--out", c.out, out_help);
    cmd->add_option("--format", c.format, "Printed format")->check(CLI::IsMember(formats))->capture_default_str();
}

struct IngestArgs {
    Common io;
    std::string dir;
    std::string program;
    std::string version{"v1"};
    std::string run_format{"csv"};
    double sigma{3.0};
    double percentile{0.99};
};

void cmd_ingest(const IngestArgs& a) {
    if (a.io.out.empty()) throw PreconditionError("ingest needs --out FILE for the canonical dataset");
    const std::string program = a.program.empty() ? fs::path(a.dir).filename().string() : a.program;
    const auto ds = ingest::load_dataset_dir(a.dir, program, a.version, ingest::run_format_from_string(a.run_format));
    ingest::save_dataset_json(ds, a.io.out);
    ingest::PreprocessConfig cfg{a.sigma, a.percentile};
    const auto pre = ingest::preprocess(ds, cfg);
    json doc = {{"kind", "ingest"},
                {"program", ds.program()},
                {"version", ds.version()},
                {"runs", ds.run_count()},
                {"functions", ds.function_count()},
                {"kept_after_preprocessing", pre.dataset.function_count()},
                {"preprocess", ingest::report_to_json(pre.report)}};
    if (a.io.format == "md") {
        std::cout << "## Ingest " << ds.program() << " " << ds.version() << "\n\n"
                  << "- runs: " << ds.run_count() << "\n- functions: " << ds.function_count()
                  << "\n- kept after preprocessing: " << pre.dataset.function_count()
                  << "\n- dropped: " << pre.report.functions_dropped.size() << "\n";
    } else {
        std::cout << doc.dump(2) << "\n";
    }
}

struct PruneArgs {
    Common io;
    std::string dataset;
    std::vector<std::string> criteria;
    bool all{false};
    double span{threshold::default_span};
    double rho_cutoff{0.7};
    double alpha{0.05};
    std::string static_features;
    std::vector<std::string> sources;
};

void cmd_prune(const PruneArgs& a) {
    const auto raw = ingest::load_dataset_json(a.dataset);
    const auto prepared = ingest::preprocess(raw).dataset;
    const auto features = load_features(a.static_features, a.sources);
    const pruning::PruningOptions opts{a.span, a.rho_cutoff, a.alpha};

    std::vector<pruning::CriterionId> wanted;
    if (a.all) {
        wanted.assign(pruning::all_criteria.begin(), pruning::all_criteria.end());
    } else {
        for (const auto& c : a.criteria) wanted.push_back(pruning::criterion_from_string(c));
    }
    if (wanted.empty()) throw PreconditionError("prune needs --criterion NAME or --all");

    std::vector<pruning::PruningResult> results;
    json result_docs = json::array();
    for (const auto c : wanted) {
        const std::string name(pruning::to_string(c));
        if (c == pruning::CriterionId::StaPerfSens && features.empty() && a.all) {
            spdlog::warn("skipping staperfsens: no --static-features or --source given");
            const json skipped = {{"criterion", name}, {"skipped", "no static features supplied"}};
            if (!a.io.out.empty()) write_json(fs::path(a.io.out) / ("prune_" + name + ".json"), skipped);
            result_docs.push_back(skipped);
            continue;
        }
        try {
            auto r = pruning::run_criterion(c, prepared, opts, features);
            spdlog::info("{}: {} sensitive of {}", name, r.sensitive.size(), prepared.function_count());
            const json doc = pruning::result_to_json(r);
            if (!a.io.out.empty()) write_json(fs::path(a.io.out) / ("prune_" + name + ".json"), doc);
            result_docs.push_back(doc);
            results.push_back(std::move(r));
        } catch (const Error& e) {
            throw Error(name + ": " + e.what());
        }
    }
    const json table = report::pruning_table_json(raw.program(), raw.function_count(), results);
    const std::string md = report::pruning_table_markdown(table);
    if (!a.io.out.empty()) {
        emit(table, md, a.io.out, "pruning_table", a.io.format);
    } else if (a.io.format == "md") {
        std::cout << md;
    } else {
        std::cout << json{{"table", table}, {"results", result_docs}}.dump(2) << "\n";
    }
}

struct ModelArgs {
    Common io;
    std::string dataset;
    std::string prune_dataset;
    std::vector<std::string> criteria;
    std::vector<std::string> pruning_files;
    std::vector<std::string> families;
    bool full{false};
    std::uint64_t seed{1};
    std::size_t folds{10};
    double train_fraction{0.8};
    double span{threshold::default_span};
    double rho_cutoff{0.7};
    std::string static_features;
    std::vector<std::string> sources;
};

void cmd_model(const ModelArgs& a) {
    const auto data = ingest::load_dataset_json(a.dataset);
    std::vector<modeling::ModelSpec> specs;
    if (a.families.empty()) {
        specs = modeling::default_model_zoo(a.seed);
    } else {
        for (const auto& f : a.families) specs.push_back({modeling::family_from_string(f), {}, a.seed});
    }
    const modeling::BuildOptions build{a.train_fraction, a.folds};

    std::vector<std::pair<std::string, std::vector<FunctionId>>> jobs;
    if (a.full) jobs.emplace_back("full", data.function_index());
    if (!a.criteria.empty()) {
        const auto source = a.prune_dataset.empty() ? data : ingest::load_dataset_json(a.prune_dataset);
        const auto prepared = ingest::preprocess(source).dataset;
        const auto features = load_features(a.static_features, a.sources);
        const pruning::PruningOptions opts{a.span, a.rho_cutoff, 0.05};
        for (const auto& c : a.criteria) {
            const auto r = pruning::run_criterion(pruning::criterion_from_string(c), prepared, opts, features);
            jobs.emplace_back(c, std::vector<FunctionId>(r.sensitive.begin(), r.sensitive.end()));
        }
    }
    for (const auto& file : a.pruning_files) {
        const auto r = pruning::result_from_json(read_json(file));
        jobs.emplace_back(std::string(pruning::to_string(r.criterion)),
                          std::vector<FunctionId>(r.sensitive.begin(), r.sensitive.end()));
    }
    if (jobs.empty()) throw PreconditionError("model needs --full, --criterion NAME or --pruning FILE");

    std::vector<report::ModelRow> rows;
    for (const auto& [label, functions] : jobs) {
        try {
            const auto built = modeling::build_model(data, functions, specs, a.seed, build);
            spdlog::info("{}: {} features, test r2 {:.4f}", label, functions.size(), built.model.test_metrics.r2);
            if (!a.io.out.empty()) {
                json doc = modeling::model_to_json(built.model);
                doc["seed"] = a.seed;
                doc["label"] = label;
                write_json(fs::path(a.io.out) / ("model_" + sanitize(label) + ".json"), doc);
            }
            rows.push_back({label, functions.size(), built.model.test_metrics, built.cv, built.model.spec.label()});
        } catch (const Error& e) {
            throw Error(label + ": " + e.what());
        }
    }
    json table = report::model_table_json(data.program(), rows);
    table["seed"] = a.seed;
    emit(table, report::model_table_markdown(table), a.io.out, "model_table", a.io.format);
}

struct DetectArgs {
    Common io;
    std::string base;
    std::vector<std::string> variants;
    std::string criterion{"cov"};
    std::string method{"both"};
    std::uint64_t seed{1};
    std::string static_features;
    std::vector<std::string> sources;
};

void cmd_detect(const DetectArgs& a) {
    const auto base = ingest::load_dataset_json(a.base);
    std::vector<TraceDataset> variants;
    for (const auto& v : a.variants) variants.push_back(ingest::load_dataset_json(v));
    detect::CampaignOptions opts;
    opts.model_based = a.method != "direct";
    opts.direct = a.method != "model";
    const auto specs = modeling::default_model_zoo(a.seed);
    const auto features = load_features(a.static_features, a.sources);
    const auto rep = detect::run_detection_campaign(base, variants, pruning::criterion_from_string(a.criterion), specs,
                                                    a.seed, opts, features);
    json doc = detect::campaign_to_json(rep);
    doc["seed"] = a.seed;
    emit(doc, report::campaign_markdown(doc), a.io.out, "campaign", a.io.format);
}

struct SimulateArgs {
    Common io;
    std::string scenario;
    bool reference{false};
    std::size_t runs{0};
    std::optional<std::uint64_t> seed;
    bool inject_plan{false};
    std::vector<std::string> inject;
    std::vector<std::string> confound;
    std::size_t per_cluster{5};
    std::int64_t delay_ns{5000};
};

void cmd_simulate(const SimulateArgs& a) {
    if (a.io.out.empty()) throw PreconditionError("simulate needs --out DIR");
    if (a.scenario.empty() == !a.reference) throw PreconditionError("simulate needs exactly one of --scenario or --reference");
    const auto sc = a.reference ? simulate::reference_scenario() : simulate::load_scenario(a.scenario);
    const std::size_t runs = a.runs == 0 ? sc.runs : a.runs;
    const std::uint64_t seed = a.seed.value_or(sc.seed);
    const fs::path out(a.io.out);

    json files = json::array();
    auto save = [&](const TraceDataset& ds, const std::string& file, const std::string& target) {
        ingest::save_dataset_json(ds, out / file);
        files.push_back({{"file", file}, {"version", ds.version()}, {"target", target}});
    };
    const auto base = simulate::generate_dataset(sc, runs, seed, "base");
    save(base, "base.json", "");
    write_json(out / "scenario.json", simulate::scenario_to_json(sc));
    std::ofstream sf(out / "static_features.csv");
    pruning::write_static_features_csv(sf, simulate::synthetic_static_features(sc, seed));

    std::vector<FunctionId> targets;
    json doc = {{"kind", "simulation"}, {"scenario", sc.name}, {"runs", runs}, {"seed", seed}, {"delay_ns_per_call", a.delay_ns}};
    if (a.inject_plan) {
        const auto plan = detect::select_injection_spots(base, a.per_cluster, seed);
        doc["plan"] = detect::plan_to_json(plan);
        targets = plan.all();
    }
    for (const auto& f : a.inject) targets.emplace_back(f);
    int n = 0;
    for (const auto& t : targets) {
        const auto ds = simulate::generate_dataset(simulate::inject_delay(sc, t, a.delay_ns), runs, seed,
                                                   "inject:" + t.name);
        char name[32];
        std::snprintf(name, sizeof name, "inject_%02d.json", n++);
        save(ds, name, t.name);
    }
    n = 0;
    for (const auto& f : a.confound) {
        const auto variant = simulate::confounded_variant(sc, FunctionId(f), a.delay_ns);
        const auto ds = simulate::generate_dataset(variant, runs, seed, "confounded:" + f);
        char name[32];
        std::snprintf(name, sizeof name, "confounded_%02d.json", n++);
        save(ds, name, f);
    }
    doc["files"] = std::move(files);
    write_json(out / "manifest.json", doc);
    if (a.io.format == "md") {
        std::cout << "## Simulation " << sc.name << "\n\n- runs: " << runs << "\n- seed: " << seed
                  << "\n- datasets: " << doc["files"].size() << "\n";
    } else {
        std::cout << doc.dump(2) << "\n";
    }
}

struct SpotsArgs {
    Common io;
    std::string dataset;
    std::size_t per_cluster{5};
    std::uint64_t seed{1};
};

void cmd_spots(const SpotsArgs& a) {
    const auto ds = ingest::load_dataset_json(a.dataset);
    const auto plan = detect::select_injection_spots(ds, a.per_cluster, a.seed);
    for (const auto& band : plan.underfilled) spdlog::warn("{} band has fewer than {} functions", band, a.per_cluster);
    json doc = detect::plan_to_json(plan);
    doc["kind"] = "injection_plan";
    doc["seed"] = a.seed;
    doc["per_cluster"] = a.per_cluster;
    std::string md = "## Injection plan\n\n| Band | Functions |\n|---|---|\n";
    for (const char* band : {"low", "medium", "high"}) {
        std::string names;
        for (const auto& f : doc[band]) names += (names.empty() ? "" : ", ") + f.get<std::string>();
        md += std::string("| ") + band + " | " + names + " |\n";
    }
    emit(doc, md, a.io.out, "injection_plan", a.io.format);
}

struct ReportArgs {
    Common io;
    std::string input;
    std::string dataset;
    std::string model_dataset;
    std::uint64_t seed{1};
    std::string static_features;
    std::vector<std::string> sources;
};

void cmd_report(const ReportArgs& a) {
    if (!a.input.empty()) {
        const json doc = read_json(a.input);
        if (a.io.format == "md") {
            std::cout << report::render_markdown(doc);
        } else {
            std::cout << doc.dump(2) << "\n";
        }
        return;
    }
    if (a.dataset.empty()) throw PreconditionError("report needs --input FILE or --dataset FILE");
    const auto raw = ingest::load_dataset_json(a.dataset);
    const auto model_data = a.model_dataset.empty() ? raw : ingest::load_dataset_json(a.model_dataset);
    const auto prepared = ingest::preprocess(raw).dataset;
    const auto features = load_features(a.static_features, a.sources);
    std::vector<pruning::CriterionId> criteria;
    for (const auto c : pruning::all_criteria) {
        if (c != pruning::CriterionId::StaPerfSens || !features.empty()) criteria.push_back(c);
    }
    const auto specs = modeling::default_model_zoo(a.seed);
    const auto assessment = report::assess_criteria(prepared, model_data, criteria, specs, a.seed, {}, features);
    json doc = report::assessment_to_json(assessment);
    doc["seed"] = a.seed;
    emit(doc, report::assessment_markdown(doc), a.io.out, "assessment", a.io.format);
}

void add_static_options(CLI::App* cmd, std::string& csv, std::vector<std::string>& sources) {
    cmd->add_option("--static-features", csv, "Static feature CSV for staperfsens")->check(CLI::ExistingFile);
    cmd->add_option("--source", sources, "C/C++ source files to scan for staperfsens")->check(CLI::ExistingFile);
}

} // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Trace pruning, performance modeling and regression detection"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    auto* ingest_cmd = app.add_subcommand("ingest", "Convert a run directory into a canonical dataset JSON");
    ingest_cmd->add_option("--dataset", ingest_args.dir, "Directory with runs.csv and per-run files")
        ->required()
        ->check(CLI::ExistingDirectory);
    ingest_cmd->add_option("--program", ingest_args.program, "Program name (default: directory name)");
    ingest_cmd->add_option("--version", ingest_args.version, "Version label")->capture_default_str();
    ingest_cmd->add_option("--run-format", ingest_args.run_format, "Per-run file format")
        ->check(CLI::IsMember({"csv", "uftrace"}))
        ->capture_default_str();
    ingest_cmd->add_option("--outlier-sigma", ingest_args.sigma, "Outlier limit in standard deviations")
        ->capture_default_str();
    ingest_cmd->add_option("--unique-percentile", ingest_args.percentile, "Constant-frequency percentile")
        ->capture_default_str();
    add_output(ingest_cmd, ingest_args.io, "Canonical dataset JSON file");

    PruneArgs prune_args;
    auto* prune_cmd = app.add_subcommand("prune", "Select performance-sensitive functions");
    prune_cmd->add_option("--dataset", prune_args.dataset, "Dataset JSON")->required()->check(CLI::ExistingFile);
    prune_cmd->add_option("--criterion", prune_args.criteria, "Criterion name (repeatable)");
    prune_cmd->add_flag("--all", prune_args.all, "Run every criterion");
    prune_cmd->add_option("--span", prune_args.span, "Loess span")->capture_default_str();
    prune_cmd->add_option("--rho-cutoff", prune_args.rho_cutoff, "Correlation cutoff")->capture_default_str();
    prune_cmd->add_option("--alpha", prune_args.alpha, "Feature-significance level")->capture_default_str();
    add_static_options(prune_cmd, prune_args.static_features, prune_args.sources);
    add_output(prune_cmd, prune_args.io, "Output directory");

    ModelArgs model_args;
    auto* model_cmd = app.add_subcommand("model", "Build optimized and full-tracing performance models");
    model_cmd->add_option("--dataset", model_args.dataset, "Dataset JSON used for modeling")
        ->required()
        ->check(CLI::ExistingFile);
    model_cmd->add_option("--prune-dataset", model_args.prune_dataset, "Dataset JSON used for pruning")
        ->check(CLI::ExistingFile);
    model_cmd->add_option("--criterion", model_args.criteria, "Criterion name (repeatable)");
    model_cmd->add_option("--pruning", model_args.pruning_files, "Pruning result JSON (repeatable)")
        ->check(CLI::ExistingFile);
    model_cmd->add_flag("--full", model_args.full, "Also build the full-tracing model");
    model_cmd->add_option("--family", model_args.families, "Model family (repeatable; default: all)");
    model_cmd->add_option("--seed", model_args.seed, "Seed")->capture_default_str();
    model_cmd->add_option("--folds", model_args.folds, "Cross-validation folds")->capture_default_str();
    model_cmd->add_option("--train-fraction", model_args.train_fraction, "Training share")->capture_default_str();
    model_cmd->add_option("--span", model_args.span, "Loess span")->capture_default_str();
    model_cmd->add_option("--rho-cutoff", model_args.rho_cutoff, "Correlation cutoff")->capture_default_str();
    add_static_options(model_cmd, model_args.static_features, model_args.sources);
    add_output(model_cmd, model_args.io, "Output directory");

    DetectArgs detect_args;
    auto* detect_cmd = app.add_subcommand("detect", "Compare versions for performance regressions");
    detect_cmd->add_option("--dataset", detect_args.base, "Base version dataset JSON")
        ->required()
        ->check(CLI::ExistingFile);
    detect_cmd->add_option("--variant", detect_args.variants, "Variant dataset JSON (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    detect_cmd->add_option("--criterion", detect_args.criterion, "Pruning criterion for the models")
        ->capture_default_str();
    detect_cmd->add_option("--method", detect_args.method, "Detection method")
        ->check(CLI::IsMember({"model", "direct", "both"}))
        ->capture_default_str();
    detect_cmd->add_option("--seed", detect_args.seed, "Seed")->capture_default_str();
    add_static_options(detect_cmd, detect_args.static_features, detect_args.sources);
    add_output(detect_cmd, detect_args.io, "Output directory");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate synthetic datasets");
    sim_cmd->add_option("--scenario", sim_args.scenario, "Scenario JSON")->check(CLI::ExistingFile);
    sim_cmd->add_flag("--reference", sim_args.reference, "Use the built-in reference scenario");
    sim_cmd->add_option("--runs", sim_args.runs, "Runs per dataset (default: scenario runs)");
    sim_cmd->add_option("--seed", sim_args.seed, "Seed (default: scenario seed)");
    sim_cmd->add_flag("--inject-plan", sim_args.inject_plan, "Inject into a low/medium/high injection plan");
    sim_cmd->add_option("--inject", sim_args.inject, "Function to inject a delay into (repeatable)");
    sim_cmd->add_option("--confound", sim_args.confound, "Delay target for a workload-confounded variant (repeatable)");
    sim_cmd->add_option("--per-cluster", sim_args.per_cluster, "Functions per band")->capture_default_str();
    sim_cmd->add_option("--delay-ns", sim_args.delay_ns, "Injected delay per call in ns")->capture_default_str();
    add_output(sim_cmd, sim_args.io, "Output directory");

    SpotsArgs spots_args;
    auto* spots_cmd = app.add_subcommand("spots", "Choose injection spots by call-frequency band");
    spots_cmd->add_option("--dataset", spots_args.dataset, "Dataset JSON")->required()->check(CLI::ExistingFile);
    spots_cmd->add_option("--per-cluster", spots_args.per_cluster, "Functions per band")->capture_default_str();
    spots_cmd->add_option("--seed", spots_args.seed, "Seed")->capture_default_str();
    add_output(spots_cmd, spots_args.io, "Output directory");

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "Rank criteria or render a saved JSON report");
    report_cmd->add_option("--input", report_args.input, "Saved report JSON to render")->check(CLI::ExistingFile);
    report_cmd->add_option("--dataset", report_args.dataset, "Dataset JSON used for pruning")
        ->check(CLI::ExistingFile);
    report_cmd->add_option("--model-dataset", report_args.model_dataset, "Dataset JSON used for modeling")
        ->check(CLI::ExistingFile);
    report_cmd->add_option("--seed", report_args.seed, "Seed")->capture_default_str();
    add_static_options(report_cmd, report_args.static_features, report_args.sources);
    add_output(report_cmd, report_args.io, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest_cmd) cmd_ingest(ingest_args);
        if (*prune_cmd) cmd_prune(prune_args);
        if (*model_cmd) cmd_model(model_args);
        if (*detect_cmd) cmd_detect(detect_args);
        if (*sim_cmd) cmd_simulate(sim_args);
        if (*spots_cmd) cmd_spots(spots_args);
        if (*report_cmd) cmd_report(report_args);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
