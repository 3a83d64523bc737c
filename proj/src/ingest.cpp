#include "tracelens/ingest.hpp"

#include "tracelens/error.hpp"
#include "tracelens/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tracelens::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

void PreprocessConfig::validate() const {
    if (!(outlier_sigma > 0.0)) {
        throw PreconditionError("outlier_sigma must be positive");
    }
    if (!(unique_freq_percentile > 0.0 && unique_freq_percentile < 1.0)) {
        throw PreconditionError("unique_freq_percentile must lie in (0, 1)");
    }
}

std::string_view to_string(DropReason r) {
    return r == DropReason::ConstantFrequency ? "constant_frequency" : "all_outliers";
}

std::size_t unique_frequency_threshold(std::size_t runs, double percentile) {
    const double raw = (1.0 - percentile) * static_cast<double>(runs);
    // (1 - 0.99) * 1000 evaluates to 10.000000000000009.
    return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

PreprocessResult preprocess(const TraceDataset& dataset, const PreprocessConfig& cfg) {
    cfg.validate();
    if (dataset.run_count() == 0) {
        throw PreconditionError("preprocess: empty dataset");
    }
    const std::size_t runs = dataset.run_count();
    const std::size_t min_unique = unique_frequency_threshold(runs, cfg.unique_freq_percentile);

    PreprocessReport report;
    FunctionSet drop;
    std::vector<std::vector<bool>> masks(dataset.function_count());

    for (std::size_t c = 0; c < dataset.function_count(); ++c) {
        const FunctionId& fn = dataset.function_index()[c];
        const auto calls = dataset.calls(c);
        std::vector<std::int64_t> distinct(calls.begin(), calls.end());
        std::sort(distinct.begin(), distinct.end());
        const auto unique = static_cast<std::size_t>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
        if (unique < min_unique) {
            drop.insert(fn);
            report.functions_dropped.push_back({fn, DropReason::ConstantFrequency});
            continue;
        }

        const auto self = dataset.self_times(c);
        std::vector<double> kept_values;
        for (std::size_t r = 0; r < runs; ++r) {
            if (dataset.self_time_kept(c, r)) kept_values.push_back(static_cast<double>(self[r]));
        }
        if (kept_values.empty()) {
            drop.insert(fn);
            report.functions_dropped.push_back({fn, DropReason::AllOutliers});
            continue;
        }
        const double m = stats::mean(kept_values);
        const double band = cfg.outlier_sigma * stats::sample_std(kept_values);

        std::vector<bool> mask(runs, true);
        std::size_t removed = 0;
        std::size_t remaining = 0;
        for (std::size_t r = 0; r < runs; ++r) {
            if (!dataset.self_time_kept(c, r)) {
                mask[r] = false;
                continue;
            }
            if (std::fabs(static_cast<double>(self[r]) - m) > band) {
                mask[r] = false;
                ++removed;
            } else {
                ++remaining;
            }
        }
        if (remaining == 0) {
            drop.insert(fn);
            report.functions_dropped.push_back({fn, DropReason::AllOutliers});
            continue;
        }
        if (removed > 0) report.outliers_removed[fn] = removed;
        if (std::find(mask.begin(), mask.end(), false) != mask.end()) masks[c] = std::move(mask);
    }

    return {dataset.with_outlier_mask(std::move(masks)).without_functions(drop), std::move(report)};
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::int64_t parse_int_field(std::string_view field, std::size_t line, const char* what) {
    field = trim(field);
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw ParseError(std::string("malformed ") + what + " '" + std::string(field) + "'", line);
    }
    if (value < 0) {
        throw ValidationError("line " + std::to_string(line) + ": negative " + what);
    }
    return value;
}

} // namespace

RunRecord parse_run_csv(std::istream& in, std::string input_id, std::int64_t total_time_ns) {
    RunRecord run;
    run.input_id = std::move(input_id);
    run.total_time_ns = total_time_ns;
    if (total_time_ns < 0) {
        throw ValidationError("negative total_time_ns for run '" + run.input_id + "'");
    }

    std::string raw;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == "function,calls,self_time_ns") continue;
        }
        // Split from the right: symbols may themselves contain commas.
        const auto last = line.rfind(',');
        const auto mid = last == std::string_view::npos || last == 0 ? std::string_view::npos : line.rfind(',', last - 1);
        if (mid == std::string_view::npos) {
            throw ParseError("expected 'function,calls,self_time_ns'", line_no);
        }
        const std::string_view name = trim(line.substr(0, mid));
        if (name.empty()) {
            throw ParseError("empty function name", line_no);
        }
        const auto calls = parse_int_field(line.substr(mid + 1, last - mid - 1), line_no, "calls");
        const auto self = parse_int_field(line.substr(last + 1), line_no, "self_time_ns");
        auto& entry = run.entries[FunctionId(std::string(name))];
        entry.calls += calls;
        entry.self_time_ns += self;
    }
    for (const auto& [fn, stats] : run.entries) {
        if (stats.calls == 0 && stats.self_time_ns != 0) {
            throw ValidationError("function '" + fn.name + "': zero calls with non-zero self time");
        }
    }
    return run;
}

std::int64_t parse_duration_ns(std::string_view value, std::string_view unit) {
    std::int64_t scale = 0;
    if (unit == "ns") {
        scale = 1;
    } else if (unit == "us") {
        scale = 1'000;
    } else if (unit == "ms") {
        scale = 1'000'000;
    } else if (unit == "s") {
        scale = 1'000'000'000;
    } else {
        throw ParseError("unrecognized time suffix '" + std::string(unit) + "'");
    }

    const auto dot = value.find('.');
    const std::string_view whole = value.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : value.substr(dot + 1);
    auto all_digits = [](std::string_view s) { return std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; }); };
    if (whole.empty() || !all_digits(whole) || !all_digits(frac)) {
        throw ParseError("malformed duration '" + std::string(value) + "'");
    }
    std::int64_t integer = 0;
    std::from_chars(whole.data(), whole.data() + whole.size(), integer);

    // Fractional part is evaluated exactly: digits * scale / 10^len, rounded.
    // Nine digits resolve 1 ns at the coarsest unit and keep the product in 64 bits.
    frac = frac.substr(0, 9);
    std::uint64_t digits = 0;
    std::uint64_t denom = 1;
    for (char ch : frac) {
        digits = digits * 10 + static_cast<unsigned>(ch - '0');
        denom *= 10;
    }
    const std::uint64_t scaled = digits * static_cast<std::uint64_t>(scale);
    const auto frac_ns = static_cast<std::int64_t>((scaled + denom / 2) / denom);
    return integer * scale + frac_ns;
}

std::vector<ReportRow> parse_uftrace_report(std::string_view text) {
    std::vector<ReportRow> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (line.find_first_not_of("=- ") == std::string_view::npos) continue;
        if (line.find("Function") != std::string_view::npos && line.find("Calls") != std::string_view::npos) continue;

        // Tokens: <total> <unit> <self> <unit> <calls> <function...>; a unit
        // may also be glued to its number ("1.2ms").
        std::size_t cursor = 0;
        std::string_view function;
        auto next_token = [&]() -> std::string_view {
            const auto b = line.find_first_not_of(" \t", cursor);
            if (b == std::string_view::npos) return {};
            const auto e = std::min(line.find_first_of(" \t", b), line.size());
            cursor = e;
            return line.substr(b, e - b);
        };
        try {
            std::int64_t times[2] = {0, 0};
            for (auto& t : times) {
                std::string_view tok = next_token();
                const auto unit_at = tok.find_first_not_of("0123456789.");
                std::string_view number = tok.substr(0, unit_at);
                std::string_view unit = unit_at == std::string_view::npos ? next_token() : tok.substr(unit_at);
                if (number.empty()) throw ParseError("expected a duration");
                t = parse_duration_ns(number, unit);
            }
            const std::string_view calls_tok = next_token();
            std::int64_t calls = 0;
            const auto [ptr, ec] = std::from_chars(calls_tok.data(), calls_tok.data() + calls_tok.size(), calls);
            if (calls_tok.empty() || ec != std::errc() || ptr != calls_tok.data() + calls_tok.size()) {
                throw ParseError("malformed call count '" + std::string(calls_tok) + "'");
            }
            function = trim(line.substr(std::min(cursor, line.size())));
            if (function.empty()) throw ParseError("missing function name");
            rows.push_back({FunctionId(std::string(function)), calls, times[1]});
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        }
        if (end == text.size()) break;
    }
    return rows;
}

RunFormat run_format_from_string(std::string_view s) {
    if (s == "csv") return RunFormat::Csv;
    if (s == "uftrace") return RunFormat::Uftrace;
    throw ParseError("unknown run format '" + std::string(s) + "' (expected csv or uftrace)");
}

namespace {

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw NotFoundError("cannot open '" + file.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename Fn>
auto with_file_context(const fs::path& file, Fn&& fn) {
    try {
        return fn();
    } catch (const ParseError& e) {
        throw ParseError(file.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(file.string() + ": " + e.what());
    }
}

} // namespace

TraceDataset load_dataset_dir(const fs::path& dir, const std::string& program, const std::string& version,
                              RunFormat format) {
    const fs::path manifest = dir / "runs.csv";
    if (!fs::exists(manifest)) {
        throw NotFoundError("missing manifest runs.csv in '" + dir.string() + "'");
    }
    std::vector<std::pair<std::string, std::int64_t>> listed;
    with_file_context(manifest, [&] {
        std::istringstream in(read_file(manifest));
        std::string raw;
        std::size_t line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            const std::string_view line = trim(raw);
            if (line.empty() || (line_no == 1 && line == "input_id,total_time_ns")) continue;
            const auto comma = line.rfind(',');
            if (comma == std::string_view::npos || comma == 0) {
                throw ParseError("expected 'input_id,total_time_ns'", line_no);
            }
            listed.emplace_back(std::string(trim(line.substr(0, comma))),
                                parse_int_field(line.substr(comma + 1), line_no, "total_time_ns"));
        }
        return 0;
    });

    std::vector<RunRecord> runs;
    for (const auto& [id, total] : listed) {
        const fs::path file = dir / ("run_" + id + (format == RunFormat::Csv ? ".csv" : ".txt"));
        const std::string text = read_file(file);
        runs.push_back(with_file_context(file, [&] {
            if (format == RunFormat::Csv) {
                std::istringstream in(text);
                return parse_run_csv(in, id, total);
            }
            RunRecord run;
            run.input_id = id;
            run.total_time_ns = total;
            for (const auto& row : parse_uftrace_report(text)) {
                auto& entry = run.entries[row.function];
                entry.calls += row.calls;
                entry.self_time_ns += row.self_time_ns;
            }
            return run;
        }));
    }
    return dataset_from_runs(std::move(runs), program, version);
}

void save_dataset_dir(const TraceDataset& dataset, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream manifest(dir / "runs.csv", std::ios::binary);
    manifest << "input_id,total_time_ns\n";
    for (const auto& run : dataset.runs()) {
        manifest << run.input_id << ',' << run.total_time_ns << '\n';
        std::ofstream out(dir / ("run_" + run.input_id + ".csv"), std::ios::binary);
        out << "function,calls,self_time_ns\n";
        for (const auto& [fn, stats] : run.entries) {
            out << fn.name << ',' << stats.calls << ',' << stats.self_time_ns << '\n';
        }
    }
}

json dataset_to_json(const TraceDataset& dataset) {
    json runs = json::array();
    for (const auto& run : dataset.runs()) {
        json entries = json::object();
        for (const auto& [fn, stats] : run.entries) entries[fn.name] = {stats.calls, stats.self_time_ns};
        runs.push_back({{"input_id", run.input_id}, {"total_time_ns", run.total_time_ns}, {"entries", std::move(entries)}});
    }
    return {{"program", dataset.program()}, {"version", dataset.version()}, {"runs", std::move(runs)}};
}

TraceDataset dataset_from_json(const json& doc) {
    try {
        std::vector<RunRecord> runs;
        for (const auto& r : doc.at("runs")) {
            RunRecord run;
            run.input_id = r.at("input_id").get<std::string>();
            run.total_time_ns = r.at("total_time_ns").get<std::int64_t>();
            for (const auto& [name, pair] : r.at("entries").items()) {
                if (!pair.is_array() || pair.size() != 2) {
                    throw ParseError("entry '" + name + "' must be [calls, self_time_ns]");
                }
                run.entries[FunctionId(name)] = {pair[0].get<std::int64_t>(), pair[1].get<std::int64_t>()};
            }
            runs.push_back(std::move(run));
        }
        return dataset_from_runs(std::move(runs), doc.at("program").get<std::string>(),
                                 doc.at("version").get<std::string>());
    } catch (const json::exception& e) {
        throw ParseError(std::string("dataset JSON: ") + e.what());
    }
}

TraceDataset load_dataset_json(const fs::path& file) {
    const std::string text = read_file(file);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    return with_file_context(file, [&] { return dataset_from_json(doc); });
}

void save_dataset_json(const TraceDataset& dataset, const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    out << dataset_to_json(dataset).dump() << '\n';
}

json report_to_json(const PreprocessReport& report) {
    json dropped = json::array();
    for (const auto& d : report.functions_dropped) {
        dropped.push_back({{"function", d.function.name}, {"reason", to_string(d.reason)}});
    }
    json outliers = json::object();
    for (const auto& [fn, n] : report.outliers_removed) outliers[fn.name] = n;
    return {{"functions_dropped", std::move(dropped)}, {"outliers_removed", std::move(outliers)}};
}

} // namespace tracelens::ingest
