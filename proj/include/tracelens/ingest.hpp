#pragma once

#include "tracelens/trace_model.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tracelens::ingest {

struct PreprocessConfig {
    double outlier_sigma{3.0};
    double unique_freq_percentile{0.99};

    // Throws PreconditionError when a field is out of range.
    void validate() const;
};

enum class DropReason { ConstantFrequency, AllOutliers };

std::string_view to_string(DropReason r);

struct DroppedFunction {
    FunctionId function;
    DropReason reason;
};

struct PreprocessReport {
    std::vector<DroppedFunction> functions_dropped;
    std::map<FunctionId, std::size_t> outliers_removed;
};

struct PreprocessResult {
    TraceDataset dataset;
    PreprocessReport report;
};

// Minimum number of distinct call-frequency values a function needs to be
// kept: ceil((1 - percentile) * runs).
std::size_t unique_frequency_threshold(std::size_t runs, double percentile);

// Masks self-time values outside mean +- sigma * sample_std per function and
// drops functions with too few distinct call frequencies. Call frequencies
// are never altered.
PreprocessResult preprocess(const TraceDataset& dataset, const PreprocessConfig& cfg = {});

// CSV rows `function,calls,self_time_ns`; a leading header row is skipped.
// Duplicate function rows are summed.
RunRecord parse_run_csv(std::istream& in, std::string input_id, std::int64_t total_time_ns);

struct ReportRow {
    FunctionId function;
    std::int64_t calls{0};
    std::int64_t self_time_ns{0};
};

// Converts a decimal duration with unit suffix (ns, us, ms, s) to integer ns,
// rounding half away from zero.
std::int64_t parse_duration_ns(std::string_view value, std::string_view unit);

// Parses the per-function table printed by `uftrace report`
// (Total time, Self time, Calls, Function).
std::vector<ReportRow> parse_uftrace_report(std::string_view text);

enum class RunFormat { Csv, Uftrace };

RunFormat run_format_from_string(std::string_view s);

// Reads a directory holding `runs.csv` (input_id,total_time_ns) and one
// `run_<input_id>.csv` (or `.txt` uftrace report) per listed run.
TraceDataset load_dataset_dir(const std::filesystem::path& dir, const std::string& program,
                              const std::string& version, RunFormat format = RunFormat::Csv);
void save_dataset_dir(const TraceDataset& dataset, const std::filesystem::path& dir);

nlohmann::json dataset_to_json(const TraceDataset& dataset);
TraceDataset dataset_from_json(const nlohmann::json& doc);
TraceDataset load_dataset_json(const std::filesystem::path& file);
void save_dataset_json(const TraceDataset& dataset, const std::filesystem::path& file);

nlohmann::json report_to_json(const PreprocessReport& report);

} // namespace tracelens::ingest
