#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tracelens {

// Fully qualified function symbol as reported by the tracer.
struct FunctionId {
    std::string name;

    FunctionId() = default;
    explicit FunctionId(std::string n) : name(std::move(n)) {}

    auto operator<=>(const FunctionId&) const = default;
    bool operator==(const FunctionId&) const = default;
};

using FunctionSet = std::set<FunctionId>;

struct CallStats {
    std::int64_t calls{0};
    std::int64_t self_time_ns{0};

    bool operator==(const CallStats&) const = default;
};

// One program execution.
struct RunRecord {
    std::string input_id;
    std::int64_t total_time_ns{0};
    std::map<FunctionId, CallStats> entries;

    bool operator==(const RunRecord&) const = default;
};

// Per-function series aligned to run order. Self-times exclude values flagged
// as outliers by preprocessing, so they may be shorter than call_freqs.
struct SeriesView {
    FunctionId function;
    std::vector<double> self_times_ns;
    std::vector<std::int64_t> call_freqs;
};

// Immutable functions x runs view over a set of runs. Functions missing from a
// run count as zero calls and zero self-time.
class TraceDataset {
public:
    TraceDataset() = default;

    const std::string& program() const noexcept { return program_; }
    const std::string& version() const noexcept { return version_; }
    const std::vector<RunRecord>& runs() const noexcept { return runs_; }
    const std::vector<FunctionId>& function_index() const noexcept { return functions_; }

    std::size_t run_count() const noexcept { return runs_.size(); }
    std::size_t function_count() const noexcept { return functions_.size(); }

    bool contains(const FunctionId& f) const;
    // Column position of `f` in function_index(); throws NotFoundError.
    std::size_t column(const FunctionId& f) const;

    std::span<const std::int64_t> calls(std::size_t column) const { return calls_[column]; }
    std::span<const std::int64_t> self_times(std::size_t column) const { return self_[column]; }
    // True where the self-time of run i is retained (not an outlier).
    bool self_time_kept(std::size_t column, std::size_t run) const {
        return kept_.empty() || kept_[column].empty() || kept_[column][run];
    }
    std::size_t outlier_count(std::size_t column) const;

    // Program execution times in seconds, one per run.
    std::vector<double> response_seconds() const;

    TraceDataset with_outlier_mask(std::vector<std::vector<bool>> kept) const;
    TraceDataset without_functions(const FunctionSet& drop) const;
    TraceDataset subset_runs(std::span<const std::size_t> rows) const;

    friend TraceDataset dataset_from_runs(std::vector<RunRecord> runs, std::string program,
                                          std::string version);

private:
    void build_columns();

    std::string program_;
    std::string version_;
    std::vector<RunRecord> runs_;
    std::vector<FunctionId> functions_;
    std::vector<std::vector<std::int64_t>> calls_;
    std::vector<std::vector<std::int64_t>> self_;
    // Per column; empty outer or inner vector means every value is kept.
    std::vector<std::vector<bool>> kept_;
};

// Validates runs (non-empty, unique input ids, non-negative values, zero calls
// imply zero self-time) and builds the lexicographic function index.
TraceDataset dataset_from_runs(std::vector<RunRecord> runs, std::string program, std::string version);

// Throws NotFoundError when `f` is not in the dataset.
SeriesView series_for(const TraceDataset& dataset, const FunctionId& f);

} // namespace tracelens
