#include "tracelens/trace_model.hpp"

#include "tracelens/error.hpp"

#include <algorithm>
#include <unordered_set>

namespace tracelens {

namespace {

void validate_run(const RunRecord& run) {
    if (run.input_id.empty()) {
        throw ValidationError("run with empty input_id");
    }
    if (run.total_time_ns < 0) {
        throw ValidationError("run '" + run.input_id + "': negative total_time_ns");
    }
    for (const auto& [fn, stats] : run.entries) {
        if (fn.name.empty()) {
            throw ValidationError("run '" + run.input_id + "': empty function name");
        }
        if (stats.calls < 0 || stats.self_time_ns < 0) {
            throw ValidationError("run '" + run.input_id + "', function '" + fn.name +
                                  "': negative calls or self_time_ns");
        }
        if (stats.calls == 0 && stats.self_time_ns != 0) {
            throw ValidationError("run '" + run.input_id + "', function '" + fn.name +
                                  "': zero calls with non-zero self time");
        }
    }
}

} // namespace

TraceDataset dataset_from_runs(std::vector<RunRecord> runs, std::string program, std::string version) {
    if (runs.empty()) {
        throw ValidationError("dataset needs at least one run");
    }
    std::unordered_set<std::string> ids;
    for (const auto& run : runs) {
        validate_run(run);
        if (!ids.insert(run.input_id).second) {
            throw ValidationError("duplicate input_id '" + run.input_id + "'");
        }
    }

    TraceDataset ds;
    ds.program_ = std::move(program);
    ds.version_ = std::move(version);
    ds.runs_ = std::move(runs);
    ds.build_columns();
    return ds;
}

void TraceDataset::build_columns() {
    FunctionSet all;
    for (const auto& run : runs_) {
        for (const auto& [fn, stats] : run.entries) {
            all.insert(fn);
        }
    }
    functions_.assign(all.begin(), all.end());

    calls_.assign(functions_.size(), std::vector<std::int64_t>(runs_.size(), 0));
    self_.assign(functions_.size(), std::vector<std::int64_t>(runs_.size(), 0));
    for (std::size_t r = 0; r < runs_.size(); ++r) {
        for (const auto& [fn, stats] : runs_[r].entries) {
            const std::size_t c = column(fn);
            calls_[c][r] = stats.calls;
            self_[c][r] = stats.self_time_ns;
        }
    }
}

bool TraceDataset::contains(const FunctionId& f) const {
    return std::binary_search(functions_.begin(), functions_.end(), f);
}

std::size_t TraceDataset::column(const FunctionId& f) const {
    auto it = std::lower_bound(functions_.begin(), functions_.end(), f);
    if (it == functions_.end() || *it != f) {
        throw NotFoundError("function '" + f.name + "' not in dataset");
    }
    return static_cast<std::size_t>(it - functions_.begin());
}

std::size_t TraceDataset::outlier_count(std::size_t column) const {
    if (kept_.empty() || kept_[column].empty()) {
        return 0;
    }
    return static_cast<std::size_t>(std::count(kept_[column].begin(), kept_[column].end(), false));
}

std::vector<double> TraceDataset::response_seconds() const {
    std::vector<double> out;
    out.reserve(runs_.size());
    for (const auto& run : runs_) {
        out.push_back(static_cast<double>(run.total_time_ns) * 1e-9);
    }
    return out;
}

TraceDataset TraceDataset::with_outlier_mask(std::vector<std::vector<bool>> kept) const {
    if (kept.size() != functions_.size()) {
        throw ValidationError("outlier mask does not match function count");
    }
    for (const auto& col : kept) {
        if (!col.empty() && col.size() != runs_.size()) {
            throw ValidationError("outlier mask does not match run count");
        }
    }
    TraceDataset out = *this;
    out.kept_ = std::move(kept);
    return out;
}

TraceDataset TraceDataset::without_functions(const FunctionSet& drop) const {
    TraceDataset out;
    out.program_ = program_;
    out.version_ = version_;
    out.runs_ = runs_;
    for (auto& run : out.runs_) {
        std::erase_if(run.entries, [&](const auto& kv) { return drop.contains(kv.first); });
    }
    for (std::size_t c = 0; c < functions_.size(); ++c) {
        if (drop.contains(functions_[c])) {
            continue;
        }
        out.functions_.push_back(functions_[c]);
        out.calls_.push_back(calls_[c]);
        out.self_.push_back(self_[c]);
        if (!kept_.empty()) {
            out.kept_.push_back(kept_[c]);
        }
    }
    return out;
}

TraceDataset TraceDataset::subset_runs(std::span<const std::size_t> rows) const {
    if (rows.empty()) {
        throw ValidationError("run subset is empty");
    }
    std::vector<RunRecord> picked;
    picked.reserve(rows.size());
    for (std::size_t r : rows) {
        picked.push_back(runs_.at(r));
    }
    TraceDataset out = dataset_from_runs(std::move(picked), program_, version_);
    // Keep the parent's column set so subsets stay aligned with each other.
    if (out.functions_ != functions_) {
        out.functions_ = functions_;
        out.calls_.assign(functions_.size(), {});
        out.self_.assign(functions_.size(), {});
        for (std::size_t c = 0; c < functions_.size(); ++c) {
            for (std::size_t r : rows) {
                out.calls_[c].push_back(calls_[c][r]);
                out.self_[c].push_back(self_[c][r]);
            }
        }
    }
    if (!kept_.empty()) {
        out.kept_.assign(functions_.size(), {});
        for (std::size_t c = 0; c < functions_.size(); ++c) {
            if (kept_[c].empty()) {
                continue;
            }
            for (std::size_t r : rows) {
                out.kept_[c].push_back(kept_[c][r]);
            }
        }
    }
    return out;
}

SeriesView series_for(const TraceDataset& dataset, const FunctionId& f) {
    const std::size_t c = dataset.column(f);
    SeriesView view;
    view.function = f;
    const auto calls = dataset.calls(c);
    const auto self = dataset.self_times(c);
    view.call_freqs.assign(calls.begin(), calls.end());
    view.self_times_ns.reserve(self.size());
    for (std::size_t r = 0; r < self.size(); ++r) {
        if (dataset.self_time_kept(c, r)) {
            view.self_times_ns.push_back(static_cast<double>(self[r]));
        }
    }
    return view;
}

} // namespace tracelens
