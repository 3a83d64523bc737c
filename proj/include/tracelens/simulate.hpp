#pragma once

#include "tracelens/static_features.hpp"
#include "tracelens/trace_model.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tracelens::simulate {

// calls = max(0, round(base + slope * w) + noise), where noise is uniform on
// [-noise, noise] and applied with probability noise_prob.
struct FreqModel {
    double base{0.0};
    double slope{0.0};
    std::int64_t noise{0};
    double noise_prob{1.0};
};

enum class TimeKind { Constant, Jitter, InputScaled };

std::string_view to_string(TimeKind k);
TimeKind time_kind_from_string(std::string_view s);

// Per-call time in ns, drawn once per run:
//   constant: c;  jitter: c + sigma * N(0, 1);  input_scaled: c + slope * w.
// Negative draws clamp to zero.
struct TimeModel {
    TimeKind kind{TimeKind::Constant};
    double c{0.0};
    double spread{0.0};  // sigma for jitter, slope for input_scaled

    double per_call_ns(double w, double z) const;
};

struct SyntheticFunction {
    FunctionId id;
    FreqModel freq;
    TimeModel time;
    bool sensitive{false};
};

struct Scenario {
    std::string name{"synthetic"};
    std::vector<SyntheticFunction> functions;
    double w_min{0.0};
    double w_max{1.0};
    std::uint64_t noise_seed{0};
    double cost_per_event_ns{1.0};
    // Each run's total is the sum of self-times plus uniform noise on [0, global_noise_ns].
    double global_noise_ns{0.0};
    std::size_t runs{100};
    std::uint64_t seed{0};

    // Throws ValidationError.
    void validate() const;
    const SyntheticFunction& function(const FunctionId& f) const;
};

FunctionSet ground_truth(const Scenario& scenario);

// Inputs and call counts come from a stream seeded by `seed`; per-call times
// and global noise from a second stream seeded by mix(noise_seed, seed).
TraceDataset generate_dataset(const Scenario& scenario, std::size_t n_runs, std::uint64_t seed,
                              const std::string& version = "base");

// Throws NotFoundError for an unknown target, ValidationError for a negative delay.
Scenario inject_delay(const Scenario& scenario, const FunctionId& target, std::int64_t delay_ns_per_call);

struct OverheadEstimate {
    std::int64_t events{0};
    double overhead_ns{0.0};
};

OverheadEstimate estimate_overhead(const TraceDataset& dataset, const FunctionSet& traced,
                                   double cost_per_event_ns);

// Expected program time in ns at input w (noise terms at their means).
double expected_total_ns(const Scenario& scenario, double w);

// Delay on `target` combined with an input range shifted (same width) so
// that the mean expected total time matches the undelayed scenario.
Scenario confounded_variant(const Scenario& scenario, const FunctionId& target, std::int64_t delay_ns_per_call);

// 50 functions, 8 sensitive, 2500 runs; insensitive functions carry most call events.
Scenario reference_scenario();

// Stand-in source metrics for scenario functions: sensitive functions get
// larger, loopier bodies. Deterministic per seed.
std::vector<pruning::StaticFeatures> synthetic_static_features(const Scenario& scenario, std::uint64_t seed);

nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& file);

} // namespace tracelens::simulate
