#pragma once

#include "tracelens/trace_model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace tracelens::pruning {

struct StaticFeatures {
    FunctionId function;
    std::int64_t loc{0};
    std::int64_t loops{0};
    std::int64_t nested_loops{0};
    std::int64_t calls{0};
    bool is_recursive{false};
    std::int64_t branches{0};
    std::int64_t params{0};

    // Throws ValidationError on negative counts or nested_loops > loops.
    void validate() const;
};

// Heuristic keyword/brace scanner over C-like source. Finds brace-balanced
// function definitions (qualified by enclosing namespace/class names) and
// counts body lines, loops, loops nested in loops, if/case branches, call
// sites, parameters and self-references. Comments and literals are skipped.
// Throws ParseError with line:column on unbalanced braces.
std::vector<StaticFeatures> extract_static_features(std::string_view source);

// CSV with header `function,loc,loops,nested_loops,calls,recursive,branches,params`.
std::vector<StaticFeatures> parse_static_features_csv(std::istream& in);
std::vector<StaticFeatures> load_static_features_csv(const std::filesystem::path& file);
void write_static_features_csv(std::ostream& out, std::span<const StaticFeatures> features);

} // namespace tracelens::pruning
