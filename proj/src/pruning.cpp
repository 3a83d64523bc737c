#include "tracelens/pruning.hpp"

#include "tracelens/error.hpp"
#include "tracelens/special.hpp"
#include "tracelens/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tracelens::pruning {

using nlohmann::json;

namespace {

struct CriterionName {
    CriterionId id;
    std::string_view key;
    std::string_view display;
};

constexpr std::array<CriterionName, 10> criterion_names = {{
    {CriterionId::Entropy, "entropy", "Entropy"},
    {CriterionId::Cov, "cov", "CoV"},
    {CriterionId::EntropyCovUnion, "entropy_cov", "Entropy & CoV"},
    {CriterionId::EntropyWithCR, "entropy_cr", "Entropy (CR)"},
    {CriterionId::CovWithCR, "cov_cr", "CoV (CR)"},
    {CriterionId::EntropyCovUnionWithCR, "entropy_cov_cr", "Entropy & CoV (CR)"},
    {CriterionId::PerfCorrelations, "perf_corr", "Perf. Corr."},
    {CriterionId::FeatureSignificance, "feature_sig", "Feat. Sig."},
    {CriterionId::AllDynamicUnion, "all_dynamic", "All"},
    {CriterionId::StaPerfSens, "staperfsens", "SPS"},
}};

} // namespace

std::string_view to_string(CriterionId c) {
    for (const auto& n : criterion_names) {
        if (n.id == c) return n.key;
    }
    return "unknown";
}

std::string_view display_name(CriterionId c) {
    for (const auto& n : criterion_names) {
        if (n.id == c) return n.display;
    }
    return "unknown";
}

CriterionId criterion_from_string(std::string_view s) {
    for (const auto& n : criterion_names) {
        if (n.key == s) return n.id;
    }
    throw ParseError("unknown criterion '" + std::string(s) + "'");
}

std::string dataset_key(const TraceDataset& dataset) {
    return dataset.program() + "@" + dataset.version() + "#" + std::to_string(dataset.run_count()) + "x" +
           std::to_string(dataset.function_count());
}

namespace {

std::vector<double> kept_self_times(const TraceDataset& ds, std::size_t c) {
    std::vector<double> out;
    const auto self = ds.self_times(c);
    for (std::size_t r = 0; r < self.size(); ++r) {
        if (ds.self_time_kept(c, r)) out.push_back(static_cast<double>(self[r]));
    }
    return out;
}

double cov_score(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    try {
        return stats::coefficient_of_variation(values);
    } catch (const DegenerateError&) {
        return 0.0;
    }
}

json threshold_provenance(const threshold::ThresholdResult& t, double span) {
    return {{"method", "loess+derivative+ckmeans"},
            {"span", span},
            {"breakpoint_index", t.breakpoint_index},
            {"degenerate", t.degenerate},
            {"smoothing_passthrough", t.smoothing_passthrough},
            {"ranked_functions", t.sorted_function_order.size()}};
}

PruningResult thresholded(CriterionId id, const TraceDataset& ds, std::map<FunctionId, double> scores,
                          double span, json extra) {
    PruningResult r;
    r.criterion = id;
    r.dataset_key = dataset_key(ds);
    const auto t = threshold::find_threshold(scores, span);
    r.sensitive = t.sensitive;
    r.scores = std::move(scores);
    r.provenance = std::move(extra);
    r.provenance["threshold"] = threshold_provenance(t, span);
    return r;
}

PruningResult with_correlation_removal(CriterionId id, const TraceDataset& ds, const PruningResult& base,
                                       double rho_cutoff) {
    PruningResult r;
    r.criterion = id;
    r.dataset_key = base.dataset_key;
    r.scores = base.scores;
    json cr = json::object();
    r.sensitive = correlation_removal(ds, base.sensitive, rho_cutoff, &cr);
    r.provenance = {{"base", to_string(base.criterion)}, {"base_provenance", base.provenance}, {"correlation_removal", cr}};
    return r;
}

} // namespace

PruningResult prune_entropy(const TraceDataset& dataset, const PruningOptions& opts) {
    // Shared bin width: Scott's rule per function on normalized values, averaged.
    std::vector<std::vector<double>> normalized(dataset.function_count());
    double width_sum = 0.0;
    std::size_t width_count = 0;
    for (std::size_t c = 0; c < dataset.function_count(); ++c) {
        auto values = kept_self_times(dataset, c);
        if (values.size() < 2) {
            normalized[c] = std::move(values);
            continue;
        }
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        const double min = *lo;
        const double range = *hi - *lo;
        if (range > 0.0) {
            for (double& v : values) v = (v - min) / range;
            width_sum += stats::scott_bin_width(values);
            ++width_count;
        }
        normalized[c] = std::move(values);
    }

    std::map<FunctionId, double> scores;
    json extra = {{"score", "shannon_entropy_bits"}};
    if (width_count == 0) {
        for (const auto& fn : dataset.function_index()) scores[fn] = 0.0;
        extra["bin_width"] = nullptr;
    } else {
        const stats::BinningSpec spec(width_sum / static_cast<double>(width_count));
        extra["bin_width"] = spec.bin_width;
        extra["bin_count"] = spec.bin_count();
        for (std::size_t c = 0; c < dataset.function_count(); ++c) {
            const auto& v = normalized[c];
            scores[dataset.function_index()[c]] = v.empty() ? 0.0 : stats::shannon_entropy(v, spec);
        }
    }
    return thresholded(CriterionId::Entropy, dataset, std::move(scores), opts.span, std::move(extra));
}

PruningResult prune_cov(const TraceDataset& dataset, const PruningOptions& opts) {
    std::map<FunctionId, double> scores;
    for (std::size_t c = 0; c < dataset.function_count(); ++c) {
        scores[dataset.function_index()[c]] = cov_score(kept_self_times(dataset, c));
    }
    return thresholded(CriterionId::Cov, dataset, std::move(scores), opts.span, {{"score", "coefficient_of_variation"}});
}

PruningResult union_sets(const PruningResult& a, const PruningResult& b, CriterionId as) {
    if (a.dataset_key != b.dataset_key) {
        throw ValidationError("union_sets: results come from different datasets ('" + a.dataset_key + "' vs '" +
                              b.dataset_key + "')");
    }
    PruningResult r;
    r.criterion = as;
    r.dataset_key = a.dataset_key;
    r.sensitive = a.sensitive;
    r.sensitive.insert(b.sensitive.begin(), b.sensitive.end());
    r.provenance = {{"union_of", {to_string(a.criterion), to_string(b.criterion)}},
                    {"sizes", {a.sensitive.size(), b.sensitive.size()}}};
    return r;
}

std::vector<std::size_t> average_linkage_clusters(const std::vector<std::vector<double>>& distance, double cut) {
    const std::size_t n = distance.size();
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    std::vector<std::vector<double>> d = distance;
    std::vector<bool> alive(n, true);

    constexpr double tolerance = 1e-12;
    while (true) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = n, bj = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (alive[j] && d[i][j] < best) {
                    best = d[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi == n || best > cut + tolerance) break;

        const auto na = static_cast<double>(members[bi].size());
        const auto nb = static_cast<double>(members[bj].size());
        for (std::size_t k = 0; k < n; ++k) {
            if (!alive[k] || k == bi || k == bj) continue;
            const double merged = (na * d[bi][k] + nb * d[bj][k]) / (na + nb);
            d[bi][k] = d[k][bi] = merged;
        }
        members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
        members[bj].clear();
        alive[bj] = false;
    }

    std::vector<std::size_t> labels(n, 0);
    std::vector<std::pair<std::size_t, std::size_t>> firsts;  // (first member, cluster slot)
    for (std::size_t i = 0; i < n; ++i) {
        if (alive[i]) firsts.emplace_back(*std::min_element(members[i].begin(), members[i].end()), i);
    }
    std::sort(firsts.begin(), firsts.end());
    for (std::size_t label = 0; label < firsts.size(); ++label) {
        for (std::size_t m : members[firsts[label].second]) labels[m] = label;
    }
    return labels;
}

FunctionSet correlation_removal(const TraceDataset& dataset, const FunctionSet& candidates, double rho_cutoff,
                                json* provenance) {
    if (!(rho_cutoff > 0.0 && rho_cutoff <= 1.0)) {
        throw PreconditionError("rho_cutoff must lie in (0, 1]");
    }
    std::vector<FunctionId> fns(candidates.begin(), candidates.end());
    std::vector<std::size_t> cols;
    for (const auto& f : fns) cols.push_back(dataset.column(f));

    // Functions whose own series has no rank variance cannot be correlated.
    FunctionSet kept;
    std::vector<std::size_t> clusterable;
    json singletons = json::array();
    for (std::size_t i = 0; i < fns.size(); ++i) {
        const auto v = kept_self_times(dataset, cols[i]);
        const bool varies = v.size() >= 3 && std::any_of(v.begin(), v.end(), [&](double x) { return x != v[0]; });
        if (varies) {
            clusterable.push_back(i);
        } else {
            kept.insert(fns[i]);
            singletons.push_back(fns[i].name);
        }
    }

    const std::size_t m = clusterable.size();
    std::vector<std::vector<double>> dist(m, std::vector<double>(m, 0.0));
    std::vector<double> x, y;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            const std::size_t ca = cols[clusterable[a]];
            const std::size_t cb = cols[clusterable[b]];
            x.clear();
            y.clear();
            const auto sa = dataset.self_times(ca);
            const auto sb = dataset.self_times(cb);
            for (std::size_t r = 0; r < dataset.run_count(); ++r) {
                if (dataset.self_time_kept(ca, r) && dataset.self_time_kept(cb, r)) {
                    x.push_back(static_cast<double>(sa[r]));
                    y.push_back(static_cast<double>(sb[r]));
                }
            }
            double d = 1.0;
            if (x.size() >= 3) {
                try {
                    d = 1.0 - std::fabs(stats::spearman_rho(x, y));
                } catch (const DegenerateError&) {
                    d = 1.0;
                }
            }
            dist[a][b] = dist[b][a] = d;
        }
    }

    const auto labels = average_linkage_clusters(dist, 1.0 - rho_cutoff);
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t a = 0; a < m; ++a) groups[labels[a]].push_back(clusterable[a]);

    json merged = json::array();
    for (const auto& [label, idx] : groups) {
        std::size_t best = idx.front();
        double best_cov = cov_score(kept_self_times(dataset, cols[best]));
        for (std::size_t i : idx) {
            const double cv = cov_score(kept_self_times(dataset, cols[i]));
            // idx is in name order, so strict > keeps the lexicographically first on ties.
            if (cv > best_cov) {
                best = i;
                best_cov = cv;
            }
        }
        kept.insert(fns[best]);
        if (idx.size() > 1) {
            json group = {{"representative", fns[best].name}, {"members", json::array()}};
            for (std::size_t i : idx) group["members"].push_back(fns[i].name);
            merged.push_back(std::move(group));
        }
    }
    if (provenance != nullptr) {
        *provenance = {{"rho_cutoff", rho_cutoff},
                       {"linkage", "average"},
                       {"distance", "1-|spearman|"},
                       {"input_size", candidates.size()},
                       {"merged_groups", std::move(merged)},
                       {"uncorrelatable", std::move(singletons)}};
    }
    return kept;
}

PruningResult prune_perf_correlations(const TraceDataset& dataset, const PruningOptions& opts) {
    PruningResult r;
    r.criterion = CriterionId::PerfCorrelations;
    r.dataset_key = dataset_key(dataset);
    const FunctionSet all(dataset.function_index().begin(), dataset.function_index().end());
    json cr = json::object();
    r.sensitive = correlation_removal(dataset, all, opts.rho_cutoff, &cr);
    r.provenance = {{"correlation_removal", std::move(cr)}};
    return r;
}

PruningResult prune_feature_significance(const TraceDataset& dataset, const PruningOptions& opts) {
    const std::size_t n = dataset.run_count();
    const auto response = dataset.response_seconds();

    // Pivoted elimination in name order: keep a column only if it adds a
    // direction beyond the intercept and the columns already kept.
    std::vector<Eigen::VectorXd> basis;
    basis.push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / std::sqrt(static_cast<double>(n))));
    std::vector<std::size_t> kept_cols;
    json dropped = json::array();
    for (std::size_t c = 0; c < dataset.function_count(); ++c) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(n));
        const auto calls = dataset.calls(c);
        for (std::size_t r = 0; r < n; ++r) x[static_cast<Eigen::Index>(r)] = static_cast<double>(calls[r]);
        const double norm = x.norm();
        Eigen::VectorXd resid = x;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) resid -= q.dot(resid) * q;
        }
        if (norm == 0.0 || resid.norm() <= 1e-9 * norm) {
            dropped.push_back(dataset.function_index()[c].name);
            continue;
        }
        basis.push_back(resid / resid.norm());
        kept_cols.push_back(c);
    }

    const std::size_t p = kept_cols.size();
    if (n < p + 2) {
        throw PreconditionError("feature significance needs runs >= functions + 2 (runs=" + std::to_string(n) +
                                ", independent functions=" + std::to_string(p) + ")");
    }
    Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        design(row, 0) = 1.0;
        for (std::size_t j = 0; j < p; ++j) {
            design(row, static_cast<Eigen::Index>(j + 1)) = static_cast<double>(dataset.calls(kept_cols[j])[r]);
        }
        y[row] = response[r];
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - design * beta;
    const double df = static_cast<double>(n - p - 1);
    const double sigma2 = resid.squaredNorm() / df;
    const Eigen::MatrixXd r_upper =
        qr.matrixQR().topRows(static_cast<Eigen::Index>(p + 1)).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv = r_upper.triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p + 1), static_cast<Eigen::Index>(p + 1)));

    PruningResult out;
    out.criterion = CriterionId::FeatureSignificance;
    out.dataset_key = dataset_key(dataset);
    for (std::size_t j = 0; j < p; ++j) {
        const auto k = static_cast<Eigen::Index>(j + 1);
        const double se = std::sqrt(sigma2 * r_inv.row(k).squaredNorm());
        double pval;
        if (se == 0.0) {
            pval = beta[k] == 0.0 ? 1.0 : 0.0;
        } else {
            const double t = beta[k] / se;
            pval = special::f_sf(t * t, 1.0, df);
        }
        const FunctionId& fn = dataset.function_index()[kept_cols[j]];
        out.scores[fn] = pval;
        if (pval < opts.alpha) out.sensitive.insert(fn);
    }
    out.provenance = {{"score", "p_value"},
                      {"test", "per-coefficient F (1, n-p-1)"},
                      {"alpha", opts.alpha},
                      {"df_residual", df},
                      {"collinear_dropped", std::move(dropped)}};
    return out;
}

PruningResult prune_all_dynamic(const TraceDataset& dataset, const PruningOptions& opts) {
    const auto parts = {prune_entropy(dataset, opts), prune_cov(dataset, opts), prune_perf_correlations(dataset, opts),
                        prune_feature_significance(dataset, opts)};
    PruningResult r;
    r.criterion = CriterionId::AllDynamicUnion;
    r.dataset_key = dataset_key(dataset);
    json sizes = json::object();
    for (const auto& part : parts) {
        r.sensitive.insert(part.sensitive.begin(), part.sensitive.end());
        sizes[std::string(to_string(part.criterion))] = part.sensitive.size();
    }
    r.provenance = {{"union_of", {"entropy", "cov", "perf_corr", "feature_sig"}}, {"sizes", std::move(sizes)}};
    return r;
}

std::map<FunctionId, double> staperfsens_scores(std::span<const StaticFeatures> features, const StaticWeights& weights) {
    if (features.size() < 2) {
        throw DegenerateError("StaPerfSens needs at least two functions");
    }
    constexpr std::size_t k_features = 7;
    std::vector<std::array<double, k_features>> raw;
    for (const auto& f : features) {
        f.validate();
        raw.push_back({static_cast<double>(f.loc), static_cast<double>(f.loops), static_cast<double>(f.nested_loops),
                       static_cast<double>(f.calls), f.is_recursive ? 1.0 : 0.0, static_cast<double>(f.branches),
                       static_cast<double>(f.params)});
    }
    std::map<FunctionId, double> scores;
    for (const auto& f : features) scores[f.function] = 0.0;
    for (std::size_t k = 0; k < k_features; ++k) {
        double lo = raw[0][k], hi = raw[0][k];
        for (const auto& r : raw) {
            lo = std::min(lo, r[k]);
            hi = std::max(hi, r[k]);
        }
        if (hi == lo) continue;
        for (std::size_t i = 0; i < features.size(); ++i) {
            scores[features[i].function] += weights[k] * (raw[i][k] - lo) / (hi - lo);
        }
    }
    return scores;
}

PruningResult prune_staperfsens(const TraceDataset& dataset, std::span<const StaticFeatures> features,
                                const StaticWeights& weights, const PruningOptions& opts) {
    std::vector<StaticFeatures> present;
    json unmatched = json::array();
    for (const auto& f : features) {
        if (dataset.contains(f.function)) {
            present.push_back(f);
        } else {
            unmatched.push_back(f.function.name);
        }
    }
    auto scores = staperfsens_scores(present, weights);
    json extra = {{"score", "staperfsens"},
                  {"weights", weights},
                  {"features_without_trace", std::move(unmatched)}};
    return thresholded(CriterionId::StaPerfSens, dataset, std::move(scores), opts.span, std::move(extra));
}

PruningResult run_criterion(CriterionId criterion, const TraceDataset& dataset, const PruningOptions& opts,
                            std::span<const StaticFeatures> features) {
    switch (criterion) {
    case CriterionId::Entropy: return prune_entropy(dataset, opts);
    case CriterionId::Cov: return prune_cov(dataset, opts);
    case CriterionId::EntropyCovUnion:
        return union_sets(prune_entropy(dataset, opts), prune_cov(dataset, opts), CriterionId::EntropyCovUnion);
    case CriterionId::EntropyWithCR:
        return with_correlation_removal(criterion, dataset, prune_entropy(dataset, opts), opts.rho_cutoff);
    case CriterionId::CovWithCR:
        return with_correlation_removal(criterion, dataset, prune_cov(dataset, opts), opts.rho_cutoff);
    case CriterionId::EntropyCovUnionWithCR:
        return with_correlation_removal(
            criterion, dataset,
            union_sets(prune_entropy(dataset, opts), prune_cov(dataset, opts), CriterionId::EntropyCovUnion),
            opts.rho_cutoff);
    case CriterionId::PerfCorrelations: return prune_perf_correlations(dataset, opts);
    case CriterionId::FeatureSignificance: return prune_feature_significance(dataset, opts);
    case CriterionId::AllDynamicUnion: return prune_all_dynamic(dataset, opts);
    case CriterionId::StaPerfSens:
        if (features.empty()) {
            throw PreconditionError("staperfsens needs static features (--static-features or --source)");
        }
        return prune_staperfsens(dataset, features, uniform_static_weights, opts);
    }
    throw PreconditionError("unknown criterion");
}

json result_to_json(const PruningResult& result) {
    json scores = json::object();
    for (const auto& [fn, s] : result.scores) scores[fn.name] = s;
    json sensitive = json::array();
    for (const auto& fn : result.sensitive) sensitive.push_back(fn.name);
    return {{"criterion", to_string(result.criterion)},
            {"dataset", result.dataset_key},
            {"sensitive", std::move(sensitive)},
            {"scores", std::move(scores)},
            {"provenance", result.provenance}};
}

PruningResult result_from_json(const json& doc) {
    try {
        PruningResult r;
        r.criterion = criterion_from_string(doc.at("criterion").get<std::string>());
        r.dataset_key = doc.value("dataset", std::string{});
        for (const auto& name : doc.at("sensitive")) r.sensitive.insert(FunctionId(name.get<std::string>()));
        if (doc.contains("scores")) {
            for (const auto& [name, s] : doc.at("scores").items()) r.scores[FunctionId(name)] = s.get<double>();
        }
        r.provenance = doc.value("provenance", json::object());
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("pruning result JSON: ") + e.what());
    }
}

} // namespace tracelens::pruning
