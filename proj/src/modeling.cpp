#include "tracelens/modeling.hpp"

#include "tracelens/error.hpp"
#include "tracelens/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tracelens::modeling {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<ModelFamily, std::string_view>, 5> family_names = {{
    {ModelFamily::Ols, "ols"},
    {ModelFamily::Ridge, "ridge"},
    {ModelFamily::BayesianRidge, "bayesian_ridge"},
    {ModelFamily::KnnRegressor, "knn"},
    {ModelFamily::RegressionTree, "tree"},
}};

constexpr double default_lambda = 1.0;
constexpr double default_k = 5.0;
constexpr double default_depth = 5.0;

Eigen::Index as_index(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(p);
    return p;
}

} // namespace

std::string_view to_string(ModelFamily f) {
    for (const auto& [id, name] : family_names) {
        if (id == f) return name;
    }
    return "unknown";
}

ModelFamily family_from_string(std::string_view s) {
    for (const auto& [id, name] : family_names) {
        if (name == s) return id;
    }
    throw ParseError("unknown model family '" + std::string(s) + "'");
}

double ModelSpec::param(const std::string& key, double fallback) const {
    const auto it = hyperparams.find(key);
    return it == hyperparams.end() ? fallback : it->second;
}

void ModelSpec::validate() const {
    switch (family) {
    case ModelFamily::Ridge:
        if (!(param("lambda", default_lambda) >= 0.0)) throw ValidationError("ridge lambda must be >= 0");
        break;
    case ModelFamily::KnnRegressor:
        if (!(param("k", default_k) >= 1.0)) throw ValidationError("knn k must be >= 1");
        break;
    case ModelFamily::RegressionTree:
        if (!(param("max_depth", default_depth) >= 1.0)) throw ValidationError("tree max_depth must be >= 1");
        break;
    default: break;
    }
}

std::string ModelSpec::label() const {
    std::ostringstream out;
    out << to_string(family);
    for (const auto& [k, v] : hyperparams) out << ' ' << k << '=' << v;
    return out.str();
}

FeatureTable feature_table(const TraceDataset& dataset, std::span<const FunctionId> functions) {
    FeatureTable t;
    t.functions.assign(functions.begin(), functions.end());
    const std::size_t n = dataset.run_count();
    t.x = Eigen::MatrixXd::Zero(as_index(n), as_index(functions.size()));
    for (std::size_t j = 0; j < functions.size(); ++j) {
        if (!dataset.contains(functions[j])) continue;
        const auto calls = dataset.calls(dataset.column(functions[j]));
        for (std::size_t r = 0; r < n; ++r) t.x(as_index(r), as_index(j)) = static_cast<double>(calls[r]);
    }
    const auto response = dataset.response_seconds();
    t.y = Eigen::Map<const Eigen::VectorXd>(response.data(), as_index(response.size()));
    return t;
}

FeatureTable feature_table(const TraceDataset& dataset) { return feature_table(dataset, dataset.function_index()); }

FeatureTable rows(const FeatureTable& data, std::span<const std::size_t> index) {
    FeatureTable t;
    t.functions = data.functions;
    t.x.resize(as_index(index.size()), data.x.cols());
    t.y.resize(as_index(index.size()));
    for (std::size_t i = 0; i < index.size(); ++i) {
        t.x.row(as_index(i)) = data.x.row(as_index(index[i]));
        t.y[as_index(i)] = data.y[as_index(index[i])];
    }
    return t;
}

Metrics metrics_for(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
    if (predicted.size() != actual.size() || actual.size() == 0) {
        throw PreconditionError("metrics need equally sized, non-empty vectors");
    }
    const Eigen::VectorXd resid = actual - predicted;
    const double n = static_cast<double>(actual.size());
    Metrics m;
    m.mae = resid.cwiseAbs().sum() / n;
    m.rmse = std::max(std::sqrt(resid.squaredNorm() / n), m.mae);
    const double ss_tot = (actual.array() - actual.mean()).square().sum();
    if (ss_tot == 0.0) {
        m.degenerate = true;
        m.r2 = 0.0;
    } else {
        m.r2 = 1.0 - resid.squaredNorm() / ss_tot;
    }
    return m;
}

namespace {

void fit_linear(FittedParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;
    if (lambda > 0.0) {
        const Eigen::Index k = x.cols();
        Eigen::MatrixXd aug(xc.rows() + k, k);
        aug << xc, std::sqrt(lambda) * Eigen::MatrixXd::Identity(k, k);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(aug.rows());
        rhs.head(yc.size()) = yc;
        p.coef = aug.colPivHouseholderQr().solve(rhs);
    } else {
        p.coef = xc.colPivHouseholderQr().solve(yc);
    }
    p.intercept = y_mean - x_mean.dot(p.coef);
}

void fit_bayesian_ridge(FittedParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    constexpr double alpha_1 = 1e-6, alpha_2 = 1e-6, lambda_1 = 1e-6, lambda_2 = 1e-6;
    constexpr double tol = 1e-6;
    constexpr int max_iter = 300;

    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;
    const double n = static_cast<double>(x.rows());

    const Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::VectorXd eig = s.array().square();
    const Eigen::VectorXd uty = svd.matrixU().transpose() * yc;

    const double var = (yc.squaredNorm() / n);
    double alpha = 1.0 / (var + 1e-300);
    double lambda = 1.0;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(x.cols());
    int it = 0;
    for (; it < max_iter; ++it) {
        const Eigen::VectorXd shrink = s.array() / (eig.array() + lambda / alpha);
        const Eigen::VectorXd next = svd.matrixV() * (shrink.array() * uty.array()).matrix();
        const double rss = (yc - xc * next).squaredNorm();
        const double gamma = (alpha * eig.array() / (lambda + alpha * eig.array())).sum();
        lambda = (gamma + 2.0 * lambda_1) / (next.squaredNorm() + 2.0 * lambda_2);
        alpha = (n - gamma + 2.0 * alpha_1) / (rss + 2.0 * alpha_2);
        const double change = (next - coef).norm();
        const double scale = std::max(next.norm(), 1e-300);
        coef = next;
        if (it > 0 && change <= tol * scale) {
            ++it;
            break;
        }
    }
    const Eigen::VectorXd shrink = s.array() / (eig.array() + lambda / alpha);
    p.coef = svd.matrixV() * (shrink.array() * uty.array()).matrix();
    p.alpha = alpha;
    p.lambda = lambda;
    p.iterations = it;
    p.intercept = y_mean - x_mean.dot(p.coef);
}

Eigen::MatrixXd knn_scale(const FittedParams& p, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out = x.rowwise() - p.x_min.transpose();
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        if (p.x_range[j] > 0.0) {
            out.col(j) /= p.x_range[j];
        } else {
            out.col(j).setZero();
        }
    }
    return out;
}

void fit_knn(FittedParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    p.x_min = x.colwise().minCoeff().transpose();
    p.x_range = x.colwise().maxCoeff().transpose() - p.x_min;
    p.train_x = knn_scale(p, x);
    p.train_y = y;
}

Eigen::VectorXd predict_knn(const FittedParams& p, std::size_t k, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd q = knn_scale(p, x);
    const auto n = static_cast<std::size_t>(p.train_x.rows());
    k = std::min(k, n);
    Eigen::VectorXd out(q.rows());
    std::vector<std::pair<double, std::size_t>> d(n);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (std::size_t r = 0; r < n; ++r) {
            d[r] = {(p.train_x.row(as_index(r)) - q.row(i)).squaredNorm(), r};
        }
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += p.train_y[as_index(d[j].second)];
        out[i] = sum / static_cast<double>(k);
    }
    return out;
}

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    int max_depth;
    std::vector<TreeNode> nodes;

    int build(std::vector<std::size_t> idx, int depth) {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({});
        double sum = 0.0;
        for (std::size_t i : idx) sum += y[as_index(i)];
        const double count = static_cast<double>(idx.size());
        nodes[static_cast<std::size_t>(id)].value = sum / count;
        if (depth >= max_depth || idx.size() < 2) return id;

        double total_sq = 0.0;
        for (std::size_t i : idx) total_sq += y[as_index(i)] * y[as_index(i)];
        const double parent_sse = total_sq - sum * sum / count;
        if (parent_sse <= 0.0) return id;

        double best_sse = parent_sse;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> order = idx;
        for (Eigen::Index f = 0; f < x.cols(); ++f) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x(as_index(a), f) < x(as_index(b), f); });
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t j = 0; j + 1 < order.size(); ++j) {
                const double v = y[as_index(order[j])];
                left_sum += v;
                left_sq += v * v;
                const double here = x(as_index(order[j]), f);
                const double next = x(as_index(order[j + 1]), f);
                if (here == next) continue;
                const double nl = static_cast<double>(j + 1);
                const double nr = count - nl;
                const double right_sum = sum - left_sum;
                const double right_sq = total_sq - left_sq;
                const double sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
                if (sse < best_sse - 1e-12 * parent_sse) {
                    best_sse = sse;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (here + next);
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx) {
            (x(as_index(i), best_feature) <= best_threshold ? left : right).push_back(i);
        }
        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        auto& node = nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return id;
    }
};

double predict_tree(const std::vector<TreeNode>& nodes, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    std::size_t at = 0;
    while (nodes[at].feature >= 0) {
        at = static_cast<std::size_t>(row[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left
                                                                                      : nodes[at].right);
    }
    return nodes[at].value;
}

} // namespace

Eigen::VectorXd PerfModel::predict(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != feature_functions.size()) {
        throw PreconditionError("feature matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                                std::to_string(feature_functions.size()));
    }
    if (params.constant) return Eigen::VectorXd::Constant(x.rows(), params.intercept);
    switch (spec.family) {
    case ModelFamily::Ols:
    case ModelFamily::Ridge:
    case ModelFamily::BayesianRidge:
        return (x * params.coef).array() + params.intercept;
    case ModelFamily::KnnRegressor:
        return predict_knn(params, static_cast<std::size_t>(spec.param("k", default_k)), x);
    case ModelFamily::RegressionTree: {
        Eigen::VectorXd out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict_tree(params.nodes, x.row(i));
        return out;
    }
    }
    throw PreconditionError("unknown model family");
}

Eigen::VectorXd PerfModel::predict(const TraceDataset& dataset) const {
    return predict(feature_table(dataset, feature_functions).x);
}

PerfModel fit(const ModelSpec& spec, const FeatureTable& data) {
    spec.validate();
    if (data.x.rows() < 2) throw PreconditionError("fit needs at least 2 rows");
    if (data.x.rows() != data.y.size()) throw PreconditionError("feature rows and response length differ");
    if (!data.y.allFinite()) throw PreconditionError("response contains non-finite values");

    PerfModel m;
    m.spec = spec;
    m.feature_functions = data.functions;
    const double y_mean = data.y.mean();
    if ((data.y.array() == data.y[0]).all() || data.x.cols() == 0) {
        m.params.constant = true;
        m.params.intercept = y_mean;
    } else {
        switch (spec.family) {
        case ModelFamily::Ols: fit_linear(m.params, data.x, data.y, 0.0); break;
        case ModelFamily::Ridge: fit_linear(m.params, data.x, data.y, spec.param("lambda", default_lambda)); break;
        case ModelFamily::BayesianRidge: fit_bayesian_ridge(m.params, data.x, data.y); break;
        case ModelFamily::KnnRegressor: fit_knn(m.params, data.x, data.y); break;
        case ModelFamily::RegressionTree: {
            TreeBuilder b{data.x, data.y, static_cast<int>(spec.param("max_depth", default_depth)), {}};
            std::vector<std::size_t> idx(static_cast<std::size_t>(data.x.rows()));
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            b.build(std::move(idx), 0);
            m.params.nodes = std::move(b.nodes);
            break;
        }
        }
    }
    m.train_metrics = metrics_for(m.predict(data.x), data.y);
    return m;
}

Metrics evaluate(const PerfModel& model, const FeatureTable& data) {
    if (data.functions != model.feature_functions) {
        std::vector<FunctionId> want = model.feature_functions;
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(data.x.rows(), as_index(want.size()));
        for (std::size_t j = 0; j < want.size(); ++j) {
            const auto it = std::find(data.functions.begin(), data.functions.end(), want[j]);
            if (it != data.functions.end()) x.col(as_index(j)) = data.x.col(it - data.functions.begin());
        }
        return metrics_for(model.predict(x), data.y);
    }
    return metrics_for(model.predict(data.x), data.y);
}

Metrics evaluate(const PerfModel& model, const TraceDataset& dataset) {
    return evaluate(model, feature_table(dataset, model.feature_functions));
}

std::pair<TraceDataset, TraceDataset> split_train_test(const TraceDataset& dataset, double train_fraction,
                                                       std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw PreconditionError("train fraction must lie in (0, 1)");
    }
    const std::size_t n = dataset.run_count();
    if (n < 10) throw PreconditionError("split needs at least 10 runs, got " + std::to_string(n));
    const auto p = permutation(n, seed);
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
    if (n_train == 0 || n_train == n) throw PreconditionError("train fraction leaves an empty partition");
    std::vector<std::size_t> train(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test(p.begin() + static_cast<std::ptrdiff_t>(n_train), p.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {dataset.subset_runs(train), dataset.subset_runs(test)};
}

Metrics cross_validate(const ModelSpec& spec, const FeatureTable& data, std::size_t k_folds, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(data.x.rows());
    if (k_folds < 2) throw PreconditionError("cross-validation needs k >= 2");
    if (n < k_folds) {
        throw PreconditionError("cross-validation needs rows >= folds (rows=" + std::to_string(n) +
                                ", folds=" + std::to_string(k_folds) + ")");
    }
    const auto p = permutation(n, seed);
    std::vector<std::size_t> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[p[i]] = i % k_folds;

    Metrics mean;
    for (std::size_t f = 0; f < k_folds; ++f) {
        std::vector<std::size_t> train, held;
        for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? held : train).push_back(i);
        const PerfModel m = fit(spec, rows(data, train));
        const FeatureTable h = rows(data, held);
        const Metrics got = metrics_for(m.predict(h.x), h.y);
        mean.r2 += got.r2;
        mean.mae += got.mae;
        mean.rmse += got.rmse;
        mean.degenerate = mean.degenerate || got.degenerate;
    }
    const auto k = static_cast<double>(k_folds);
    mean.r2 /= k;
    mean.mae /= k;
    mean.rmse /= k;
    return mean;
}

std::vector<ModelSpec> expand_grid(std::span<const ModelSpec> specs) {
    std::vector<ModelSpec> out;
    for (const auto& s : specs) {
        std::string key;
        std::vector<double> grid;
        switch (s.family) {
        case ModelFamily::Ridge: key = "lambda", grid = {0.01, 0.1, 1.0, 10.0}; break;
        case ModelFamily::KnnRegressor: key = "k", grid = {3, 5, 9}; break;
        case ModelFamily::RegressionTree: key = "max_depth", grid = {3, 5, 8}; break;
        default: break;
        }
        if (key.empty() || s.hyperparams.contains(key)) {
            out.push_back(s);
            continue;
        }
        for (double v : grid) {
            ModelSpec g = s;
            g.hyperparams[key] = v;
            out.push_back(std::move(g));
        }
    }
    return out;
}

std::vector<ModelSpec> default_model_zoo(std::uint64_t seed) {
    std::vector<ModelSpec> zoo;
    for (const auto& [family, name] : family_names) zoo.push_back({family, {}, seed});
    return zoo;
}

Selection select_best(std::span<const ModelSpec> specs, const FeatureTable& data, std::size_t k_folds,
                      std::uint64_t seed) {
    if (specs.empty()) throw PreconditionError("select_best needs at least one spec");
    const auto candidates = expand_grid(specs);
    std::vector<RankedSpec> ranking;
    for (const auto& s : candidates) ranking.push_back({s, cross_validate(s, data, k_folds, seed)});
    std::stable_sort(ranking.begin(), ranking.end(), [](const RankedSpec& a, const RankedSpec& b) {
        if (a.cv.r2 != b.cv.r2) return a.cv.r2 > b.cv.r2;
        return a.cv.rmse < b.cv.rmse;
    });
    Selection sel;
    sel.model = fit(ranking.front().spec, data);
    sel.cv = ranking.front().cv;
    sel.ranking = std::move(ranking);
    return sel;
}

BuildResult build_model(const TraceDataset& dataset, std::span<const FunctionId> functions,
                        std::span<const ModelSpec> specs, std::uint64_t seed, const BuildOptions& opts) {
    const auto [train, test] = split_train_test(dataset, opts.train_fraction, seed);
    const FeatureTable train_table = feature_table(train, functions);
    Selection sel = select_best(specs, train_table, opts.k_folds, seed);
    BuildResult r;
    r.model = std::move(sel.model);
    r.model.test_metrics = evaluate(r.model, test);
    r.cv = sel.cv;
    r.ranking = std::move(sel.ranking);
    r.train_runs = train.run_count();
    r.test_runs = test.run_count();
    return r;
}

json metrics_to_json(const Metrics& m) {
    return {{"r2", m.r2}, {"mae", m.mae}, {"rmse", m.rmse}, {"degenerate", m.degenerate}};
}

Metrics metrics_from_json(const json& doc) {
    return {doc.at("r2").get<double>(), doc.at("mae").get<double>(), doc.at("rmse").get<double>(),
            doc.value("degenerate", false)};
}

json spec_to_json(const ModelSpec& spec) {
    return {{"family", to_string(spec.family)}, {"hyperparams", spec.hyperparams}, {"seed", spec.seed}};
}

ModelSpec spec_from_json(const json& doc) {
    ModelSpec s;
    s.family = family_from_string(doc.at("family").get<std::string>());
    s.hyperparams = doc.value("hyperparams", std::map<std::string, double>{});
    s.seed = doc.value("seed", std::uint64_t{0});
    s.validate();
    return s;
}

namespace {

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& doc) {
    const auto v = doc.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), as_index(v.size()));
}

} // namespace

json model_to_json(const PerfModel& model) {
    json features = json::array();
    for (const auto& f : model.feature_functions) features.push_back(f.name);
    const auto& p = model.params;
    json params = {{"constant", p.constant}, {"intercept", p.intercept}};
    if (!p.constant) {
        switch (model.spec.family) {
        case ModelFamily::Ols:
        case ModelFamily::Ridge: params["coef"] = vec_to_json(p.coef); break;
        case ModelFamily::BayesianRidge:
            params["coef"] = vec_to_json(p.coef);
            params["alpha"] = p.alpha;
            params["lambda"] = p.lambda;
            params["iterations"] = p.iterations;
            break;
        case ModelFamily::KnnRegressor: {
            params["x_min"] = vec_to_json(p.x_min);
            params["x_range"] = vec_to_json(p.x_range);
            json rows_json = json::array();
            for (Eigen::Index i = 0; i < p.train_x.rows(); ++i) rows_json.push_back(vec_to_json(p.train_x.row(i)));
            params["train_x"] = std::move(rows_json);
            params["train_y"] = vec_to_json(p.train_y);
            break;
        }
        case ModelFamily::RegressionTree: {
            json nodes = json::array();
            for (const auto& n : p.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            params["nodes"] = std::move(nodes);
            break;
        }
        }
    }
    return {{"schema", model_schema},
            {"spec", spec_to_json(model.spec)},
            {"features", std::move(features)},
            {"params", std::move(params)},
            {"train_metrics", metrics_to_json(model.train_metrics)},
            {"test_metrics", metrics_to_json(model.test_metrics)}};
}

PerfModel model_from_json(const json& doc) {
    try {
        if (doc.at("schema").get<std::string>() != model_schema) {
            throw ParseError("unsupported model schema '" + doc.at("schema").get<std::string>() + "'");
        }
        PerfModel m;
        m.spec = spec_from_json(doc.at("spec"));
        for (const auto& f : doc.at("features")) m.feature_functions.emplace_back(f.get<std::string>());
        const auto& p = doc.at("params");
        m.params.constant = p.at("constant").get<bool>();
        m.params.intercept = p.at("intercept").get<double>();
        if (p.contains("coef")) m.params.coef = vec_from_json(p.at("coef"));
        m.params.alpha = p.value("alpha", 0.0);
        m.params.lambda = p.value("lambda", 0.0);
        m.params.iterations = p.value("iterations", 0);
        if (p.contains("x_min")) {
            m.params.x_min = vec_from_json(p.at("x_min"));
            m.params.x_range = vec_from_json(p.at("x_range"));
            m.params.train_y = vec_from_json(p.at("train_y"));
            const auto& rx = p.at("train_x");
            m.params.train_x.resize(as_index(rx.size()), m.params.x_min.size());
            for (std::size_t i = 0; i < rx.size(); ++i) m.params.train_x.row(as_index(i)) = vec_from_json(rx[i]);
        }
        if (p.contains("nodes")) {
            for (const auto& n : p.at("nodes")) {
                m.params.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                          n.at(3).get<int>(), n.at(4).get<double>()});
            }
        }
        m.train_metrics = metrics_from_json(doc.at("train_metrics"));
        m.test_metrics = metrics_from_json(doc.at("test_metrics"));
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
}

} // namespace tracelens::modeling
