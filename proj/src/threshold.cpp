#include "tracelens/threshold.hpp"

#include "tracelens/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tracelens::threshold {

LoessResult loess_smooth(std::span<const double> y, double span) {
    if (!(span > 0.0 && span <= 1.0)) {
        throw PreconditionError("loess span must lie in (0, 1]");
    }
    LoessResult out;
    const std::size_t n = y.size();
    if (n < 4) {
        out.values.assign(y.begin(), y.end());
        out.passthrough = true;
        return out;
    }
    const auto q = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(span * static_cast<double>(n))), 1, n);

    out.values.resize(n);
    std::vector<double> dist(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = static_cast<double>(i);
        for (std::size_t j = 0; j < n; ++j) dist[j] = std::fabs(static_cast<double>(j) - xi);
        std::vector<double> sorted = dist;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q - 1), sorted.end());
        const double h = sorted[q - 1];
        if (h == 0.0) {
            out.values[i] = y[i];
            continue;
        }

        double sw = 0.0, swx = 0.0, swy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double r = dist[j] / h;
            const double t = r < 1.0 ? 1.0 - r * r * r : 0.0;
            w[j] = t * t * t;
            sw += w[j];
            swx += w[j] * static_cast<double>(j);
            swy += w[j] * y[j];
        }
        const double xm = swx / sw;
        const double ym = swy / sw;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (w[j] == 0.0) continue;
            const double dx = static_cast<double>(j) - xm;
            sxx += w[j] * dx * dx;
            sxy += w[j] * dx * (y[j] - ym);
        }
        // A single weighted point cannot carry a slope: fall back to the local mean.
        if (sxx <= 1e-12 * sw) {
            out.values[i] = ym;
        } else {
            out.values[i] = ym + (sxy / sxx) * (xi - xm);
        }
    }
    return out;
}

std::vector<double> first_derivative(std::span<const double> y) {
    const std::size_t n = y.size();
    if (n < 2) {
        throw PreconditionError("first_derivative needs at least 2 values");
    }
    std::vector<double> d(n);
    d[0] = y[1] - y[0];
    d[n - 1] = y[n - 1] - y[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / 2.0;
    return d;
}

TwoClusterSplit ckmeans_1d_two(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) {
        throw PreconditionError("ckmeans_1d_two needs at least 2 values");
    }
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
        throw DegenerateError("ckmeans_1d_two: all values equal");
    }

    // Welford running SSE from the left (prefix) and from the right (suffix).
    std::vector<double> left(n), right(n);
    double m = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double delta = values[i] - m;
        m += delta / static_cast<double>(i + 1);
        ss += delta * (values[i] - m);
        left[i] = ss;
    }
    m = 0.0;
    ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = n - 1 - k;
        const double delta = values[i] - m;
        m += delta / static_cast<double>(k + 1);
        ss += delta * (values[i] - m);
        right[i] = ss;
    }

    TwoClusterSplit best{0, left[0] + right[1]};
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double wcss = left[k] + right[k + 1];
        if (wcss < best.wcss) best = {k, wcss};
    }
    best.wcss = std::max(0.0, best.wcss);
    return best;
}

ThresholdResult find_threshold(const std::map<FunctionId, double>& scores, double span) {
    if (scores.size() < 4) {
        throw PreconditionError("find_threshold needs at least 4 functions, got " + std::to_string(scores.size()));
    }
    std::vector<std::pair<FunctionId, double>> order(scores.begin(), scores.end());
    for (const auto& [fn, s] : order) {
        if (!std::isfinite(s)) {
            throw PreconditionError("find_threshold: non-finite score for '" + fn.name + "'");
        }
    }
    // std::map iteration is already name-ordered, so a stable sort breaks ties by name.
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    ThresholdResult out;
    for (const auto& [fn, s] : order) {
        out.sorted_function_order.push_back(fn);
        out.sorted_scores.push_back(s);
    }
    if (out.sorted_scores.front() == out.sorted_scores.back()) {
        out.degenerate = true;
        return out;
    }

    auto smooth = loess_smooth(out.sorted_scores, span);
    out.smoothed = std::move(smooth.values);
    out.smoothing_passthrough = smooth.passthrough;
    out.derivative = first_derivative(out.smoothed);

    std::vector<double> magnitude(out.derivative.size());
    std::transform(out.derivative.begin(), out.derivative.end(), magnitude.begin(),
                   [](double d) { return std::fabs(d); });
    if (std::all_of(magnitude.begin(), magnitude.end(), [&](double v) { return v == magnitude[0]; })) {
        out.degenerate = true;
        return out;
    }

    out.breakpoint_index = ckmeans_1d_two(magnitude).breakpoint;
    for (std::size_t i = 0; i <= out.breakpoint_index; ++i) out.sensitive.insert(out.sorted_function_order[i]);
    return out;
}

} // namespace tracelens::threshold
