#include "volcascade/stats.hpp"

#include <cmath>

namespace volcascade {

std::optional<LinearFit> ols(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return std::nullopt;
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0)) return std::nullopt;

    LinearFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
    if (n > 2) {
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = y[i] - (fit.intercept + fit.slope * x[i]);
            sse += e * e;
        }
        fit.slope_stderr = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
    }
    return fit;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 2 || x.size() != y.size()) return std::nullopt;
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double v : xs) s += v;
    return s / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double v : xs) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

std::optional<double> hill_tail_exponent(std::span<const double> xs, double x_min) {
    double acc = 0.0;
    std::size_t k = 0;
    for (double v : xs) {
        if (v >= x_min) {
            acc += std::log(v / x_min);
            ++k;
        }
    }
    if (k < 2 || !(acc > 0.0)) return std::nullopt;
    return static_cast<double>(k) / acc;
}

std::vector<std::size_t> equal_count_partition(std::size_t n, std::size_t bins) {
    std::vector<std::size_t> starts;
    if (bins == 0 || n == 0) return {0, n};
    if (bins > n) bins = n;
    starts.reserve(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) starts.push_back(b * n / bins);
    return starts;
}

}  // namespace volcascade
