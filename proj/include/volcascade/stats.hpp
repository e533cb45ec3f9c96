#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace volcascade {

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r = 0.0;        // Pearson correlation of (x, y)
    std::size_t n = 0;
};

// Requires at least two points with non-constant x; returns nullopt otherwise.
std::optional<LinearFit> ols(std::span<const double> x, std::span<const double> y);

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> xs);

// Population (divide-by-n) standard deviation.
double stddev(std::span<const double> xs);

/// Hill maximum-likelihood estimate of the tail exponent of P(X > s) ~ s^-eta
/// over samples at or above x_min.
std::optional<double> hill_tail_exponent(std::span<const double> xs, double x_min);

/// Splits `n` sorted items into `bins` groups of (nearly) equal count.
/// Returns the start index of each group plus a trailing `n`.
std::vector<std::size_t> equal_count_partition(std::size_t n, std::size_t bins);

}  // namespace volcascade
