#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace volcascade {

/// Logarithmically spaced bins over [lo, hi].
struct LogBins {
    double lo = 1e-3;
    double hi = 1e2;
    int per_decade = 20;

    std::vector<double> edges() const;
};

struct Pdf {
    std::vector<double> edges;    // bins + 1
    std::vector<double> density;  // integrates to 1 over in-range samples
    std::vector<std::size_t> counts;
    std::size_t non_positive = 0;  // underflow bin for log binning
    std::size_t below_range = 0;
    std::size_t above_range = 0;

    std::size_t bins() const { return density.size(); }
    double center(std::size_t i) const;  // geometric bin center
};

inline constexpr std::size_t kMinPdfSamples = 100;

/// Normalized histogram on log bins. Needs at least kMinPdfSamples values
/// (InputError otherwise).
Pdf empirical_pdf(std::span<const double> values, const LogBins& bins);

}  // namespace volcascade
